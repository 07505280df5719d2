#pragma once

#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "tfpick/annulus.hpp"
#include "tfpick/common.hpp"

namespace tfpick::testfns {

// Evaluation points are complex tuples; scalar domains use dimension 1.
using Point = CVector;

Point scalar_point(Complex z);

struct DiskDomain {};
struct PolydiskDomain {
    Index dim = 1;
};
struct AnnulusDomain {
    double q;
    Complex b;
};
struct FinitePointsDomain {
    std::vector<Point> points;
};
using Domain = std::variant<DiskDomain, PolydiskDomain, AnnulusDomain, FinitePointsDomain>;

bool domain_contains(const Domain& d, const Point& x);
std::string domain_describe(const Domain& d);

// Ordered finite set of distinct evaluation points.  Distinctness uses exact
// comparison after canonicalization (signed zeros normalized).
class NodeSet {
public:
    explicit NodeSet(std::vector<Point> pts);

    Index size() const { return static_cast<Index>(points_.size()); }
    const Point& point(Index i) const { return points_[static_cast<size_t>(i)]; }
    const std::vector<Point>& points() const { return points_; }
    bool same_as(const NodeSet& other) const;

    // Convenience for scalar domains.
    std::vector<Complex> scalars() const;

private:
    std::vector<Point> points_;
};

NodeSet scalar_nodes(const std::vector<Complex>& zs);

struct Member {
    std::string label;
    std::function<Complex(const Point&)> eval;
    bool is_limit = false;  // explicit compactification element
};

// A discretized collection of test functions.  Construction checks that
// members are pairwise distinct on a probe node set; the sup-norm axiom is
// enforced by eval_matrix (the Example-2 family deliberately violates it).
class TestFamily {
public:
    TestFamily(std::string name, Domain domain, std::vector<Member> members);

    Index size() const { return static_cast<Index>(members_.size()); }
    const std::string& name() const { return name_; }
    const Domain& domain() const { return domain_; }
    const std::string& label(Index j) const { return members_[static_cast<size_t>(j)].label; }
    bool member_is_limit(Index j) const { return members_[static_cast<size_t>(j)].is_limit; }
    Complex evaluate(Index j, const Point& x) const;

    // New family with an extra member appended (used for explicit
    // compactification elements).
    TestFamily with_member(Member extra) const;
    // New family keeping only the selected member indices.
    TestFamily subfamily(const std::vector<Index>& keep) const;

private:
    std::string name_;
    Domain domain_;
    std::vector<Member> members_;
};

struct EvalMatrix {
    CMatrix values;  // rows = members, cols = nodes
    double margin;   // 1 - max modulus
};

// entry(j,x) = psi_j(x); errors when any node leaves the domain or any
// |psi_j(x)| >= 1, naming the member and node.
EvalMatrix eval_matrix(const TestFamily& fam, const NodeSet& f);

// Raw values without the sup-norm check; the counterexample demos need the
// exact boundary values.
CMatrix eval_matrix_unchecked(const TestFamily& fam, const NodeSet& f);

struct GenerationReport {
    bool generates = false;       // unital rank == |F|
    Index unital_rank = 0;
    Index nonunital_rank = 0;
    Index monomials_considered = 0;
    double indicator_residual = 0.0;  // residual of solving for indicators
};

// Rank of the restriction to F of the unital algebra generated by the
// family, using monomials psi_{j1}...psi_{jk} with k <= degree_cap.
GenerationReport check_generates(const TestFamily& fam, const NodeSet& f,
                                 Index degree_cap, double tol = 1e-8);
// degree_cap defaults to |F|.
GenerationReport check_generates(const TestFamily& fam, const NodeSet& f);

struct FamilyParams {
    Index dim = 2;        // polydisk dimension
    Index n_max = 10;     // example1 member count
    double q = 0.3;       // annulus inner radius
    Complex b = Complex(0.5, 0.0);
    Index grid = 64;      // annulus t-grid size
    Index cutoff = 8;     // infinite-polydisk coordinate cutoff
    int truncation = -1;  // annulus product truncation (-1 = auto)
};

// Built-in families: "disk", "polydisk", "example1", "example1-compactified",
// "example2", "annulus-theta", "infinite-polydisk".
TestFamily builtin_family(const std::string& name, const FamilyParams& p = {});

// Family given by a table of values psi_j(x_i) on a finite point list.
TestFamily tabulated_family(std::vector<std::string> labels,
                            std::vector<Point> points, const CMatrix& values);

}  // namespace tfpick::testfns
