#include "tfpick/testfns.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace tfpick::testfns {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double canonical(double v) { return v == 0.0 ? 0.0 : v; }

Point canonical_point(const Point& p) {
    Point out(p.size());
    for (Index i = 0; i < p.size(); ++i)
        out(i) = Complex(canonical(p(i).real()), canonical(p(i).imag()));
    return out;
}

bool same_point(const Point& a, const Point& b) {
    if (a.size() != b.size()) return false;
    for (Index i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return false;
    return true;
}

std::string point_str(const Point& p) {
    std::ostringstream os;
    os << "(";
    for (Index i = 0; i < p.size(); ++i) {
        if (i) os << ", ";
        os << p(i).real() << (p(i).imag() < 0 ? "-" : "+") << std::abs(p(i).imag()) << "i";
    }
    os << ")";
    return os.str();
}
}  // namespace

Point scalar_point(Complex z) {
    Point p(1);
    p(0) = z;
    return p;
}

bool domain_contains(const Domain& d, const Point& x) {
    return std::visit(
        [&](const auto& dom) -> bool {
            using T = std::decay_t<decltype(dom)>;
            if constexpr (std::is_same_v<T, DiskDomain>) {
                return x.size() == 1 && std::abs(x(0)) < 1.0;
            } else if constexpr (std::is_same_v<T, PolydiskDomain>) {
                if (x.size() != dom.dim) return false;
                for (Index i = 0; i < x.size(); ++i)
                    if (std::abs(x(i)) >= 1.0) return false;
                return true;
            } else if constexpr (std::is_same_v<T, AnnulusDomain>) {
                if (x.size() != 1) return false;
                double r = std::abs(x(0));
                return r > dom.q && r < 1.0;
            } else {
                Point cx = canonical_point(x);
                for (const Point& p : dom.points)
                    if (same_point(p, cx)) return true;
                return false;
            }
        },
        d);
}

std::string domain_describe(const Domain& d) {
    return std::visit(
        [](const auto& dom) -> std::string {
            using T = std::decay_t<decltype(dom)>;
            if constexpr (std::is_same_v<T, DiskDomain>) {
                return "disk";
            } else if constexpr (std::is_same_v<T, PolydiskDomain>) {
                return "polydisk(d=" + std::to_string(dom.dim) + ")";
            } else if constexpr (std::is_same_v<T, AnnulusDomain>) {
                return "annulus(q=" + std::to_string(dom.q) + ")";
            } else {
                return "finite(" + std::to_string(dom.points.size()) + " points)";
            }
        },
        d);
}

NodeSet::NodeSet(std::vector<Point> pts) {
    if (pts.empty()) throw InputError("NodeSet: empty node list");
    points_.reserve(pts.size());
    for (const Point& p : pts) points_.push_back(canonical_point(p));
    for (size_t i = 0; i < points_.size(); ++i)
        for (size_t j = i + 1; j < points_.size(); ++j)
            if (same_point(points_[i], points_[j]))
                throw InputError("NodeSet: duplicate node " + point_str(points_[i]));
}

bool NodeSet::same_as(const NodeSet& other) const {
    if (size() != other.size()) return false;
    for (Index i = 0; i < size(); ++i)
        if (!same_point(point(i), other.point(i))) return false;
    return true;
}

std::vector<Complex> NodeSet::scalars() const {
    std::vector<Complex> out;
    out.reserve(points_.size());
    for (const Point& p : points_) {
        if (p.size() != 1)
            throw InputError("NodeSet: scalars() called on a non-scalar node set");
        out.push_back(p(0));
    }
    return out;
}

NodeSet scalar_nodes(const std::vector<Complex>& zs) {
    std::vector<Point> pts;
    pts.reserve(zs.size());
    for (Complex z : zs) pts.push_back(scalar_point(z));
    return NodeSet(std::move(pts));
}

namespace {

// Deterministic probe points, strictly inside the domain, used to check that
// members are pairwise distinct.
std::vector<Point> probe_points(const Domain& d) {
    static const std::vector<Complex> base = {
        {0.17, 0.23},  {-0.41, 0.12}, {0.55, -0.31},
        {-0.28, -0.47}, {0.66, 0.05},  {0.03, -0.11}};
    return std::visit(
        [&](const auto& dom) -> std::vector<Point> {
            using T = std::decay_t<decltype(dom)>;
            std::vector<Point> out;
            if constexpr (std::is_same_v<T, DiskDomain>) {
                for (Complex z : base) out.push_back(scalar_point(z));
            } else if constexpr (std::is_same_v<T, PolydiskDomain>) {
                // Low-discrepancy coordinates so that no two coordinate
                // functions agree on the whole probe set.
                for (size_t k = 0; k < base.size(); ++k) {
                    Point p(dom.dim);
                    for (Index j = 0; j < dom.dim; ++j) {
                        double u = std::fmod(
                            0.6180339887498949 * (j + 1.0) * (k + 1.0) + 0.113 * (j + 1.0),
                            1.0);
                        double v = std::fmod(
                            0.7548776662466927 * (j + 2.0) * (k + 1.0) + 0.271 * (k + 1.0),
                            1.0);
                        p(j) = std::polar(0.15 + 0.6 * u, kTwoPi * v);
                    }
                    out.push_back(p);
                }
            } else if constexpr (std::is_same_v<T, AnnulusDomain>) {
                for (size_t k = 0; k < base.size(); ++k) {
                    double r = dom.q + (1.0 - dom.q) * (k + 1.0) / (base.size() + 1.0);
                    double ang = kTwoPi * (k + 0.3) / base.size();
                    out.push_back(scalar_point(r * Complex(std::cos(ang), std::sin(ang))));
                }
            } else {
                out = dom.points;
            }
            return out;
        },
        d);
}

}  // namespace

TestFamily::TestFamily(std::string name, Domain domain, std::vector<Member> members)
    : name_(std::move(name)), domain_(std::move(domain)), members_(std::move(members)) {
    if (members_.empty())
        throw InputError("TestFamily: a family needs at least one member");
    std::vector<Point> probes = probe_points(domain_);
    for (size_t i = 0; i < members_.size(); ++i)
        for (size_t j = i + 1; j < members_.size(); ++j) {
            double sep = 0.0;
            int evaluated = 0;
            for (const Point& x : probes) {
                // Tabulated members only know their own points; probes they
                // cannot evaluate are skipped.
                try {
                    sep = std::max(sep,
                                   std::abs(members_[i].eval(x) - members_[j].eval(x)));
                    ++evaluated;
                } catch (const std::exception&) {
                }
            }
            if (evaluated > 0 && sep < 1e-12)
                throw InputError("TestFamily: members '" + members_[i].label + "' and '" +
                                 members_[j].label + "' coincide on the probe set");
        }
}

Complex TestFamily::evaluate(Index j, const Point& x) const {
    if (j < 0 || j >= size()) throw InputError("TestFamily: member index out of range");
    return members_[static_cast<size_t>(j)].eval(x);
}

TestFamily TestFamily::with_member(Member extra) const {
    std::vector<Member> ms = members_;
    ms.push_back(std::move(extra));
    return TestFamily(name_, domain_, std::move(ms));
}

TestFamily TestFamily::subfamily(const std::vector<Index>& keep) const {
    std::vector<Member> ms;
    for (Index j : keep) {
        if (j < 0 || j >= size()) throw InputError("subfamily: index out of range");
        ms.push_back(members_[static_cast<size_t>(j)]);
    }
    return TestFamily(name_, domain_, std::move(ms));
}

CMatrix eval_matrix_unchecked(const TestFamily& fam, const NodeSet& f) {
    CMatrix values(fam.size(), f.size());
    for (Index i = 0; i < f.size(); ++i) {
        if (!domain_contains(fam.domain(), f.point(i)))
            throw InputError("eval_matrix: node " + std::to_string(i) +
                             " lies outside " + domain_describe(fam.domain()));
        for (Index j = 0; j < fam.size(); ++j)
            values(j, i) = fam.evaluate(j, f.point(i));
    }
    if (!is_finite(values))
        throw InputError("eval_matrix: non-finite member value");
    return values;
}

EvalMatrix eval_matrix(const TestFamily& fam, const NodeSet& f) {
    CMatrix values = eval_matrix_unchecked(fam, f);
    double max_mod = 0.0;
    for (Index j = 0; j < values.rows(); ++j)
        for (Index i = 0; i < values.cols(); ++i) {
            double m = std::abs(values(j, i));
            if (m >= 1.0)
                throw InputError("eval_matrix: axiom (i) violated by member '" +
                                 fam.label(j) + "' at node " + std::to_string(i) +
                                 " (|psi| = " + std::to_string(m) + ")");
            max_mod = std::max(max_mod, m);
        }
    return {values, 1.0 - max_mod};
}

namespace {

// Dimension of span{rows} grown incrementally by Gram-Schmidt.
struct SpanTracker {
    std::vector<CVector> basis;
    double tol;

    explicit SpanTracker(double t) : tol(t) {}

    // Returns true when v enlarged the span; the residual is appended.
    bool add(CVector v) {
        for (const CVector& b : basis) v -= b.dot(v) * b;
        double norm = v.norm();
        if (norm <= tol) return false;
        // A second orthogonalization pass keeps the basis clean.
        for (const CVector& b : basis) v -= b.dot(v) * b;
        norm = v.norm();
        if (norm <= tol) return false;
        basis.push_back(v / norm);
        return true;
    }

    Index rank() const { return static_cast<Index>(basis.size()); }
};

}  // namespace

GenerationReport check_generates(const TestFamily& fam, const NodeSet& f,
                                 Index degree_cap, double tol) {
    if (degree_cap < 1) throw InputError("check_generates: degree_cap must be >= 1");
    const Index n = f.size();
    CMatrix values = eval_matrix_unchecked(fam, f);  // m x n

    GenerationReport rep;
    SpanTracker unital(tol);
    SpanTracker nonunital(tol);

    // Degree-0 monomial (the constant 1) for the unital algebra.
    CVector ones = CVector::Constant(n, Complex(1.0, 0.0));
    unital.add(ones);
    rep.monomials_considered = 1;

    // Frontier of value rows of monomials of the current degree.  The span of
    // degree <= d+1 monomials equals span{psi_j . v : v in degree <= d span},
    // so products against a basis of the frontier suffice.
    std::vector<CVector> frontier;
    for (Index j = 0; j < fam.size(); ++j) {
        CVector row = values.row(j).transpose();
        ++rep.monomials_considered;
        bool grew_u = unital.add(row);
        bool grew_n = nonunital.add(row);
        if (grew_u || grew_n) frontier.push_back(row);
    }
    for (Index deg = 2; deg <= degree_cap && !frontier.empty(); ++deg) {
        std::vector<CVector> next;
        for (const CVector& v : frontier) {
            if (unital.rank() == n && nonunital.rank() == n) break;
            for (Index j = 0; j < fam.size(); ++j) {
                CVector prod = values.row(j).transpose().cwiseProduct(v);
                ++rep.monomials_considered;
                bool grew_u = unital.add(prod);
                bool grew_n = nonunital.add(prod);
                if (grew_u || grew_n) next.push_back(prod);
            }
        }
        frontier = std::move(next);
    }

    rep.unital_rank = unital.rank();
    rep.nonunital_rank = nonunital.rank();
    rep.generates = (rep.unital_rank == n);

    // When the algebra generates, solving for the indicator functions should
    // succeed: project each indicator onto the accumulated span.
    double resid = 0.0;
    for (Index i = 0; i < n; ++i) {
        CVector e = CVector::Zero(n);
        e(i) = 1.0;
        CVector r = e;
        for (const CVector& b : unital.basis) r -= b.dot(r) * b;
        resid = std::max(resid, r.norm());
    }
    rep.indicator_residual = resid;
    return rep;
}

GenerationReport check_generates(const TestFamily& fam, const NodeSet& f) {
    return check_generates(fam, f, f.size());
}

namespace {

Member coordinate_member(Index j, Index dim) {
    return Member{"z" + std::to_string(j + 1),
                  [j, dim](const Point& x) -> Complex {
                      if (x.size() != dim)
                          throw InputError("coordinate member: point dimension mismatch");
                      return x(j);
                  }};
}

Member scaled_identity_member(const std::string& label, double scale) {
    return Member{label, [scale](const Point& x) -> Complex {
                      if (x.size() != 1)
                          throw InputError("disk member: point dimension mismatch");
                      return scale * x(0);
                  }};
}

TestFamily make_example1(Index n_max, bool compactified) {
    if (n_max < 1) throw InputError("example1: n_max must be >= 1");
    std::vector<Member> members;
    for (Index n = 1; n <= n_max; ++n) {
        double scale = std::sqrt(1.0 - 1.0 / static_cast<double>(n));
        members.push_back(scaled_identity_member("psi[" + std::to_string(n) + "]", scale));
    }
    if (compactified) {
        Member lim = scaled_identity_member("psi[inf]", 1.0);
        lim.is_limit = true;
        members.push_back(lim);
    }
    return TestFamily(compactified ? "example1-compactified" : "example1",
                      DiskDomain{}, std::move(members));
}

TestFamily make_annulus_theta(const FamilyParams& p) {
    annulus::AnnulusParams ap{p.q, p.b, p.truncation};
    ap.validate();
    if (p.grid < 1) throw InputError("annulus-theta: grid must be >= 1");
    std::vector<Member> members;
    for (Index k = 0; k < p.grid; ++k) {
        // t_k = exp(2 pi i k / m); the double quotient k/m is what makes
        // nested grids reuse bit-identical member values.
        double frac = static_cast<double>(k) / static_cast<double>(p.grid);
        Complex t(std::cos(kTwoPi * frac), std::sin(kTwoPi * frac));
        auto fn = std::make_shared<annulus::InnerFunction>(ap, t);
        Index num = k, den = p.grid;
        Index g = std::gcd(num, den);
        if (g > 0) { num /= g; den /= g; }
        members.push_back(Member{
            "theta@" + std::to_string(num) + "/" + std::to_string(den),
            [fn](const Point& x) -> Complex {
                if (x.size() != 1)
                    throw InputError("annulus member: point dimension mismatch");
                return (*fn)(x(0));
            }});
    }
    return TestFamily("annulus-theta", AnnulusDomain{p.q, p.b}, std::move(members));
}

TestFamily make_example2() {
    std::vector<Point> pts = {scalar_point(Complex(0.0, 0.0)),
                              scalar_point(Complex(1.0, 0.0))};
    CMatrix values(1, 2);
    values(0, 0) = 0.0;
    values(0, 1) = 1.0;  // violates axiom (i) at x2 by design
    return tabulated_family({"psi"}, pts, values);
}

}  // namespace

TestFamily builtin_family(const std::string& name, const FamilyParams& p) {
    if (name == "disk") {
        std::vector<Member> members;
        members.push_back(scaled_identity_member("z", 1.0));
        return TestFamily("disk", DiskDomain{}, std::move(members));
    }
    if (name == "polydisk") {
        if (p.dim < 1) throw InputError("polydisk: dim must be >= 1");
        std::vector<Member> members;
        for (Index j = 0; j < p.dim; ++j) members.push_back(coordinate_member(j, p.dim));
        return TestFamily("polydisk", PolydiskDomain{p.dim}, std::move(members));
    }
    if (name == "example1") return make_example1(p.n_max, false);
    if (name == "example1-compactified") return make_example1(p.n_max, true);
    if (name == "example2") return make_example2();
    if (name == "annulus-theta") return make_annulus_theta(p);
    if (name == "infinite-polydisk") {
        if (p.cutoff < 1) throw InputError("infinite-polydisk: cutoff must be >= 1");
        std::vector<Member> members;
        for (Index j = 0; j < p.cutoff; ++j) {
            Member m = coordinate_member(j, p.cutoff);
            m.label = "e" + std::to_string(j + 1);
            members.push_back(m);
        }
        return TestFamily("infinite-polydisk", PolydiskDomain{p.cutoff}, std::move(members));
    }
    throw InputError("builtin_family: unknown family '" + name + "'");
}

TestFamily tabulated_family(std::vector<std::string> labels, std::vector<Point> points,
                            const CMatrix& values) {
    if (values.rows() != static_cast<Index>(labels.size()) ||
        values.cols() != static_cast<Index>(points.size()))
        throw InputError("tabulated_family: value table shape mismatch");
    std::vector<Point> canon;
    canon.reserve(points.size());
    for (const Point& p : points) canon.push_back(canonical_point(p));

    std::vector<Member> members;
    for (size_t j = 0; j < labels.size(); ++j) {
        CVector row = values.row(static_cast<Index>(j)).transpose();
        auto table = std::make_shared<std::pair<std::vector<Point>, CVector>>(canon, row);
        members.push_back(Member{
            labels[j], [table](const Point& x) -> Complex {
                Point cx = canonical_point(x);
                for (size_t i = 0; i < table->first.size(); ++i)
                    if (same_point(table->first[i], cx))
                        return table->second(static_cast<Index>(i));
                throw InputError("tabulated member: point not in the table");
            }});
    }
    return TestFamily("tabulated", FinitePointsDomain{std::move(canon)}, std::move(members));
}

}  // namespace tfpick::testfns
