#pragma once

#include <memory>
#include <vector>

#include "tfpick/agler.hpp"

namespace tfpick::realize {

using testfns::NodeSet;
using testfns::Point;
using testfns::TestFamily;

// Unitary colligation U = [A B; C D] on E + C, with E carrying orthogonal
// projections P_j (one per family member used) encoding a simple
// representation.  Each coordinate of E is assigned to a family member;
// Z(x) is the diagonal with psi_{member}(x) on that member's coordinates.
class Colligation {
public:
    Colligation(CMatrix u, std::vector<Index> member_of_coord,
                std::shared_ptr<const TestFamily> fam);

    Index env_dim() const { return static_cast<Index>(member_of_coord_.size()); }
    const CMatrix& u() const { return u_; }
    const std::vector<Index>& member_of_coord() const { return member_of_coord_; }
    const TestFamily& family() const { return *family_; }
    const std::shared_ptr<const TestFamily>& family_ptr() const { return family_; }

    CMatrix block_a() const;
    CMatrix block_b() const;  // env x 1
    CMatrix block_c() const;  // 1 x env
    Complex block_d() const;

    // (member, dimension) pairs in order of first appearance.
    std::vector<std::pair<Index, Index>> block_dims() const;

    // Diagonal of Z(x).
    CVector z_diagonal(const Point& x) const;

private:
    CMatrix u_;
    std::vector<Index> member_of_coord_;
    std::shared_ptr<const TestFamily> family_;
};

// Lurking isometry: factor each block, stack L(x) and Z(x)L(x), and complete
// [Z(x)L(x); 1] -> [L(x); xi(x)] to a unitary.  The decomposition is first
// refined (targets included) so the Gram identity holds to machine
// precision; the returned colligation interpolates the original data within
// 1e-7 at every node.
Colligation build_colligation(const agler::AglerDecomposition& dec,
                              const kernels::DataValues& data, const TestFamily& fam,
                              double feas_tol);

// W(x) = D + C Z(x) (I - A Z(x))^{-1} B.
Complex transfer_eval(const Colligation& col, const Point& x);
Complex transfer_eval(const Colligation& col, Complex x);

// Finite-dimensional representation: one contraction per family member, all
// on a common space.
struct Representation {
    std::vector<CMatrix> members;
};

struct RepEval {
    CMatrix value;          // D (x) I + (C (x) I) piZ (I - (A (x) I) piZ)^{-1} (B (x) I)
    double norm = 0.0;
    bool regularized = false;     // true when the evaluation used r A, r = 1 - 1e-6
    CMatrix value_regularized;    // always filled when regularized
    double norm_regularized = 0.0;
};

// pi(Z) = sum_j P_j (x) pi(psi_j).  In strict mode all ||T_j|| < 1 is
// required; otherwise a spectral-radius check decides whether the resolvent
// is evaluated directly or at r A with r = 1 - 1e-6 (both are reported).
RepEval transfer_eval_rep(const Colligation& col, const Representation& rep,
                          bool strict = false);

struct CoarsenReport {
    std::shared_ptr<Colligation> coarse;
    double epsilon = 0.0;           // max over cells of sup-over-F member spread
    double max_z_drift = 0.0;       // max over probe nodes of ||Z_a(x) - Z(x)||
    double max_transfer_drift = 0.0;
    double drift_bound = 0.0;       // eps * (1/(1-r_a) + r/((1-r)(1-r_a))) maximized
    std::vector<double> node_drift;
    std::vector<double> node_bound;
};

// Merges the projections within each partition cell and evaluates the cell's
// sample member instead; cells index family members, samples default to the
// first member of each cell.
CoarsenReport coarsen_representation(const Colligation& col,
                                     const std::vector<std::vector<Index>>& cells,
                                     const NodeSet& probe,
                                     const std::vector<Index>* samples = nullptr);

}  // namespace tfpick::realize
