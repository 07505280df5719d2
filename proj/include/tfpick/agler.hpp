#pragma once

#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tfpick/kernels.hpp"
#include "tfpick/numerics.hpp"
#include "tfpick/testfns.hpp"

namespace tfpick::agler {

using testfns::NodeSet;
using testfns::TestFamily;

struct SolveOptions {
    // Feasibility tolerance; < 0 selects the default 1e-8 * (1 + ||M||_F).
    double feas_tol = -1.0;
    // A certificate must reach lambda_min(M o K) < -cert_margin.
    double cert_margin = 1e-6;
    Index max_iters = 50000;
    // Skip the cheap feasibility shortcuts (PSD target, one-term identity).
    bool allow_shortcuts = true;
    // Gauss-Newton refinement of near-feasible iterates.
    bool polish = true;
    double mass_bound_factor = 10.0;
    // >= 0: diagnostic mode, run exactly this many primal iterations and
    // report the best iterate without deciding.
    Index fixed_primal_iters = -1;
    // Additional dual candidate kernels (e.g. a Hardy kernel Gram).
    std::vector<CMatrix> extra_dual_candidates;
};

// Per-test-function PSD blocks Gamma_j with sum_j Gamma_j o A_j = M, where
// A_j(x,y) = 1 - psi_j(x) conj(psi_j(y)); the discrete form of the measure
// realization, with weights the trace masses on the Psi-grid.
struct AglerDecomposition {
    std::vector<CMatrix> gammas;
    std::vector<std::string> labels;
    std::vector<double> weights;
    double residual = std::numeric_limits<double>::infinity();
};

// Admissible kernel whose Pick matrix against the target is not PSD.
struct DualCertificate {
    CMatrix kernel;
    std::vector<double> member_min_eigs;
    double kernel_min_eig = 0.0;
    double pick_min_eig = 0.0;
};

// Entry (row, col) where every A_j vanishes but the target does not; every
// cone member has a zero there, so membership fails outright.  Arises only
// for families violating the sup-norm axiom (Example 2).
struct StructuralWitness {
    Index row = 0;
    Index col = 0;
    double coeff_magnitude = 0.0;
    Complex target_entry;
};

enum class Verdict { Feasible, Infeasible, Undecided };
std::string to_string(Verdict v);

struct SolveStats {
    Index iterations = 0;
    double best_residual = std::numeric_limits<double>::infinity();
    double best_dual_margin = 0.0;  // most negative admissible lambda_min(M o K)
    double max_node_mass = 0.0;     // max_x sum_j Gamma_j(x,x) of the reported iterate
    double total_mass = 0.0;        // sum_j trace Gamma_j
    double mass_bound = std::numeric_limits<double>::infinity();  // ||M|| / eps
    bool mass_flag = false;         // mass exceeded mass_bound_factor * mass_bound
};

struct SolveResult {
    Verdict verdict = Verdict::Undecided;
    std::optional<AglerDecomposition> decomposition;
    std::optional<DualCertificate> certificate;
    std::optional<StructuralWitness> witness;
    SolveStats stats;
    double feas_tol = 0.0;
    double cert_margin = 0.0;
};

// Coefficient matrices A_j(x,y) = 1 - psi_j(x) conj(psi_j(y)) from a values
// matrix (rows = members, cols = nodes).
std::vector<CMatrix> coefficient_matrices(const CMatrix& psi_values);

// M_xi(x,y) = 1 - xi(x) conj(xi(y)).
CMatrix target_matrix(const CVector& xi);

// Decide membership of M in the cone spanned by PSD blocks against the
// discretized family.
SolveResult cone_membership(const numerics::HermitianMatrix& m, const CMatrix& psi_values,
                            const SolveOptions& opts = {},
                            const std::vector<std::string>* labels = nullptr);
SolveResult cone_membership(const numerics::HermitianMatrix& m, const TestFamily& fam,
                            const NodeSet& f, const SolveOptions& opts = {});

// Agler-Pick interpolation: cone membership of M_xi.  Requires strictly
// contractive data (|xi| < 1 - 1e-12).
SolveResult solve_interpolation(const kernels::DataValues& data, const TestFamily& fam,
                                const SolveOptions& opts = {});

struct DecompositionReport {
    double residual = 0.0;
    double min_block_eig = 0.0;
    double psd_scale = 1.0;
    bool blocks_psd = false;
    bool residual_ok = false;
    bool ok = false;
};

// Recomputes residual and PSD margins with fresh eigendecompositions,
// independent of the solver path.
DecompositionReport validate_decomposition(const AglerDecomposition& dec,
                                           const CMatrix& psi_values, const CMatrix& m,
                                           double feas_tol);

struct CertificateReport {
    double kernel_min_eig = 0.0;
    double worst_member_eig = 0.0;
    double pick_min_eig = 0.0;
    bool admissible = false;
    bool separating = false;
    bool ok = false;
};

CertificateReport validate_certificate(const DualCertificate& cert,
                                       const CMatrix& psi_values, const CMatrix& m,
                                       double tol = numerics::kDefaultTol,
                                       double cert_margin = 1e-6);

// Gauss-Newton refinement of ||sum_j H_j H_j* o A_j - M||_F over the factors
// H_j (blocks stay PSD by construction).  When xi is non-null the target
// values move as well and m is maintained as 1 - xi xi*; build_colligation
// uses this to hand the lurking isometry an exactly consistent pair.
// Returns the final residual.
double refine_factored(std::vector<CMatrix>& factors, const std::vector<CMatrix>& coeffs,
                       CMatrix& m, CVector* xi, int max_steps = 12);

}  // namespace tfpick::agler
