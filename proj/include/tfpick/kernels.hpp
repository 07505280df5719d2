#pragma once

#include <optional>
#include <vector>

#include "tfpick/numerics.hpp"
#include "tfpick/testfns.hpp"

namespace tfpick::kernels {

using testfns::NodeSet;
using testfns::TestFamily;

// Positive kernel sampled on a finite node set; PSD is checked on
// construction.
class KernelGram {
public:
    KernelGram(NodeSet f, const CMatrix& k, double tol = numerics::kDefaultTol);

    const NodeSet& nodes() const { return nodes_; }
    const CMatrix& mat() const { return mat_; }
    Index size() const { return mat_.rows(); }

private:
    NodeSet nodes_;
    CMatrix mat_;
};

// Interpolation data xi : F -> closed unit disk.  The solver additionally
// rejects values of modulus >= 1 - 1e-12; the closed ball is allowed here so
// the counterexample demos can carry boundary data.
struct DataValues {
    NodeSet nodes;
    CVector values;

    DataValues(NodeSet f, CVector xi);
};

// Entrywise (1 - xi(x) conj(xi(y))) K(x,y).
numerics::HermitianMatrix pick_matrix(const DataValues& data, const KernelGram& k);
CMatrix pick_matrix_values(const CVector& xi, const CMatrix& k);

struct AdmissibilityReport {
    bool admissible = false;
    double kernel_min_eig = 0.0;
    std::vector<double> member_min_eigs;  // lambda_min((1 - psi psi*) o K) per member
};

// Membership of K in K_Psi restricted to F: K is PSD and every test-function
// Pick matrix against K is PSD at tol.
AdmissibilityReport is_admissible(const KernelGram& k, const TestFamily& fam,
                                  double tol = numerics::kDefaultTol);
AdmissibilityReport is_admissible_values(const CMatrix& k, const CMatrix& psi_values,
                                         double tol = numerics::kDefaultTol);

// Canonical kernel of a single test function: S(x,y) = 1/(1 - psi(x) conj(psi(y))).
KernelGram canonical_kernel(const CVector& psi_values, const NodeSet& f);
CMatrix canonical_kernel_values(const CVector& psi_values);

// s(x,x) = 1, s(x,y) = 0 otherwise; admissible for every family.
KernelGram toeplitz_kernel(const NodeSet& f);

// Any single kernel sample only lower-bounds the H^inf(K_Psi) norm: the
// smallest C with (C^2 - phi phi*) o K PSD.
double norm_lower_bound(const CVector& phi_values, const KernelGram& k);

}  // namespace tfpick::kernels
