#pragma once

#include <vector>

#include "tfpick/common.hpp"

namespace tfpick::numerics {

// Dense Hermitian matrix, symmetrized on construction so that
// entries(i,j) == conj(entries(j,i)) holds exactly as stored.
class HermitianMatrix {
public:
    explicit HermitianMatrix(const CMatrix& a);

    Index dim() const { return mat_.rows(); }
    const CMatrix& mat() const { return mat_; }
    Complex operator()(Index i, Index j) const { return mat_(i, j); }

private:
    CMatrix mat_;
};

struct EigResult {
    RVector values;   // ascending
    CMatrix vectors;  // columns
};

// Single eigendecomposition backend for all PSD tests, projections and
// factorizations.
EigResult eig_hermitian(const HermitianMatrix& h);

double spectral_norm(const HermitianMatrix& h);

// Largest singular value of a general matrix.
double operator_norm(const CMatrix& m);

constexpr double kDefaultTol = 1e-9;

// True iff lambda_min(h) >= -tol * max(1, ||h||_spectral).
bool is_psd(const HermitianMatrix& h, double tol = kDefaultTol);
double min_eigenvalue(const HermitianMatrix& h);

// Nearest PSD matrix in Frobenius norm: U max(Lambda,0) U*.
HermitianMatrix psd_project(const HermitianMatrix& h);

// Rank-revealing factorization g = H H* with H of full column rank,
// r = #{lambda_i > tol * lambda_max}.  Requires is_psd(g, tol).
CMatrix factor_psd(const HermitianMatrix& g, double tol = kDefaultTol);

// Count of eigenvalues above tol * lambda_max (numerical PSD rank).
Index psd_rank(const HermitianMatrix& g, double tol = kDefaultTol);

// Data of a densely defined isometry: domain_vectors[i] |-> range_vectors[i].
// Well defined exactly when the two Gram matrices agree.
struct IsometryData {
    std::vector<CVector> domain_vectors;
    std::vector<CVector> range_vectors;
    Index domain_dim = 0;
    Index range_dim = 0;
};

// Extends the isometry to a unitary U with U d_i = r_i.  Ambient dimensions
// may differ; the smaller space is padded with extra coordinates, so U is
// square of size max(domain_dim, range_dim).  Throws InputError when the
// Gram matrices differ by more than gram_tol entrywise.
CMatrix complete_to_unitary(const IsometryData& v, double gram_tol = 1e-8);

// Closest unitary in Frobenius norm (polar factor); m must be square and
// nonsingular to working precision.
CMatrix polar_unitary(const CMatrix& m);

}  // namespace tfpick::numerics
