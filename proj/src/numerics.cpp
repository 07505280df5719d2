#include "tfpick/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace tfpick::numerics {

HermitianMatrix::HermitianMatrix(const CMatrix& a) {
    if (a.rows() != a.cols())
        throw InputError("HermitianMatrix: matrix must be square");
    if (a.rows() == 0)
        throw InputError("HermitianMatrix: empty matrix");
    if (!is_finite(a))
        throw InputError("HermitianMatrix: non-finite entries");
    mat_ = 0.5 * (a + a.adjoint());
}

EigResult eig_hermitian(const HermitianMatrix& h) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h.mat());
    if (es.info() != Eigen::Success)
        throw NumericError("eig_hermitian: eigensolver failed to converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

double spectral_norm(const HermitianMatrix& h) {
    EigResult e = eig_hermitian(h);
    return std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
}

double operator_norm(const CMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(m);
    return svd.singularValues()(0);
}

bool is_psd(const HermitianMatrix& h, double tol) {
    EigResult e = eig_hermitian(h);
    double lmax = std::max(std::abs(e.values(0)), std::abs(e.values(e.values.size() - 1)));
    return e.values(0) >= -tol * std::max(1.0, lmax);
}

double min_eigenvalue(const HermitianMatrix& h) {
    return eig_hermitian(h).values(0);
}

HermitianMatrix psd_project(const HermitianMatrix& h) {
    EigResult e = eig_hermitian(h);
    RVector clipped = e.values.cwiseMax(0.0);
    CMatrix out = e.vectors * clipped.asDiagonal() * e.vectors.adjoint();
    return HermitianMatrix(out);
}

CMatrix factor_psd(const HermitianMatrix& g, double tol) {
    if (!is_psd(g, tol))
        throw PreconditionError("factor_psd: matrix is not PSD within tolerance");
    EigResult e = eig_hermitian(g);
    const Index n = g.dim();
    double lmax = e.values(n - 1);
    double cut = tol * std::max(lmax, 0.0);
    std::vector<Index> keep;
    for (Index i = n - 1; i >= 0; --i)
        if (e.values(i) > cut) keep.push_back(i);
    CMatrix h(n, static_cast<Index>(keep.size()));
    for (Index c = 0; c < static_cast<Index>(keep.size()); ++c)
        h.col(c) = e.vectors.col(keep[c]) * std::sqrt(e.values(keep[c]));
    return h;
}

Index psd_rank(const HermitianMatrix& g, double tol) {
    EigResult e = eig_hermitian(g);
    double lmax = e.values(e.values.size() - 1);
    double cut = tol * std::max(lmax, 0.0);
    Index r = 0;
    for (Index i = 0; i < e.values.size(); ++i)
        if (e.values(i) > cut) ++r;
    return r;
}

CMatrix polar_unitary(const CMatrix& m) {
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    return svd.matrixU() * svd.matrixV().adjoint();
}

namespace {

// Orthonormal basis of col(q) assuming q already has nearly orthonormal
// columns: polish by q (q*q)^{-1/2}.
CMatrix reorthonormalize(const CMatrix& q) {
    HermitianMatrix gram(CMatrix(q.adjoint() * q));
    EigResult e = eig_hermitian(gram);
    if (e.values(0) <= 0.0)
        throw NumericError("complete_to_unitary: degenerate basis");
    CMatrix inv_sqrt = e.vectors *
                       e.values.cwiseInverse().cwiseSqrt().asDiagonal() *
                       e.vectors.adjoint();
    return q * inv_sqrt;
}

// Orthonormal complement of the (orthonormal) columns of q in C^n.
CMatrix orthonormal_complement(const CMatrix& q) {
    const Index n = q.rows();
    const Index r = q.cols();
    if (r == 0) return CMatrix::Identity(n, n);
    Eigen::HouseholderQR<CMatrix> qr(q);
    CMatrix full = qr.householderQ();
    return full.rightCols(n - r);
}

}  // namespace

CMatrix complete_to_unitary(const IsometryData& v, double gram_tol) {
    if (v.domain_vectors.size() != v.range_vectors.size())
        throw InputError("complete_to_unitary: domain/range vector counts differ");
    const Index k = static_cast<Index>(v.domain_vectors.size());
    const Index n = std::max(v.domain_dim, v.range_dim);
    if (n <= 0) throw InputError("complete_to_unitary: empty ambient space");
    if (k == 0) return CMatrix::Identity(n, n);

    // Pad both sides to the common ambient dimension.
    CMatrix d = CMatrix::Zero(n, k), r = CMatrix::Zero(n, k);
    for (Index i = 0; i < k; ++i) {
        if (v.domain_vectors[i].size() != v.domain_dim ||
            v.range_vectors[i].size() != v.range_dim)
            throw InputError("complete_to_unitary: vector dimension mismatch");
        d.col(i).head(v.domain_dim) = v.domain_vectors[i];
        r.col(i).head(v.range_dim) = v.range_vectors[i];
    }

    CMatrix gd = d.adjoint() * d;
    CMatrix gr = r.adjoint() * r;
    double scale = std::max({1.0, gd.cwiseAbs().maxCoeff(), gr.cwiseAbs().maxCoeff()});
    double mismatch = (gd - gr).cwiseAbs().maxCoeff();
    if (mismatch > gram_tol * scale)
        throw InputError("complete_to_unitary: not an isometry (Gram mismatch " +
                         std::to_string(mismatch) + ")");

    // Shared row-space basis from the averaged Gram.
    HermitianMatrix g(CMatrix(0.5 * (gd + gr)));
    EigResult e = eig_hermitian(g);
    double lmax = e.values(e.values.size() - 1);
    double cut = std::max(1e-12 * std::max(lmax, 0.0), 1e-14 * scale);
    std::vector<Index> keep;
    for (Index i = e.values.size() - 1; i >= 0; --i)
        if (e.values(i) > cut) keep.push_back(i);
    const Index rank = static_cast<Index>(keep.size());
    if (rank == 0) return CMatrix::Identity(n, n);

    CMatrix w(k, rank);
    for (Index c = 0; c < rank; ++c)
        w.col(c) = e.vectors.col(keep[c]) / std::sqrt(e.values(keep[c]));

    CMatrix qd = reorthonormalize(d * w);
    CMatrix qr = reorthonormalize(r * w);
    CMatrix cd = orthonormal_complement(qd);
    CMatrix cr = orthonormal_complement(qr);

    CMatrix u = qr * qd.adjoint() + cr * cd.adjoint();
    u = polar_unitary(u);

    double unit_err = (u.adjoint() * u - CMatrix::Identity(n, n)).norm();
    if (unit_err > 1e-10)
        throw NumericError("complete_to_unitary: completion lost unitarity");
    return u;
}

}  // namespace tfpick::numerics
