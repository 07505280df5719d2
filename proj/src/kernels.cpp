#include "tfpick/kernels.hpp"

#include <cmath>

namespace tfpick::kernels {

using numerics::HermitianMatrix;

KernelGram::KernelGram(NodeSet f, const CMatrix& k, double tol)
    : nodes_(std::move(f)) {
    if (k.rows() != nodes_.size() || k.cols() != nodes_.size())
        throw InputError("KernelGram: matrix size does not match the node set");
    HermitianMatrix h(k);
    if (!numerics::is_psd(h, tol))
        throw InputError("KernelGram: kernel sample is not PSD within tolerance");
    mat_ = h.mat();
}

DataValues::DataValues(NodeSet f, CVector xi) : nodes(std::move(f)), values(std::move(xi)) {
    if (values.size() != nodes.size())
        throw InputError("DataValues: value count does not match the node set");
    for (Index i = 0; i < values.size(); ++i) {
        if (!is_finite(values(i)))
            throw InputError("DataValues: non-finite target value");
        if (std::abs(values(i)) > 1.0 + 1e-12)
            throw InputError("DataValues: target value at node " + std::to_string(i) +
                             " lies outside the closed unit disk");
    }
}

CMatrix pick_matrix_values(const CVector& xi, const CMatrix& k) {
    if (xi.size() != k.rows())
        throw InputError("pick_matrix: size mismatch");
    const Index n = xi.size();
    CMatrix out(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            out(i, j) = (1.0 - xi(i) * std::conj(xi(j))) * k(i, j);
    return out;
}

HermitianMatrix pick_matrix(const DataValues& data, const KernelGram& k) {
    if (!data.nodes.same_as(k.nodes()))
        throw InputError("pick_matrix: data and kernel use different node sets");
    return HermitianMatrix(pick_matrix_values(data.values, k.mat()));
}

AdmissibilityReport is_admissible_values(const CMatrix& k, const CMatrix& psi_values,
                                         double tol) {
    AdmissibilityReport rep;
    HermitianMatrix hk(k);
    rep.kernel_min_eig = numerics::min_eigenvalue(hk);
    double scale = std::max(1.0, numerics::spectral_norm(hk));
    rep.admissible = rep.kernel_min_eig >= -tol * scale;
    for (Index j = 0; j < psi_values.rows(); ++j) {
        CVector psi = psi_values.row(j).transpose();
        HermitianMatrix pick(pick_matrix_values(psi, k));
        double le = numerics::min_eigenvalue(pick);
        rep.member_min_eigs.push_back(le);
        double pscale = std::max(1.0, numerics::spectral_norm(pick));
        if (le < -tol * pscale) rep.admissible = false;
    }
    return rep;
}

AdmissibilityReport is_admissible(const KernelGram& k, const TestFamily& fam, double tol) {
    CMatrix values = testfns::eval_matrix_unchecked(fam, k.nodes());
    return is_admissible_values(k.mat(), values, tol);
}

CMatrix canonical_kernel_values(const CVector& psi_values) {
    const Index n = psi_values.size();
    for (Index i = 0; i < n; ++i)
        if (std::abs(psi_values(i)) >= 1.0)
            throw InputError("canonical_kernel: |psi(x)| >= 1 at node " + std::to_string(i));
    CMatrix s(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            s(i, j) = 1.0 / (1.0 - psi_values(i) * std::conj(psi_values(j)));
    return s;
}

KernelGram canonical_kernel(const CVector& psi_values, const NodeSet& f) {
    return KernelGram(f, canonical_kernel_values(psi_values));
}

KernelGram toeplitz_kernel(const NodeSet& f) {
    return KernelGram(f, CMatrix::Identity(f.size(), f.size()));
}

double norm_lower_bound(const CVector& phi_values, const KernelGram& k) {
    // Smallest C with (C^2 - phi phi*) o K >= 0, i.e. C^2 K >= (phi phi*) o K.
    if (phi_values.size() != k.size())
        throw InputError("norm_lower_bound: size mismatch");
    const Index n = k.size();
    CMatrix num(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j)
            num(i, j) = phi_values(i) * std::conj(phi_values(j)) * k.mat()(i, j);

    numerics::EigResult ek = numerics::eig_hermitian(HermitianMatrix(k.mat()));
    double lmax = ek.values(n - 1);
    if (lmax <= 0.0) return 0.0;
    double cut = 1e-12 * lmax;
    // Pseudo-inverse square root of K restricted to its range.
    CMatrix w = CMatrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        if (ek.values(i) > cut)
            w += ek.vectors.col(i) * ek.vectors.col(i).adjoint() / std::sqrt(ek.values(i));
    HermitianMatrix reduced(CMatrix(w * num * w));
    numerics::EigResult er = numerics::eig_hermitian(reduced);
    double c2 = std::max(0.0, er.values(er.values.size() - 1));
    return std::sqrt(c2);
}

}  // namespace tfpick::kernels
