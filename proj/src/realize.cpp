#include "tfpick/realize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tfpick::realize {

using numerics::HermitianMatrix;

Colligation::Colligation(CMatrix u, std::vector<Index> member_of_coord,
                         std::shared_ptr<const TestFamily> fam)
    : u_(std::move(u)), member_of_coord_(std::move(member_of_coord)), family_(std::move(fam)) {
    if (!family_) throw InputError("Colligation: missing family reference");
    const Index n = static_cast<Index>(member_of_coord_.size()) + 1;
    if (u_.rows() != n || u_.cols() != n)
        throw InputError("Colligation: U must be square of size env_dim + 1");
    for (Index j : member_of_coord_)
        if (j < 0 || j >= family_->size())
            throw InputError("Colligation: coordinate assigned to an unknown member");
    double unit_err = (u_.adjoint() * u_ - CMatrix::Identity(n, n)).norm();
    if (unit_err > 1e-10)
        throw InputError("Colligation: U is not unitary (||U*U - I|| = " +
                         std::to_string(unit_err) + ")");
}

CMatrix Colligation::block_a() const { return u_.topLeftCorner(env_dim(), env_dim()); }
CMatrix Colligation::block_b() const { return u_.topRightCorner(env_dim(), 1); }
CMatrix Colligation::block_c() const { return u_.bottomLeftCorner(1, env_dim()); }
Complex Colligation::block_d() const { return u_(env_dim(), env_dim()); }

std::vector<std::pair<Index, Index>> Colligation::block_dims() const {
    std::vector<std::pair<Index, Index>> out;
    for (Index j : member_of_coord_) {
        bool found = false;
        for (auto& [mem, dim] : out)
            if (mem == j) {
                ++dim;
                found = true;
            }
        if (!found) out.emplace_back(j, 1);
    }
    return out;
}

CVector Colligation::z_diagonal(const Point& x) const {
    CVector z(env_dim());
    // Members typically repeat across coordinates; evaluate each only once.
    std::vector<std::pair<Index, Complex>> cache;
    for (Index a = 0; a < env_dim(); ++a) {
        Index j = member_of_coord_[static_cast<size_t>(a)];
        bool hit = false;
        for (const auto& [mem, val] : cache)
            if (mem == j) {
                z(a) = val;
                hit = true;
                break;
            }
        if (!hit) {
            Complex val = family_->evaluate(j, x);
            cache.emplace_back(j, val);
            z(a) = val;
        }
    }
    return z;
}

Colligation build_colligation(const agler::AglerDecomposition& dec,
                              const kernels::DataValues& data, const TestFamily& fam,
                              double feas_tol) {
    testfns::EvalMatrix ev = testfns::eval_matrix(fam, data.nodes);
    const CMatrix& psi = ev.values;
    const Index n = data.nodes.size();
    if (dec.gammas.size() != static_cast<size_t>(fam.size()))
        throw InputError("build_colligation: decomposition does not match the family");

    CMatrix m = agler::target_matrix(data.values);
    agler::DecompositionReport pre =
        agler::validate_decomposition(dec, psi, m, feas_tol);
    if (!pre.ok)
        throw PreconditionError("build_colligation: decomposition inconsistent (residual " +
                                std::to_string(pre.residual) + ", min block eig " +
                                std::to_string(pre.min_block_eig) + ")");

    // Factor the blocks and refine factors and targets jointly, so the
    // lurking isometry below sees an exactly consistent Gram identity.
    std::vector<CMatrix> coeffs = agler::coefficient_matrices(psi);
    std::vector<CMatrix> factors;
    factors.reserve(dec.gammas.size());
    for (const CMatrix& g : dec.gammas)
        factors.push_back(numerics::factor_psd(HermitianMatrix(g), 1e-9));
    CVector xi = data.values;
    CMatrix m_refined = m;
    agler::refine_factored(factors, coeffs, m_refined, &xi, 20);
    double target_drift = (xi - data.values).cwiseAbs().maxCoeff();
    if (target_drift > 8e-8)
        throw NumericError("build_colligation: decomposition inconsistent; target values "
                           "moved by " + std::to_string(target_drift) + " during refinement");

    // Stack L(x) = (rows of H_j) and Z(x) L(x) = (psi_j(x) rows of H_j);
    // blocks of numerical rank zero contribute no coordinates.
    std::vector<Index> member_of_coord;
    Index env = 0;
    for (size_t j = 0; j < factors.size(); ++j) {
        for (Index s = 0; s < factors[j].cols(); ++s)
            member_of_coord.push_back(static_cast<Index>(j));
        env += factors[j].cols();
    }

    numerics::IsometryData iso;
    iso.domain_dim = env + 1;
    iso.range_dim = env + 1;
    for (Index i = 0; i < n; ++i) {
        CVector d(env + 1), r(env + 1);
        Index at = 0;
        for (size_t j = 0; j < factors.size(); ++j) {
            const CMatrix& h = factors[j];
            for (Index s = 0; s < h.cols(); ++s) {
                r(at) = h(i, s);
                d(at) = psi(static_cast<Index>(j), i) * h(i, s);
                ++at;
            }
        }
        d(env) = 1.0;
        r(env) = xi(i);
        iso.domain_vectors.push_back(d);
        iso.range_vectors.push_back(r);
    }

    // The Gram identity is the rearranged decomposition identity; it must
    // hold before completion.
    CMatrix gd = CMatrix::Zero(n, n), gr = CMatrix::Zero(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index k = 0; k < n; ++k) {
            gd(i, k) = iso.domain_vectors[k].dot(iso.domain_vectors[i]);
            gr(i, k) = iso.range_vectors[k].dot(iso.range_vectors[i]);
        }
    double gram_gap = (gd - gr).cwiseAbs().maxCoeff();
    if (gram_gap > 10.0 * feas_tol)
        throw PreconditionError("build_colligation: decomposition inconsistent (Gram gap " +
                                std::to_string(gram_gap) + ")");

    CMatrix u = numerics::complete_to_unitary(iso, std::max(1e-8, 10.0 * feas_tol));
    Colligation col(std::move(u), std::move(member_of_coord),
                    std::make_shared<TestFamily>(fam));

    double interp_err = 0.0;
    for (Index i = 0; i < n; ++i)
        interp_err = std::max(interp_err,
                              std::abs(transfer_eval(col, data.nodes.point(i)) -
                                       data.values(i)));
    if (interp_err > 1e-7)
        throw NumericError("build_colligation: node interpolation error " +
                           std::to_string(interp_err) + " exceeds 1e-7");
    return col;
}

Complex transfer_eval(const Colligation& col, const Point& x) {
    CVector z = col.z_diagonal(x);
    if (z.cwiseAbs().maxCoeff() >= 1.0)
        throw InputError("transfer_eval: max_j |psi_j(x)| must be < 1");
    const Index n = col.env_dim();
    CMatrix a = col.block_a();
    CMatrix rz = CMatrix::Identity(n, n) - a * z.asDiagonal();
    Eigen::PartialPivLU<CMatrix> lu(rz);
    if (lu.rcond() < 1e-12)
        throw NumericError("transfer_eval: resolvent condition above 1e12");
    CMatrix w = lu.solve(col.block_b());
    Complex val = col.block_d() + (col.block_c() * z.asDiagonal() * w)(0, 0);
    return val;
}

Complex transfer_eval(const Colligation& col, Complex x) {
    return transfer_eval(col, testfns::scalar_point(x));
}

namespace {

// pi(Z) = sum_j P_j (x) T_j in coordinates (a, s) -> a*d + s.
CMatrix rep_z(const Colligation& col, const Representation& rep, Index d) {
    const Index n = col.env_dim();
    CMatrix z = CMatrix::Zero(n * d, n * d);
    for (Index a = 0; a < n; ++a) {
        const CMatrix& t = rep.members[static_cast<size_t>(
            col.member_of_coord()[static_cast<size_t>(a)])];
        z.block(a * d, a * d, d, d) = t;
    }
    return z;
}

CMatrix kron_id(const CMatrix& m, Index d) {
    CMatrix out = CMatrix::Zero(m.rows() * d, m.cols() * d);
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j)
            out.block(i * d, j * d, d, d) = m(i, j) * CMatrix::Identity(d, d);
    return out;
}

CMatrix rep_transfer(const Colligation& col, const CMatrix& piz, Index d, double r) {
    const Index n = col.env_dim();
    CMatrix ai = kron_id(col.block_a(), d) * r;
    CMatrix bi = kron_id(col.block_b(), d);
    CMatrix ci = kron_id(col.block_c(), d);
    CMatrix rz = CMatrix::Identity(n * d, n * d) - ai * piz;
    Eigen::PartialPivLU<CMatrix> lu(rz);
    if (lu.rcond() < 1e-12)
        throw NumericError("transfer_eval_rep: resolvent condition above 1e12");
    CMatrix w = lu.solve(bi);
    return col.block_d() * CMatrix::Identity(d, d) + ci * (r * piz) * w;
}

}  // namespace

RepEval transfer_eval_rep(const Colligation& col, const Representation& rep, bool strict) {
    if (rep.members.size() != static_cast<size_t>(col.family().size()))
        throw InputError("transfer_eval_rep: one contraction per family member required");
    Index d = -1;
    for (const CMatrix& t : rep.members) {
        if (t.rows() != t.cols()) throw InputError("transfer_eval_rep: non-square block");
        if (d < 0) d = t.rows();
        if (t.rows() != d) throw InputError("transfer_eval_rep: blocks on different spaces");
    }
    // Only members actually appearing in the colligation constrain the norm.
    std::set<Index> used(col.member_of_coord().begin(), col.member_of_coord().end());
    for (Index j : used) {
        double nrm = numerics::operator_norm(rep.members[static_cast<size_t>(j)]);
        if (strict && nrm >= 1.0)
            throw InputError("transfer_eval_rep: strict mode requires ||T_j|| < 1");
        if (nrm > 1.0 + 1e-12)
            throw InputError("transfer_eval_rep: ||T_j|| = " + std::to_string(nrm) +
                             " violates contractivity");
    }

    CMatrix piz = rep_z(col, rep, d);
    RepEval out;
    bool direct_safe = strict;
    if (!strict) {
        CMatrix az = kron_id(col.block_a(), d) * piz;
        Eigen::ComplexEigenSolver<CMatrix> es(az, false);
        double rho = es.eigenvalues().cwiseAbs().maxCoeff();
        direct_safe = rho < 1.0 - 1e-10;
    }
    if (direct_safe) {
        out.value = rep_transfer(col, piz, d, 1.0);
        out.norm = numerics::operator_norm(out.value);
        return out;
    }
    // Boundary-norm representation: evaluate at r A, r = 1 - 1e-6, and also
    // attempt the direct value; both are reported.
    out.regularized = true;
    out.value_regularized = rep_transfer(col, piz, d, 1.0 - 1e-6);
    out.norm_regularized = numerics::operator_norm(out.value_regularized);
    try {
        out.value = rep_transfer(col, piz, d, 1.0);
        out.norm = numerics::operator_norm(out.value);
    } catch (const NumericError&) {
        out.value = out.value_regularized;
        out.norm = out.norm_regularized;
    }
    return out;
}

CoarsenReport coarsen_representation(const Colligation& col,
                                     const std::vector<std::vector<Index>>& cells,
                                     const NodeSet& probe,
                                     const std::vector<Index>* samples) {
    const TestFamily& fam = col.family();
    if (samples && samples->size() != cells.size())
        throw InputError("coarsen_representation: one sample per cell required");
    std::vector<Index> cell_of_member(static_cast<size_t>(fam.size()), -1);
    for (size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].empty())
            throw InputError("coarsen_representation: empty partition cell");
        for (Index j : cells[c]) {
            if (j < 0 || j >= fam.size())
                throw InputError("coarsen_representation: member index out of range");
            if (cell_of_member[static_cast<size_t>(j)] >= 0)
                throw InputError("coarsen_representation: member in two cells");
            cell_of_member[static_cast<size_t>(j)] = static_cast<Index>(c);
        }
    }
    for (Index j : col.member_of_coord())
        if (cell_of_member[static_cast<size_t>(j)] < 0)
            throw InputError("coarsen_representation: partition misses member " +
                             std::to_string(j));

    std::vector<Index> sample_of_cell(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
        Index s = samples ? (*samples)[c] : cells[c].front();
        bool inside = std::find(cells[c].begin(), cells[c].end(), s) != cells[c].end();
        if (!inside)
            throw InputError("coarsen_representation: sample not inside its cell");
        sample_of_cell[c] = s;
    }

    CoarsenReport rep;
    // eps: cell spread against the sample, sup over probe nodes (this is the
    // finite form of the partition estimate the drift bound rests on).
    for (size_t c = 0; c < cells.size(); ++c)
        for (Index j : cells[c])
            for (Index i = 0; i < probe.size(); ++i)
                rep.epsilon = std::max(
                    rep.epsilon,
                    std::abs(fam.evaluate(sample_of_cell[c], probe.point(i)) -
                             fam.evaluate(j, probe.point(i))));

    std::vector<Index> coarse_coords;
    coarse_coords.reserve(col.member_of_coord().size());
    for (Index j : col.member_of_coord())
        coarse_coords.push_back(sample_of_cell[static_cast<size_t>(
            cell_of_member[static_cast<size_t>(j)])]);
    rep.coarse = std::make_shared<Colligation>(col.u(), coarse_coords, col.family_ptr());

    for (Index i = 0; i < probe.size(); ++i) {
        const Point& x = probe.point(i);
        CVector z = col.z_diagonal(x);
        CVector za = rep.coarse->z_diagonal(x);
        double zdrift = (z - za).cwiseAbs().maxCoeff();
        rep.max_z_drift = std::max(rep.max_z_drift, zdrift);

        double r = z.cwiseAbs().maxCoeff();
        double ra = za.cwiseAbs().maxCoeff();
        double bound = rep.epsilon * (1.0 / (1.0 - ra) + r / ((1.0 - r) * (1.0 - ra)));
        double drift = std::abs(transfer_eval(col, x) - transfer_eval(*rep.coarse, x));
        rep.node_drift.push_back(drift);
        rep.node_bound.push_back(bound);
        rep.max_transfer_drift = std::max(rep.max_transfer_drift, drift);
        rep.drift_bound = std::max(rep.drift_bound, bound);
    }
    return rep;
}

}  // namespace tfpick::realize
