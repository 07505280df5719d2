#include "tfpick/agler.hpp"

#include <algorithm>
#include <cmath>

#include "tfpick/annulus.hpp"

namespace tfpick::agler {

using numerics::HermitianMatrix;

std::string to_string(Verdict v) {
    switch (v) {
        case Verdict::Feasible: return "feasible";
        case Verdict::Infeasible: return "infeasible";
        default: return "undecided";
    }
}

std::vector<CMatrix> coefficient_matrices(const CMatrix& psi_values) {
    const Index m = psi_values.rows();
    const Index n = psi_values.cols();
    std::vector<CMatrix> coeffs;
    coeffs.reserve(static_cast<size_t>(m));
    for (Index j = 0; j < m; ++j) {
        CVector v = psi_values.row(j).transpose();
        coeffs.push_back(CMatrix::Ones(n, n) - v * v.adjoint());
    }
    return coeffs;
}

CMatrix target_matrix(const CVector& xi) {
    const Index n = xi.size();
    return CMatrix::Ones(n, n) - xi * xi.adjoint();
}

namespace {

CMatrix hadamard(const CMatrix& a, const CMatrix& b) { return a.cwiseProduct(b); }

CMatrix apply_blocks(const std::vector<CMatrix>& gammas, const std::vector<CMatrix>& coeffs) {
    CMatrix s = CMatrix::Zero(coeffs[0].rows(), coeffs[0].cols());
    for (size_t j = 0; j < gammas.size(); ++j) s += hadamard(gammas[j], coeffs[j]);
    return s;
}

CMatrix clip_psd(const CMatrix& a) {
    return numerics::psd_project(HermitianMatrix(a)).mat();
}

double total_mass(const std::vector<CMatrix>& gammas) {
    double t = 0.0;
    for (const CMatrix& g : gammas) t += g.trace().real();
    return t;
}

double max_node_mass(const std::vector<CMatrix>& gammas) {
    const Index n = gammas[0].rows();
    double best = 0.0;
    for (Index x = 0; x < n; ++x) {
        double s = 0.0;
        for (const CMatrix& g : gammas) s += g(x, x).real();
        best = std::max(best, s);
    }
    return best;
}

struct Problem {
    CMatrix m;
    CMatrix psi;                   // members x nodes
    std::vector<CMatrix> coeffs;   // A_j
    Eigen::MatrixXd anorm2;        // sum_j |A_j(x,y)|^2
    std::vector<std::string> labels;
    double feas_tol = 0.0;
    double scale = 1.0;            // 1 + ||M||_F
};

// Least-norm projection onto { sum_j Gamma_j o A_j = M }; decouples per
// entry.  Entries where every coefficient vanishes carry no constraint
// (handled by the structural scan).
void project_affine(const Problem& p, std::vector<CMatrix>& gammas) {
    const Index n = p.m.rows();
    const size_t mcount = p.coeffs.size();
    for (Index x = 0; x < n; ++x)
        for (Index y = x; y < n; ++y) {
            double a2 = p.anorm2(x, y);
            if (a2 < 1e-24) continue;
            Complex lhs(0.0, 0.0);
            for (size_t j = 0; j < mcount; ++j)
                lhs += p.coeffs[j](x, y) * gammas[j](x, y);
            Complex c = (p.m(x, y) - lhs) / a2;
            for (size_t j = 0; j < mcount; ++j) {
                Complex upd = gammas[j](x, y) + std::conj(p.coeffs[j](x, y)) * c;
                if (x == y) upd = Complex(upd.real(), 0.0);
                gammas[j](x, y) = upd;
                gammas[j](y, x) = std::conj(upd);
            }
        }
}

double residual_norm(const Problem& p, const std::vector<CMatrix>& gammas) {
    return (apply_blocks(gammas, p.coeffs) - p.m).norm();
}

AglerDecomposition make_decomposition(const Problem& p, std::vector<CMatrix> gammas) {
    AglerDecomposition dec;
    dec.residual = residual_norm(p, gammas);
    dec.gammas = std::move(gammas);
    dec.labels = p.labels;
    for (const CMatrix& g : dec.gammas) dec.weights.push_back(g.trace().real());
    return dec;
}

}  // namespace

DecompositionReport validate_decomposition(const AglerDecomposition& dec,
                                           const CMatrix& psi_values, const CMatrix& m,
                                           double feas_tol) {
    if (dec.gammas.size() != static_cast<size_t>(psi_values.rows()))
        throw InputError("validate_decomposition: block count does not match family");
    DecompositionReport rep;
    std::vector<CMatrix> coeffs = coefficient_matrices(psi_values);
    rep.min_block_eig = std::numeric_limits<double>::infinity();
    rep.blocks_psd = true;
    for (const CMatrix& g : dec.gammas) {
        HermitianMatrix h(g);
        rep.min_block_eig = std::min(rep.min_block_eig, numerics::min_eigenvalue(h));
        rep.psd_scale = std::max(rep.psd_scale, numerics::spectral_norm(h));
        if (!numerics::is_psd(h)) rep.blocks_psd = false;
    }
    rep.residual = (apply_blocks(dec.gammas, coeffs) - m).norm();
    rep.residual_ok = rep.residual <= feas_tol;
    rep.ok = rep.blocks_psd && rep.residual_ok;
    return rep;
}

CertificateReport validate_certificate(const DualCertificate& cert,
                                       const CMatrix& psi_values, const CMatrix& m,
                                       double tol, double cert_margin) {
    CertificateReport rep;
    kernels::AdmissibilityReport adm =
        kernels::is_admissible_values(cert.kernel, psi_values, tol);
    rep.kernel_min_eig = adm.kernel_min_eig;
    rep.worst_member_eig = adm.member_min_eigs.empty()
                               ? 0.0
                               : *std::min_element(adm.member_min_eigs.begin(),
                                                   adm.member_min_eigs.end());
    rep.admissible = adm.admissible;
    HermitianMatrix pick(hadamard(m, cert.kernel));
    rep.pick_min_eig = numerics::min_eigenvalue(pick);
    rep.separating = rep.pick_min_eig < -cert_margin;
    rep.ok = rep.admissible && rep.separating;
    return rep;
}

// ---------------------------------------------------------------------------
// Gauss-Newton refinement in factored form.

namespace {

// Real residual vector of the Hermitian matrix E, with off-diagonal entries
// weighted by sqrt(2) so the Euclidean norm matches ||E||_F.
Eigen::VectorXd vec_hermitian(const CMatrix& e) {
    const Index n = e.rows();
    Eigen::VectorXd v(n * n);
    Index k = 0;
    const double rt2 = std::sqrt(2.0);
    for (Index i = 0; i < n; ++i) v(k++) = e(i, i).real();
    for (Index i = 0; i < n; ++i)
        for (Index j = i + 1; j < n; ++j) {
            v(k++) = rt2 * e(i, j).real();
            v(k++) = rt2 * e(i, j).imag();
        }
    return v;
}

}  // namespace

double refine_factored(std::vector<CMatrix>& factors, const std::vector<CMatrix>& coeffs,
                       CMatrix& m, CVector* xi, int max_steps) {
    const Index n = m.rows();
    const size_t mcount = factors.size();
    if (coeffs.size() != mcount)
        throw InputError("refine_factored: factor/coefficient count mismatch");

    auto gammas_of = [&](const std::vector<CMatrix>& h) {
        std::vector<CMatrix> g;
        g.reserve(h.size());
        for (const CMatrix& f : h) g.push_back(f * f.adjoint());
        return g;
    };
    auto target_of = [&](const CVector& x) { return target_matrix(x); };
    auto resid_of = [&](const std::vector<CMatrix>& h, const CMatrix& tgt) {
        return CMatrix(tgt - apply_blocks(gammas_of(h), coeffs));
    };

    Index unknowns = 0;
    for (const CMatrix& f : factors) unknowns += 2 * f.rows() * f.cols();
    if (xi) unknowns += 2 * n;
    if (unknowns == 0) return resid_of(factors, m).norm();

    const Index rows = n * n;
    CMatrix cur_m = xi ? target_of(*xi) : m;
    CMatrix e = resid_of(factors, cur_m);
    double resid = e.norm();
    const double stop = 1e-14 * n * (1.0 + m.norm());

    for (int step = 0; step < max_steps && resid > stop; ++step) {
        // Jacobian of vec(E) with respect to the real parameters.
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(rows, unknowns);
        Index col = 0;
        auto emit = [&](const CMatrix& de) {
            jac.col(col++) = vec_hermitian(de);
        };
        for (size_t j = 0; j < mcount; ++j) {
            const CMatrix& h = factors[j];
            const CMatrix& a = coeffs[j];
            for (Index s = 0; s < h.cols(); ++s)
                for (Index r = 0; r < h.rows(); ++r) {
                    // dE = -(Delta H* + H Delta*) o A for Delta = unit (r,s).
                    CMatrix d = CMatrix::Zero(n, n);
                    for (Index y = 0; y < n; ++y) {
                        d(r, y) -= std::conj(h(y, s)) * a(r, y);
                        d(y, r) -= h(y, s) * a(y, r);
                    }
                    emit(d);
                    CMatrix di = CMatrix::Zero(n, n);
                    const Complex iu(0.0, 1.0);
                    for (Index y = 0; y < n; ++y) {
                        di(r, y) -= iu * std::conj(h(y, s)) * a(r, y);
                        di(y, r) += iu * h(y, s) * a(y, r);
                    }
                    emit(di);
                }
        }
        if (xi) {
            const CVector& x = *xi;
            for (Index r = 0; r < n; ++r) {
                // dM = -(dxi xi* + xi dxi*), which enters E directly.
                CMatrix d = CMatrix::Zero(n, n);
                for (Index y = 0; y < n; ++y) {
                    d(r, y) -= std::conj(x(y));
                    d(y, r) -= x(y);
                }
                emit(d);
                CMatrix di = CMatrix::Zero(n, n);
                const Complex iu(0.0, 1.0);
                for (Index y = 0; y < n; ++y) {
                    di(r, y) -= iu * std::conj(x(y));
                    di(y, r) += iu * x(y);
                }
                emit(di);
            }
        }

        // The emitted columns are dE per unit perturbation, so the step
        // solves J delta = -E.
        Eigen::VectorXd rhs = -vec_hermitian(e);
        Eigen::VectorXd delta;
        if (unknowns >= rows) {
            Eigen::MatrixXd gram = jac * jac.transpose();
            double ridge = 1e-12 * (gram.trace() / rows + 1.0);
            gram.diagonal().array() += ridge;
            delta = jac.transpose() * gram.ldlt().solve(rhs);
        } else {
            Eigen::MatrixXd gram = jac.transpose() * jac;
            double ridge = 1e-12 * (gram.trace() / unknowns + 1.0);
            gram.diagonal().array() += ridge;
            delta = gram.ldlt().solve(jac.transpose() * rhs);
        }

        // Backtracking line search on the true residual.
        double alpha = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 25; ++bt) {
            std::vector<CMatrix> trial = factors;
            CVector trial_xi;
            Index col2 = 0;
            for (size_t j = 0; j < mcount; ++j)
                for (Index s = 0; s < trial[j].cols(); ++s)
                    for (Index r = 0; r < trial[j].rows(); ++r) {
                        trial[j](r, s) += alpha * Complex(delta(col2), delta(col2 + 1));
                        col2 += 2;
                    }
            CMatrix trial_m = cur_m;
            if (xi) {
                trial_xi = *xi;
                for (Index r = 0; r < n; ++r) {
                    trial_xi(r) += alpha * Complex(delta(col2), delta(col2 + 1));
                    col2 += 2;
                }
                trial_m = target_of(trial_xi);
            }
            CMatrix trial_e = resid_of(trial, trial_m);
            double trial_resid = trial_e.norm();
            if (trial_resid < resid * (1.0 - 1e-4 * alpha) || trial_resid < stop) {
                factors = std::move(trial);
                if (xi) *xi = trial_xi;
                cur_m = trial_m;
                e = std::move(trial_e);
                resid = trial_resid;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
    }
    if (xi) m = cur_m;
    return resid;
}

// ---------------------------------------------------------------------------
// Solver.

namespace {

struct DualOutcome {
    std::optional<DualCertificate> cert;
    double best_margin = 0.0;  // most negative admissible lambda_min(M o K)
};

DualCertificate build_certificate(const Problem& p, const CMatrix& k) {
    DualCertificate cert;
    cert.kernel = 0.5 * (k + k.adjoint());
    cert.kernel_min_eig = numerics::min_eigenvalue(HermitianMatrix(cert.kernel));
    for (const CMatrix& a : p.coeffs)
        cert.member_min_eigs.push_back(
            numerics::min_eigenvalue(HermitianMatrix(hadamard(a, cert.kernel))));
    cert.pick_min_eig =
        numerics::min_eigenvalue(HermitianMatrix(hadamard(p.m, cert.kernel)));
    return cert;
}

// Admissibility margin used while searching: most negative eigenvalue over
// K itself and all A_j o K, relative to their scales.
bool search_admissible(const Problem& p, const CMatrix& k, double tol) {
    HermitianMatrix hk(k);
    if (!numerics::is_psd(hk, tol)) return false;
    for (const CMatrix& a : p.coeffs)
        if (!numerics::is_psd(HermitianMatrix(hadamard(a, k)), tol)) return false;
    return true;
}

double pick_min_eig(const Problem& p, const CMatrix& k) {
    return numerics::min_eigenvalue(HermitianMatrix(hadamard(p.m, k)));
}

// Scale-invariant acceptance threshold: a kernel separates only if its Pick
// matrix dips below what a feas_tol-level decomposition could explain away
// (lambda_min(M o K) >= -||E o K|| >= -feas_tol max|K| under weak duality).
double required_margin(const Problem& p, const CMatrix& k) {
    double kmax = k.cwiseAbs().maxCoeff();
    double floor = 64.0 * std::numeric_limits<double>::epsilon() * p.m.rows() *
                   std::max(1.0, p.m.cwiseAbs().maxCoeff()) * std::max(1.0, kmax);
    return std::max(1.25 * p.feas_tol * kmax, floor);
}

// Certificates are free to scale; export with the absolute margin cleared.
DualCertificate export_certificate(const Problem& p, CMatrix k, double margin,
                                   double cert_margin) {
    double c = std::min(std::max(1.0, 4.0 * cert_margin / std::max(margin, 1e-300)), 1e12);
    return build_certificate(p, CMatrix(c * k));
}

// Minimizes the linear separation functional l(K) = 1*(M o K)1 over
// {K >= 0, A_j o K >= 0} by projected gradient steps; feasibility is
// restored in the lifted variables (K, P_j = A_j o K), where the affine
// projection decouples per entry and the cone projection is a clip.
DualOutcome dual_search(const Problem& p, const SolveOptions& opts, Index budget,
                        const CMatrix* primal_gap) {
    const Index n = p.m.rows();
    const Index mcount = static_cast<Index>(p.coeffs.size());
    const double adm_tol = numerics::kDefaultTol;

    DualOutcome out;
    CMatrix best_k = CMatrix::Identity(n, n);

    std::vector<CMatrix> candidates;
    candidates.push_back(CMatrix::Identity(n, n));
    for (Index j = 0; j < p.psi.rows(); ++j) {
        CVector v = p.psi.row(j).transpose();
        if (v.cwiseAbs().maxCoeff() < 1.0)
            candidates.push_back(kernels::canonical_kernel_values(v));
    }
    for (const CMatrix& k : opts.extra_dual_candidates)
        if (k.rows() == n && k.cols() == n) candidates.push_back(k);

    for (const CMatrix& k : candidates) {
        if (!search_admissible(p, k, adm_tol)) continue;
        double margin = -pick_min_eig(p, k);
        if (-margin < out.best_margin) {
            out.best_margin = -margin;
            best_k = k;
        }
        if (margin > required_margin(p, k)) {
            out.cert = export_certificate(p, k, margin, opts.cert_margin);
            return out;
        }
    }

    CMatrix k = best_k;
    std::vector<CMatrix> lifted(static_cast<size_t>(mcount));

    // Worst relative PSD violation over K and the lifted blocks.
    auto adm_violation = [&]() {
        double v = 0.0;
        HermitianMatrix hk(k);
        v = std::max(v, -numerics::min_eigenvalue(hk) /
                             std::max(1.0, numerics::spectral_norm(hk)));
        for (const CMatrix& a : p.coeffs) {
            HermitianMatrix hp(hadamard(a, k));
            v = std::max(v, -numerics::min_eigenvalue(hp) /
                                 std::max(1.0, numerics::spectral_norm(hp)));
        }
        return v;
    };

    auto refeasibilize = [&](int max_sweeps, double target) {
        for (Index j = 0; j < mcount; ++j)
            lifted[static_cast<size_t>(j)] = hadamard(p.coeffs[static_cast<size_t>(j)], k);
        for (int s = 0; s < max_sweeps; ++s) {
            k = clip_psd(k);
            for (CMatrix& q : lifted) q = clip_psd(q);
            // Affine projection onto P_j = A_j o K, entry by entry.
            for (Index x = 0; x < n; ++x)
                for (Index y = x; y < n; ++y) {
                    Complex acc = k(x, y);
                    for (Index j = 0; j < mcount; ++j)
                        acc += std::conj(p.coeffs[static_cast<size_t>(j)](x, y)) *
                               lifted[static_cast<size_t>(j)](x, y);
                    Complex kv = acc / (1.0 + p.anorm2(x, y));
                    if (x == y) kv = Complex(kv.real(), 0.0);
                    k(x, y) = kv;
                    k(y, x) = std::conj(kv);
                    for (Index j = 0; j < mcount; ++j) {
                        Complex pv = p.coeffs[static_cast<size_t>(j)](x, y) * kv;
                        lifted[static_cast<size_t>(j)](x, y) = pv;
                        lifted[static_cast<size_t>(j)](y, x) = std::conj(pv);
                    }
                }
            if (s % 8 == 7 && adm_violation() <= target) break;
        }
        k = clip_psd(k);
    };

    // Evaluates the current iterate; deep-polishes promising ones.  Polish
    // attempts are rationed: each failure raises the bar for the next one.
    int polish_budget = 14;
    double polish_bar = 0.0;
    auto try_accept = [&]() -> bool {
        double margin = -pick_min_eig(p, k);
        double need = required_margin(p, k);
        if (margin <= std::max(0.25 * need, polish_bar)) return false;
        if (polish_budget-- <= 0) return false;
        polish_bar = 1.5 * margin;
        refeasibilize(400, 1e-13);
        if (!search_admissible(p, k, adm_tol)) return false;
        margin = -pick_min_eig(p, k);
        if (-margin < out.best_margin) {
            out.best_margin = -margin;
            best_k = k;
        }
        if (margin > required_margin(p, k)) {
            out.cert = export_certificate(p, k, margin, opts.cert_margin);
            return true;
        }
        return false;
    };

    // The separating functional at the cone projection of M is the residual
    // direction itself, K = (L(Gamma_best) - M)^T, up to feasibility polish;
    // when the primal stalled near the true projection this start is
    // essentially the certificate already.
    if (primal_gap && primal_gap->norm() > 0) {
        k = -primal_gap->transpose();
        double scale = k.cwiseAbs().maxCoeff();
        if (scale > 0) k *= static_cast<double>(n) / scale;
        refeasibilize(120, 1e-13);
        if (try_accept()) return out;
    } else {
        k = best_k;
    }

    // Separation as a feasibility problem: a kernel separates iff it is
    // admissible and l(K) = sum_{x,y} M(x,y) K(x,y) < 0 (the all-ones
    // quadratic form of M o K).  Run Dykstra between the product PSD cone
    // and the affine set {P_j = A_j o K, l(K) = -s}; on the slice l = -s
    // every admissible point has lambda_min(M o K) <= -s/n.
    const double sep_target = n * (1.0 + p.m.cwiseAbs().maxCoeff());
    auto ell = [&](const CMatrix& kk) {
        Complex acc(0.0, 0.0);
        for (Index x = 0; x < n; ++x)
            for (Index y = 0; y < n; ++y) acc += p.m(x, y) * kk(x, y);
        return acc.real();
    };
    // Weighted Lagrange denominator of the l-constraint under the graph
    // metric (diagonal entry weights 1 + anorm2).
    double denom = 0.0;
    for (Index x = 0; x < n; ++x)
        for (Index y = x; y < n; ++y) {
            double w = 1.0 + p.anorm2(x, y);
            double m2 = std::norm(p.m(x, y));
            denom += (x == y) ? m2 / (2.0 * w) : m2 / w;
        }
    if (denom < 1e-300) return out;

    CMatrix dk = k;
    std::vector<CMatrix> dp(static_cast<size_t>(mcount));
    CMatrix ck = CMatrix::Zero(n, n);  // Dykstra corrections, cone side
    std::vector<CMatrix> cp(static_cast<size_t>(mcount), CMatrix::Zero(n, n));
    for (Index j = 0; j < mcount; ++j)
        dp[static_cast<size_t>(j)] = hadamard(p.coeffs[static_cast<size_t>(j)], dk);

    Index outer = std::clamp<Index>(budget, 200, 4000);
    for (Index t = 0; t < outer; ++t) {
        // Affine projection: entrywise graph least squares, then one Lagrange
        // step onto l(K) = -s, then P = A o K exactly.
        for (Index x = 0; x < n; ++x)
            for (Index y = x; y < n; ++y) {
                Complex acc = dk(x, y);
                for (Index j = 0; j < mcount; ++j)
                    acc += std::conj(p.coeffs[static_cast<size_t>(j)](x, y)) *
                           dp[static_cast<size_t>(j)](x, y);
                Complex kv = acc / (1.0 + p.anorm2(x, y));
                if (x == y) kv = Complex(kv.real(), 0.0);
                dk(x, y) = kv;
                dk(y, x) = std::conj(kv);
            }
        double lambda = (ell(dk) + sep_target) / denom;
        for (Index x = 0; x < n; ++x)
            for (Index y = x; y < n; ++y) {
                double w = 1.0 + p.anorm2(x, y);
                Complex kv = dk(x, y) - lambda * std::conj(p.m(x, y)) / (2.0 * w);
                if (x == y) kv = Complex(kv.real(), 0.0);
                dk(x, y) = kv;
                dk(y, x) = std::conj(kv);
            }
        for (Index j = 0; j < mcount; ++j)
            dp[static_cast<size_t>(j)] = hadamard(p.coeffs[static_cast<size_t>(j)], dk);

        // Cone projection with Dykstra corrections.
        {
            CMatrix pre = dk + ck;
            CMatrix post = clip_psd(pre);
            ck = pre - post;
            dk = post;
        }
        for (Index j = 0; j < mcount; ++j) {
            CMatrix pre = dp[static_cast<size_t>(j)] + cp[static_cast<size_t>(j)];
            CMatrix post = clip_psd(pre);
            cp[static_cast<size_t>(j)] = pre - post;
            dp[static_cast<size_t>(j)] = post;
        }
        if (dk.trace().real() > 1e8) break;

        if (t % 25 == 24 || t == outer - 1) {
            k = dk;
            if (try_accept()) return out;
        }
    }
    return out;
}

// Accelerated projected gradient on f(Gamma) = 1/2 ||sum Gamma_j o A_j - M||^2
// over the product PSD cone.  The problem is convex, so unlike the factored
// refinement this reaches the cone projection of M regardless of block
// ranks; the residual direction there is the separating functional.
void fista_projection(const Problem& p, std::vector<CMatrix>& gammas, Index iters,
                      double stop_resid) {
    const size_t mcount = p.coeffs.size();
    double lip = std::max(p.anorm2.maxCoeff(), 1e-12);
    double eta = 1.0 / lip;

    std::vector<CMatrix> x = gammas, x_prev = gammas, y = gammas;
    std::vector<CMatrix> best = gammas;
    double best_f = residual_norm(p, gammas);
    double f_prev = best_f;
    double t_prev = 1.0;
    Index last_improve = 0;

    for (Index it = 0; it < iters; ++it) {
        CMatrix e = apply_blocks(y, p.coeffs) - p.m;
        for (size_t j = 0; j < mcount; ++j) {
            CMatrix step = y[j] - eta * hadamard(p.coeffs[j].conjugate(), e);
            x[j] = clip_psd(step);
        }
        double f = residual_norm(p, x);
        if (f < best_f * (1.0 - 1e-12)) {
            best_f = f;
            best = x;
            last_improve = it;
        }
        if (best_f <= stop_resid || it - last_improve > 600) break;

        // Function restart: drop the momentum only when a step went uphill.
        bool restart = f > f_prev;
        double t = restart ? 1.0 : 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
        double mix = restart ? 0.0 : (t_prev - 1.0) / t;
        for (size_t j = 0; j < mcount; ++j) {
            CMatrix next = x[j] + mix * (x[j] - x_prev[j]);
            x_prev[j] = x[j];
            y[j] = std::move(next);
        }
        t_prev = t;
        f_prev = f;
    }
    gammas = std::move(best);
}

std::optional<SolveResult> structural_scan(const Problem& p) {
    const Index n = p.m.rows();
    for (Index x = 0; x < n; ++x)
        for (Index y = x; y < n; ++y) {
            if (p.anorm2(x, y) >= 1e-24) continue;
            if (std::abs(p.m(x, y)) <= std::max(p.feas_tol, 1e-12)) continue;
            SolveResult res;
            res.verdict = Verdict::Infeasible;
            res.witness = StructuralWitness{x, y, std::sqrt(p.anorm2(x, y)), p.m(x, y)};
            return res;
        }
    return std::nullopt;
}

}  // namespace

namespace {

SolveResult solve_prepared(const HermitianMatrix& m, const CMatrix& psi_values,
                           const SolveOptions& opts,
                           const std::vector<std::string>* labels);

}  // namespace

SolveResult cone_membership(const HermitianMatrix& m, const CMatrix& psi_values,
                            const SolveOptions& opts,
                            const std::vector<std::string>* labels) {
    const Index n = m.dim();
    if (psi_values.rows() == 0) throw InputError("cone_membership: empty test family");
    if (psi_values.cols() != n)
        throw InputError("cone_membership: family values do not match the node count");
    if (!is_finite(psi_values))
        throw InputError("cone_membership: non-finite family values");
    if (labels && labels->size() != static_cast<size_t>(psi_values.rows()))
        throw InputError("cone_membership: label count does not match the family");

    // The one-term identity M = A_j must be caught on the raw data, before
    // any rescaling perturbs the exact match.
    if (opts.allow_shortcuts && opts.fixed_primal_iters < 0) {
        std::vector<CMatrix> coeffs = coefficient_matrices(psi_values);
        double mmax = std::max(1.0, m.mat().cwiseAbs().maxCoeff());
        for (Index j = 0; j < psi_values.rows(); ++j) {
            if ((m.mat() - coeffs[static_cast<size_t>(j)]).cwiseAbs().maxCoeff() >
                1e-13 * mmax)
                continue;
            AglerDecomposition dec;
            dec.gammas.assign(static_cast<size_t>(psi_values.rows()), CMatrix::Zero(n, n));
            dec.gammas[static_cast<size_t>(j)] = CMatrix::Ones(n, n);
            for (Index i = 0; i < psi_values.rows(); ++i)
                dec.labels.push_back(labels ? (*labels)[static_cast<size_t>(i)]
                                            : "psi" + std::to_string(i));
            double feas_tol =
                opts.feas_tol >= 0.0 ? opts.feas_tol : 1e-8 * (1.0 + m.mat().norm());
            DecompositionReport rep =
                validate_decomposition(dec, psi_values, m.mat(), feas_tol);
            if (!rep.ok) continue;
            SolveResult res;
            res.verdict = Verdict::Feasible;
            res.feas_tol = feas_tol;
            res.cert_margin = opts.cert_margin;
            dec.residual = rep.residual;
            for (const CMatrix& g : dec.gammas) dec.weights.push_back(g.trace().real());
            res.stats.best_residual = rep.residual;
            res.stats.max_node_mass = max_node_mass(dec.gammas);
            res.stats.total_mass = total_mass(dec.gammas);
            res.decomposition = std::move(dec);
            return res;
        }
    }

    // Rescale to unit diagonal when the node scales are lopsided; the cone is
    // closed under diagonal conjugation, so the verdict transfers, and both
    // projection schemes converge much faster on the balanced problem.
    RVector diag = m.mat().diagonal().real();
    double dmin = diag.minCoeff(), dmax = diag.maxCoeff();
    bool balance = dmin > 1e-12 * std::max(1.0, dmax) && dmax > 16.0 * dmin;
    if (!balance) return solve_prepared(m, psi_values, opts, labels);

    RVector d = diag.cwiseSqrt().cwiseInverse();
    CMatrix scaled = d.asDiagonal() * m.mat() * d.asDiagonal();
    SolveOptions inner = opts;
    if (opts.feas_tol >= 0.0) {
        double shrink = d.minCoeff() * d.minCoeff();
        inner.feas_tol = opts.feas_tol * std::min(1.0, shrink);
    }
    SolveResult res = solve_prepared(HermitianMatrix(scaled), psi_values, inner, labels);

    double feas_tol = opts.feas_tol >= 0.0 ? opts.feas_tol : 1e-8 * (1.0 + m.mat().norm());
    res.feas_tol = feas_tol;
    RVector dinv = d.cwiseInverse();
    if (res.decomposition) {
        for (CMatrix& g : res.decomposition->gammas)
            g = dinv.asDiagonal() * g * dinv.asDiagonal();
        DecompositionReport rep =
            validate_decomposition(*res.decomposition, psi_values, m.mat(), feas_tol);
        res.decomposition->residual = rep.residual;
        res.decomposition->weights.clear();
        for (const CMatrix& g : res.decomposition->gammas)
            res.decomposition->weights.push_back(g.trace().real());
        res.stats.best_residual = rep.residual;
        res.stats.max_node_mass = max_node_mass(res.decomposition->gammas);
        res.stats.total_mass = total_mass(res.decomposition->gammas);
        if (res.verdict == Verdict::Feasible && !rep.ok) res.verdict = Verdict::Undecided;
    }
    if (res.certificate) {
        // M'' o K'' equals M o (D K'' D); conjugate the kernel back.
        Problem orig;
        orig.m = m.mat();
        orig.coeffs = coefficient_matrices(psi_values);
        *res.certificate = build_certificate(
            orig, CMatrix(d.asDiagonal() * res.certificate->kernel * d.asDiagonal()));
    }
    return res;
}

namespace {

SolveResult solve_prepared(const HermitianMatrix& m, const CMatrix& psi_values,
                           const SolveOptions& opts,
                           const std::vector<std::string>* labels) {
    const Index n = m.dim();
    const Index mcount = psi_values.rows();

    Problem p;
    p.m = m.mat();
    p.psi = psi_values;
    p.coeffs = coefficient_matrices(psi_values);
    p.scale = 1.0 + p.m.norm();
    p.feas_tol = opts.feas_tol >= 0.0 ? opts.feas_tol : 1e-8 * p.scale;
    p.anorm2 = Eigen::MatrixXd::Zero(n, n);
    for (const CMatrix& a : p.coeffs) p.anorm2 += a.cwiseAbs2();
    if (labels) {
        p.labels = *labels;
    } else {
        for (Index j = 0; j < mcount; ++j) p.labels.push_back("psi" + std::to_string(j));
    }

    SolveResult res;
    res.feas_tol = p.feas_tol;
    res.cert_margin = opts.cert_margin;

    // Boundedness scale from the cone bound ||Gamma(x,x)|| <= ||M|| / eps.
    double eps = std::numeric_limits<double>::infinity();
    for (Index x = 0; x < n; ++x) {
        double worst = 0.0;
        for (Index j = 0; j < mcount; ++j)
            worst = std::max(worst, std::abs(psi_values(j, x)));
        eps = std::min(eps, 1.0 - worst * worst);
    }
    if (eps > 1e-15)
        res.stats.mass_bound = numerics::spectral_norm(m) / eps;

    if (auto structural = structural_scan(p)) {
        structural->feas_tol = p.feas_tol;
        structural->cert_margin = opts.cert_margin;
        structural->stats.mass_bound = res.stats.mass_bound;
        return *structural;
    }

    auto finalize_feasible = [&](std::vector<CMatrix> gammas) {
        AglerDecomposition dec = make_decomposition(p, std::move(gammas));
        DecompositionReport rep =
            validate_decomposition(dec, psi_values, p.m, p.feas_tol);
        if (!rep.ok) return false;
        res.verdict = Verdict::Feasible;
        res.stats.best_residual = rep.residual;
        res.stats.max_node_mass = max_node_mass(dec.gammas);
        res.stats.total_mass = total_mass(dec.gammas);
        res.stats.mass_flag =
            res.stats.max_node_mass > opts.mass_bound_factor * res.stats.mass_bound;
        dec.residual = rep.residual;
        res.decomposition = std::move(dec);
        return true;
    };

    if (opts.allow_shortcuts && opts.fixed_primal_iters < 0) {
        // One-term identity M = A_j: Gamma_j = all-ones.
        double mmax = std::max(1.0, p.m.cwiseAbs().maxCoeff());
        for (Index j = 0; j < mcount; ++j) {
            if ((p.m - p.coeffs[j]).cwiseAbs().maxCoeff() <= 1e-13 * mmax) {
                std::vector<CMatrix> gammas(mcount, CMatrix::Zero(n, n));
                gammas[j] = CMatrix::Ones(n, n);
                if (finalize_feasible(std::move(gammas))) return res;
            }
        }
        // PSD target: Gamma = M o S_j for a single member (the cone contains
        // all PSD matrices).
        if (numerics::is_psd(m, 1e-12)) {
            Index best_j = -1;
            double best = 1.0;
            for (Index j = 0; j < mcount; ++j) {
                double worst = p.psi.row(j).cwiseAbs().maxCoeff();
                if (worst < 1.0 && worst < best) {
                    best = worst;
                    best_j = j;
                }
            }
            if (best_j >= 0) {
                CVector v = p.psi.row(best_j).transpose();
                std::vector<CMatrix> gammas(mcount, CMatrix::Zero(n, n));
                gammas[best_j] = hadamard(p.m, kernels::canonical_kernel_values(v));
                if (numerics::is_psd(HermitianMatrix(gammas[best_j])) &&
                    finalize_feasible(std::move(gammas)))
                    return res;
            }
        }
    }

    // Dykstra alternating projections between the affine slice and the
    // product of PSD cones (corrections only on the cone side).
    std::vector<CMatrix> x(mcount, CMatrix::Zero(n, n));
    std::vector<CMatrix> corr(mcount, CMatrix::Zero(n, n));
    std::vector<CMatrix> best_x = x;
    double best_resid = residual_norm(p, x);
    Index primal_budget =
        opts.fixed_primal_iters >= 0 ? opts.fixed_primal_iters : opts.max_iters;
    Index last_improve = 0;
    bool mass_break = false;

    for (Index it = 1; it <= primal_budget; ++it) {
        res.stats.iterations = it;
        project_affine(p, x);
        for (Index j = 0; j < mcount; ++j) {
            CMatrix pre = x[j] + corr[j];
            CMatrix post = clip_psd(pre);
            corr[j] = pre - post;
            x[j] = post;
        }
        double resid = residual_norm(p, x);
        if (resid < best_resid * (1.0 - 1e-9)) {
            best_resid = resid;
            best_x = x;
            last_improve = it;
        }
        double mass = max_node_mass(x);
        if (mass > opts.mass_bound_factor * res.stats.mass_bound) {
            res.stats.mass_flag = true;
            if (opts.fixed_primal_iters < 0 && it > 200) {
                mass_break = true;
                break;
            }
        }
        if (opts.fixed_primal_iters < 0) {
            if (resid <= 0.25 * p.feas_tol) break;
            if (it - last_improve > 600) break;
        }
    }

    res.stats.best_residual = best_resid;
    res.stats.max_node_mass = max_node_mass(best_x);
    res.stats.total_mass = total_mass(best_x);

    if (opts.fixed_primal_iters >= 0) {
        res.verdict = Verdict::Undecided;
        res.decomposition = make_decomposition(p, best_x);
        return res;
    }

    // Gauss-Newton polish in factored form; blocks stay PSD by construction.
    // A feasible instance is driven to an essentially exact decomposition; an
    // infeasible one lands at the cone point nearest to M, whose residual
    // direction is exactly the separating functional the dual phase needs.
    if (opts.polish && !mass_break) {
        auto polish_from = [&](std::vector<CMatrix> factors, int steps) {
            CMatrix mcopy = p.m;
            refine_factored(factors, p.coeffs, mcopy, nullptr, steps);
            std::vector<CMatrix> polished;
            polished.reserve(factors.size());
            for (const CMatrix& h : factors) polished.push_back(h * h.adjoint());
            double polished_resid = residual_norm(p, polished);
            if (polished_resid < best_resid) {
                best_resid = polished_resid;
                best_x = std::move(polished);
                res.stats.best_residual = best_resid;
            }
        };
        std::vector<CMatrix> factors;
        factors.reserve(static_cast<size_t>(mcount));
        for (const CMatrix& g : best_x)
            factors.push_back(numerics::factor_psd(HermitianMatrix(g), 1e-9));
        polish_from(std::move(factors), 24);
        // The iterate's factors pin the block ranks.  When that polish stays
        // far from feasible, take the convex route to the cone projection and
        // sharpen its tail with a second factored refinement.
        if (best_resid > 100.0 * p.feas_tol) {
            std::vector<CMatrix> proj = best_x;
            fista_projection(p, proj, std::clamp<Index>(opts.max_iters / 8, 500, 4000),
                             0.25 * p.feas_tol);
            double proj_resid = residual_norm(p, proj);
            if (proj_resid < best_resid) {
                best_resid = proj_resid;
                best_x = proj;
                res.stats.best_residual = best_resid;
            }
            std::vector<CMatrix> refactors;
            refactors.reserve(proj.size());
            for (const CMatrix& g : proj)
                refactors.push_back(numerics::factor_psd(HermitianMatrix(g), 1e-9));
            polish_from(std::move(refactors), 24);
        }
    }

    if (best_resid <= p.feas_tol && finalize_feasible(best_x)) return res;

    Index dual_budget = std::clamp<Index>(opts.max_iters / 10, 100, 2000);
    // Residual at the (approximate) cone projection; its negative transpose
    // seeds the dual search.
    CMatrix gap = p.m - apply_blocks(best_x, p.coeffs);
    DualOutcome dual = dual_search(p, opts, dual_budget, &gap);
    res.stats.best_dual_margin = dual.best_margin;
    if (dual.cert) {
        res.verdict = Verdict::Infeasible;
        res.certificate = std::move(dual.cert);
        return res;
    }

    res.verdict = Verdict::Undecided;
    res.decomposition = make_decomposition(p, best_x);
    return res;
}

}  // namespace

SolveResult cone_membership(const HermitianMatrix& m, const TestFamily& fam,
                            const NodeSet& f, const SolveOptions& opts) {
    CMatrix values = testfns::eval_matrix_unchecked(fam, f);
    std::vector<std::string> labels;
    for (Index j = 0; j < fam.size(); ++j) labels.push_back(fam.label(j));
    return cone_membership(m, values, opts, &labels);
}

SolveResult solve_interpolation(const kernels::DataValues& data, const TestFamily& fam,
                                const SolveOptions& opts) {
    for (Index i = 0; i < data.values.size(); ++i)
        if (std::abs(data.values(i)) >= 1.0 - 1e-12)
            throw InputError("solve_interpolation: |xi| at node " + std::to_string(i) +
                             " is not strictly inside the disk");
    testfns::EvalMatrix ev = testfns::eval_matrix(fam, data.nodes);
    std::vector<std::string> labels;
    for (Index j = 0; j < fam.size(); ++j) labels.push_back(fam.label(j));

    SolveOptions local = opts;
    if (const auto* ann = std::get_if<testfns::AnnulusDomain>(&fam.domain())) {
        annulus::AnnulusParams ap{ann->q, ann->b};
        local.extra_dual_candidates.push_back(
            annulus::hardy_gram(data.nodes.scalars(), ap));
    }
    HermitianMatrix m(target_matrix(data.values));
    return cone_membership(m, ev.values, local, &labels);
}

}  // namespace tfpick::agler
