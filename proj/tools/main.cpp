#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "tfpick/io.hpp"
#include "tfpick/lab.hpp"

using namespace tfpick;

namespace {

namespace fs = std::filesystem;

int verdict_exit(agler::Verdict v) {
    switch (v) {
        case agler::Verdict::Feasible: return 0;
        case agler::Verdict::Infeasible: return 1;
        default: return 2;
    }
}

std::string solve_report(const agler::SolveResult& res) {
    std::ostringstream os;
    os.precision(12);
    os << "verdict: " << agler::to_string(res.verdict) << "\n";
    os << "feas_tol: " << res.feas_tol << "\n";
    os << "cert_margin: " << res.cert_margin << "\n";
    os << "iterations: " << res.stats.iterations << "\n";
    os << "best_residual: " << res.stats.best_residual << "\n";
    os << "best_dual_margin: " << res.stats.best_dual_margin << "\n";
    os << "max_node_mass: " << res.stats.max_node_mass << "\n";
    os << "mass_bound: " << res.stats.mass_bound << "\n";
    os << "mass_flag: " << (res.stats.mass_flag ? "yes" : "no") << "\n";
    if (res.witness) {
        os << "structural_witness: entry (" << res.witness->row << ","
           << res.witness->col << ") coefficients vanish, target "
           << res.witness->target_entry.real();
        double im = res.witness->target_entry.imag();
        os << (im < 0 ? "-" : "+") << std::abs(im) << "i\n";
    }
    if (res.certificate) {
        os << "certificate_pick_min_eig: " << res.certificate->pick_min_eig << "\n";
        os << "certificate_kernel_min_eig: " << res.certificate->kernel_min_eig << "\n";
    }
    if (res.decomposition) {
        os << "decomposition_residual: " << res.decomposition->residual << "\n";
        os << "active_blocks:";
        for (size_t j = 0; j < res.decomposition->gammas.size(); ++j)
            if (res.decomposition->weights[j] > 1e-12)
                os << " " << res.decomposition->labels[j];
        os << "\n";
    }
    return os.str();
}

agler::SolveResult run_solve(const io::Problem& problem) {
    kernels::DataValues data = io::problem_data(problem);
    return agler::solve_interpolation(data, problem.family, problem.options);
}

void emit_solve_artifacts(const agler::SolveResult& res, const std::string& out) {
    io::write_text_atomic((fs::path(out) / "report.txt").string(), solve_report(res));
    if (res.decomposition)
        io::save_decomposition((fs::path(out) / "decomposition.txt").string(),
                               *res.decomposition);
    if (res.certificate)
        io::save_certificate((fs::path(out) / "certificate.txt").string(),
                             *res.certificate);
}

int cmd_solve(const std::string& path, const io::CliOverrides& overrides,
              const std::string& out) {
    io::Problem problem = io::load_problem(path, overrides);
    agler::SolveResult res = run_solve(problem);
    std::cout << solve_report(res);
    emit_solve_artifacts(res, out);
    std::cout << "artifacts written to " << out << "\n";
    return verdict_exit(res.verdict);
}

// Deterministic commuting-contraction tuples for the post-realization
// representation check.
double representation_check(const realize::Colligation& col, uint64_t seed, bool strict) {
    std::mt19937_64 g(seed + 1);
    std::normal_distribution<double> nd(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        Index d = 3;
        CMatrix base(d, d);
        for (Index i = 0; i < d; ++i)
            for (Index j = 0; j < d; ++j) base(i, j) = Complex(nd(g), nd(g));
        double cap = strict ? 0.9 : 1.0;
        base *= cap / numerics::operator_norm(base);
        realize::Representation rep;
        for (Index j = 0; j < col.family().size(); ++j) {
            CMatrix t = 0.5 * base + 0.35 * base * base +
                        0.1 * CMatrix::Identity(d, d);
            t *= cap / numerics::operator_norm(t);
            rep.members.push_back(t);
            base = t;  // commuting chain: each is a polynomial in the first
        }
        realize::RepEval ev = realize::transfer_eval_rep(col, rep, strict);
        worst = std::max(worst, ev.regularized ? ev.norm_regularized : ev.norm);
    }
    return worst;
}

int cmd_realize(const std::string& path, const io::CliOverrides& overrides,
                const std::string& out, uint64_t seed, bool strict) {
    io::Problem problem = io::load_problem(path, overrides);
    kernels::DataValues data = io::problem_data(problem);
    agler::SolveResult res = agler::solve_interpolation(data, problem.family,
                                                        problem.options);
    std::cout << solve_report(res);
    emit_solve_artifacts(res, out);
    if (res.verdict != agler::Verdict::Feasible) {
        std::cout << "no realization: instance is not feasible\n";
        return verdict_exit(res.verdict);
    }
    realize::Colligation col = realize::build_colligation(
        *res.decomposition, data, problem.family, res.feas_tol);
    io::save_colligation((fs::path(out) / "colligation.txt").string(), col,
                         problem.family_spec);

    std::ostringstream csv;
    csv.precision(16);
    csv << "node,target_re,target_im,transfer_re,transfer_im,abs_error\n";
    double worst = 0.0;
    for (Index i = 0; i < problem.nodes.size(); ++i) {
        Complex w = realize::transfer_eval(col, problem.nodes.point(i));
        Complex t = (*problem.targets)(i);
        worst = std::max(worst, std::abs(w - t));
        csv << i << "," << t.real() << "," << t.imag() << "," << w.real() << ","
            << w.imag() << "," << std::abs(w - t) << "\n";
    }
    io::write_text_atomic((fs::path(out) / "node_residuals.csv").string(), csv.str());
    double rep_norm = representation_check(col, seed, strict);
    std::cout << "colligation: env_dim " << col.env_dim() << ", max node error "
              << worst << "\n";
    std::cout << "representation check (" << (strict ? "strict" : "contractive")
              << "): max norm " << rep_norm << "\n";
    return 0;
}

int cmd_verify(const std::string& type, const std::string& problem_path,
               const std::string& artifact, const io::CliOverrides& overrides) {
    io::Problem problem = io::load_problem(problem_path, overrides);
    CMatrix psi = testfns::eval_matrix_unchecked(problem.family, problem.nodes);
    if (type == "decomposition") {
        kernels::DataValues data = io::problem_data(problem);
        CMatrix m = agler::target_matrix(data.values);
        double feas_tol = problem.options.feas_tol >= 0.0
                              ? problem.options.feas_tol
                              : 1e-8 * (1.0 + m.norm());
        agler::AglerDecomposition dec = io::load_decomposition(artifact);
        agler::DecompositionReport rep =
            agler::validate_decomposition(dec, psi, m, feas_tol);
        std::cout << "residual: " << rep.residual << "\nmin_block_eig: "
                  << rep.min_block_eig << "\nvalid: " << (rep.ok ? "yes" : "no") << "\n";
        return rep.ok ? 0 : 1;
    }
    if (type == "certificate") {
        kernels::DataValues data = io::problem_data(problem);
        CMatrix m = agler::target_matrix(data.values);
        agler::DualCertificate cert = io::load_certificate(artifact);
        agler::CertificateReport rep = agler::validate_certificate(
            cert, psi, m, numerics::kDefaultTol, problem.options.cert_margin);
        std::cout << "kernel_min_eig: " << rep.kernel_min_eig
                  << "\nworst_member_eig: " << rep.worst_member_eig
                  << "\npick_min_eig: " << rep.pick_min_eig
                  << "\nvalid: " << (rep.ok ? "yes" : "no") << "\n";
        return rep.ok ? 0 : 1;
    }
    if (type == "colligation") {
        realize::Colligation col = io::load_colligation(artifact);
        double worst = 0.0;
        if (problem.targets) {
            for (Index i = 0; i < problem.nodes.size(); ++i)
                worst = std::max(worst,
                                 std::abs(realize::transfer_eval(col, problem.nodes.point(i)) -
                                          (*problem.targets)(i)));
            std::cout << "max node error: " << worst << "\n";
        }
        bool ok = worst <= 1e-7;
        std::cout << "unitarity: ok\nvalid: " << (ok ? "yes" : "no") << "\n";
        return ok ? 0 : 1;
    }
    throw InputError("verify: unknown artifact type '" + type + "'");
}

int cmd_kernel_check(const std::string& path, const io::CliOverrides& overrides,
                     const std::string& kernel_csv, const std::string& kernel_name,
                     const std::string& save_kernel) {
    io::Problem problem = io::load_problem(path, overrides);
    const Index n = problem.nodes.size();
    CMatrix k;
    if (!kernel_csv.empty()) {
        k = io::load_gram_csv(kernel_csv);
        if (k.rows() != n)
            throw InputError("kernel-check: gram size does not match the node count");
    } else if (kernel_name == "toeplitz") {
        k = CMatrix::Identity(n, n);
    } else if (kernel_name == "szego") {
        std::vector<Complex> zs = problem.nodes.scalars();
        CVector v(n);
        for (Index i = 0; i < n; ++i) v(i) = zs[static_cast<size_t>(i)];
        k = kernels::canonical_kernel_values(v);
    } else if (kernel_name == "hardy") {
        const auto* ann = std::get_if<testfns::AnnulusDomain>(&problem.family.domain());
        if (!ann) throw InputError("kernel-check: 'hardy' needs an annulus family");
        k = annulus::hardy_gram(problem.nodes.scalars(), {ann->q, ann->b});
    } else {
        throw InputError("kernel-check: provide --kernel or a known --kernel-name");
    }
    if (!save_kernel.empty()) io::save_gram_csv(save_kernel, k);

    CMatrix psi = testfns::eval_matrix_unchecked(problem.family, problem.nodes);
    kernels::AdmissibilityReport rep = kernels::is_admissible_values(k, psi);
    std::cout.precision(12);
    std::cout << "kernel_min_eig: " << rep.kernel_min_eig << "\n";
    for (size_t j = 0; j < rep.member_min_eigs.size(); ++j)
        std::cout << "member " << problem.family.label(static_cast<Index>(j))
                  << ": min_eig " << rep.member_min_eigs[j] << "\n";
    std::cout << "admissible: " << (rep.admissible ? "yes" : "no") << "\n";
    return rep.admissible ? 0 : 1;
}

int cmd_annulus_theta(double q, double b_re, double b_im, Index grid,
                      const std::string& out, int samples) {
    annulus::AnnulusParams params{q, Complex(b_re, b_im)};
    params.validate();
    std::ostringstream boundary, zeros;
    boundary << "t_index,t_angle,circle,sample_angle,abs_modulus_minus_1\n";
    zeros << "t_index,t_angle,zero_re,zero_im,expected_re,expected_im,abs_error\n";
    boundary.precision(16);
    zeros.precision(16);
    bool all_ok = true;
    for (Index kidx = 0; kidx < grid; ++kidx) {
        double angle = 2.0 * M_PI * static_cast<double>(kidx) / static_cast<double>(grid);
        annulus::InnerFunction f =
            annulus::make_vartheta(params, std::polar(1.0, angle));
        annulus::InnerReport rep = annulus::verify_inner(f, samples);
        for (int s = 0; s < samples; ++s) {
            double a = 2.0 * M_PI * s / samples;
            Complex e = std::polar(1.0, a);
            boundary << kidx << "," << angle << ",outer," << a << ","
                     << std::abs(std::abs(f(e)) - 1.0) << "\n";
            boundary << kidx << "," << angle << ",inner," << a << ","
                     << std::abs(std::abs(f(params.q * e)) - 1.0) << "\n";
        }
        std::vector<Complex> expected = {params.b, f.zero_second()};
        for (const Complex& z : rep.zeros) {
            double best = 1e9;
            Complex match = expected[0];
            for (const Complex& e : expected)
                if (std::abs(z - e) < best) {
                    best = std::abs(z - e);
                    match = e;
                }
            zeros << kidx << "," << angle << "," << z.real() << "," << z.imag() << ","
                  << match.real() << "," << match.imag() << "," << best << "\n";
        }
        all_ok = all_ok && rep.pass;
        std::cout << "t[" << kidx << "] angle " << angle << ": "
                  << (rep.pass ? "ok" : "FAIL") << " (boundary "
                  << std::max(rep.boundary_residual_outer, rep.boundary_residual_inner)
                  << ", winding " << rep.winding << ", zero error " << rep.zero_error
                  << ")\n";
    }
    io::write_text_atomic((fs::path(out) / "theta_boundary.csv").string(),
                          boundary.str());
    io::write_text_atomic((fs::path(out) / "theta_zeros.csv").string(), zeros.str());
    std::cout << "csv written to " << out << "\n";
    return all_ok ? 0 : 1;
}

int cmd_demo(const std::string& name, uint64_t seed, const std::string& out) {
    lab::DemoReport rep = lab::run_demo(name, seed);
    std::cout << rep.render();
    std::ostringstream report;
    report << rep.render();
    io::write_text_atomic((fs::path(out) / (name + "_report.txt")).string(),
                          report.str());
    for (const lab::CsvTable& t : rep.tables) {
        std::ostringstream csv;
        csv.precision(16);
        for (size_t c = 0; c < t.header.size(); ++c)
            csv << (c ? "," : "") << t.header[c];
        csv << "\n";
        for (const auto& row : t.rows) {
            for (size_t c = 0; c < row.size(); ++c) csv << (c ? "," : "") << row[c];
            csv << "\n";
        }
        io::write_text_atomic((fs::path(out) / (name + "_" + t.name + ".csv")).string(),
                              csv.str());
    }
    return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Agler-Pick interpolation over test-function families"};
    app.require_subcommand(1);
    // Global flags remain usable after the subcommand name.
    app.fallthrough();

    io::CliOverrides overrides;
    std::string out = "tfpick_out";
    double tol = -1.0;
    Index max_iters = -1;
    Index grid = -1;
    uint64_t seed = 0;
    bool strict = false;
    app.add_option("--tol", tol, "feasibility tolerance override");
    app.add_option("--max-iters", max_iters, "iteration budget override");
    app.add_option("--grid", grid, "family grid-size override");
    app.add_option("--seed", seed, "seed for randomized demos");
    app.add_option("--out", out, "output directory");
    app.add_flag("--strict", strict, "strict representation mode");

    std::string problem_path, artifact, type;
    std::string kernel_csv, kernel_name, save_kernel;
    std::string demo_name;
    double q = 0.3, b_re = 0.5, b_im = 0.0;
    Index theta_grid = 64;
    int samples = 512;

    CLI::App* solve = app.add_subcommand("solve", "decide Agler-Pick interpolability");
    solve->fallthrough();
    solve->add_option("problem", problem_path, "problem JSON file")->required();

    CLI::App* realize_cmd =
        app.add_subcommand("realize", "solve and build the transfer-function realization");
    realize_cmd->fallthrough();
    realize_cmd->add_option("problem", problem_path, "problem JSON file")->required();

    CLI::App* verify = app.add_subcommand("verify", "re-validate an artifact file");
    verify->fallthrough();
    verify->add_option("--type", type, "decomposition|certificate|colligation")
        ->required();
    verify->add_option("problem", problem_path, "problem JSON file")->required();
    verify->add_option("artifact", artifact, "artifact file")->required();

    CLI::App* kcheck = app.add_subcommand("kernel-check", "admissibility of a kernel Gram");
    kcheck->fallthrough();
    kcheck->add_option("problem", problem_path, "problem JSON file")->required();
    kcheck->add_option("--kernel", kernel_csv, "kernel Gram CSV (row-major re,im pairs)");
    kcheck->add_option("--kernel-name", kernel_name, "toeplitz|szego|hardy");
    kcheck->add_option("--save-kernel", save_kernel, "export the checked Gram as CSV");

    CLI::App* theta = app.add_subcommand("annulus-theta",
                                         "boundary/zero diagnostics of the theta family");
    theta->fallthrough();
    theta->add_option("--q", q, "inner radius");
    theta->add_option("--b-re", b_re, "base point, real part");
    theta->add_option("--b-im", b_im, "base point, imaginary part");
    theta->add_option("--theta-grid", theta_grid, "number of t samples");
    theta->add_option("--samples", samples, "boundary samples per circle");

    CLI::App* demo = app.add_subcommand("demo", "run a named demo");
    demo->fallthrough();
    demo->add_option("name", demo_name, "demo name (see 'demo list')")->required();

    try {
        app.parse(argc, argv);
        if (tol >= 0.0) overrides.tol = tol;
        if (max_iters > 0) overrides.max_iters = max_iters;
        if (grid > 0) overrides.grid = grid;
        overrides.seed = seed;

        if (solve->parsed()) return cmd_solve(problem_path, overrides, out);
        if (realize_cmd->parsed())
            return cmd_realize(problem_path, overrides, out, seed, strict);
        if (verify->parsed()) return cmd_verify(type, problem_path, artifact, overrides);
        if (kcheck->parsed())
            return cmd_kernel_check(problem_path, overrides, kernel_csv, kernel_name,
                                    save_kernel);
        if (theta->parsed())
            return cmd_annulus_theta(q, b_re, b_im, theta_grid, out, samples);
        if (demo->parsed()) {
            if (demo_name == "list") {
                for (const std::string& n : lab::demo_names()) std::cout << n << "\n";
                return 0;
            }
            return cmd_demo(demo_name, seed, out);
        }
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 3;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const PreconditionError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 3;
}
