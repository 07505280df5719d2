#include "tfpick/lab.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "tfpick/annulus.hpp"

namespace tfpick::lab {

using agler::SolveOptions;
using agler::SolveResult;
using agler::Verdict;
using numerics::HermitianMatrix;
using testfns::NodeSet;
using testfns::Point;
using testfns::TestFamily;
using testfns::builtin_family;
using testfns::scalar_nodes;
using testfns::scalar_point;

namespace {

void check(DemoReport& rep, const std::string& what, bool ok, std::string detail = "") {
    rep.assertions.push_back({what, ok, std::move(detail)});
}

void fact(DemoReport& rep, const std::string& key, const std::string& value) {
    rep.facts.emplace_back(key, value);
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

void finish(DemoReport& rep) {
    rep.pass = !rep.assertions.empty();
    for (const Assertion& a : rep.assertions) rep.pass = rep.pass && a.ok;
}

}  // namespace

std::string DemoReport::render() const {
    std::ostringstream os;
    os << "demo " << name << (params.empty() ? "" : " (" + params + ")") << "\n";
    for (const auto& [k, v] : facts) os << "  " << k << ": " << v << "\n";
    for (const Assertion& a : assertions)
        os << "  [" << (a.ok ? "ok" : "FAIL") << "] " << a.description
           << (a.detail.empty() ? "" : " -- " + a.detail) << "\n";
    os << (pass ? "PASS" : "FAIL") << "\n";
    return os.str();
}

DemoReport demo_example1(const std::vector<Index>& n_max_list) {
    DemoReport rep;
    rep.name = "example1";
    {
        std::ostringstream os;
        os << "n_max =";
        for (Index n : n_max_list) os << " " << n;
        rep.params = os.str();
    }
    if (n_max_list.empty() || *std::min_element(n_max_list.begin(), n_max_list.end()) < 2)
        throw InputError("demo_example1: n_max values must be >= 2");

    NodeSet nodes = scalar_nodes({0.2, Complex(-0.4, 0.3), Complex(0.0, 0.5)});
    CVector xi(3);
    for (Index i = 0; i < 3; ++i) xi(i) = nodes.point(i)(0);

    CsvTable table{"mass_vs_cutoff", {"n_max", "mass", "residual", "dual_margin"}, {}};
    std::vector<double> masses;
    bool truncated_never_feasible = true;
    for (Index n : n_max_list) {
        TestFamily fam = builtin_family("example1", {.n_max = n});
        kernels::DataValues data(nodes, xi);

        // Fixed-budget diagnostic run for a comparable mass trace.
        SolveOptions diag;
        diag.fixed_primal_iters = 1500;
        SolveResult mass_run = agler::solve_interpolation(data, fam, diag);
        masses.push_back(mass_run.stats.total_mass);

        SolveOptions opts;
        opts.max_iters = 6000;
        SolveResult run = agler::solve_interpolation(data, fam, opts);
        if (run.verdict == Verdict::Feasible) truncated_never_feasible = false;
        table.rows.push_back({static_cast<double>(n), mass_run.stats.total_mass,
                              run.stats.best_residual, run.stats.best_dual_margin});
        fact(rep, "n_max " + std::to_string(n),
             agler::to_string(run.verdict) + ", mass " + fmt(mass_run.stats.total_mass));

        // The member's own restriction is always a one-term solve.
        CVector own(3);
        double scale = std::sqrt(1.0 - 1.0 / static_cast<double>(n));
        for (Index i = 0; i < 3; ++i) own(i) = scale * nodes.point(i)(0);
        SolveResult trivial = agler::solve_interpolation(
            kernels::DataValues(nodes, own), fam);
        check(rep, "xi = psi_" + std::to_string(n) + " solves",
              trivial.verdict == Verdict::Feasible);
    }
    rep.tables.push_back(table);

    bool mass_increasing = true;
    for (size_t i = 1; i < masses.size(); ++i)
        mass_increasing = mass_increasing && masses[i] > masses[i - 1];
    check(rep, "mass diagnostic strictly increases with the cutoff", mass_increasing);

    double first = static_cast<double>(n_max_list.front());
    double last = static_cast<double>(n_max_list.back());
    bool linear_growth = masses.back() >= 0.5 * masses.front() * (last / first);
    check(rep, "truncated runs stay infeasible/undecided or mass grows linearly",
          truncated_never_feasible || linear_growth);

    // Compactified family: adding psi_inf = z gives the one-term solution.
    Index n_top = n_max_list.back();
    TestFamily compact = builtin_family("example1-compactified", {.n_max = n_top});
    SolveResult res = agler::solve_interpolation(kernels::DataValues(nodes, xi), compact);
    check(rep, "compactified family is feasible", res.verdict == Verdict::Feasible);
    if (res.decomposition) {
        check(rep, "compactified residual <= 1e-10",
              res.decomposition->residual <= 1e-10, fmt(res.decomposition->residual));
    }
    // Hand decomposition: Gamma_inf = all-ones, everything else zero.
    agler::AglerDecomposition hand;
    hand.gammas.assign(static_cast<size_t>(compact.size()), CMatrix::Zero(3, 3));
    hand.gammas.back() = CMatrix::Ones(3, 3);
    for (Index j = 0; j < compact.size(); ++j) hand.labels.push_back(compact.label(j));
    hand.weights.assign(static_cast<size_t>(compact.size()), 0.0);
    hand.weights.back() = 3.0;
    CMatrix psi = testfns::eval_matrix_unchecked(compact, nodes);
    check(rep, "one-term decomposition Gamma_inf = [1] validates at 1e-10",
          agler::validate_decomposition(hand, psi, agler::target_matrix(xi), 1e-10).ok);

    finish(rep);
    return rep;
}

DemoReport demo_example2(uint64_t seed) {
    DemoReport rep;
    rep.name = "example2";

    TestFamily fam = builtin_family("example2");
    NodeSet nodes({scalar_point(0.0), scalar_point(1.0)});
    CMatrix psi = testfns::eval_matrix_unchecked(fam, nodes);

    // Structural witness: A(x2,x2) = 1 - 1*1 vanishes exactly.
    std::vector<CMatrix> coeffs = agler::coefficient_matrices(psi);
    check(rep, "A_psi(x2,x2) vanishes exactly", coeffs[0](1, 1) == Complex(0.0, 0.0));

    // Target psi~ = 1 - psi, with the modulus-one value scaled inward.
    CVector xi(2);
    xi << Complex(1.0 - 1e-9, 0.0), Complex(0.0, 0.0);
    CMatrix m = agler::target_matrix(xi);
    check(rep, "M(x2,x2) = 1", std::abs(m(1, 1) - Complex(1.0, 0.0)) < 1e-15);

    SolveResult res = agler::cone_membership(HermitianMatrix(m), psi);
    check(rep, "solver is infeasible for the scaled 1 - psi",
          res.verdict == Verdict::Infeasible);
    bool witness_at_x2 = res.witness && res.witness->row == 1 && res.witness->col == 1;
    check(rep, "structural witness sits at the (x2,x2) entry", witness_at_x2,
          "every cone member has a zero there while the target entry is 1");
    fact(rep, "witness", witness_at_x2
                             ? "entry (x2,x2): coefficients 0, target 1"
                             : "missing");

    // Admissible kernels have vanishing off-diagonal; probe random PSD
    // matrices both ways.
    std::mt19937_64 g(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    bool probes_ok = true;
    for (int trial = 0; trial < 100; ++trial) {
        CMatrix k;
        if (trial % 2 == 0) {
            k = CMatrix::Zero(2, 2);
            k(0, 0) = std::abs(nd(g)) + 0.1;
            k(1, 1) = std::abs(nd(g)) + 0.1;
        } else {
            CMatrix a(2, 2);
            for (Index i = 0; i < 2; ++i)
                for (Index j = 0; j < 2; ++j) a(i, j) = Complex(nd(g), nd(g));
            k = a * a.adjoint();
        }
        bool admissible = kernels::is_admissible_values(k, psi).admissible;
        bool off_diag_zero = std::abs(k(0, 1)) <= 1e-9 * k.cwiseAbs().maxCoeff();
        if (admissible != off_diag_zero) probes_ok = false;
    }
    check(rep, "admissible kernels are exactly those with k(x1,x2) = 0", probes_ok);

    // The member itself remains a one-term solve.
    SolveResult own = agler::cone_membership(HermitianMatrix(coeffs[0]), psi);
    check(rep, "target psi itself is feasible", own.verdict == Verdict::Feasible);

    finish(rep);
    return rep;
}

DemoReport demo_infinite_polydisk(const std::vector<Index>& cutoffs) {
    DemoReport rep;
    rep.name = "infinite-polydisk";
    {
        std::ostringstream os;
        os << "cutoffs =";
        for (Index c : cutoffs) os << " " << c;
        rep.params = os.str();
    }
    if (cutoffs.empty() || *std::min_element(cutoffs.begin(), cutoffs.end()) < 2)
        throw InputError("demo_infinite_polydisk: cutoffs must be >= 2");

    const double limit_value = std::sqrt(0.5);
    CsvTable table{"contradiction_vs_cutoff",
                   {"cutoff", "upper_bound", "dual_margin"},
                   {}};

    for (Index c : cutoffs) {
        TestFamily fam = builtin_family("infinite-polydisk", {.cutoff = c});
        Point z(c), zero = Point::Zero(c);
        for (Index n = 1; n <= c; ++n)
            z(n - 1) = std::sqrt(0.5 * (1.0 - 1.0 / static_cast<double>(n + 1)));
        NodeSet nodes({z, zero});
        CVector xi(2);
        xi << Complex(limit_value, 0.0), Complex(0.0, 0.0);

        // The 2x2 argument: sum_n Gamma_n(z,0) = 1 and positivity force
        // sum_n Gamma_n(z,z) >= 1, while the diagonal equation caps it at
        // (c+1)/(c+2) < 1.
        double min_coeff = 1.0;
        for (Index n = 1; n <= c; ++n)
            min_coeff = std::min(min_coeff, 1.0 - std::norm(z(n - 1)));
        double upper = (1.0 - std::norm(xi(0))) / min_coeff;
        check(rep, "cutoff " + std::to_string(c) + ": mass cap " + fmt(upper) + " < 1",
              upper < 1.0, "contradiction margin " + fmt(1.0 - upper));

        SolveResult res = agler::solve_interpolation(kernels::DataValues(nodes, xi), fam);
        check(rep, "cutoff " + std::to_string(c) + ": solver infeasible or undecided",
              res.verdict != Verdict::Feasible, agler::to_string(res.verdict));
        check(rep, "cutoff " + std::to_string(c) + ": dual certificate found",
              res.verdict == Verdict::Infeasible && res.certificate.has_value());
        table.rows.push_back({static_cast<double>(c), upper,
                              res.stats.best_dual_margin});

        // e_1 as target is trivially feasible.
        CVector e1(2);
        e1 << z(0), Complex(0.0, 0.0);
        SolveResult triv = agler::solve_interpolation(kernels::DataValues(nodes, e1), fam);
        check(rep, "cutoff " + std::to_string(c) + ": target e_1 is feasible",
              triv.verdict == Verdict::Feasible);
    }
    rep.tables.push_back(table);

    // Adding the explicit limit-evaluation member flips the verdict.
    Index c = cutoffs.back();
    TestFamily fam = builtin_family("infinite-polydisk", {.cutoff = c});
    Point z(c), zero = Point::Zero(c);
    for (Index n = 1; n <= c; ++n)
        z(n - 1) = std::sqrt(0.5 * (1.0 - 1.0 / static_cast<double>(n + 1)));
    std::vector<Point> pts = {z, zero};
    CMatrix lim(1, 2);
    lim << Complex(limit_value, 0.0), Complex(0.0, 0.0);
    TestFamily lim_fam = testfns::tabulated_family({"e_chi"}, pts, lim);
    TestFamily extended = fam.with_member(
        {"e_chi", [lim_fam](const Point& x) { return lim_fam.evaluate(0, x); }, true});

    NodeSet nodes(pts);
    CVector xi(2);
    xi << Complex(limit_value, 0.0), Complex(0.0, 0.0);
    SolveResult res =
        agler::solve_interpolation(kernels::DataValues(nodes, xi), extended);
    check(rep, "limit member restores feasibility", res.verdict == Verdict::Feasible);
    if (res.decomposition) {
        CMatrix psi = testfns::eval_matrix_unchecked(extended, nodes);
        check(rep, "limit decomposition validates at 1e-10",
              agler::validate_decomposition(*res.decomposition, psi,
                                            agler::target_matrix(xi), 1e-10)
                  .ok);
    }

    finish(rep);
    return rep;
}

DemoReport demo_annulus_minimality(const AnnulusMinimalityParams& p) {
    DemoReport rep;
    rep.name = "annulus-minimality";
    rep.params = "q=" + fmt(p.q) + " b=" + fmt(p.b.real()) + "+" + fmt(p.b.imag()) +
                 "i grid=" + std::to_string(p.grid) +
                 " hole=" + fmt(p.hole_radius);

    testfns::FamilyParams fp;
    fp.q = p.q;
    fp.b = p.b;
    fp.grid = p.grid;
    TestFamily fam = builtin_family("annulus-theta", fp);
    if (p.t0_index < 0 || p.t0_index >= fam.size())
        throw InputError("demo_annulus_minimality: t0 must index a grid member");

    NodeSet nodes = scalar_nodes({0.55, Complex(-0.7, 0.0), Complex(0.4, 0.35)});
    CVector theta0(3);
    for (Index i = 0; i < 3; ++i)
        theta0(i) = fam.evaluate(p.t0_index, nodes.point(i));

    // Rank of the Pick matrix against the normalized Hardy kernel.
    annulus::AnnulusParams ap{p.q, p.b};
    CMatrix gram = annulus::hardy_gram(nodes.scalars(), ap);
    CMatrix pick = kernels::pick_matrix_values(theta0, gram);
    Index rank = numerics::psd_rank(HermitianMatrix(pick), 1e-7);
    check(rep, "3-node Pick matrix of theta_t0 has rank two", rank == 2,
          "rank " + std::to_string(rank));
    check(rep, "Pick matrix is PSD",
          numerics::is_psd(HermitianMatrix(pick), 1e-7));

    kernels::DataValues data(nodes, theta0);
    SolveResult full = agler::solve_interpolation(data, fam);
    check(rep, "full grid solves (hole radius 0)", full.verdict == Verdict::Feasible);

    CsvTable table{"margin_vs_hole", {"hole_radius", "members_left", "verdict",
                                      "dual_margin"}, {}};
    double base_angle =
        2.0 * M_PI * static_cast<double>(p.t0_index) / static_cast<double>(p.grid);
    std::vector<double> radii = {0.5, 1.0, 2.0, 2.8};
    if (std::find(radii.begin(), radii.end(), p.hole_radius) == radii.end())
        radii.push_back(p.hole_radius);
    for (double radius : radii) {
        std::vector<Index> keep;
        for (Index j = 0; j < fam.size(); ++j) {
            double ang = 2.0 * M_PI * static_cast<double>(j) / static_cast<double>(p.grid);
            double diff = std::abs(std::remainder(ang - base_angle, 2.0 * M_PI));
            if (diff >= radius) keep.push_back(j);
        }
        if (keep.empty()) continue;
        TestFamily holed = fam.subfamily(keep);
        SolveResult res = agler::solve_interpolation(data, holed);
        table.rows.push_back({radius, static_cast<double>(keep.size()),
                              res.verdict == Verdict::Feasible
                                  ? 1.0
                                  : (res.verdict == Verdict::Infeasible ? -1.0 : 0.0),
                              res.stats.best_dual_margin});
        if (radius == p.hole_radius) {
            check(rep, "holed grid is infeasible or undecided",
                  res.verdict != Verdict::Feasible, agler::to_string(res.verdict));
            fact(rep, "holed dual margin", fmt(res.stats.best_dual_margin));
        }
    }
    rep.tables.push_back(table);

    finish(rep);
    return rep;
}

DemoReport demo_coarsening(const CoarseningParams& p) {
    DemoReport rep;
    rep.name = "coarsening";
    rep.params = "grid=" + std::to_string(p.grid);

    testfns::FamilyParams fp;
    fp.q = p.q;
    fp.b = p.b;
    fp.grid = p.grid;
    TestFamily fam = builtin_family("annulus-theta", fp);
    NodeSet nodes = scalar_nodes({0.55, Complex(-0.62, 0.15), Complex(0.12, 0.6)});

    Index ja = p.grid / 8, jb = (5 * p.grid) / 8;
    CVector xi(3);
    for (Index i = 0; i < 3; ++i)
        xi(i) = 0.45 * (fam.evaluate(ja, nodes.point(i)) +
                        fam.evaluate(jb, nodes.point(i)));
    kernels::DataValues data(nodes, xi);
    SolveOptions opts;
    opts.allow_shortcuts = false;  // spread the measure across the grid
    SolveResult res = agler::solve_interpolation(data, fam, opts);
    check(rep, "measure colligation instance solves", res.verdict == Verdict::Feasible);
    if (res.verdict != Verdict::Feasible) {
        finish(rep);
        return rep;
    }
    realize::Colligation col =
        realize::build_colligation(*res.decomposition, data, fam, res.feas_tol);
    fact(rep, "colligation dimension", std::to_string(col.env_dim()));

    NodeSet probe = scalar_nodes({0.5, Complex(0.0, -0.55), Complex(-0.38, 0.38),
                                  Complex(0.61, -0.2), Complex(-0.2, -0.52)});
    CsvTable table{"coarsening", {"cells", "epsilon", "z_drift", "drift", "bound"}, {}};
    double prev_drift = std::numeric_limits<double>::infinity();
    bool bounds_ok = true, monotone = true, z_ok = true;
    for (Index cells : p.cell_counts) {
        if (p.grid % cells != 0) throw InputError("demo_coarsening: cells must divide grid");
        Index width = p.grid / cells;
        std::vector<std::vector<Index>> partition;
        for (Index c = 0; c < cells; ++c) {
            std::vector<Index> cell;
            for (Index j = 0; j < width; ++j) cell.push_back(c * width + j);
            partition.push_back(cell);
        }
        realize::CoarsenReport cr = realize::coarsen_representation(col, partition, probe);
        table.rows.push_back({static_cast<double>(cells), cr.epsilon, cr.max_z_drift,
                              cr.max_transfer_drift, cr.drift_bound});
        bounds_ok = bounds_ok && cr.max_transfer_drift <= cr.drift_bound;
        z_ok = z_ok && cr.max_z_drift <= cr.epsilon + 1e-14;
        monotone = monotone && cr.max_transfer_drift <= prev_drift + 1e-12;
        prev_drift = cr.max_transfer_drift;
    }
    rep.tables.push_back(table);
    check(rep, "transfer drift bounded by the partition estimate", bounds_ok);
    check(rep, "Z-drift bounded by epsilon", z_ok);
    check(rep, "drift decreases monotonically under refinement", monotone);

    finish(rep);
    return rep;
}

std::vector<std::string> demo_names() {
    return {"example1", "example2", "infinite-polydisk", "annulus-minimality",
            "coarsening"};
}

DemoReport run_demo(const std::string& name, uint64_t seed) {
    if (name == "example1") return demo_example1();
    if (name == "example2") return demo_example2(seed + 7);
    if (name == "infinite-polydisk") return demo_infinite_polydisk();
    if (name == "annulus-minimality") return demo_annulus_minimality();
    if (name == "coarsening") return demo_coarsening();
    throw InputError("unknown demo '" + name + "'");
}

}  // namespace tfpick::lab
