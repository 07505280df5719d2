#include <doctest.h>

#include "test_util.hpp"
#include "tfpick/agler.hpp"

using namespace tfpick;
using namespace tfpick::agler;
using tfpick::numerics::HermitianMatrix;
using tfpick::testfns::NodeSet;
using tfpick::testfns::Point;
using tfpick::testfns::TestFamily;
using tfpick::testfns::builtin_family;
using tfpick::testfns::scalar_nodes;
using tfpick::testfns::scalar_point;

namespace {

NodeSet random_bidisk_nodes(std::mt19937_64& g, int count, double radius = 0.8) {
    std::vector<Point> pts;
    while (static_cast<int>(pts.size()) < count) {
        Point p(2);
        p << testutil::random_complex(g, radius), testutil::random_complex(g, radius);
        bool ok = true;
        for (const Point& q : pts)
            if ((q - p).norm() < 1e-3) ok = false;
        if (ok) pts.push_back(p);
    }
    return NodeSet(pts);
}

CVector values_z1z2(const NodeSet& f) {
    CVector xi(f.size());
    for (Index i = 0; i < f.size(); ++i) xi(i) = f.point(i)(0) * f.point(i)(1);
    return xi;
}

}  // namespace

TEST_SUITE_BEGIN("agler");

TEST_CASE("any PSD matrix is in the cone") {
    auto g = testutil::rng(41);
    TestFamily fam = builtin_family("polydisk", {.dim = 2});
    NodeSet f = random_bidisk_nodes(g, 3);
    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);

    for (int trial = 0; trial < 5; ++trial) {
        HermitianMatrix m(testutil::random_psd(g, 3));
        SolveResult res = cone_membership(m, psi);
        REQUIRE(res.verdict == Verdict::Feasible);
        CHECK(validate_decomposition(*res.decomposition, psi, m.mat(), res.feas_tol).ok);

        SolveOptions hard;
        hard.allow_shortcuts = false;
        hard.max_iters = 20000;
        SolveResult res2 = cone_membership(m, psi, hard);
        CHECK(res2.verdict == Verdict::Feasible);
    }
}

TEST_CASE("a member's own target has the one-term decomposition") {
    auto g = testutil::rng(42);
    TestFamily fam = builtin_family("polydisk", {.dim = 2});
    NodeSet f = random_bidisk_nodes(g, 4);
    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
    CVector v = psi.row(1).transpose();
    HermitianMatrix m(target_matrix(v));
    SolveResult res = cone_membership(m, psi);
    REQUIRE(res.verdict == Verdict::Feasible);

    // Hand decomposition: Gamma_1 = all-ones, the rest zero.
    AglerDecomposition hand;
    hand.gammas = {CMatrix::Zero(4, 4), CMatrix::Ones(4, 4)};
    hand.labels = {"z1", "z2"};
    hand.weights = {0.0, 4.0};
    CHECK(validate_decomposition(hand, psi, m.mat(), 1e-12).ok);
}

TEST_CASE("example2 cone membership fails structurally") {
    TestFamily fam = builtin_family("example2");
    NodeSet f({scalar_point(0.0), scalar_point(1.0)});
    CMatrix m(2, 2);
    m << 1.0, 1.0, 1.0, -1.0;
    SolveResult res = cone_membership(HermitianMatrix(m), fam, f);
    REQUIRE(res.verdict == Verdict::Infeasible);
    REQUIRE(res.witness.has_value());
    CHECK(res.witness->row == 1);
    CHECK(res.witness->col == 1);
}

TEST_CASE("bidisk z1 z2 interpolation is feasible; the algebraic identity validates") {
    auto g = testutil::rng(43);
    TestFamily fam = builtin_family("polydisk", {.dim = 2});
    NodeSet f = random_bidisk_nodes(g, 4);
    kernels::DataValues data(f, values_z1z2(f));
    SolveResult res = solve_interpolation(data, fam);
    REQUIRE(res.verdict == Verdict::Feasible);

    // 1 - z1 z2 conj(w1 w2) = (1 - z1 conj(w1)) + z1 conj(w1) (1 - z2 conj(w2)):
    // Gamma_1 = all-ones, Gamma_2(x,y) = x1 conj(y1).
    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
    CVector z1 = psi.row(0).transpose();
    AglerDecomposition hand;
    hand.gammas = {CMatrix::Ones(4, 4), CMatrix(z1 * z1.adjoint())};
    hand.labels = {"z1", "z2"};
    hand.weights = {4.0, z1.squaredNorm()};
    CMatrix m = target_matrix(data.values);
    agler::DecompositionReport rep = validate_decomposition(hand, psi, m, 1e-12);
    CHECK(rep.ok);
    CHECK(rep.residual <= 1e-12);
}

TEST_CASE("Schwarz-Pick violating disk data yields a Szego certificate") {
    TestFamily fam = builtin_family("disk");
    NodeSet f = scalar_nodes({0.1, 0.15});
    CVector xi(2);
    xi << Complex(0.9, 0.0), Complex(-0.9, 0.0);
    kernels::DataValues data(f, xi);
    SolveResult res = solve_interpolation(data, fam);
    REQUIRE(res.verdict == Verdict::Infeasible);
    REQUIRE(res.certificate.has_value());

    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
    CMatrix m = target_matrix(xi);
    CertificateReport rep =
        validate_certificate(*res.certificate, psi, m, 1e-9, res.cert_margin);
    CHECK(rep.ok);

    // The classical Szego Gram is itself a certificate for this instance.
    CVector nodes(2);
    nodes << 0.1, 0.15;
    DualCertificate szego;
    szego.kernel = kernels::canonical_kernel_values(nodes);
    CHECK(validate_certificate(szego, psi, m, 1e-9, 1e-6).ok);
}

TEST_CASE("validate_certificate rejects useless kernels") {
    TestFamily fam = builtin_family("disk");
    NodeSet f = scalar_nodes({0.1, 0.4});
    CVector xi(2);
    xi << Complex(0.2, 0.0), Complex(0.25, 0.0);
    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
    CMatrix m = target_matrix(xi);

    DualCertificate zero;
    zero.kernel = CMatrix::Zero(2, 2);
    CHECK_FALSE(validate_certificate(zero, psi, m).ok);  // margin not negative

    DualCertificate toeplitz;
    toeplitz.kernel = CMatrix::Identity(2, 2);
    CertificateReport rep = validate_certificate(toeplitz, psi, m);
    CHECK(rep.admissible);
    CHECK_FALSE(rep.separating);  // M o I is PSD for strictly contractive data
}

TEST_CASE("perturbed blocks are flagged by validation") {
    auto g = testutil::rng(44);
    TestFamily fam = builtin_family("polydisk", {.dim = 2});
    NodeSet f = random_bidisk_nodes(g, 3);
    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
    HermitianMatrix m(testutil::random_psd(g, 3));
    SolveResult res = cone_membership(m, psi);
    REQUIRE(res.verdict == Verdict::Feasible);

    AglerDecomposition broken = *res.decomposition;
    Index worst = 0;
    for (size_t j = 0; j < broken.gammas.size(); ++j)
        if (broken.gammas[j].norm() > broken.gammas[worst].norm())
            worst = static_cast<Index>(j);
    // Push the smallest eigenvalue of the heaviest block to exactly -1e-3.
    numerics::EigResult e =
        numerics::eig_hermitian(HermitianMatrix(broken.gammas[worst]));
    broken.gammas[worst] -=
        (e.values(0) + 1e-3) * e.vectors.col(0) * e.vectors.col(0).adjoint();
    agler::DecompositionReport rep =
        validate_decomposition(broken, psi, m.mat(), res.feas_tol);
    CHECK_FALSE(rep.blocks_psd);
    CHECK(rep.min_block_eig < -1e-4);
}

TEST_CASE("solver verdict agrees with the classical Pick criterion") {
    auto g = testutil::rng(45);
    TestFamily fam = builtin_family("disk");
    int checked = 0, window = 0;
    for (int trial = 0; trial < 300; ++trial) {
        int n = 2 + (trial % 2);
        std::vector<Complex> pts = testutil::random_disk_points(g, n, 0.85);
        NodeSet f = scalar_nodes(pts);
        CVector nodes(n), xi(n);
        for (int i = 0; i < n; ++i) {
            nodes(i) = pts[static_cast<size_t>(i)];
            xi(i) = testutil::random_complex(g, 0.9);
        }
        CMatrix pick =
            kernels::pick_matrix_values(xi, kernels::canonical_kernel_values(nodes));
        double lmin = numerics::min_eigenvalue(HermitianMatrix(pick));
        kernels::DataValues data(f, xi);
        SolveResult res = solve_interpolation(data, fam);
        if (std::abs(lmin) < 1e-6) {
            ++window;
            continue;  // no verdict required this close to the boundary
        }
        ++checked;
        if (lmin >= 0.0) {
            CHECK(res.verdict == Verdict::Feasible);
        } else {
            CHECK(res.verdict == Verdict::Infeasible);
        }
    }
    CHECK(checked >= 250);  // the window is a thin slice of instance space
}

TEST_CASE("soundness: produced artifacts validate and never both ways") {
    auto g = testutil::rng(46);
    struct Case {
        TestFamily fam;
        std::function<NodeSet(std::mt19937_64&)> nodes;
        int trials;
    };
    testfns::FamilyParams annp;
    annp.grid = 8;
    std::vector<Case> cases;
    cases.push_back({builtin_family("disk"),
                     [](std::mt19937_64& gg) {
                         return scalar_nodes(testutil::random_disk_points(gg, 3, 0.8));
                     },
                     500});
    cases.push_back({builtin_family("polydisk", {.dim = 2}),
                     [](std::mt19937_64& gg) { return random_bidisk_nodes(gg, 3); },
                     300});
    cases.push_back({builtin_family("example1", {.n_max = 6}),
                     [](std::mt19937_64& gg) {
                         return scalar_nodes(testutil::random_disk_points(gg, 2, 0.8));
                     },
                     150});
    cases.push_back({builtin_family("annulus-theta", annp), [](std::mt19937_64& gg) {
                         std::uniform_real_distribution<double> ur(0.35, 0.95);
                         std::uniform_real_distribution<double> ua(0.0, 2 * M_PI);
                         std::vector<Complex> pts;
                         while (pts.size() < 2) {
                             Complex z = std::polar(ur(gg), ua(gg));
                             bool ok = true;
                             for (Complex w : pts)
                                 if (std::abs(z - w) < 1e-2) ok = false;
                             if (ok) pts.push_back(z);
                         }
                         return scalar_nodes(pts);
                     },
                     100});

    for (auto& c : cases) {
        for (int trial = 0; trial < c.trials; ++trial) {
            NodeSet f = c.nodes(g);
            CVector xi(f.size());
            for (Index i = 0; i < f.size(); ++i) xi(i) = testutil::random_complex(g, 0.95);
            kernels::DataValues data(f, xi);
            SolveOptions opts;
            opts.max_iters = 4000;
            SolveResult res = solve_interpolation(data, c.fam, opts);

            CMatrix psi = testfns::eval_matrix_unchecked(c.fam, f);
            CMatrix m = target_matrix(xi);
            if (res.verdict == Verdict::Feasible) {
                REQUIRE(res.decomposition.has_value());
                CHECK(validate_decomposition(*res.decomposition, psi, m, res.feas_tol).ok);
                CHECK_FALSE(res.certificate.has_value());
                // Weak duality spot check: standard admissible kernels cannot
                // separate a feasible instance.
                for (Index j = 0; j < psi.rows(); ++j) {
                    CVector v = psi.row(j).transpose();
                    if (v.cwiseAbs().maxCoeff() >= 1.0) continue;
                    CMatrix k = kernels::canonical_kernel_values(v);
                    if (!kernels::is_admissible_values(k, psi).admissible) continue;
                    double lmin = numerics::min_eigenvalue(
                        HermitianMatrix(CMatrix(m.cwiseProduct(k))));
                    CHECK(lmin >= -res.cert_margin - res.feas_tol * k.norm());
                }
            } else if (res.verdict == Verdict::Infeasible) {
                REQUIRE(res.certificate.has_value());
                CHECK(validate_certificate(*res.certificate, psi, m, 1e-9,
                                           res.cert_margin)
                          .ok);
                CHECK_FALSE(res.decomposition.has_value());
            }
        }
    }
}

TEST_CASE("diagonal conjugation preserves the verdict") {
    auto g = testutil::rng(47);
    TestFamily fam = builtin_family("polydisk", {.dim = 2});
    int agreements = 0, decided = 0;
    for (int trial = 0; trial < 100; ++trial) {
        NodeSet f = random_bidisk_nodes(g, 3);
        CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
        CVector xi(3);
        for (Index i = 0; i < 3; ++i) xi(i) = testutil::random_complex(g, 0.95);
        CMatrix m = target_matrix(xi);

        CVector c(3);
        for (Index i = 0; i < 3; ++i) {
            std::uniform_real_distribution<double> u(0.3, 2.0);
            c(i) = std::polar(u(g), 2 * M_PI * u(g));
        }
        CMatrix conj_m = c.asDiagonal() * m * c.asDiagonal().toDenseMatrix().adjoint();

        SolveOptions opts;
        opts.max_iters = 4000;
        SolveResult r1 = cone_membership(HermitianMatrix(m), psi, opts);
        SolveResult r2 = cone_membership(HermitianMatrix(conj_m), psi, opts);
        if (r1.verdict == Verdict::Undecided || r2.verdict == Verdict::Undecided) continue;
        ++decided;
        if (r1.verdict == r2.verdict) ++agreements;
    }
    CHECK(decided >= 80);
    CHECK(agreements == decided);
}

TEST_CASE("enlarging the family never turns feasible into infeasible") {
    testfns::FamilyParams p8;
    p8.grid = 8;
    p8.q = 0.3;
    p8.b = Complex(0.5, 0.0);
    testfns::FamilyParams p16 = p8;
    p16.grid = 16;
    TestFamily f8 = builtin_family("annulus-theta", p8);
    TestFamily f16 = builtin_family("annulus-theta", p16);
    NodeSet nodes = scalar_nodes({0.55, Complex(-0.6, 0.2), Complex(0.1, 0.62)});

    for (double scale : {0.6, 0.85}) {
        CVector xi(3);
        for (Index i = 0; i < 3; ++i)
            xi(i) = scale * f8.evaluate(2, nodes.point(i));
        kernels::DataValues data(nodes, xi);
        SolveOptions opts;
        opts.max_iters = 6000;
        SolveResult r8 = solve_interpolation(data, f8, opts);
        SolveResult r16 = solve_interpolation(data, f16, opts);
        bool lost_feasibility =
            r8.verdict == Verdict::Feasible && r16.verdict == Verdict::Infeasible;
        CHECK_FALSE(lost_feasibility);
        CHECK(r16.verdict == Verdict::Feasible);
    }
}

TEST_CASE("refine_factored drives near-solutions to machine precision") {
    auto g = testutil::rng(48);
    TestFamily fam = builtin_family("polydisk", {.dim = 2});
    NodeSet f = random_bidisk_nodes(g, 3);
    CMatrix psi = testfns::eval_matrix_unchecked(fam, f);
    std::vector<CMatrix> coeffs = coefficient_matrices(psi);

    std::vector<CMatrix> exact = {testutil::random_matrix(g, 3, 2),
                                  testutil::random_matrix(g, 3, 1)};
    CMatrix m = CMatrix::Zero(3, 3);
    for (size_t j = 0; j < exact.size(); ++j)
        m += CMatrix(exact[j] * exact[j].adjoint()).cwiseProduct(coeffs[j]);

    std::vector<CMatrix> factors = exact;
    factors[0] += 1e-3 * testutil::random_matrix(g, 3, 2);
    factors[1] += 1e-3 * testutil::random_matrix(g, 3, 1);
    CMatrix mcopy = m;
    double resid = refine_factored(factors, coeffs, mcopy, nullptr);
    CHECK(resid <= 1e-12 * (1.0 + m.norm()));
}

TEST_CASE("input validation") {
    HermitianMatrix m(CMatrix::Identity(2, 2));
    CMatrix empty(0, 2);
    CHECK_THROWS_AS(cone_membership(m, empty), InputError);

    TestFamily fam = builtin_family("disk");
    NodeSet f = scalar_nodes({0.1, 0.2});
    CVector xi(2);
    xi << Complex(1.0 - 1e-13, 0.0), Complex(0.1, 0.0);
    CHECK_THROWS_AS(solve_interpolation(kernels::DataValues(f, xi), fam), InputError);
}

TEST_SUITE_END();
