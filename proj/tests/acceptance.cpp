// Acceptance suite: one criterion per section, one pass/fail line each.
// Exit code 0 iff every criterion passes.

#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "test_util.hpp"
#include "tfpick/io.hpp"
#include "tfpick/lab.hpp"

using namespace tfpick;
using agler::SolveOptions;
using agler::SolveResult;
using agler::Verdict;
using numerics::HermitianMatrix;
using testfns::NodeSet;
using testfns::Point;
using testfns::TestFamily;
using testfns::builtin_family;
using testfns::scalar_nodes;

namespace {

int g_failures = 0;

void report(int idx, const std::string& name, bool ok, const std::string& detail) {
    std::printf("criterion %d (%s): %s%s%s\n", idx, name.c_str(),
                ok ? "PASS" : "FAIL", detail.empty() ? "" : " -- ",
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

struct DiskInstance {
    NodeSet nodes;
    CVector xi;
    double pick_min_eig;
    SolveResult result;

    DiskInstance(NodeSet f, CVector v) : nodes(std::move(f)), xi(std::move(v)) {}
};

NodeSet random_bidisk_nodes(std::mt19937_64& g, int count, double radius = 0.75) {
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

// Weak-duality audit shared by the randomized suites: no instance may carry
// both a validating decomposition and a validating certificate, and the
// returned artifact must validate.
struct SoundnessAudit {
    long instances = 0;
    long violations = 0;

    void inspect(const SolveResult& res, const CMatrix& psi, const CMatrix& m) {
        ++instances;
        bool dec_valid = false, cert_valid = false;
        if (res.decomposition)
            dec_valid = agler::validate_decomposition(*res.decomposition, psi, m,
                                                      res.feas_tol)
                            .ok;
        if (res.certificate)
            cert_valid = agler::validate_certificate(*res.certificate, psi, m,
                                                     numerics::kDefaultTol,
                                                     res.cert_margin)
                             .ok;
        if (dec_valid && cert_valid) ++violations;
        if (res.verdict == Verdict::Feasible && !dec_valid) ++violations;
        if (res.verdict == Verdict::Infeasible && !cert_valid && !res.witness)
            ++violations;
    }
};

SoundnessAudit g_audit;

std::vector<DiskInstance> criterion1() {
    auto g = testutil::rng(1001);
    TestFamily fam = builtin_family("disk");
    std::vector<DiskInstance> instances;
    long disagreements = 0, window = 0, feasible = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int n = 2 + (trial % 2);
        std::vector<Complex> pts = testutil::random_disk_points(g, n, 0.85);
        CVector nodes_v(n), xi(n);
        for (int i = 0; i < n; ++i) {
            nodes_v(i) = pts[static_cast<size_t>(i)];
            xi(i) = testutil::random_complex(g, 0.9);
        }
        DiskInstance inst(scalar_nodes(pts), xi);
        CMatrix pick = kernels::pick_matrix_values(
            xi, kernels::canonical_kernel_values(nodes_v));
        inst.pick_min_eig = numerics::min_eigenvalue(HermitianMatrix(pick));
        inst.result =
            agler::solve_interpolation(kernels::DataValues(inst.nodes, xi), fam);

        CMatrix psi = testfns::eval_matrix_unchecked(fam, inst.nodes);
        g_audit.inspect(inst.result, psi, agler::target_matrix(xi));

        if (std::abs(inst.pick_min_eig) < 1e-6) {
            ++window;
        } else if (inst.pick_min_eig >= 0.0) {
            if (inst.result.verdict != Verdict::Feasible) ++disagreements;
        } else {
            if (inst.result.verdict != Verdict::Infeasible) ++disagreements;
        }
        if (inst.result.verdict == Verdict::Feasible) ++feasible;
        instances.push_back(std::move(inst));
    }
    std::ostringstream detail;
    detail << disagreements << " disagreements outside the 1e-6 window ("
           << window << " inside, " << feasible << " feasible)";
    report(1, "classical Pick oracle equivalence", disagreements == 0, detail.str());
    return instances;
}

void criterion2(const std::vector<DiskInstance>& disk_instances) {
    auto g = testutil::rng(1002);
    TestFamily disk = builtin_family("disk");
    TestFamily bidisk = builtin_family("polydisk", {.dim = 2});

    double worst_unitarity = 0.0, worst_node = 0.0, worst_modulus = 0.0;
    long realized = 0;
    bool ok = true;

    auto exercise = [&](const realize::Colligation& col, const kernels::DataValues& data,
                        auto sample_point) {
        ++realized;
        Index n1 = col.env_dim() + 1;
        worst_unitarity = std::max(
            worst_unitarity,
            (col.u().adjoint() * col.u() - CMatrix::Identity(n1, n1)).norm());
        for (Index i = 0; i < data.nodes.size(); ++i)
            worst_node = std::max(worst_node,
                                  std::abs(realize::transfer_eval(col, data.nodes.point(i)) -
                                           data.values(i)));
        for (int s = 0; s < 1000; ++s)
            worst_modulus = std::max(worst_modulus,
                                     std::abs(realize::transfer_eval(col, sample_point())));
    };

    try {
        for (const DiskInstance& inst : disk_instances) {
            if (inst.result.verdict != Verdict::Feasible) continue;
            kernels::DataValues data(inst.nodes, inst.xi);
            realize::Colligation col = realize::build_colligation(
                *inst.result.decomposition, data, disk, inst.result.feas_tol);
            exercise(col, data, [&]() {
                return testfns::scalar_point(testutil::random_complex(g, 0.999));
            });
        }
        for (int trial = 0; trial < 100; ++trial) {
            NodeSet nodes = random_bidisk_nodes(g, 4);
            CMatrix u = testutil::random_unitary(g, 4);
            std::vector<Index> coords = {0, 1, 1};
            realize::Colligation source(u, coords,
                                        std::make_shared<TestFamily>(bidisk));
            CVector xi(4);
            for (Index i = 0; i < 4; ++i)
                xi(i) = 0.92 * realize::transfer_eval(source, nodes.point(i));
            kernels::DataValues data(nodes, xi);
            SolveResult res = agler::solve_interpolation(data, bidisk);
            CMatrix psi = testfns::eval_matrix_unchecked(bidisk, nodes);
            g_audit.inspect(res, psi, agler::target_matrix(xi));
            if (res.verdict != Verdict::Feasible) {
                ok = false;
                continue;
            }
            realize::Colligation col = realize::build_colligation(
                *res.decomposition, data, bidisk, res.feas_tol);
            exercise(col, data, [&]() {
                Point p(2);
                p << testutil::random_complex(g, 0.999),
                    testutil::random_complex(g, 0.999);
                return p;
            });
        }
    } catch (const std::exception& e) {
        ok = false;
        std::fprintf(stderr, "criterion 2 exception: %s\n", e.what());
    }

    ok = ok && worst_unitarity <= 1e-10 && worst_node <= 1e-7 &&
         worst_modulus <= 1.0 + 1e-9;
    std::ostringstream detail;
    detail << realized << " realizations; unitarity " << worst_unitarity
           << ", node error " << worst_node << ", max |W| - 1 "
           << worst_modulus - 1.0;
    report(2, "end-to-end realization", ok, detail.str());
}

void criterion3() {
    std::ostringstream detail;
    detail << g_audit.violations << " violations over " << g_audit.instances
           << " randomized instances";
    report(3, "duality soundness", g_audit.violations == 0, detail.str());
}

void criterion4() {
    auto g = testutil::rng(1004);
    TestFamily bidisk = builtin_family("polydisk", {.dim = 2});
    NodeSet nodes = random_bidisk_nodes(g, 4);
    CVector xi(4);
    for (Index i = 0; i < 4; ++i) xi(i) = nodes.point(i)(0) * nodes.point(i)(1);

    // Hand decomposition of 1 - z1 z2 conj(w1 w2).
    CMatrix psi = testfns::eval_matrix_unchecked(bidisk, nodes);
    CVector z1 = psi.row(0).transpose();
    agler::AglerDecomposition dec;
    dec.gammas = {CMatrix::Ones(4, 4), CMatrix(z1 * z1.adjoint())};
    dec.labels = {"z1", "z2"};
    dec.weights = {4.0, z1.squaredNorm()};

    bool ok = true;
    double worst = 0.0;
    try {
        realize::Colligation col = realize::build_colligation(
            dec, kernels::DataValues(nodes, xi), bidisk, 1e-10);
        for (int trial = 0; trial < 100; ++trial) {
            Index d = 2 + (trial % 4);
            CMatrix base = testutil::random_matrix(g, d, d);
            std::uniform_real_distribution<double> u(0.3, 0.95);
            base *= u(g) / numerics::operator_norm(base);
            CMatrix second = 0.5 * base * base + 0.3 * base +
                             0.15 * CMatrix::Identity(d, d);
            second *= u(g) / numerics::operator_norm(second);
            realize::Representation rep;
            rep.members = {base, second};
            realize::RepEval ev = realize::transfer_eval_rep(col, rep, true);
            worst = std::max(worst, ev.norm);
        }
    } catch (const std::exception& e) {
        ok = false;
        std::fprintf(stderr, "criterion 4 exception: %s\n", e.what());
    }
    ok = ok && worst <= 1.0 + 1e-8;
    std::ostringstream detail;
    detail << "max ||W(T1,T2)|| = " << worst << " over 100 commuting strict pairs";
    report(4, "von Neumann check", ok, detail.str());
}

void criterion5() {
    annulus::AnnulusParams params{0.3, Complex(0.5, 0.0)};
    bool ok = true;
    double worst_boundary = 0.0, worst_one = 0.0, worst_zero = 0.0;
    try {
        for (int k = 0; k < 64; ++k) {
            double angle = 2.0 * M_PI * k / 64.0;
            annulus::InnerFunction f =
                annulus::make_vartheta(params, std::polar(1.0, angle));
            annulus::InnerReport rep = annulus::verify_inner(f, 512);
            worst_boundary = std::max({worst_boundary, rep.boundary_residual_outer,
                                       rep.boundary_residual_inner});
            worst_one = std::max(worst_one, rep.value_at_one_error);
            worst_zero = std::max(worst_zero, rep.zero_error);
            ok = ok && rep.winding == 2 && rep.zeros.size() == 2;
        }
        ok = ok && worst_boundary <= 1e-6 && worst_one <= 1e-10 && worst_zero <= 1e-8;

        // Rank-two Pick matrix against the normalized Hardy kernel.
        testfns::FamilyParams fp;
        fp.grid = 64;
        TestFamily fam = builtin_family("annulus-theta", fp);
        NodeSet nodes = scalar_nodes({0.55, Complex(-0.7, 0.0), Complex(0.4, 0.35)});
        CVector theta0(3);
        for (Index i = 0; i < 3; ++i) theta0(i) = fam.evaluate(0, nodes.point(i));
        CMatrix gram = annulus::hardy_gram(nodes.scalars(), params);
        CMatrix pick = kernels::pick_matrix_values(theta0, gram);
        Index rank = numerics::psd_rank(HermitianMatrix(pick), 1e-7);
        ok = ok && rank == 2 && numerics::is_psd(HermitianMatrix(pick), 1e-7);
    } catch (const std::exception& e) {
        ok = false;
        std::fprintf(stderr, "criterion 5 exception: %s\n", e.what());
    }
    std::ostringstream detail;
    detail << "boundary " << worst_boundary << ", value-at-1 " << worst_one
           << ", zero placement " << worst_zero << ", all windings 2, Pick rank 2";
    report(5, "annulus family", ok, detail.str());
}

void criterion6() {
    bool ok = true;
    std::string failing;
    try {
        lab::DemoReport e2 = lab::demo_example2();
        if (!e2.pass) failing += " example2";
        lab::DemoReport ip = lab::demo_infinite_polydisk({8, 32, 128});
        if (!ip.pass) failing += " infinite-polydisk";
        lab::DemoReport e1 = lab::demo_example1({4, 16, 64});
        if (!e1.pass) failing += " example1";
        ok = e2.pass && ip.pass && e1.pass;
    } catch (const std::exception& e) {
        ok = false;
        failing = e.what();
    }
    report(6, "counterexample suite", ok,
           ok ? "example2, infinite-polydisk 8/32/128, example1 4/16/64"
              : "failing:" + failing);
}

void criterion7() {
    bool ok = true;
    std::string detail;
    try {
        lab::DemoReport rep = lab::demo_coarsening();
        ok = rep.pass;
        for (const lab::CsvTable& t : rep.tables)
            if (t.name == "coarsening") {
                std::ostringstream os;
                os << "drift/bound per cells:";
                for (const auto& row : t.rows)
                    os << " " << row[0] << ":" << row[3] << "/" << row[4];
                detail = os.str();
            }
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    report(7, "coarsening convergence", ok, detail);
}

}  // namespace

int main() {
    std::vector<DiskInstance> disk = criterion1();
    criterion2(disk);
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    std::printf("%s (%d criterion failures)\n", g_failures == 0 ? "ALL PASS" : "FAILED",
                g_failures);
    return g_failures == 0 ? 0 : 1;
}
