#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "tfpick/io.hpp"

using namespace tfpick;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(TFPICK_BIN) + " " + args + " > /dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string fixture(const std::string& name) {
    return std::string(FIXTURES_DIR) + "/" + name;
}

fs::path sandbox(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("tfpick_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("problem files parse with diagnostics") {
    io::Problem p = io::load_problem(fixture("bidisk_product.json"));
    CHECK(p.family.size() == 2);
    CHECK(p.nodes.size() == 4);
    REQUIRE(p.targets.has_value());
    CHECK((*p.targets)(3) == Complex(0.0, 0.2));

    CHECK_THROWS_WITH_AS(io::parse_problem("{ not json"),
                         doctest::Contains("invalid JSON"), InputError);
    CHECK_THROWS_WITH_AS(io::parse_problem("{\"family\":{\"name\":\"disk\"}}"),
                         doctest::Contains("missing 'nodes'"), InputError);
    CHECK_THROWS_WITH_AS(
        io::parse_problem("{\"family\":{\"name\":\"disk\"},\"nodes\":[[[0.1,0]]],"
                          "\"targets\":[[0.1,0],[0.2,0]]}"),
        doctest::Contains("one value per node"), InputError);
}

TEST_CASE("gram CSV round trip") {
    auto g = testutil::rng(81);
    CMatrix k = testutil::random_psd(g, 4);
    fs::path dir = sandbox("gram");
    std::string path = (dir / "gram.csv").string();
    io::save_gram_csv(path, k);
    CMatrix back = io::load_gram_csv(path);
    CHECK((back - k).cwiseAbs().maxCoeff() < 1e-14 * k.cwiseAbs().maxCoeff());
}

TEST_CASE("decomposition and certificate files round trip") {
    fs::path dir = sandbox("artifacts");
    agler::AglerDecomposition dec;
    auto g = testutil::rng(82);
    dec.gammas = {testutil::random_psd(g, 3), testutil::random_psd(g, 3, 1)};
    dec.labels = {"z1", "z2"};
    dec.weights = {dec.gammas[0].trace().real(), dec.gammas[1].trace().real()};
    dec.residual = 2.5e-11;
    std::string dpath = (dir / "dec.txt").string();
    io::save_decomposition(dpath, dec);
    agler::AglerDecomposition dback = io::load_decomposition(dpath);
    CHECK(dback.labels == dec.labels);
    CHECK(std::abs(dback.residual - dec.residual) < 1e-24);
    for (size_t j = 0; j < 2; ++j)
        CHECK((dback.gammas[j] - dec.gammas[j]).cwiseAbs().maxCoeff() < 1e-14);

    agler::DualCertificate cert;
    cert.kernel = testutil::random_psd(g, 3);
    cert.kernel_min_eig = 0.25;
    cert.pick_min_eig = -3.5e-3;
    cert.member_min_eigs = {0.0, 1e-12};
    std::string cpath = (dir / "cert.txt").string();
    io::save_certificate(cpath, cert);
    agler::DualCertificate cback = io::load_certificate(cpath);
    CHECK((cback.kernel - cert.kernel).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(cback.member_min_eigs.size() == 2);
    CHECK(std::abs(cback.pick_min_eig - cert.pick_min_eig) < 1e-18);
}

TEST_CASE("colligation export preserves transfer values") {
    io::Problem p = io::load_problem(fixture("bidisk_product.json"));
    kernels::DataValues data = io::problem_data(p);
    agler::SolveResult res = agler::solve_interpolation(data, p.family, p.options);
    REQUIRE(res.verdict == agler::Verdict::Feasible);
    realize::Colligation col =
        realize::build_colligation(*res.decomposition, data, p.family, res.feas_tol);

    fs::path dir = sandbox("colligation");
    std::string path = (dir / "col.txt").string();
    io::save_colligation(path, col, p.family_spec);
    realize::Colligation back = io::load_colligation(path);

    auto g = testutil::rng(83);
    for (int i = 0; i < 40; ++i) {
        testfns::Point x(2);
        x << testutil::random_complex(g, 0.9), testutil::random_complex(g, 0.9);
        CHECK(std::abs(realize::transfer_eval(back, x) - realize::transfer_eval(col, x)) <=
              1e-12);
    }
}

TEST_CASE("solve exit codes and artifact verification") {
    fs::path dir = sandbox("cli_solve");
    CHECK(run_cli("solve " + fixture("bidisk_product.json") + " --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "decomposition.txt"));
    CHECK(run_cli("verify --type decomposition " + fixture("bidisk_product.json") + " " +
                  (dir / "decomposition.txt").string()) == 0);

    fs::path dir2 = sandbox("cli_infeasible");
    CHECK(run_cli("solve " + fixture("disk_infeasible.json") + " --out " + dir2.string()) ==
          1);
    CHECK(fs::exists(dir2 / "certificate.txt"));
    CHECK(run_cli("verify --type certificate " + fixture("disk_infeasible.json") + " " +
                  (dir2 / "certificate.txt").string()) == 0);

    CHECK(run_cli("solve " + fixture("malformed.json")) == 3);
    CHECK(run_cli("solve /no/such/file.json") == 3);
}

TEST_CASE("realize emits a verifiable colligation") {
    fs::path dir = sandbox("cli_realize");
    CHECK(run_cli("realize " + fixture("bidisk_product.json") + " --out " + dir.string()) ==
          0);
    CHECK(fs::exists(dir / "colligation.txt"));
    CHECK(fs::exists(dir / "node_residuals.csv"));
    CHECK(run_cli("verify --type colligation " + fixture("bidisk_product.json") + " " +
                  (dir / "colligation.txt").string()) == 0);
    CHECK(run_cli("realize " + fixture("bidisk_product.json") + " --strict --out " +
                  sandbox("cli_realize_strict").string()) == 0);
}

TEST_CASE("kernel-check admissibility") {
    CHECK(run_cli("kernel-check " + fixture("annulus_kernel.json") +
                  " --kernel-name hardy") == 0);
    CHECK(run_cli("kernel-check " + fixture("annulus_kernel.json") +
                  " --kernel-name toeplitz") == 0);
    // The disk Szego kernel is not admissible for the annulus theta family.
    fs::path dir = sandbox("cli_kernel");
    std::string saved = (dir / "szego.csv").string();
    int code = run_cli("kernel-check " + fixture("annulus_kernel.json") +
                       " --kernel-name szego --save-kernel " + saved);
    CHECK(code == 1);
    CHECK(run_cli("kernel-check " + fixture("annulus_kernel.json") + " --kernel " + saved) ==
          code);
}

TEST_CASE("demo subcommand runs example2") {
    fs::path dir = sandbox("cli_demo");
    CHECK(run_cli("demo example2 --out " + dir.string()) == 0);
    CHECK(fs::exists(dir / "example2_report.txt"));
    CHECK(run_cli("demo nope") == 3);
}

TEST_SUITE_END();
