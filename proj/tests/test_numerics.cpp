#include <doctest.h>

#include "test_util.hpp"
#include "tfpick/numerics.hpp"

using namespace tfpick;
using namespace tfpick::numerics;

namespace {
CMatrix mat2(Complex a, Complex b, Complex c, Complex d) {
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}
}  // namespace

TEST_SUITE_BEGIN("numerics");

TEST_CASE("hermitian construction symmetrizes and validates") {
    HermitianMatrix h(mat2(1.0, Complex(0.0, 1.0), Complex(0.0, -1.0), 2.0));
    CHECK(h(0, 1) == std::conj(h(1, 0)));
    CHECK(h(0, 0).imag() == 0.0);
    CHECK_THROWS_AS(HermitianMatrix(CMatrix::Zero(2, 3)), InputError);
    CMatrix bad = mat2(1.0, 0.0, 0.0, std::nan(""));
    CHECK_THROWS_AS(HermitianMatrix{bad}, InputError);
}

TEST_CASE("is_psd reference cases") {
    CHECK(is_psd(HermitianMatrix(CMatrix::Identity(2, 2)), 1e-9));
    CHECK(is_psd(HermitianMatrix(CMatrix::Ones(2, 2)), 1e-9));

    // [[0,1],[1,0]]: char poly x^2 - 1, eigenvalues exactly +-1.
    HermitianMatrix flip(mat2(0.0, 1.0, 1.0, 0.0));
    EigResult e = eig_hermitian(flip);
    CHECK(e.values(0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(e.values(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(is_psd(flip, 1e-9));
}

TEST_CASE("psd_project clips the negative eigenvalue") {
    // Clipping -1 in the 2x2 eigensystem of [[0,1],[1,0]] leaves
    // (1/2) [[1,1],[1,1]].
    HermitianMatrix p = psd_project(HermitianMatrix(mat2(0.0, 1.0, 1.0, 0.0)));
    CHECK(std::abs(p(0, 0) - 0.5) < 1e-12);
    CHECK(std::abs(p(0, 1) - 0.5) < 1e-12);
    CHECK(std::abs(p(1, 1) - 0.5) < 1e-12);

    HermitianMatrix z = psd_project(HermitianMatrix(CMatrix(-CMatrix::Identity(3, 3))));
    CHECK(z.mat().norm() < 1e-14);
}

TEST_CASE("psd_project is idempotent and fixes PSD inputs") {
    auto g = testutil::rng(11);
    for (int trial = 0; trial < 25; ++trial) {
        Index n = 2 + static_cast<Index>(trial % 5);
        HermitianMatrix h(CMatrix(testutil::random_matrix(g, n, n) +
                                  testutil::random_matrix(g, n, n).adjoint()));
        HermitianMatrix p = psd_project(h);
        CHECK(is_psd(p, 1e-9));
        HermitianMatrix pp = psd_project(p);
        CHECK((pp.mat() - p.mat()).norm() < 1e-11 * (1.0 + p.mat().norm()));

        HermitianMatrix psd(testutil::random_psd(g, n));
        HermitianMatrix fixed = psd_project(psd);
        CHECK((fixed.mat() - psd.mat()).norm() < 1e-12 * (1.0 + psd.mat().norm()));
    }
}

TEST_CASE("factor_psd basics") {
    CMatrix h = factor_psd(HermitianMatrix(CMatrix::Identity(3, 3)));
    CHECK(h.cols() == 3);
    CHECK((h * h.adjoint() - CMatrix::Identity(3, 3)).norm() < 1e-12);

    CMatrix ones = factor_psd(HermitianMatrix(CMatrix::Ones(4, 4)));
    CHECK(ones.cols() == 1);
    CHECK((ones * ones.adjoint() - CMatrix::Ones(4, 4)).norm() < 1e-12);

    CHECK_THROWS_AS(factor_psd(HermitianMatrix(mat2(0.0, 1.0, 1.0, 0.0))),
                    PreconditionError);
}

TEST_CASE("factor_psd reconstructs random Gram matrices") {
    auto g = testutil::rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        Index n = 2 + static_cast<Index>(trial % 6);
        Index r = 1 + static_cast<Index>(trial % n);
        CMatrix a = testutil::random_matrix(g, n, r);
        CMatrix gram = a * a.adjoint();
        HermitianMatrix hg(gram);
        CMatrix h = factor_psd(hg);
        CHECK((h * h.adjoint() - gram).norm() <= 1e-10 * (1.0 + gram.norm()));
        CHECK(h.cols() == psd_rank(hg));
        CHECK(is_psd(HermitianMatrix(CMatrix(h * h.adjoint()))));
    }
}

TEST_CASE("complete_to_unitary trivial cases") {
    IsometryData empty;
    empty.domain_dim = 4;
    empty.range_dim = 4;
    CHECK((complete_to_unitary(empty) - CMatrix::Identity(4, 4)).norm() == 0.0);

    // Full orthonormal basis mapped to itself.
    IsometryData idmap;
    idmap.domain_dim = 3;
    idmap.range_dim = 3;
    for (Index i = 0; i < 3; ++i) {
        CVector e = CVector::Zero(3);
        e(i) = 1.0;
        idmap.domain_vectors.push_back(e);
        idmap.range_vectors.push_back(e);
    }
    CHECK((complete_to_unitary(idmap) - CMatrix::Identity(3, 3)).norm() < 1e-10);
}

TEST_CASE("complete_to_unitary single pair in C^2") {
    IsometryData v;
    v.domain_dim = 2;
    v.range_dim = 2;
    CVector d(2), r(2);
    d << 1.0, 0.0;
    r << 0.0, 1.0;
    v.domain_vectors.push_back(d);
    v.range_vectors.push_back(r);
    CMatrix u = complete_to_unitary(v);
    CHECK((u * d - r).norm() < 1e-10);
    // Brute-force structure of a 2x2 unitary with U e1 = e2:
    // first column (0,1), so |U(0,1)| = 1 and U(1,1) = 0.
    CHECK(std::abs(u(0, 0)) < 1e-10);
    CHECK(std::abs(u(1, 0) - Complex(1.0, 0.0)) < 1e-10);
    CHECK(std::abs(std::abs(u(0, 1)) - 1.0) < 1e-10);
    CHECK(std::abs(u(1, 1)) < 1e-10);
}

TEST_CASE("complete_to_unitary maps random isometry data and pads dimensions") {
    auto g = testutil::rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        Index n = 3 + static_cast<Index>(trial % 4);
        Index k = 1 + static_cast<Index>(trial % (n + 1));
        CMatrix q = testutil::random_unitary(g, n);
        IsometryData v;
        v.domain_dim = n;
        v.range_dim = n;
        for (Index i = 0; i < k; ++i) {
            CVector d = testutil::random_matrix(g, n, 1).col(0);
            v.domain_vectors.push_back(d);
            v.range_vectors.push_back(q * d);
        }
        CMatrix u = complete_to_unitary(v);
        CHECK((u.adjoint() * u - CMatrix::Identity(n, n)).norm() <= 1e-10);
        CHECK((u * u.adjoint() - CMatrix::Identity(n, n)).norm() <= 1e-10);
        for (Index i = 0; i < k; ++i)
            CHECK((u * v.domain_vectors[i] - v.range_vectors[i]).norm() <= 1e-8);
    }

    // Unequal ambient dimensions: the smaller side is padded.
    IsometryData pad;
    pad.domain_dim = 3;
    pad.range_dim = 2;
    CVector d(3), r(2);
    d << 1.0, 0.0, 0.0;
    r << 0.0, 1.0;
    pad.domain_vectors.push_back(d);
    pad.range_vectors.push_back(r);
    CMatrix u = complete_to_unitary(pad);
    CHECK(u.rows() == 3);
    CVector rp(3);
    rp << 0.0, 1.0, 0.0;
    CHECK((u * d - rp).norm() < 1e-8);
}

TEST_CASE("complete_to_unitary rejects non-isometries") {
    IsometryData v;
    v.domain_dim = 2;
    v.range_dim = 2;
    CVector d(2), r(2);
    d << 1.0, 0.0;
    r << 0.0, 2.0;  // norm mismatch
    v.domain_vectors.push_back(d);
    v.range_vectors.push_back(r);
    CHECK_THROWS_AS(complete_to_unitary(v), InputError);
}

TEST_SUITE_END();
