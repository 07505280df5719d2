#pragma once

#include <functional>
#include <vector>

#include "tfpick/common.hpp"

namespace tfpick::annulus {

// Annulus A_q = { q < |z| < 1 } with a base point b used for normalization.
// The base point must satisfy q < |b| < 1 and |b| != sqrt(q), so the two
// zeros of each inner function lie on distinct circles.
struct AnnulusParams {
    double q = 0.3;
    Complex b = Complex(0.5, 0.0);
    int truncation = -1;  // product truncation; -1 selects q^{2N} < 1e-14

    void validate() const;
    int effective_truncation() const;
};

// prod_{n=0}^{N} (1 - q^{2n} w)(1 - q^{2n+2} / w).  Zeros at w in q^{2Z}.
Complex theta_product(Complex w, double q, int trunc);

// Bound on the relative truncation error of theta_product:
// exp(sum_{n>N} (q^{2n}|w| + q^{2n+2}/|w|)) - 1.
double theta_tail_bound(Complex w, double q, int trunc);

// Single-zero building block B_a(z) = theta(z/a) / theta(z conj(a)).
// Analytic on a neighborhood of the closed annulus, vanishes only at z = a
// there, and has constant modulus on each boundary circle.
Complex annulus_factor(Complex a, Complex z, double q, int trunc);

// Inner function vartheta_t: unimodular on both boundary circles, zeros at
// b and q t / b, normalized so vartheta_t(1) = 1.  Built as
// c z^m B_b(z) B_{qt/b}(z) with m and c calibrated from measured boundary
// moduli; the calibration is checked and construction fails loudly if the
// product ansatz were wrong.
class InnerFunction {
public:
    InnerFunction(const AnnulusParams& p, Complex t);

    Complex operator()(Complex z) const;

    const AnnulusParams& params() const { return params_; }
    Complex t() const { return t_; }
    Complex zero_base() const { return params_.b; }
    Complex zero_second() const { return second_zero_; }
    int monomial_power() const { return power_; }
    Complex calibration() const { return calib_; }
    double calibration_residual() const { return calib_residual_; }

private:
    AnnulusParams params_;
    Complex t_;
    Complex second_zero_;
    int power_ = 0;
    Complex calib_ = Complex(1.0, 0.0);
    double calib_residual_ = 0.0;
};

InnerFunction make_vartheta(const AnnulusParams& p, Complex t);

// Contour for zero counting: either the oriented annulus boundary (outer
// circle counterclockwise, inner clockwise) or a single ccw circle.
struct AnnulusBoundary {
    double inner_radius;
    double outer_radius;
};
struct Circle {
    Complex center;
    double radius;
};

using Fn = std::function<Complex(Complex)>;

// Argument-principle zero count from sampled argument increments.  Errors
// if the function comes within 1e-6 of zero on the contour or the winding
// sum is further than 0.25 from an integer.
int count_zeros(const Fn& f, const AnnulusBoundary& contour, int samples = 1024);
int count_zeros(const Fn& f, const Circle& contour, int samples = 1024);

// Zeros inside {r_lo < |z| < r_hi} by winding-number bisection over
// subannuli followed by Newton polish with central-difference derivatives.
std::vector<Complex> locate_zeros(const Fn& f, double r_lo, double r_hi,
                                  int samples = 1024);

// Szego-type kernel of the Hardy space for the circle-weighted harmonic
// measure at b, normalized so that k(z, b) = k(b, z) = 1:
//   s(z,w) = sum_n (z conj(w))^n / (m0 + m1 q^{2n}),
//   k(z,w) = s(z,w) s(b,b) / (s(z,b) s(b,w)),
// with m0 = log(|b|/q)/log(1/q) and m1 = 1 - m0.
Complex hardy_kernel(Complex z, Complex w, const AnnulusParams& p, int cutoff = -1);

CMatrix hardy_gram(const std::vector<Complex>& nodes, const AnnulusParams& p,
                   int cutoff = -1);

// Diagnostics for the InnerFunction invariants; used by tests and the CLI.
struct InnerReport {
    double boundary_residual_outer = 0.0;  // max ||f|-1| on |z|=1
    double boundary_residual_inner = 0.0;  // max ||f|-1| on |z|=q
    double value_at_one_error = 0.0;
    int winding = 0;
    std::vector<Complex> zeros;
    double zero_error = 0.0;  // Hausdorff-style match against {b, qt/b}
    bool pass = false;
};

InnerReport verify_inner(const InnerFunction& f, int boundary_samples = 512);

}  // namespace tfpick::annulus
