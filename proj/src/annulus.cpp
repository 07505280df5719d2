#include "tfpick/annulus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace tfpick::annulus {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kContourFloor = 1e-6;
}  // namespace

void AnnulusParams::validate() const {
    if (!(q > 0.0 && q < 1.0))
        throw InputError("annulus: q must lie in (0,1)");
    double ab = std::abs(b);
    if (!(ab > q && ab < 1.0))
        throw InputError("annulus: base point must satisfy q < |b| < 1");
    if (std::abs(ab - std::sqrt(q)) < 1e-9)
        throw InputError("annulus: |b| = sqrt(q) makes the two zeros collide");
}

int AnnulusParams::effective_truncation() const {
    if (truncation > 0) return truncation;
    // smallest N with q^{2N} < 1e-14
    int n = static_cast<int>(std::ceil(std::log(1e-14) / (2.0 * std::log(q))));
    return std::max(n, 1);
}

Complex theta_product(Complex w, double q, int trunc) {
    if (w == Complex(0.0, 0.0))
        throw InputError("theta_product: w = 0 is outside the domain");
    Complex prod(1.0, 0.0);
    double q2n = 1.0;       // q^{2n}
    double q2 = q * q;
    for (int n = 0; n <= trunc; ++n) {
        prod *= (1.0 - q2n * w) * (1.0 - q2n * q2 / w);
        q2n *= q2;
    }
    return prod;
}

double theta_tail_bound(Complex w, double q, int trunc) {
    double aw = std::abs(w);
    double q2 = q * q;
    double head = std::pow(q2, trunc + 1);
    double sum = head * (aw + q2 / aw) / (1.0 - q2);
    return std::expm1(sum);
}

Complex annulus_factor(Complex a, Complex z, double q, int trunc) {
    double aa = std::abs(a);
    if (!(aa > q && aa < 1.0))
        throw InputError("annulus_factor: zero location must satisfy q < |a| < 1");
    Complex num = theta_product(z / a, q, trunc);
    Complex den = theta_product(z * std::conj(a), q, trunc);
    if (std::abs(den) < 1e-300)
        throw InputError("annulus_factor: point outside the admissible neighborhood");
    return num / den;
}

InnerFunction::InnerFunction(const AnnulusParams& p, Complex t) : params_(p), t_(t) {
    p.validate();
    if (std::abs(std::abs(t) - 1.0) > 1e-9)
        throw InputError("make_vartheta: t must be unimodular");
    t_ /= std::abs(t_);
    second_zero_ = p.q * t_ / p.b;

    const int trunc = p.effective_truncation();
    auto raw = [&](Complex z) {
        return annulus_factor(p.b, z, p.q, trunc) *
               annulus_factor(second_zero_, z, p.q, trunc);
    };

    // Measured boundary moduli of the two-factor product; these are constant
    // per circle, which the calibration residual re-checks below.
    auto mean_modulus = [&](double r) {
        double acc = 0.0;
        const int m = 16;
        for (int k = 0; k < m; ++k) {
            double ang = kTwoPi * k / m;
            acc += std::abs(raw(Complex(r * std::cos(ang), r * std::sin(ang))));
        }
        return acc / m;
    };
    double m_outer = mean_modulus(1.0);
    double m_inner = mean_modulus(p.q);
    power_ = static_cast<int>(std::lround(std::log(m_outer / m_inner) / std::log(p.q)));
    calib_ = 1.0 / raw(Complex(1.0, 0.0));  // 1^power == 1

    auto value = [&](Complex z) { return calib_ * std::pow(z, power_) * raw(z); };
    double resid = std::abs(value(Complex(1.0, 0.0)) - 1.0);
    const int m = 64;
    for (int k = 0; k < m; ++k) {
        double ang = kTwoPi * k / m;
        Complex e(std::cos(ang), std::sin(ang));
        resid = std::max(resid, std::abs(std::abs(value(e)) - 1.0));
        resid = std::max(resid, std::abs(std::abs(value(p.q * e)) - 1.0));
    }
    calib_residual_ = resid;
    if (resid > 1e-6)
        throw NumericError(
            "make_vartheta: calibration residual " + std::to_string(resid) +
            " (power " + std::to_string(power_) + ", moduli " +
            std::to_string(m_outer) + "/" + std::to_string(m_inner) + ")");
}

Complex InnerFunction::operator()(Complex z) const {
    const int trunc = params_.effective_truncation();
    return calib_ * std::pow(z, power_) *
           annulus_factor(params_.b, z, params_.q, trunc) *
           annulus_factor(second_zero_, z, params_.q, trunc);
}

InnerFunction make_vartheta(const AnnulusParams& p, Complex t) {
    return InnerFunction(p, t);
}

namespace {

// Winding number of f along the ccw circle |z - c| = r.
double winding_raw(const Fn& f, Complex c, double r, int samples, double* min_mod) {
    double total = 0.0;
    Complex prev = f(c + Complex(r, 0.0));
    double mm = std::abs(prev);
    for (int k = 1; k <= samples; ++k) {
        double ang = kTwoPi * k / samples;
        Complex cur = f(c + r * Complex(std::cos(ang), std::sin(ang)));
        mm = std::min(mm, std::abs(cur));
        total += std::arg(cur / prev);
        prev = cur;
    }
    if (min_mod) *min_mod = mm;
    return total / kTwoPi;
}

int to_integer_winding(double w) {
    double rounded = std::round(w);
    if (std::abs(w - rounded) >= 0.25)
        throw NumericError("count_zeros: winding sum " + std::to_string(w) +
                           " is not close to an integer; refine sampling");
    return static_cast<int>(rounded);
}

int circle_winding(const Fn& f, Complex c, double r, int samples) {
    double mm = 0.0;
    double w = winding_raw(f, c, r, samples, &mm);
    if (mm <= kContourFloor)
        throw NumericError("count_zeros: |f| = " + std::to_string(mm) +
                           " on the contour; result inconclusive");
    return to_integer_winding(w);
}

}  // namespace

int count_zeros(const Fn& f, const AnnulusBoundary& contour, int samples) {
    int outer = circle_winding(f, Complex(0, 0), contour.outer_radius, samples);
    int inner = circle_winding(f, Complex(0, 0), contour.inner_radius, samples);
    return outer - inner;
}

int count_zeros(const Fn& f, const Circle& contour, int samples) {
    return circle_winding(f, contour.center, contour.radius, samples);
}

namespace {

// Picks a radius near r where the circle stays clear of zeros of f.
double clear_radius(const Fn& f, double r, double lo, double hi, int samples) {
    for (int attempt = 0; attempt < 8; ++attempt) {
        double mm = 0.0;
        winding_raw(f, Complex(0, 0), r, samples, &mm);
        if (mm > kContourFloor) return r;
        double bump = 1.0 + 3e-3 * (attempt + 1) * ((attempt % 2 == 0) ? 1.0 : -1.0);
        r = std::clamp(r * bump, lo * 1.0000001, hi * 0.9999999);
    }
    throw NumericError("locate_zeros: could not find a zero-free circle");
}

Complex newton_polish(const Fn& f, Complex z0) {
    Complex z = z0;
    const double h = 1e-6;
    for (int it = 0; it < 60; ++it) {
        Complex fz = f(z);
        if (std::abs(fz) < 1e-15) break;
        Complex df = (f(z + h) - f(z - h)) / (2.0 * h);
        if (std::abs(df) < 1e-14) break;
        Complex step = fz / df;
        z -= step;
        if (std::abs(step) < 1e-13) break;
    }
    return z;
}

void locate_in_subannulus(const Fn& f, double r_lo, double r_hi, int count,
                          int samples, std::vector<Complex>& out) {
    if (count <= 0) return;
    if (r_hi - r_lo > 1e-2) {
        double mid = clear_radius(f, std::sqrt(r_lo * r_hi), r_lo, r_hi, samples);
        int lower = count_zeros(f, AnnulusBoundary{r_lo, mid}, samples);
        locate_in_subannulus(f, r_lo, mid, lower, samples, out);
        locate_in_subannulus(f, mid, r_hi, count - lower, samples, out);
        return;
    }
    // Thin subannulus: seed Newton at the angular minima of |f| on the
    // mid circle.
    double r = 0.5 * (r_lo + r_hi);
    std::vector<double> mods(samples);
    for (int k = 0; k < samples; ++k) {
        double ang = kTwoPi * k / samples;
        mods[k] = std::abs(f(r * Complex(std::cos(ang), std::sin(ang))));
    }
    std::vector<std::pair<double, int>> minima;
    for (int k = 0; k < samples; ++k) {
        int prev = (k + samples - 1) % samples;
        int next = (k + 1) % samples;
        if (mods[k] <= mods[prev] && mods[k] <= mods[next])
            minima.emplace_back(mods[k], k);
    }
    std::sort(minima.begin(), minima.end());
    int found = 0;
    for (const auto& [mod, k] : minima) {
        if (found == count) break;
        double ang = kTwoPi * k / samples;
        Complex z = newton_polish(f, r * Complex(std::cos(ang), std::sin(ang)));
        if (std::abs(z) < r_lo - 1e-4 || std::abs(z) > r_hi + 1e-4) continue;
        if (std::abs(f(z)) > 1e-8) continue;
        bool dup = false;
        for (const Complex& w : out)
            if (std::abs(w - z) < 1e-6) dup = true;
        if (dup) continue;
        out.push_back(z);
        ++found;
    }
}

}  // namespace

std::vector<Complex> locate_zeros(const Fn& f, double r_lo, double r_hi, int samples) {
    double lo = clear_radius(f, r_lo, r_lo * 0.999, r_hi, samples);
    double hi = clear_radius(f, r_hi, lo, r_hi * 1.001, samples);
    int total = count_zeros(f, AnnulusBoundary{lo, hi}, samples);
    std::vector<Complex> out;
    locate_in_subannulus(f, lo, hi, total, samples, out);
    if (static_cast<int>(out.size()) != total)
        throw NumericError("locate_zeros: found " + std::to_string(out.size()) +
                           " of " + std::to_string(total) + " zeros");
    return out;
}

namespace {

// Unnormalized kernel sum s(z,w) = sum_n (z conj(w))^n / (m0 + m1 q^{2n}).
Complex hardy_sum(Complex u, double q, double m0, double m1, int cutoff) {
    double rho = std::abs(u);
    double q2 = q * q;
    if (!(rho > q2 && rho < 1.0))
        throw InputError("hardy_kernel: |z conj(w)| must lie in (q^2, 1)");
    int m = cutoff;
    if (m <= 0) {
        double gamma = std::max(rho, q2 / rho);
        double min_weight = std::min(m0, m1);
        m = static_cast<int>(std::ceil(std::log(1e-12 * min_weight) / std::log(gamma)));
        m = std::clamp(m, 8, 200000);
    }
    Complex sum(0.0, 0.0);
    Complex upow(1.0, 0.0);
    double q2n = 1.0;
    for (int n = 0; n <= m; ++n) {  // n >= 0
        sum += upow / (m0 + m1 * q2n);
        upow *= u;
        q2n *= q2;
    }
    Complex v = q2 / u;  // (q^2/u)^k / (m1 + m0 q^{2k}) for n = -k
    Complex vpow = v;
    double q2k = q2;
    for (int k = 1; k <= m; ++k) {
        sum += vpow / (m1 + m0 * q2k);
        vpow *= v;
        q2k *= q2;
    }
    return sum;
}

}  // namespace

Complex hardy_kernel(Complex z, Complex w, const AnnulusParams& p, int cutoff) {
    p.validate();
    double m0 = std::log(std::abs(p.b) / p.q) / std::log(1.0 / p.q);
    double m1 = 1.0 - m0;
    Complex s_zw = hardy_sum(z * std::conj(w), p.q, m0, m1, cutoff);
    Complex s_zb = hardy_sum(z * std::conj(p.b), p.q, m0, m1, cutoff);
    Complex s_bw = hardy_sum(p.b * std::conj(w), p.q, m0, m1, cutoff);
    Complex s_bb = hardy_sum(p.b * std::conj(p.b), p.q, m0, m1, cutoff);
    return s_zw * s_bb / (s_zb * s_bw);
}

CMatrix hardy_gram(const std::vector<Complex>& nodes, const AnnulusParams& p, int cutoff) {
    const Index n = static_cast<Index>(nodes.size());
    CMatrix k(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j <= i; ++j) {
            k(i, j) = hardy_kernel(nodes[i], nodes[j], p, cutoff);
            k(j, i) = std::conj(k(i, j));
        }
    return k;
}

InnerReport verify_inner(const InnerFunction& f, int boundary_samples) {
    InnerReport rep;
    const AnnulusParams& p = f.params();
    for (int k = 0; k < boundary_samples; ++k) {
        double ang = kTwoPi * k / boundary_samples;
        Complex e(std::cos(ang), std::sin(ang));
        rep.boundary_residual_outer =
            std::max(rep.boundary_residual_outer, std::abs(std::abs(f(e)) - 1.0));
        rep.boundary_residual_inner =
            std::max(rep.boundary_residual_inner, std::abs(std::abs(f(p.q * e)) - 1.0));
    }
    rep.value_at_one_error = std::abs(f(Complex(1.0, 0.0)) - 1.0);

    Fn fn = [&f](Complex z) { return f(z); };
    rep.winding = count_zeros(fn, AnnulusBoundary{p.q, 1.0});
    rep.zeros = locate_zeros(fn, p.q, 1.0);

    std::vector<Complex> expected = {p.b, f.zero_second()};
    rep.zero_error = 0.0;
    for (const Complex& e : expected) {
        double best = 1e9;
        for (const Complex& z : rep.zeros) best = std::min(best, std::abs(z - e));
        rep.zero_error = std::max(rep.zero_error, best);
    }
    rep.pass = rep.boundary_residual_outer <= 1e-6 &&
               rep.boundary_residual_inner <= 1e-6 &&
               rep.value_at_one_error <= 1e-10 && rep.winding == 2 &&
               rep.zeros.size() == 2 && rep.zero_error <= 1e-8;
    return rep;
}

}  // namespace tfpick::annulus
