#pragma once

/**
 * Fixed points and linear stability of the averaged closed loop.
 *
 * With the state ordered (a, alpha, y1, y2, y3, eta), the Jacobian at a non-invasive
 * fixed point is block triangular: (alpha, y1, y3) form the phase-locked loop block,
 * whose characteristic cubic does not involve the plant at all, and (a, y2, eta) form
 * the amplitude / arclength block. The spectrum is therefore the union of the roots of
 * two cubics.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "cbc/averaging.hpp"
#include "cbc/controller.hpp"
#include "cbc/errors.hpp"
#include "cbc/models.hpp"

namespace cbc {

using Complex = std::complex<double>;
using Matrix6 = Eigen::Matrix<double, 6, 6>;

/// Non-invasive equilibrium of the averaged closed loop, on the circle of `center`.
struct FixedPointSolution {
    double a = 0.0;
    double eta = 0.0;
    double mu = 0.0;
    double alpha = 0.0;
    double y1 = 0.0;
    double y2 = 0.0;
    double y3 = 0.0;
    double omega = 1.0;
    ContinuationCenter center;
};

/// Builds the equilibrium at angle eta, assuming f1(G(eta), mu(eta)) = 0 there.
[[nodiscard]] inline FixedPointSolution make_fixed_point(const OscillatorModel& m,
                                                         const ControllerGains& gains,
                                                         const ContinuationCenter& c, double eta) {
    const ArcPoint arc = arclength_map(eta, c);
    FixedPointSolution fp;
    fp.a = arc.g;
    fp.eta = eta;
    fp.mu = arc.mu;
    fp.y2 = 0.5 * arc.g;
    fp.omega = 1.0 - m.epsilon() / arc.g * slow_functions(m, arc.g, arc.mu).f2;
    fp.y3 = (fp.omega - gains.omega_0) / gains.ki2;
    fp.center = c;
    return fp;
}

/// Intersections of the uncontrolled branch f1 = 0 with the arclength circle, found by a
/// 720-cell scan in eta and bisection. Only arcs with positive target amplitude are searched.
[[nodiscard]] inline std::vector<FixedPointSolution> controlled_fixed_points(
    const OscillatorModel& m, const ControllerGains& gains, const ContinuationCenter& c) {
    validate(c);
    constexpr int kCells = 720;
    constexpr double kTol = 1e-12;
    constexpr double kDedup = 1e-9;
    const double two_pi = 2.0 * std::numbers::pi;

    auto residual = [&](double eta) -> std::optional<double> {
        const ArcPoint arc = arclength_map(eta, c);
        if (!(arc.g > 0.0)) return std::nullopt;
        return slow_functions(m, arc.g, arc.mu).f1;
    };

    std::vector<double> roots;
    const double h = two_pi / kCells;
    for (int i = 0; i < kCells; ++i) {
        double lo = h * i;
        double hi = h * (i + 1);
        const auto f_lo = residual(lo);
        const auto f_hi = residual(hi);
        if (!f_lo || !f_hi) continue;
        if (*f_lo == 0.0) {
            roots.push_back(lo);
            continue;
        }
        if (*f_hi == 0.0 || (*f_lo < 0.0) == (*f_hi < 0.0)) continue;
        double fa = *f_lo;
        while (hi - lo > kTol) {
            const double mid = 0.5 * (lo + hi);
            const double fm = *residual(mid);
            if (fm == 0.0) {
                lo = hi = mid;
                break;
            }
            if ((fm < 0.0) == (fa < 0.0)) {
                lo = mid;
                fa = fm;
            } else {
                hi = mid;
            }
        }
        roots.push_back(0.5 * (lo + hi));
    }

    std::vector<FixedPointSolution> out;
    for (double eta : roots) {
        const bool dup = std::any_of(out.begin(), out.end(), [&](const FixedPointSolution& fp) {
            const double d = std::abs(std::remainder(fp.eta - eta, two_pi));
            return d < kDedup;
        });
        if (!dup) out.push_back(make_fixed_point(m, gains, c, eta));
    }
    if (out.empty()) {
        throw EmptyIntersection("the continuation circle does not intersect the branch of limit cycles");
    }
    return out;
}

/// Jacobian of the averaged closed loop at fp, state order (a, alpha, y1, y2, y3, eta).
[[nodiscard]] inline Matrix6 characteristic_matrix(const FixedPointSolution& fp,
                                                   const ControllerGains& gains,
                                                   const OscillatorModel& m) {
    const double eps = m.epsilon();
    const double a = fp.a;
    const SlowPair f = slow_functions(m, a, fp.mu);
    const SlowDerivatives d = slow_function_derivatives(m, a, fp.mu);
    const double mu_offset = fp.mu - fp.center.mu0;  // Delta cos(eta)
    const double dmu_deta = -(a - fp.center.g0);      // -Delta sin(eta)
    const double kd = gains.kd1;

    Matrix6 M = Matrix6::Zero();
    M(0, 0) = eps * d.f1a - 0.5 * kd;
    M(0, 5) = 0.5 * kd * mu_offset + eps * d.f1mu * dmu_deta;

    M(1, 0) = -eps / (a * a) * (a * d.f2a - f.f2);
    M(1, 1) = -0.5 * kd;
    M(1, 4) = -gains.ki2;
    M(1, 5) = -eps / a * d.f2mu * dmu_deta;

    M(2, 1) = 0.5 * a * gains.omega_c;
    M(2, 2) = -gains.omega_c;

    M(3, 0) = 0.5 * gains.omega_c;
    M(3, 3) = -gains.omega_c;

    M(4, 2) = gains.r;

    M(5, 3) = 2.0 * gains.ki3;
    M(5, 5) = -gains.ki3 * mu_offset;
    return M;
}

/// Real cubic c3 l^3 + c2 l^2 + c1 l + c0.
struct Cubic {
    double c3 = 1.0;
    double c2 = 0.0;
    double c1 = 0.0;
    double c0 = 0.0;
};

using CubicRoots = std::array<Complex, 3>;

/// Roots via eigenvalues of the companion matrix of the monic cubic.
[[nodiscard]] inline CubicRoots cubic_roots(const Cubic& p) {
    if (p.c3 == 0.0) throw ValidationError("leading cubic coefficient is zero");
    Eigen::Matrix3d companion = Eigen::Matrix3d::Zero();
    companion(1, 0) = 1.0;
    companion(2, 1) = 1.0;
    companion(0, 2) = -p.c0 / p.c3;
    companion(1, 2) = -p.c1 / p.c3;
    companion(2, 2) = -p.c2 / p.c3;
    Eigen::EigenSolver<Eigen::Matrix3d> solver(companion, false);
    const auto ev = solver.eigenvalues();
    return {ev(0), ev(1), ev(2)};
}

/// Phase-locked-loop cubic; independent of the plant.
[[nodiscard]] inline Cubic pll_cubic(const ControllerGains& g, double a) {
    return {2.0, g.kd1 + 2.0 * g.omega_c, g.omega_c * g.kd1, g.omega_c * a * g.r * g.ki2};
}

/// Amplitude / arclength cubic at a fixed point.
[[nodiscard]] inline Cubic arclength_cubic(const FixedPointSolution& fp, const ControllerGains& g,
                                           const OscillatorModel& m) {
    const double eps = m.epsilon();
    const SlowDerivatives d = slow_function_derivatives(m, fp.a, fp.mu);
    const double mu_offset = fp.mu - fp.center.mu0;
    const double dmu_deta = -(fp.a - fp.center.g0);
    const double k = g.ki3 * mu_offset;
    const double damp = g.kd1 - 2.0 * eps * d.f1a;
    return {2.0, 2.0 * g.omega_c + damp + 2.0 * k, g.omega_c * damp + k * (2.0 * g.omega_c + damp),
            -2.0 * g.ki3 * eps * g.omega_c * (mu_offset * d.f1a + dmu_deta * d.f1mu)};
}

struct CubicSpectra {
    CubicRoots pll;
    CubicRoots arclength;
};

[[nodiscard]] inline CubicSpectra cubic_spectra(const FixedPointSolution& fp,
                                                const ControllerGains& gains,
                                                const OscillatorModel& m) {
    return {cubic_roots(pll_cubic(gains, fp.a)), cubic_roots(arclength_cubic(fp, gains, m))};
}

struct PllStability {
    std::array<bool, 4> flags{};
    double a_max = 0.0;

    [[nodiscard]] bool all() const {
        return std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
    }
};

/// Routh-Hurwitz conditions of the PLL cubic at amplitude a, plus the largest
/// amplitude they allow: a_max = Kd1 (Kd1 + 2 omega_c) / (2 R Ki2).
[[nodiscard]] inline PllStability pll_stability(const ControllerGains& g, double a) {
    PllStability out;
    out.flags[0] = 0.5 * g.kd1 + g.omega_c > 0.0;
    out.flags[1] = g.kd1 > 0.0;
    out.flags[2] = g.r * g.ki2 > 0.0;
    out.flags[3] = (g.kd1 + 2.0 * g.omega_c) * g.kd1 - 2.0 * a * g.r * g.ki2 > 0.0;
    out.a_max = g.kd1 * (g.kd1 + 2.0 * g.omega_c) / (2.0 * g.r * g.ki2);
    return out;
}

struct PerturbativeEigs {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    /// Tangent (-f1a, f1mu) dotted with (mu - mu0, a - G0); with lambda3 < 0 its sign
    /// times sign(Ki3) decides stability of the fixed point.
    double direction_product = 0.0;
};

/// Leading-order eigenvalues for a small continuation radius.
[[nodiscard]] inline PerturbativeEigs perturbative_eigs(const FixedPointSolution& fp,
                                                        const ControllerGains& gains,
                                                        const OscillatorModel& m) {
    const double eps = m.epsilon();
    const SlowDerivatives d = slow_function_derivatives(m, fp.a, fp.mu);
    const double denom = 2.0 * eps * d.f1a - gains.kd1;
    if (std::abs(denom) < 1e-12) {
        throw DegenerateDenominator("2*eps*f1a - kd1 vanishes at this fixed point");
    }
    PerturbativeEigs out;
    out.direction_product = -d.f1a * (fp.mu - fp.center.mu0) + d.f1mu * (fp.a - fp.center.g0);
    out.lambda1 = 2.0 * eps * gains.ki3 / denom * out.direction_product;
    out.lambda2 = -gains.omega_c;
    out.lambda3 = eps * d.f1a - 0.5 * gains.kd1;
    return out;
}

using Spectrum6 = std::array<Complex, 6>;

[[nodiscard]] inline Spectrum6 eigenvalues(const Matrix6& M) {
    Eigen::EigenSolver<Matrix6> solver(M, false);
    const auto ev = solver.eigenvalues();
    Spectrum6 out;
    for (int i = 0; i < 6; ++i) out[static_cast<std::size_t>(i)] = ev(i);
    return out;
}

/// Smallest possible max |x_i - y_p(i)| over pairings of the two multisets.
template <std::size_t N>
[[nodiscard]] double spectral_distance(std::array<Complex, N> x, std::array<Complex, N> y) {
    std::array<std::size_t, N> perm{};
    for (std::size_t i = 0; i < N; ++i) perm[i] = i;
    double best = std::numeric_limits<double>::infinity();
    do {
        double worst = 0.0;
        for (std::size_t i = 0; i < N && worst < best; ++i) {
            worst = std::max(worst, std::abs(x[i] - y[perm[i]]));
        }
        best = std::min(best, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

struct StabilityReport {
    CubicRoots cubic1_roots{};
    CubicRoots cubic2_roots{};
    Spectrum6 eigen6{};
    std::array<bool, 4> routh_flags{};
    double a_max = 0.0;
    std::optional<PerturbativeEigs> perturbative;  ///< empty when the expansion is degenerate
    bool stable = false;

    [[nodiscard]] double max_real_part() const {
        double r = -std::numeric_limits<double>::infinity();
        for (const Complex& l : eigen6) r = std::max(r, l.real());
        return r;
    }
};

[[nodiscard]] inline StabilityReport stability_report(const FixedPointSolution& fp,
                                                      const ControllerGains& gains,
                                                      const OscillatorModel& m) {
    StabilityReport rep;
    const CubicSpectra cs = cubic_spectra(fp, gains, m);
    rep.cubic1_roots = cs.pll;
    rep.cubic2_roots = cs.arclength;
    rep.eigen6 = eigenvalues(characteristic_matrix(fp, gains, m));
    const PllStability pll = pll_stability(gains, fp.a);
    rep.routh_flags = pll.flags;
    rep.a_max = pll.a_max;
    try {
        rep.perturbative = perturbative_eigs(fp, gains, m);
    } catch (const DegenerateDenominator&) {
        rep.perturbative.reset();
    }
    rep.stable = rep.max_real_part() < 0.0;
    return rep;
}

}  // namespace cbc
