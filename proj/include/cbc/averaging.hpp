#pragma once

/**
 * First-order averaging of the closed loop.
 *
 * The slow functions
 *     f1(a, mu) = <g(a sin phi, a cos phi, mu) cos phi>
 *     f2(a, mu) = <g(a sin phi, a cos phi, mu) sin phi>
 * (angle brackets: mean over one period) fully characterize the plant at this order.
 * The slow flow is written in amplitude / phase-lag form (a, alpha) relative to the
 * synthesized phase theta; the fixed points with alpha = 0, G = a are the
 * non-invasive ones.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "cbc/controller.hpp"
#include "cbc/errors.hpp"
#include "cbc/models.hpp"
#include "cbc/sim.hpp"

namespace cbc {

/// Amplitudes are clamped to this value wherever the slow flow divides by a.
inline constexpr double kMinAmplitude = 1e-6;
inline constexpr std::size_t kDefaultQuadratureNodes = 256;

struct SlowState {
    double a = 0.0;
    double alpha = 0.0;
    double y1 = 0.0;
    double y2 = 0.0;
    double y3 = 0.0;
    double eta = 0.0;
    double theta = 0.0;
};

/// Periodic trapezoid rule on [0, 2pi). Exact for trigonometric polynomials of
/// degree below n_nodes, which covers any polynomial force.
[[nodiscard]] inline SlowPair slow_functions_quadrature(const OscillatorModel& m, double a, double mu,
                                                        std::size_t n_nodes = kDefaultQuadratureNodes) {
    if (n_nodes < 16) throw ValidationError("quadrature needs at least 16 nodes");
    if (a < 0.0) throw ValidationError("amplitude must be non-negative");
    double s1 = 0.0;
    double s2 = 0.0;
    const double step = 2.0 * std::numbers::pi / static_cast<double>(n_nodes);
    for (std::size_t k = 0; k < n_nodes; ++k) {
        const double phi = step * static_cast<double>(k);
        const double sp = std::sin(phi);
        const double cp = std::cos(phi);
        const double g = m.force(a * sp, a * cp, mu);
        s1 += g * cp;
        s2 += g * sp;
    }
    const double n = static_cast<double>(n_nodes);
    return {s1 / n, s2 / n};
}

/// Closed form when the model provides one, quadrature otherwise.
[[nodiscard]] inline SlowPair slow_functions(const OscillatorModel& m, double a, double mu) {
    if (auto cf = m.closed_form_slow(a, mu)) return *cf;
    return slow_functions_quadrature(m, a, mu);
}

[[nodiscard]] inline SlowDerivatives slow_function_derivatives(const OscillatorModel& m, double a,
                                                               double mu) {
    if (auto cf = m.closed_form_slow_derivatives(a, mu)) return *cf;
    const double ha = 1e-6 * std::max(1.0, std::abs(a));
    const double hm = 1e-6 * std::max(1.0, std::abs(mu));
    auto q = [&](double aa, double mm) {
        // Odd extension: f(-a) = -f(a).
        if (aa < 0.0) {
            const SlowPair p = slow_functions_quadrature(m, -aa, mm);
            return SlowPair{-p.f1, -p.f2};
        }
        return slow_functions_quadrature(m, aa, mm);
    };
    const SlowPair ap = q(a + ha, mu);
    const SlowPair am = q(a - ha, mu);
    const SlowPair mp = q(a, mu + hm);
    const SlowPair mm = q(a, mu - hm);
    return {(ap.f1 - am.f1) / (2.0 * ha), (mp.f1 - mm.f1) / (2.0 * hm), (ap.f2 - am.f2) / (2.0 * ha),
            (mp.f2 - mm.f2) / (2.0 * hm)};
}

/// Averaged closed-loop vector field in (a, alpha) form. The returned SlowState holds
/// time derivatives component-wise.
[[nodiscard]] inline SlowState slow_flow_rhs(const SlowState& s, const ControllerGains& gains,
                                             const ContinuationCenter& c, const OscillatorModel& m) {
    const double a = std::max(s.a, kMinAmplitude);
    const double eps = m.epsilon();
    const ArcPoint arc = arclength_map(s.eta, c);
    const SlowPair f = slow_functions(m, a, arc.mu);
    const double sin_alpha = std::sin(s.alpha);
    const double cos_alpha = std::cos(s.alpha);

    SlowState d;
    d.a = eps * f.f1 + 0.5 * gains.kd1 * (arc.g * cos_alpha - a);
    d.alpha = -eps / a * f.f2 + 1.0 - gains.omega_0 - gains.ki2 * s.y3 -
              gains.kd1 / (2.0 * a) * arc.g * sin_alpha;
    d.y1 = gains.omega_c * (0.5 * a * sin_alpha - s.y1);
    d.y2 = gains.omega_c * (0.5 * a * cos_alpha - s.y2);
    d.y3 = gains.r * s.y1;
    d.eta = gains.ki3 * (2.0 * s.y2 - arc.g);
    d.theta = gains.omega_0 + gains.ki2 * s.y3;
    return d;
}

// ---------------------------------------------------------------------------
// Slow-flow trajectories
// ---------------------------------------------------------------------------
//
// The 1/a terms in the alpha equation make the polar form stiff near a = 0, which
// is exactly where the zero initial condition starts. Trajectories are therefore
// integrated in the Cartesian variables p = a cos(alpha), q = a sin(alpha), where
// the field is regular (f1/a and f2/a stay bounded for an odd force).

using SlowCartesian = std::array<double, 7>;  // p, q, y1, y2, y3, eta, theta

[[nodiscard]] inline SlowCartesian to_cartesian(const SlowState& s) {
    return {s.a * std::cos(s.alpha), s.a * std::sin(s.alpha), s.y1, s.y2, s.y3, s.eta, s.theta};
}

[[nodiscard]] inline SlowState from_cartesian(const SlowCartesian& z) {
    const double a = std::hypot(z[0], z[1]);
    const double alpha = a > 0.0 ? std::atan2(z[1], z[0]) : 0.0;
    return {a, alpha, z[2], z[3], z[4], z[5], z[6]};
}

[[nodiscard]] inline SlowCartesian slow_flow_rhs_cartesian(const SlowCartesian& z,
                                                           const ControllerGains& gains,
                                                           const ContinuationCenter& c,
                                                           const OscillatorModel& m) {
    const double p = z[0];
    const double q = z[1];
    const double a = std::max(std::hypot(p, q), kMinAmplitude);
    const double eps = m.epsilon();
    const ArcPoint arc = arclength_map(z[5], c);
    const SlowPair f = slow_functions(m, a, arc.mu);
    const double f1_a = f.f1 / a;
    const double f2_a = f.f2 / a;
    const double detune = 1.0 - gains.omega_0 - gains.ki2 * z[4];

    return {eps * (f1_a * p + f2_a * q) + 0.5 * gains.kd1 * (arc.g - p) - detune * q,
            eps * (f1_a * q - f2_a * p) - 0.5 * gains.kd1 * q + detune * p,
            gains.omega_c * (0.5 * q - z[2]),
            gains.omega_c * (0.5 * p - z[3]),
            gains.r * z[2],
            gains.ki3 * (2.0 * z[3] - arc.g),
            gains.omega_0 + gains.ki2 * z[4]};
}

struct SlowTrajectory {
    std::vector<double> times;
    std::vector<SlowState> states;
};

[[nodiscard]] inline SlowTrajectory integrate_slow_flow(const OscillatorModel& m,
                                                        const ControllerGains& gains,
                                                        const ContinuationCenter& c,
                                                        const SlowState& s0, double dt,
                                                        std::size_t n_steps) {
    auto rhs = [&](const SlowCartesian& z) { return slow_flow_rhs_cartesian(z, gains, c, m); };
    auto path = integrate<7>(rhs, to_cartesian(s0), dt, n_steps);
    SlowTrajectory out;
    out.times = std::move(path.times);
    out.states.reserve(path.states.size());
    for (const auto& z : path.states) out.states.push_back(from_cartesian(z));
    return out;
}

// ---------------------------------------------------------------------------
// Uncontrolled averaged system
// ---------------------------------------------------------------------------

struct UncontrolledEquilibrium {
    double a = 0.0;
    double lambda_u = 0.0;  ///< eps * f1a; the cycle is unstable when positive
    double omega = 1.0;     ///< 1 - (eps / a) f2
};

[[nodiscard]] inline UncontrolledEquilibrium make_uncontrolled_equilibrium(const OscillatorModel& m,
                                                                           double a, double mu) {
    const SlowPair f = slow_functions(m, a, mu);
    const SlowDerivatives d = slow_function_derivatives(m, a, mu);
    return {a, m.epsilon() * d.f1a, 1.0 - m.epsilon() / a * f.f2};
}

/// Roots of f1(., mu) on (0, a_search_max]: sign-change scan over 1000 cells then bisection.
[[nodiscard]] inline std::vector<UncontrolledEquilibrium> uncontrolled_fixed_points(
    const OscillatorModel& m, double mu, double a_search_max) {
    if (!(a_search_max > 0.0)) throw ValidationError("a_search_max must be positive");
    constexpr int kCells = 1000;
    constexpr double kTol = 1e-12;
    auto f1 = [&](double a) { return slow_functions(m, a, mu).f1; };

    std::vector<UncontrolledEquilibrium> out;
    const double h = a_search_max / kCells;
    double lo = h;
    double f_lo = f1(lo);
    if (f_lo == 0.0) out.push_back(make_uncontrolled_equilibrium(m, lo, mu));
    for (int i = 2; i <= kCells; ++i) {
        const double hi = h * i;
        const double f_hi = f1(hi);
        if (f_hi == 0.0) {
            out.push_back(make_uncontrolled_equilibrium(m, hi, mu));
        } else if (f_lo != 0.0 && (f_lo < 0.0) != (f_hi < 0.0)) {
            double a = lo;
            double b = hi;
            double fa = f_lo;
            while (b - a > kTol) {
                const double mid = 0.5 * (a + b);
                const double fm = f1(mid);
                if (fm == 0.0) {
                    a = b = mid;
                    break;
                }
                if ((fm < 0.0) == (fa < 0.0)) {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            out.push_back(make_uncontrolled_equilibrium(m, 0.5 * (a + b), mu));
        }
        lo = hi;
        f_lo = f_hi;
    }
    return out;
}

}  // namespace cbc
