#pragma once

// Closed-loop vector field: derivative feedback on a single-harmonic target, a
// phase-locked loop that synthesizes the target phase, and an integral arclength
// controller that moves the target along a circle in the (mu, amplitude) plane.

#include <array>
#include <cmath>

#include "cbc/errors.hpp"
#include "cbc/models.hpp"

namespace cbc {

/// Controller parameters. Aggregate so zero-gain reductions can be built in tests;
/// call validate() before running a closed-loop simulation.
struct ControllerGains {
    double kd1 = 0.1;      ///< derivative feedback gain
    double ki2 = 0.1;      ///< PLL integral gain
    double ki3 = 0.1;      ///< arclength integral gain, sign selects the continuation direction
    double r = 0.1;        ///< PLL scaling
    double omega_c = 0.01; ///< demodulator low-pass cutoff
    double omega_0 = 0.9;  ///< PLL free-running frequency
};

inline void validate(const ControllerGains& g) {
    if (!(g.kd1 > 0.0)) throw ValidationError("kd1 must be positive");
    if (!(g.ki2 > 0.0)) throw ValidationError("ki2 must be positive");
    if (!(g.r > 0.0)) throw ValidationError("r must be positive");
    if (!(g.omega_c > 0.0)) throw ValidationError("omega_c must be positive");
    if (!(g.omega_0 > 0.0)) throw ValidationError("omega_0 must be positive");
    if (g.ki3 == 0.0 || !std::isfinite(g.ki3)) throw ValidationError("ki3 must be non-zero");
}

/// Circle of radius delta centred at (mu0, g0) on which (mu, G) are constrained.
struct ContinuationCenter {
    double mu0 = 0.0;
    double g0 = 0.3;
    double delta = 0.1;
};

inline void validate(const ContinuationCenter& c) {
    if (!(c.delta > 0.0)) throw ValidationError("delta must be positive");
    if (!(c.g0 >= 0.0)) throw ValidationError("g_0 must be non-negative");
    if (!std::isfinite(c.mu0)) throw ValidationError("mu_0 must be finite");
}

/// Full state of plant plus controller. theta and eta are never wrapped.
struct ExtendedState {
    double x = 0.0;
    double v = 0.0;
    double y1 = 0.0;
    double y2 = 0.0;
    double y3 = 0.0;
    double theta = 0.0;
    double eta = 0.0;

    static constexpr std::size_t kSize = 7;
    using Array = std::array<double, kSize>;

    [[nodiscard]] Array to_array() const { return {x, v, y1, y2, y3, theta, eta}; }
    [[nodiscard]] static ExtendedState from_array(const Array& s) {
        return {s[0], s[1], s[2], s[3], s[4], s[5], s[6]};
    }
    [[nodiscard]] bool finite() const {
        for (double c : to_array()) {
            if (!std::isfinite(c)) return false;
        }
        return true;
    }
};

struct ArcPoint {
    double mu = 0.0;
    double g = 0.0;
};

[[nodiscard]] inline ArcPoint arclength_map(double eta, const ContinuationCenter& c) {
    return {c.mu0 + c.delta * std::cos(eta), c.g0 + c.delta * std::sin(eta)};
}

[[nodiscard]] inline ExtendedState controlled_rhs(const ExtendedState& s,
                                                  const ControllerGains& gains,
                                                  const ContinuationCenter& c,
                                                  const OscillatorModel& m) {
    const double sin_eta = std::sin(s.eta);
    const double cos_eta = std::cos(s.eta);
    const double sin_theta = std::sin(s.theta);
    const double cos_theta = std::cos(s.theta);
    const double mu = c.mu0 + c.delta * cos_eta;
    const double target_amp = c.g0 + c.delta * sin_eta;

    // Phase and arclength rates first: the target derivative depends on both.
    const double theta_dot = gains.omega_0 + gains.ki2 * s.y3;
    const double eta_dot = gains.ki3 * (2.0 * s.y2 - target_amp);
    const double target_dot =
        theta_dot * cos_theta * target_amp + c.delta * eta_dot * cos_eta * sin_theta;

    ExtendedState d;
    d.x = s.v;
    d.v = -s.x + m.epsilon() * m.force(s.x, s.v, mu) + gains.kd1 * (target_dot - s.v);
    d.y1 = gains.omega_c * (s.x * cos_theta - s.y1);
    d.y2 = gains.omega_c * (s.x * sin_theta - s.y2);
    d.y3 = gains.r * s.y1;
    d.theta = theta_dot;
    d.eta = eta_dot;
    return d;
}

/// Invasiveness errors: displacement vs target, phase-detector lag, amplitude mismatch.
struct ErrorSignals {
    double e1 = 0.0;
    double e2 = 0.0;
    double e3 = 0.0;
};

[[nodiscard]] inline ErrorSignals error_signals(const ExtendedState& s, const ContinuationCenter& c) {
    const double target_amp = c.g0 + c.delta * std::sin(s.eta);
    return {target_amp * std::sin(s.theta) - s.x, s.y1, 2.0 * s.y2 - target_amp};
}

}  // namespace cbc
