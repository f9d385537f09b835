#pragma once

/**
 * Fixed-step time integration of the closed loop and steady-state detection.
 *
 * settle_and_measure integrates from an initial state until the window-averaged
 * invasiveness errors vanish and the amplitude estimate and arclength angle stop
 * drifting. Window averages are used throughout because the demodulator outputs
 * carry a ripple at twice the oscillation frequency whose amplitude (a/2 times
 * omega_c/2omega) exceeds typical tolerances.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cbc/controller.hpp"
#include "cbc/errors.hpp"
#include "cbc/models.hpp"

namespace cbc {

/// One classical Runge-Kutta step for an autonomous field rhs(state) -> derivative.
template <std::size_t N, class Rhs>
[[nodiscard]] std::array<double, N> rk4_step(const Rhs& rhs, const std::array<double, N>& s,
                                             double dt) {
    auto axpy = [](const std::array<double, N>& base, double h, const std::array<double, N>& k) {
        std::array<double, N> out{};
        for (std::size_t i = 0; i < N; ++i) out[i] = base[i] + h * k[i];
        return out;
    };
    const std::array<double, N> k1 = rhs(s);
    const std::array<double, N> k2 = rhs(axpy(s, 0.5 * dt, k1));
    const std::array<double, N> k3 = rhs(axpy(s, 0.5 * dt, k2));
    const std::array<double, N> k4 = rhs(axpy(s, dt, k3));
    std::array<double, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        out[i] = s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    return out;
}

template <std::size_t N>
[[nodiscard]] bool all_finite(const std::array<double, N>& s) {
    for (double c : s) {
        if (!std::isfinite(c)) return false;
    }
    return true;
}

template <std::size_t N>
struct SampledPath {
    std::vector<double> times;
    std::vector<std::array<double, N>> states;
};

/// Integrates n_steps fixed RK4 steps from s0, returning all n_steps + 1 samples.
/// Throws NonFiniteError as soon as any component stops being finite.
template <std::size_t N, class Rhs>
[[nodiscard]] SampledPath<N> integrate(const Rhs& rhs, const std::array<double, N>& s0, double dt,
                                       std::size_t n_steps) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (n_steps < 1) throw ValidationError("n_steps must be at least 1");
    if (!all_finite(s0)) throw NonFiniteError(0.0, "initial state is not finite");
    SampledPath<N> path;
    path.times.reserve(n_steps + 1);
    path.states.reserve(n_steps + 1);
    path.times.push_back(0.0);
    path.states.push_back(s0);
    std::array<double, N> s = s0;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        s = rk4_step<N>(rhs, s, dt);
        const double t = static_cast<double>(k) * dt;
        if (!all_finite(s)) throw NonFiniteError(t, "state became non-finite");
        path.times.push_back(t);
        path.states.push_back(s);
    }
    return path;
}

// ---------------------------------------------------------------------------
// Closed-loop trajectories
// ---------------------------------------------------------------------------

struct TrajectoryMeta {
    ControllerGains gains;
    ContinuationCenter center;
    std::string model_name;
    double dt = 0.0;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<ExtendedState> states;
    TrajectoryMeta meta;
};

[[nodiscard]] inline ExtendedState::Array controlled_rhs_array(const ExtendedState::Array& s,
                                                              const ControllerGains& gains,
                                                              const ContinuationCenter& c,
                                                              const OscillatorModel& m) {
    return controlled_rhs(ExtendedState::from_array(s), gains, c, m).to_array();
}

[[nodiscard]] inline Trajectory simulate(const OscillatorModel& m, const ControllerGains& gains,
                                         const ContinuationCenter& c, const ExtendedState& s0,
                                         double dt, std::size_t n_steps) {
    auto rhs = [&](const ExtendedState::Array& s) { return controlled_rhs_array(s, gains, c, m); };
    auto path = integrate<ExtendedState::kSize>(rhs, s0.to_array(), dt, n_steps);
    Trajectory traj;
    traj.times = std::move(path.times);
    traj.states.reserve(path.states.size());
    for (const auto& s : path.states) traj.states.push_back(ExtendedState::from_array(s));
    traj.meta = {gains, c, m.name(), dt};
    return traj;
}

inline constexpr const char* kTrajectoryCsvHeader =
    "t,x,v,y1,y2,y3,theta,eta,mu,g,e1,e2,e3,a_est,omega_est";

namespace detail {
inline void put_g17(std::ostream& os, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}
}  // namespace detail

/// Appends one CSV row for state s at time t (no header).
inline void write_trajectory_row(std::ostream& os, double t, const ExtendedState& s,
                                 const ControllerGains& gains, const ContinuationCenter& c) {
    const ArcPoint arc = arclength_map(s.eta, c);
    const ErrorSignals err = error_signals(s, c);
    const std::array<double, 15> row{t,
                                     s.x,
                                     s.v,
                                     s.y1,
                                     s.y2,
                                     s.y3,
                                     s.theta,
                                     s.eta,
                                     arc.mu,
                                     arc.g,
                                     err.e1,
                                     err.e2,
                                     err.e3,
                                     2.0 * s.y2,
                                     gains.omega_0 + gains.ki2 * s.y3};
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) os << ',';
        detail::put_g17(os, row[i]);
    }
    os << '\n';
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    os << kTrajectoryCsvHeader << '\n';
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        write_trajectory_row(os, traj.times[i], traj.states[i], traj.meta.gains, traj.meta.center);
    }
}

// ---------------------------------------------------------------------------
// Settling
// ---------------------------------------------------------------------------

struct SettleOptions {
    double dt = 2.0 * std::numbers::pi / 200.0;
    double t_max = 20000.0;
    double tol_e = 1e-4;
    double window = 20.0 * std::numbers::pi;
};

struct Residuals {
    double e1_rms = 0.0;
    double e2 = 0.0;  ///< |window mean of e2|
    double e3 = 0.0;  ///< |window mean of e3|
};

struct ConvergedPoint {
    double mu = 0.0;
    double a_est = 0.0;
    double omega_est = 0.0;
    Residuals residuals;
    double settle_time = 0.0;
};

enum class SettleStatus { Converged, NotConverged, Diverged };

[[nodiscard]] inline const char* to_string(SettleStatus s) {
    switch (s) {
        case SettleStatus::Converged: return "converged";
        case SettleStatus::NotConverged: return "not-converged";
        case SettleStatus::Diverged: return "diverged";
    }
    return "unknown";
}

struct SettleResult {
    SettleStatus status = SettleStatus::NotConverged;
    std::optional<ConvergedPoint> point;  ///< set iff converged
    ExtendedState final_state;
    Residuals residuals;  ///< last evaluated window (zeros if none was evaluated)
    double t_end = 0.0;

    [[nodiscard]] bool converged() const noexcept { return status == SettleStatus::Converged; }
};

/// Called after every accepted step (and once for the initial state at t = 0).
using StepObserver = std::function<void(double t, const ExtendedState& s)>;

namespace detail {
// Running sums over one block of steps.
struct BlockSums {
    double e1_sq = 0.0;
    double e2 = 0.0;
    double e3 = 0.0;
    double amp = 0.0;
    double eta = 0.0;
    double mu = 0.0;
    double omega = 0.0;

    BlockSums& operator+=(const BlockSums& o) {
        e1_sq += o.e1_sq;
        e2 += o.e2;
        e3 += o.e3;
        amp += o.amp;
        eta += o.eta;
        mu += o.mu;
        omega += o.omega;
        return *this;
    }
};
}  // namespace detail

inline void validate(const SettleOptions& o, double omega_0) {
    if (!(o.dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(o.t_max > 0.0)) throw ValidationError("t_max must be positive");
    if (!(o.tol_e > 0.0)) throw ValidationError("tol_e must be positive");
    if (!(o.window >= 2.0 * std::numbers::pi / omega_0 * (1.0 - 1e-12))) {
        throw ValidationError("window must cover at least one period 2*pi/omega_0");
    }
}

[[nodiscard]] inline SettleResult settle_and_measure(const OscillatorModel& m,
                                                     const ControllerGains& gains,
                                                     const ContinuationCenter& c,
                                                     const ExtendedState& s0,
                                                     const SettleOptions& opts = {},
                                                     const StepObserver& observer = {}) {
    validate(gains);
    validate(c);
    validate(opts, gains.omega_0);

    const double period = 2.0 * std::numbers::pi / gains.omega_0;
    const auto block_steps =
        static_cast<std::size_t>(std::max(1.0, std::round(period / opts.dt)));
    const auto window_blocks = static_cast<std::size_t>(
        std::max(1.0, std::round(opts.window / (static_cast<double>(block_steps) * opts.dt))));
    const auto max_steps = static_cast<std::size_t>(std::ceil(opts.t_max / opts.dt));
    const double window_samples = static_cast<double>(window_blocks * block_steps);

    auto rhs = [&](const ExtendedState::Array& s) { return controlled_rhs_array(s, gains, c, m); };

    SettleResult result;
    ExtendedState::Array state = s0.to_array();
    if (observer) observer(0.0, s0);

    std::vector<detail::BlockSums> blocks;
    blocks.reserve(max_steps / block_steps + 1);
    detail::BlockSums current;
    std::size_t in_block = 0;

    auto window_sum = [&](std::size_t end) {
        detail::BlockSums s;
        for (std::size_t i = end - window_blocks; i < end; ++i) s += blocks[i];
        return s;
    };

    for (std::size_t k = 1; k <= max_steps; ++k) {
        const double t = static_cast<double>(k) * opts.dt;
        state = rk4_step<ExtendedState::kSize>(rhs, state, opts.dt);
        const ExtendedState s = ExtendedState::from_array(state);
        if (!s.finite()) {
            result.status = SettleStatus::Diverged;
            result.final_state = s;
            result.t_end = t;
            return result;
        }
        if (observer) observer(t, s);

        const ErrorSignals err = error_signals(s, c);
        current.e1_sq += err.e1 * err.e1;
        current.e2 += err.e2;
        current.e3 += err.e3;
        current.amp += 2.0 * s.y2;
        current.eta += s.eta;
        current.mu += arclength_map(s.eta, c).mu;
        current.omega += gains.omega_0 + gains.ki2 * s.y3;
        if (++in_block < block_steps) continue;

        blocks.push_back(current);
        current = {};
        in_block = 0;
        if (blocks.size() < 2 * window_blocks) continue;

        const detail::BlockSums now = window_sum(blocks.size());
        const detail::BlockSums before = window_sum(blocks.size() - window_blocks);
        const double amp = now.amp / window_samples;
        const double eta = now.eta / window_samples;
        result.residuals = {std::sqrt(now.e1_sq / window_samples),
                            std::abs(now.e2 / window_samples), std::abs(now.e3 / window_samples)};
        const double amp_drift = std::abs(amp - before.amp / window_samples);
        const double eta_drift = std::abs(eta - before.eta / window_samples);

        if (result.residuals.e2 < opts.tol_e && result.residuals.e3 < opts.tol_e &&
            amp_drift < opts.tol_e * std::max(1.0, std::abs(amp)) &&
            eta_drift < opts.tol_e * std::max(1.0, std::abs(eta))) {
            result.status = SettleStatus::Converged;
            result.point = ConvergedPoint{now.mu / window_samples, std::max(0.0, amp),
                                          now.omega / window_samples, result.residuals, t};
            result.final_state = s;
            result.t_end = t;
            return result;
        }
    }
    result.status = SettleStatus::NotConverged;
    result.final_state = ExtendedState::from_array(state);
    result.t_end = static_cast<double>(max_steps) * opts.dt;
    return result;
}

}  // namespace cbc
