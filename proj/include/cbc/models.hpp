#pragma once

/**
 * Oscillator plants of the form  x'' + x = eps * g(x, x', mu).
 *
 * The force g must be jointly odd in (x, x'); this is what makes the first-order
 * averaged slow functions independent of the phase lag.  The generalized Van der Pol
 * oscillator  g = (mu + beta x^2 - x^4) x' - rho x^3  is provided as the benchmark plant.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cbc/errors.hpp"

namespace cbc {

/// First-order averaged functions (f1, f2) at a given amplitude.
struct SlowPair {
    double f1 = 0.0;
    double f2 = 0.0;
};

/// Partial derivatives of the slow functions with respect to amplitude and mu.
struct SlowDerivatives {
    double f1a = 0.0;
    double f1mu = 0.0;
    double f2a = 0.0;
    double f2mu = 0.0;
};

class OscillatorModel {
public:
    using Force = std::function<double(double x, double v, double mu)>;
    using SlowFn = std::function<SlowPair(double a, double mu)>;
    using SlowDerivFn = std::function<SlowDerivatives(double a, double mu)>;

    static constexpr double kMaxEpsilon = 0.5;
    static constexpr double kOddnessTolerance = 1e-12;

    OscillatorModel(std::string name, double epsilon, Force force, SlowFn closed_form_slow = {},
                    SlowDerivFn closed_form_slow_derivatives = {})
        : name_(std::move(name)),
          epsilon_(epsilon),
          force_(std::move(force)),
          slow_(std::move(closed_form_slow)),
          slow_derivatives_(std::move(closed_form_slow_derivatives)) {
        if (!(epsilon_ > 0.0) || epsilon_ > kMaxEpsilon) {
            throw ValidationError("epsilon must lie in (0, 0.5]");
        }
        if (!force_) {
            throw ValidationError("force function is empty");
        }
        check_oddness();
    }

    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] double epsilon() const noexcept { return epsilon_; }

    [[nodiscard]] double force(double x, double v, double mu) const { return force_(x, v, mu); }

    [[nodiscard]] bool has_closed_form_slow() const noexcept { return static_cast<bool>(slow_); }
    [[nodiscard]] bool has_closed_form_derivatives() const noexcept {
        return static_cast<bool>(slow_derivatives_);
    }

    [[nodiscard]] std::optional<SlowPair> closed_form_slow(double a, double mu) const {
        if (!slow_) return std::nullopt;
        return slow_(a, mu);
    }

    [[nodiscard]] std::optional<SlowDerivatives> closed_form_slow_derivatives(double a,
                                                                              double mu) const {
        if (!slow_derivatives_) return std::nullopt;
        return slow_derivatives_(a, mu);
    }

private:
    // Random samples with a fixed seed so construction is deterministic.
    void check_oddness() const {
        std::mt19937_64 rng(0x0dd0dd0ddULL);
        std::uniform_real_distribution<double> state(-2.0, 2.0);
        std::uniform_real_distribution<double> param(-1.0, 1.0);
        for (int i = 0; i < 64; ++i) {
            const double x = state(rng);
            const double v = state(rng);
            const double mu = param(rng);
            const double plus = force_(x, v, mu);
            const double minus = force_(-x, -v, mu);
            const double scale = std::max(1.0, std::abs(plus));
            if (!(std::abs(plus + minus) <= kOddnessTolerance * scale)) {
                throw ValidationError("force must be odd in (x, v): g(-x,-v,mu) != -g(x,v,mu)");
            }
        }
    }

    std::string name_;
    double epsilon_;
    Force force_;
    SlowFn slow_;
    SlowDerivFn slow_derivatives_;
};

// ---------------------------------------------------------------------------
// Generalized Van der Pol oscillator
// ---------------------------------------------------------------------------

/// beta balances the quintic damping term, rho is the cubic stiffness.
struct VdpParams {
    double beta = 1.0;
    double rho = 0.0;
};

inline void validate(const VdpParams& p) {
    if (!(p.beta > 0.0)) throw ValidationError("beta must be positive");
    if (!std::isfinite(p.rho)) throw ValidationError("rho must be finite");
}

[[nodiscard]] inline double vdp_force(double x, double v, double mu, const VdpParams& p) {
    const double x2 = x * x;
    return (mu + p.beta * x2 - x2 * x2) * v - p.rho * x2 * x;
}

/// Averaged functions of the Van der Pol force, evaluated analytically.
[[nodiscard]] inline SlowPair vdp_slow_functions(double a, double mu, const VdpParams& p) {
    const double a2 = a * a;
    return {a * (8.0 * mu + 2.0 * p.beta * a2 - a2 * a2) / 16.0, -0.375 * p.rho * a2 * a};
}

[[nodiscard]] inline SlowDerivatives vdp_slow_derivatives(double a, double mu, const VdpParams& p) {
    const double a2 = a * a;
    return {(8.0 * mu + 6.0 * p.beta * a2 - 5.0 * a2 * a2) / 16.0, 0.5 * a, -1.125 * p.rho * a2, 0.0};
}

/// Positive amplitudes of the uncontrolled limit cycles at mu, ascending.
/// The trivial a = 0 solution is not reported.
[[nodiscard]] inline std::vector<double> vdp_branch_amplitudes(double mu, const VdpParams& p) {
    std::vector<double> out;
    const double disc = p.beta * p.beta + 8.0 * mu;
    if (disc < 0.0) return out;
    const double root = std::sqrt(disc);
    const double lower_sq = p.beta - root;
    const double upper_sq = p.beta + root;
    if (lower_sq > 0.0 && root > 0.0) out.push_back(std::sqrt(lower_sq));
    if (upper_sq > 0.0) out.push_back(std::sqrt(upper_sq));
    return out;
}

struct FoldPoint {
    double mu = 0.0;
    double a = 0.0;
};

[[nodiscard]] inline FoldPoint vdp_fold_point(const VdpParams& p) {
    if (!(p.beta > 0.0)) throw ValidationError("beta must be positive");
    return {-p.beta * p.beta / 8.0, std::sqrt(p.beta)};
}

[[nodiscard]] inline OscillatorModel make_vdp_model(const VdpParams& p, double epsilon) {
    validate(p);
    return OscillatorModel(
        "generalized-van-der-pol", epsilon,
        [p](double x, double v, double mu) { return vdp_force(x, v, mu, p); },
        [p](double a, double mu) { return vdp_slow_functions(a, mu, p); },
        [p](double a, double mu) { return vdp_slow_derivatives(a, mu, p); });
}

}  // namespace cbc
