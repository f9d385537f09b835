#pragma once

// Branch tracking: settle, record the converged point, re-centre the arclength circle
// on it, repeat. Each leg is warm-started from the final state of the previous one.

#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "cbc/controller.hpp"
#include "cbc/models.hpp"
#include "cbc/sim.hpp"

namespace cbc {

struct BranchPoint {
    double mu = 0.0;
    double a_est = 0.0;
    double omega_est = 0.0;
    Residuals residuals;
    std::size_t step_index = 0;
};

struct BifurcationDiagram {
    std::vector<BranchPoint> points;
    ControllerGains gains;
    double delta = 0.0;
    std::string model_name;
    int direction = 1;  ///< sign of ki3
    /// Converged when every requested leg converged; otherwise the outcome of the failing leg.
    SettleStatus status = SettleStatus::Converged;
    std::size_t requested_steps = 0;

    [[nodiscard]] bool complete() const noexcept {
        return status == SettleStatus::Converged && points.size() == requested_steps;
    }
};

[[nodiscard]] inline ContinuationCenter update_center(const BranchPoint& last, double delta) {
    return {last.mu, last.a_est, delta};
}

/// Called after every leg, converged or not.
using LegObserver = std::function<void(std::size_t step, const ContinuationCenter&, const SettleResult&)>;

[[nodiscard]] inline BifurcationDiagram run_branch(const OscillatorModel& m,
                                                   const ControllerGains& gains,
                                                   const ContinuationCenter& c0,
                                                   std::size_t n_steps,
                                                   const SettleOptions& opts = {},
                                                   const LegObserver& observer = {}) {
    if (n_steps < 1) throw ValidationError("n_steps must be at least 1");
    validate(gains);
    validate(c0);

    BifurcationDiagram diagram;
    diagram.gains = gains;
    diagram.delta = c0.delta;
    diagram.model_name = m.name();
    diagram.direction = gains.ki3 > 0.0 ? 1 : -1;
    diagram.requested_steps = n_steps;

    ContinuationCenter center = c0;
    ExtendedState state;  // zeros for the first leg
    for (std::size_t step = 0; step < n_steps; ++step) {
        const SettleResult leg = settle_and_measure(m, gains, center, state, opts);
        if (observer) observer(step, center, leg);
        if (!leg.converged()) {
            diagram.status = leg.status;
            break;
        }
        const ConvergedPoint& p = *leg.point;
        diagram.points.push_back({p.mu, p.a_est, p.omega_est, p.residuals, step});
        center = update_center(diagram.points.back(), c0.delta);
        state = leg.final_state;
    }
    return diagram;
}

inline constexpr const char* kDiagramCsvHeader = "step,mu,a_est,omega_est,e1_rms,e2,e3";

inline void write_diagram_csv(std::ostream& os, const BifurcationDiagram& d) {
    os << kDiagramCsvHeader << '\n';
    for (const BranchPoint& p : d.points) {
        os << p.step_index;
        for (double v : {p.mu, p.a_est, p.omega_est, p.residuals.e1_rms, p.residuals.e2,
                         p.residuals.e3}) {
            os << ',';
            detail::put_g17(os, v);
        }
        os << '\n';
    }
}

}  // namespace cbc
