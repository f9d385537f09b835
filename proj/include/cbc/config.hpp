#pragma once

// Line-based `key = value` run configuration. Omitted keys keep the benchmark defaults
// (Van der Pol with beta = 1, rho = 0 under the reference controller tuning).

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "cbc/controller.hpp"
#include "cbc/errors.hpp"
#include "cbc/models.hpp"
#include "cbc/sim.hpp"

namespace cbc {

struct RunConfig {
    double epsilon = 0.1;
    VdpParams vdp{1.0, 0.0};
    ControllerGains gains{};
    ContinuationCenter center{0.0, 0.3, 0.1};
    SettleOptions settle{};
    std::size_t n_steps = 20;

    bool operator==(const RunConfig& o) const {
        return epsilon == o.epsilon && vdp.beta == o.vdp.beta && vdp.rho == o.vdp.rho &&
               gains.kd1 == o.gains.kd1 && gains.ki2 == o.gains.ki2 && gains.ki3 == o.gains.ki3 &&
               gains.r == o.gains.r && gains.omega_c == o.gains.omega_c &&
               gains.omega_0 == o.gains.omega_0 && center.mu0 == o.center.mu0 &&
               center.g0 == o.center.g0 && center.delta == o.center.delta &&
               settle.dt == o.settle.dt && settle.t_max == o.settle.t_max &&
               settle.tol_e == o.settle.tol_e && settle.window == o.settle.window &&
               n_steps == o.n_steps;
    }
};

inline constexpr std::array<std::string_view, 17> kConfigKeys{
    "epsilon", "beta",    "rho",   "kd1", "ki2",    "ki3",   "r",     "omega_c", "omega_0",
    "mu_0",    "g_0",     "delta", "dt",  "t_max",  "tol_e", "window", "n_steps"};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view text, std::size_t line, std::string_view key) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (!text.empty() && *begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || text.empty()) {
        throw ParseError(line, "invalid number for '" + std::string(key) + "': '" +
                                   std::string(text) + "'");
    }
    return value;
}

}  // namespace detail

/// Assigns one key. `line` is only used for error messages.
inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value,
                             std::size_t line = 0) {
    if (key == "n_steps") {
        std::size_t n = 0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
        if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) {
            throw ParseError(line, "invalid integer for 'n_steps': '" + std::string(value) + "'");
        }
        cfg.n_steps = n;
        return;
    }
    const double v = detail::parse_number(value, line, key);
    if (key == "epsilon") cfg.epsilon = v;
    else if (key == "beta") cfg.vdp.beta = v;
    else if (key == "rho") cfg.vdp.rho = v;
    else if (key == "kd1") cfg.gains.kd1 = v;
    else if (key == "ki2") cfg.gains.ki2 = v;
    else if (key == "ki3") cfg.gains.ki3 = v;
    else if (key == "r") cfg.gains.r = v;
    else if (key == "omega_c") cfg.gains.omega_c = v;
    else if (key == "omega_0") cfg.gains.omega_0 = v;
    else if (key == "mu_0") cfg.center.mu0 = v;
    else if (key == "g_0") cfg.center.g0 = v;
    else if (key == "delta") cfg.center.delta = v;
    else if (key == "dt") cfg.settle.dt = v;
    else if (key == "t_max") cfg.settle.t_max = v;
    else if (key == "tol_e") cfg.settle.tol_e = v;
    else if (key == "window") cfg.settle.window = v;
    else throw ParseError(line, "unknown key '" + std::string(key) + "'");
}

/// Applies a `key=value` override (as given on the command line).
inline void apply_override(RunConfig& cfg, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) {
        throw ParseError(0, "expected key=value, got '" + std::string(assignment) + "'");
    }
    set_config_value(cfg, detail::trim(assignment.substr(0, eq)),
                     detail::trim(assignment.substr(eq + 1)));
}

inline void validate(const RunConfig& cfg) {
    if (!(cfg.epsilon > 0.0) || cfg.epsilon > OscillatorModel::kMaxEpsilon) {
        throw ValidationError("epsilon must lie in (0, 0.5]");
    }
    validate(cfg.vdp);
    validate(cfg.gains);
    validate(cfg.center);
    validate(cfg.settle, cfg.gains.omega_0);
    if (cfg.n_steps < 1) throw ValidationError("n_steps must be at least 1");
}

/// Parses and validates. Throws ParseError (with line number) or ValidationError.
[[nodiscard]] inline RunConfig parse_config(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        if (const auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
        const std::string_view key = detail::trim(line.substr(0, eq));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, "missing key");
        set_config_value(cfg, key, value, line_no);
    }
    validate(cfg);
    return cfg;
}

[[nodiscard]] inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Serializes every key; parse_config(to_config_text(c)) == c.
[[nodiscard]] inline std::string to_config_text(const RunConfig& cfg) {
    std::ostringstream os;
    auto put = [&](std::string_view k, double v) { os << k << " = " << format_number(v) << '\n'; };
    put("epsilon", cfg.epsilon);
    put("beta", cfg.vdp.beta);
    put("rho", cfg.vdp.rho);
    put("kd1", cfg.gains.kd1);
    put("ki2", cfg.gains.ki2);
    put("ki3", cfg.gains.ki3);
    put("r", cfg.gains.r);
    put("omega_c", cfg.gains.omega_c);
    put("omega_0", cfg.gains.omega_0);
    put("mu_0", cfg.center.mu0);
    put("g_0", cfg.center.g0);
    put("delta", cfg.center.delta);
    put("dt", cfg.settle.dt);
    put("t_max", cfg.settle.t_max);
    put("tol_e", cfg.settle.tol_e);
    put("window", cfg.settle.window);
    os << "n_steps = " << cfg.n_steps << '\n';
    return os.str();
}

}  // namespace cbc
