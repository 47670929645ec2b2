#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

namespace ppialloc {

struct ConfidenceConfig {
    double delta = 1e-6;
    double R = 2.0;    // range of the residual y - lambda*s
    double R_y = 1.0;
    double R_s = 1.0;
    double M_y = 1.0;  // |y| <= M_y
    double M_s = 1.0;
    double v_min = 0.01; // lower bound on Var(s)
    std::size_t T_max = 1;
    std::size_t Q = 1;

    void validate() const
    {
        if (!(delta > 0.0 && delta < 1.0))
            throw config_error("confidence: delta must lie in (0,1)");
        if (!(R >= 0.0) || !(R_y >= 0.0) || !(R_s >= 0.0))
            throw config_error("confidence: ranges must be nonnegative");
        if (T_max < 1 || Q < 1)
            throw config_error("confidence: T_max and Q must be at least 1");
        if (!(v_min > 0.0))
            throw config_error("confidence: v_min must be positive");
    }

    // per (question, step) level
    [[nodiscard]] double delta_qt() const
    {
        return delta / (static_cast<double>(Q) * static_cast<double>(T_max));
    }
};

namespace detail {
inline void require_two(std::size_t n, const char* who)
{
    if (n < 2)
        throw undefined_statistic(std::string(who) + ": need at least 2 samples");
}
} // namespace detail

[[nodiscard]] inline double ppi_radius(std::size_t n, const ConfidenceConfig& cfg)
{
    detail::require_two(n, "ppi_radius");
    return cfg.R * std::sqrt(2.0 * std::log(2.0 / cfg.delta_qt()) / static_cast<double>(n - 1));
}

// Empirical-Bernstein upper bound on the residual variance.
[[nodiscard]] inline double a_ucb_ppi(double a_hat, std::size_t n, const ConfidenceConfig& cfg)
{
    if (!(a_hat >= 0.0))
        throw input_error("a_ucb_ppi: a_hat must be nonnegative");
    const double r = std::sqrt(a_hat) + ppi_radius(n, cfg);
    return r * r;
}

// Width of the confidence band for the plug-in lambda after s pairs.
// Returns +inf when Delta_b exceeds v_min/2 (the bound does not apply yet).
[[nodiscard]] inline double delta_lambda(std::size_t s, double delta, const ConfidenceConfig& cfg)
{
    detail::require_two(s, "delta_lambda");
    const double g = std::sqrt(std::log(8.0 / delta) / (2.0 * static_cast<double>(s)));
    const double da = (2.0 * cfg.M_y * cfg.M_s + cfg.M_s * cfg.R_y + cfg.M_y * cfg.R_s) * g +
                      cfg.R_y * cfg.R_s * g * g;
    const double db = (cfg.M_s * cfg.M_s + 2.0 * cfg.M_s * cfg.R_s) * g + cfg.R_s * cfg.R_s * g * g;
    if (db > cfg.v_min / 2.0)
        return std::numeric_limits<double>::infinity();
    return (2.0 / cfg.v_min) * da + (4.0 * cfg.M_y * cfg.M_s / (cfg.v_min * cfg.v_min)) * db;
}

// PPI++ radius on the square-root scale. The lambda term is capped at R_s/2
// since |lambda_hat - lambda*| <= 1 always.
[[nodiscard]] inline double rho_ppipp(std::size_t s, const ConfidenceConfig& cfg)
{
    detail::require_two(s, "rho_ppipp");
    const double dq = cfg.delta_qt();
    const double tm = static_cast<double>(cfg.T_max);
    const double bern =
        cfg.R * std::sqrt(2.0 * std::log(4.0 * (tm + 1.0) / dq) / static_cast<double>(s - 1));
    const double drift = std::sqrt(2.0) * cfg.R_s / tm;
    const double dl = std::min(delta_lambda(s, dq / 2.0, cfg), 1.0);
    return bern + drift + 0.5 * cfg.R_s * dl;
}

enum class RadiusKind { ppi, ppipp };

[[nodiscard]] inline double radius(RadiusKind kind, std::size_t n, const ConfidenceConfig& cfg)
{
    return kind == RadiusKind::ppi ? ppi_radius(n, cfg) : rho_ppipp(n, cfg);
}

} // namespace ppialloc
