#pragma once

#include "core_stats.hpp"
#include "errors.hpp"

#include <algorithm>
#include <cmath>

namespace ppialloc {

struct EstimateReport {
    double theta_hat = 0.0;
    double lambda_used = 0.0;
    std::size_t n_labeled = 0;
    double synthetic_mean = 0.0;
};

// Var(S) below this fraction of range(S)^2 counts as a constant model answer.
inline constexpr double degenerate_llm_threshold = 1e-12;

// Clipped regression coefficient of y on s.
[[nodiscard]] inline double fit_lambda(const PairedStats& st)
{
    const double vs = st.sample_variance_s();
    const double range = st.range_s();
    if (vs <= degenerate_llm_threshold * range * range)
        return 0.0;
    return std::clamp(st.sample_cov() / vs, 0.0, 1.0);
}

namespace detail {
inline void require_labels(const PairedStats& st)
{
    if (st.n() == 0)
        throw undefined_statistic("estimate: no labeled pairs");
}
} // namespace detail

[[nodiscard]] inline EstimateReport ppi_estimate(const PairedStats& labeled, double synthetic_mean)
{
    detail::require_labels(labeled);
    if (!std::isfinite(synthetic_mean))
        throw input_error("ppi_estimate: non-finite synthetic mean");
    return {synthetic_mean + (labeled.mean_y() - labeled.mean_s()), 1.0, labeled.n(),
            synthetic_mean};
}

[[nodiscard]] inline EstimateReport ppipp_estimate(const PairedStats& labeled, double synthetic_mean,
                                                   double lambda)
{
    detail::require_labels(labeled);
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw input_error("ppipp_estimate: lambda outside [0,1]");
    if (!std::isfinite(synthetic_mean))
        throw input_error("ppipp_estimate: non-finite synthetic mean");
    const double my = labeled.mean_y();
    const double theta = lambda == 0.0 ? my : my + lambda * (synthetic_mean - labeled.mean_s());
    return {theta, lambda, labeled.n(), synthetic_mean};
}

enum class DifficultyMode { ppi, tuned };

// Estimated rectification difficulty: residual variance at lambda = 1 for
// plain PPI, at the fitted lambda for PPI++.
[[nodiscard]] inline double difficulty_estimate(const PairedStats& st, DifficultyMode mode)
{
    const double lambda = mode == DifficultyMode::ppi ? 1.0 : fit_lambda(st);
    return st.tuned_residual_variance(lambda);
}

} // namespace ppialloc
