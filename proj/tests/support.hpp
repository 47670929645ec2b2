#pragma once

#include <ppialloc/core_stats.hpp>
#include <ppialloc/policies.hpp>
#include <ppialloc/rng.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

namespace testenv {

// Gaussian human answers with variance A_q and a constant model answer, so the
// tuned difficulty estimate is the plain sample variance of Y.
class GaussianEnv {
public:
    using tracker_type = ppialloc::PairedStats;

    explicit GaussianEnv(std::vector<double> A) : a_(std::move(A)) {}

    [[nodiscard]] std::size_t size() const { return a_.size(); }
    [[nodiscard]] const std::vector<double>& difficulty() const { return a_; }

    void observe(std::size_t q, ppialloc::Rng& rng, ppialloc::PairedStats& st) const
    {
        st.update(std::sqrt(a_[q]) * rng.normal(), 0.0);
    }

private:
    std::vector<double> a_;
};

// Tracker that always reports the true difficulty: isolates the allocation
// rule from estimation noise.
struct FrozenTracker {
    double a = 0.0;
    std::size_t n = 0;
};

[[nodiscard]] inline double difficulty_estimate(const FrozenTracker& t, ppialloc::DifficultyMode)
{
    return t.a;
}

class FrozenEnv {
public:
    using tracker_type = FrozenTracker;

    explicit FrozenEnv(std::vector<double> A) : a_(std::move(A)) {}

    [[nodiscard]] std::size_t size() const { return a_.size(); }
    [[nodiscard]] const std::vector<double>& difficulty() const { return a_; }

    void observe(std::size_t q, ppialloc::Rng&, FrozenTracker& t) const
    {
        t.a = a_[q];
        ++t.n;
    }

private:
    std::vector<double> a_;
};

// Two-pass unbiased variance of an explicit list.
[[nodiscard]] inline double two_pass_variance(const std::vector<double>& x)
{
    double m = 0.0;
    for (double v : x)
        m += v;
    m /= static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x)
        ss += (v - m) * (v - m);
    return ss / static_cast<double>(x.size() - 1);
}

} // namespace testenv
