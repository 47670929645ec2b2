#pragma once

#include "confidence.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace ppialloc {

struct QuestionSpec {
    std::string id;
    double weight = 1.0;
    double cost = 1.0;
};

[[nodiscard]] inline std::vector<QuestionSpec> unit_questions(std::size_t Q)
{
    std::vector<QuestionSpec> qs(Q);
    for (std::size_t q = 0; q < Q; ++q)
        qs[q].id = std::to_string(q);
    return qs;
}

// ---- static allocation arithmetic ----

namespace detail {
inline void check_positive(const std::vector<double>& v, const char* what)
{
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x))
            throw domain_error(std::string(what) + " must be positive and finite");
}
inline std::vector<double> weights_of(const std::vector<QuestionSpec>& qs)
{
    std::vector<double> w;
    w.reserve(qs.size());
    for (const auto& q : qs)
        w.push_back(q.weight);
    return w;
}
inline std::vector<double> costs_of(const std::vector<QuestionSpec>& qs)
{
    std::vector<double> c;
    c.reserve(qs.size());
    for (const auto& q : qs)
        c.push_back(q.cost);
    return c;
}
} // namespace detail

// Square-root rule n_q = B sqrt(w A / c) / sum sqrt(w A c).
[[nodiscard]] inline std::vector<double> neyman_allocation(const std::vector<double>& A,
                                                           const std::vector<double>& w,
                                                           const std::vector<double>& c, double B)
{
    if (A.size() != w.size() || A.size() != c.size() || A.empty())
        throw domain_error("neyman_allocation: size mismatch");
    detail::check_positive(A, "A");
    detail::check_positive(w, "w");
    detail::check_positive(c, "c");
    if (!(B > 0.0))
        throw domain_error("neyman_allocation: budget must be positive");
    double denom = 0.0;
    for (std::size_t q = 0; q < A.size(); ++q)
        denom += std::sqrt(w[q] * A[q] * c[q]);
    std::vector<double> n(A.size());
    for (std::size_t q = 0; q < A.size(); ++q)
        n[q] = B * std::sqrt(w[q] * A[q] / c[q]) / denom;
    return n;
}

// Floor, then hand out leftover budget by largest fractional part while it
// stays affordable. Ties go to the lower index.
namespace detail {

// Objective of an integer allocation up to a constant: w A is proportional to c f^2.
inline double rounded_objective(const std::vector<long>& n, const std::vector<double>& frac,
                                const std::vector<double>& c)
{
    double v = 0.0;
    for (std::size_t q = 0; q < n.size(); ++q)
        if (frac[q] > 0.0)
            v += n[q] > 0 ? c[q] * frac[q] * frac[q] / static_cast<double>(n[q])
                          : std::numeric_limits<double>::infinity();
    return v;
}

// Spend leftover budget one unit at a time on the best variance reduction per cost.
inline void greedy_fill(std::vector<long>& n, double& spent, const std::vector<double>& frac,
                        const std::vector<double>& c, double B)
{
    for (;;) {
        std::size_t best = n.size();
        double gain = 0.0;
        for (std::size_t q = 0; q < n.size(); ++q) {
            if (spent + c[q] > B + 1e-9)
                continue;
            const double nq = static_cast<double>(n[q]);
            const double g = nq > 0 ? frac[q] * frac[q] / (nq * (nq + 1.0))
                                    : std::numeric_limits<double>::infinity();
            if (best == n.size() || g > gain) {
                best = q;
                gain = g;
            }
        }
        if (best == n.size())
            return;
        ++n[best];
        spent += c[best];
    }
}

} // namespace detail

// Largest-remainder rounding of a fractional allocation, then an exchange polish:
// give back a few units of one question and refill greedily while that lowers the
// objective. With unequal costs the plain rounding can strand several cheap units.
[[nodiscard]] inline std::vector<long> round_allocation(const std::vector<double>& frac,
                                                        const std::vector<double>& c, double B)
{
    std::vector<long> n(frac.size());
    double spent = 0.0;
    for (std::size_t q = 0; q < frac.size(); ++q) {
        n[q] = static_cast<long>(std::floor(frac[q]));
        spent += c[q] * static_cast<double>(n[q]);
    }
    std::vector<std::size_t> order(frac.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return frac[a] - std::floor(frac[a]) > frac[b] - std::floor(frac[b]);
    });
    for (std::size_t q : order) {
        if (spent + c[q] <= B + 1e-9) {
            ++n[q];
            spent += c[q];
        }
    }

    double cur = detail::rounded_objective(n, frac, c);
    for (bool improved = true; improved;) {
        improved = false;
        for (std::size_t i = 0; i < n.size() && !improved; ++i)
            for (std::size_t j = 0; j < n.size() && !improved; ++j) {
                if (i == j)
                    continue;
                // smallest give-back of i that pays for one unit of j
                const long r = static_cast<long>(
                    std::ceil((spent + c[j] - B) / c[i] - 1e-9));
                const long give = std::max(r, 1L);
                if (n[i] - give < 1)
                    continue;
                auto m = n;
                m[i] -= give;
                ++m[j];
                double sp = spent + c[j] - c[i] * static_cast<double>(give);
                detail::greedy_fill(m, sp, frac, c, B);
                const double v = detail::rounded_objective(m, frac, c);
                if (v < cur * (1.0 - 1e-12)) {
                    n = std::move(m);
                    spent = sp;
                    cur = v;
                    improved = true;
                }
            }
    }
    return n;
}

[[nodiscard]] inline double marginal_efficiency(double w, double A, double c, double n)
{
    if (!(n > 0.0))
        throw domain_error("marginal_efficiency: n must be positive");
    return w * A / (c * n * n);
}

template <class Count>
[[nodiscard]] double expected_mse(const std::vector<Count>& n, const std::vector<double>& A,
                                  const std::vector<double>& w)
{
    if (n.size() != A.size() || n.size() != w.size())
        throw domain_error("expected_mse: size mismatch");
    double m = 0.0;
    for (std::size_t q = 0; q < n.size(); ++q) {
        if (!(static_cast<double>(n[q]) > 0.0))
            throw domain_error("expected_mse: every question needs at least one label");
        m += w[q] * A[q] / static_cast<double>(n[q]);
    }
    return m;
}

[[nodiscard]] inline double oracle_mse(const std::vector<double>& A, const std::vector<double>& w,
                                       const std::vector<double>& c, double B)
{
    double s = 0.0;
    for (std::size_t q = 0; q < A.size(); ++q)
        s += std::sqrt(w[q] * A[q] * c[q]);
    return s * s / B;
}

// ---- sequential policies ----

enum class PolicyKind { oracle, uniform, epsilon_greedy, etc, ucb_ppi, ucb_ppipp };

[[nodiscard]] inline std::string_view policy_name(PolicyKind k)
{
    switch (k) {
    case PolicyKind::oracle: return "oracle";
    case PolicyKind::uniform: return "uniform";
    case PolicyKind::epsilon_greedy: return "epsilon_greedy";
    case PolicyKind::etc: return "etc";
    case PolicyKind::ucb_ppi: return "ucb_ppi";
    case PolicyKind::ucb_ppipp: return "ucb_ppipp";
    }
    return "?";
}

[[nodiscard]] inline PolicyKind parse_policy(std::string_view s)
{
    for (auto k : {PolicyKind::oracle, PolicyKind::uniform, PolicyKind::epsilon_greedy,
                   PolicyKind::etc, PolicyKind::ucb_ppi, PolicyKind::ucb_ppipp})
        if (policy_name(k) == s)
            return k;
    if (s == "ucb")
        return PolicyKind::ucb_ppipp;
    throw config_error("unknown policy '" + std::string(s) + "'");
}

struct PolicyConfig {
    PolicyKind kind = PolicyKind::ucb_ppipp;
    std::size_t K = 3;
    double epsilon_c = 5.0;
    double alpha = 0.3;
    RadiusKind radius = RadiusKind::ppi;
    // delta, T_max and Q are filled in per episode; delta <= 0 means B^-2
    ConfidenceConfig confidence{.delta = 0.0, .R = 0.05};

    void validate() const
    {
        if (K < 2)
            throw config_error("policy: K must be at least 2");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw config_error("policy: alpha must lie in (0,1)");
        if (!(epsilon_c > 0.0))
            throw config_error("policy: epsilon_c must be positive");
        if (!(confidence.R >= 0.0))
            throw config_error("policy: R must be nonnegative");
    }
};

// Costs are tracked in integer micro-units so the budget identity
// sum c n + remaining = B holds exactly.
inline constexpr double cost_scale = 1e6;
[[nodiscard]] inline std::int64_t to_units(double x)
{
    return static_cast<std::int64_t>(std::llround(x * cost_scale));
}
[[nodiscard]] inline double from_units(std::int64_t u)
{
    return static_cast<double>(u) / cost_scale;
}

struct AllocationState {
    std::vector<std::size_t> n;
    std::int64_t budget_units = 0;
    std::int64_t spent_units = 0;
    std::size_t t = 0;

    [[nodiscard]] std::int64_t remaining_units() const { return budget_units - spent_units; }
    [[nodiscard]] double remaining() const { return from_units(remaining_units()); }
    [[nodiscard]] double spent() const { return from_units(spent_units); }
};

struct EpisodeResult {
    std::vector<std::size_t> n;
    double mse = 0.0;
    double remaining = 0.0;
    std::size_t steps = 0;
    std::vector<double> trajectory; // MSE at each checkpoint
};

// Default upper-bound construction; trackers with internal structure
// (module groups) provide their own overload.
template <class Tracker>
[[nodiscard]] double difficulty_ucb(const Tracker& tr, DifficultyMode mode, double r)
{
    const double v = std::sqrt(std::max(difficulty_estimate(tr, mode), 0.0)) + r;
    return v * v;
}

[[nodiscard]] inline std::size_t tracker_count(const PairedStats& st) { return st.n(); }

// Environment requirements:
//   using tracker_type = ...;
//   std::size_t size() const;
//   const std::vector<double>& difficulty() const;
//   void observe(std::size_t q, Rng&, tracker_type&) const;
template <class Env>
[[nodiscard]] EpisodeResult run_episode(const PolicyConfig& pc, const Env& env, double B,
                                        const std::vector<QuestionSpec>& qs, std::uint64_t seed,
                                        const std::vector<double>& checkpoints = {},
                                        AllocationState* final_state = nullptr)
{
    pc.validate();
    const std::size_t Q = env.size();
    if (qs.size() != Q)
        throw config_error("run_episode: question spec count does not match environment");
    const auto w = detail::weights_of(qs);
    const auto c = detail::costs_of(qs);
    detail::check_positive(w, "weights");
    detail::check_positive(c, "costs");
    const auto& A = env.difficulty();

    std::vector<std::int64_t> cu(Q);
    for (std::size_t q = 0; q < Q; ++q)
        cu[q] = to_units(c[q]);
    const std::int64_t max_cu = *std::max_element(cu.begin(), cu.end());
    const double c_min = *std::min_element(c.begin(), c.end());

    AllocationState st;
    st.n.assign(Q, 0);
    st.budget_units = to_units(B);
    std::int64_t init_units = 0;
    for (auto u : cu)
        init_units += u * static_cast<std::int64_t>(pc.K);
    if (init_units > st.budget_units)
        throw config_error("run_episode: budget " + std::to_string(B) +
                           " is below the initialization cost " +
                           std::to_string(from_units(init_units)));

    ConfidenceConfig cc = pc.confidence;
    cc.Q = Q;
    cc.T_max = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(B / c_min)));
    if (!(cc.delta > 0.0))
        cc.delta = 1.0 / (B * B);
    if (pc.kind == PolicyKind::ucb_ppi || pc.kind == PolicyKind::ucb_ppipp)
        cc.validate();
    const DifficultyMode mode =
        pc.kind == PolicyKind::ucb_ppi ? DifficultyMode::ppi : DifficultyMode::tuned;

    Rng rng(seed);
    std::vector<typename Env::tracker_type> tr(Q);
    EpisodeResult res;
    std::size_t next_cp = 0;
    auto record = [&] {
        while (next_cp < checkpoints.size() &&
               static_cast<double>(st.spent_units) >= checkpoints[next_cp] * cost_scale - 0.5) {
            res.trajectory.push_back(expected_mse(st.n, A, w));
            ++next_cp;
        }
    };

    auto take = [&](std::size_t q) {
        env.observe(q, rng, tr[q]);
        ++st.n[q];
        st.spent_units += cu[q];
        ++st.t;
    };

    for (std::size_t q = 0; q < Q; ++q)
        for (std::size_t k = 0; k < pc.K; ++k)
            take(q);
    // checkpoints that fall inside initialization are reported at its end
    record();

    // policy state
    std::vector<double> index(Q, 0.0);
    std::vector<double> target;
    auto refresh = [&](std::size_t q) {
        const double nq = static_cast<double>(st.n[q]);
        switch (pc.kind) {
        case PolicyKind::ucb_ppi:
        case PolicyKind::ucb_ppipp: {
            const double r = radius(pc.radius, st.n[q], cc);
            index[q] = w[q] * difficulty_ucb(tr[q], mode, r) / (c[q] * nq * nq);
            break;
        }
        case PolicyKind::epsilon_greedy:
            index[q] = w[q] * difficulty_estimate(tr[q], DifficultyMode::tuned) / (c[q] * nq * nq);
            break;
        default: break;
        }
    };
    if (pc.kind == PolicyKind::oracle)
        target = neyman_allocation(A, w, c, B);
    for (std::size_t q = 0; q < Q; ++q)
        refresh(q);

    const std::int64_t pilot_units =
        to_units(std::floor(pc.alpha * from_units(st.budget_units - init_units)));
    std::int64_t pilot_spent = 0;
    bool committed = false;
    std::size_t phase_t = 0;

    const bool equal_costs = std::all_of(cu.begin(), cu.end(), [&](auto u) { return u == cu[0]; });
    auto affordable = [&](std::size_t q) {
        return equal_costs || cu[q] <= st.remaining_units();
    };
    auto argmax = [&](const auto& score) {
        std::size_t best = Q;
        double bv = -std::numeric_limits<double>::infinity();
        for (std::size_t q = 0; q < Q; ++q) {
            if (!affordable(q))
                continue;
            const double v = score(q);
            if (best == Q || v > bv) {
                best = q;
                bv = v;
            }
        }
        return best;
    };
    auto least_sampled = [&] {
        return argmax([&](std::size_t q) { return -static_cast<double>(st.n[q]); });
    };
    auto deficit = [&] {
        return argmax([&](std::size_t q) { return target[q] - static_cast<double>(st.n[q]); });
    };

    while (st.remaining_units() >= max_cu) {
        ++phase_t;
        std::size_t q = Q;
        switch (pc.kind) {
        case PolicyKind::uniform: q = least_sampled(); break;
        case PolicyKind::oracle: q = deficit(); break;
        case PolicyKind::ucb_ppi:
        case PolicyKind::ucb_ppipp:
            q = argmax([&](std::size_t j) { return index[j]; });
            break;
        case PolicyKind::epsilon_greedy: {
            // t counts adaptive-phase rounds, starting at 1
            const double eps = std::min(1.0, pc.epsilon_c * static_cast<double>(Q) /
                                                 static_cast<double>(phase_t));
            if (rng.uniform() < eps) {
                std::vector<std::size_t> ok;
                for (std::size_t j = 0; j < Q; ++j)
                    if (affordable(j))
                        ok.push_back(j);
                q = ok[rng.below(ok.size())];
            } else {
                q = argmax([&](std::size_t j) { return index[j]; });
            }
            break;
        }
        case PolicyKind::etc:
            if (!committed && pilot_spent >= pilot_units) {
                std::vector<double> ah(Q);
                for (std::size_t j = 0; j < Q; ++j)
                    ah[j] = std::max(difficulty_estimate(tr[j], DifficultyMode::tuned), 1e-12);
                target = neyman_allocation(ah, w, c, B);
                committed = true;
            }
            if (committed) {
                q = deficit();
            } else {
                q = least_sampled();
                pilot_spent += cu[q];
            }
            break;
        }
        take(q);
        refresh(q);
        record();
    }

    // checkpoints past the last affordable step get the terminal value
    while (next_cp < checkpoints.size()) {
        res.trajectory.push_back(expected_mse(st.n, A, w));
        ++next_cp;
    }
    res.n = st.n;
    res.mse = expected_mse(st.n, A, w);
    res.remaining = st.remaining();
    res.steps = st.t;
    if (final_state)
        *final_state = st;
    return res;
}

} // namespace ppialloc
