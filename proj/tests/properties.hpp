#pragma once

// Randomized property checks shared by the unit suite and the acceptance run.

#include "support.hpp"

#include <ppialloc/confidence.hpp>
#include <ppialloc/core_stats.hpp>
#include <ppialloc/mestimation.hpp>
#include <ppialloc/policies.hpp>
#include <ppialloc/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <string>
#include <vector>

namespace props {

struct Outcome {
    bool ok = true;
    std::string detail;
};

inline Outcome fail(const char* fmt, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, a, b, c);
    return {false, buf};
}

// Tuned residual variance from sums equals the variance of explicitly
// recomputed residuals y - lambda s.
inline Outcome moment_identity(std::size_t datasets = 2000, std::uint64_t seed = 101)
{
    ppialloc::Rng rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < datasets; ++k) {
        const std::size_t n = 2 + rng.below(199);
        const double loc = rng.uniform(-1000.0, 1000.0);
        const double sc = std::exp(rng.uniform(-3.0, 3.0));
        const double rho = rng.uniform(-1.0, 1.0);
        ppialloc::PairedStats st;
        std::vector<double> ys(n), ss(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.normal();
            ys[i] = loc + sc * u;
            ss[i] = loc + sc * (rho * u + rng.normal());
            st.update(ys[i], ss[i]);
        }
        for (int t = 0; t < 4; ++t) {
            const double lam = t == 0 ? 0.0 : t == 1 ? 1.0 : rng.uniform();
            std::vector<double> r(n);
            for (std::size_t i = 0; i < n; ++i)
                r[i] = ys[i] - lam * ss[i];
            const double want = testenv::two_pass_variance(r);
            const double got = st.tuned_residual_variance(lam);
            const double rel = std::abs(got - want) / std::max(want, sc * sc * 1e-6);
            worst = std::max(worst, rel);
            if (rel > 1e-10)
                return fail("moment identity off by %.3g (n=%.0f, lambda=%.3f)", rel,
                            static_cast<double>(n), lam);
        }
    }
    return {true, "worst relative error " + std::to_string(worst)};
}

struct GridResult {
    std::vector<long> n;
    double value = std::numeric_limits<double>::infinity();
};

// Exhaustive search over integer allocations with n_q >= 1 and sum c n <= B.
inline GridResult grid_optimum3(const std::vector<double>& A, const std::vector<double>& w,
                                const std::vector<double>& c, double B)
{
    GridResult g;
    const long m0 = static_cast<long>(std::floor(B / c[0]));
    for (long a = 1; a <= m0; ++a) {
        const double r1 = B - c[0] * static_cast<double>(a);
        const long m1 = static_cast<long>(std::floor(r1 / c[1] + 1e-12));
        for (long b = 1; b <= m1; ++b) {
            const double r2 = r1 - c[1] * static_cast<double>(b);
            const long cc = static_cast<long>(std::floor(r2 / c[2] + 1e-12));
            if (cc < 1)
                break;
            const double v = w[0] * A[0] / static_cast<double>(a) +
                             w[1] * A[1] / static_cast<double>(b) +
                             w[2] * A[2] / static_cast<double>(cc);
            if (v < g.value) {
                g.value = v;
                g.n = {a, b, cc};
            }
        }
    }
    return g;
}

// Rounded square-root rule lands within one unit of the exhaustive integer
// optimum on three questions.
inline Outcome neyman_vs_grid(std::size_t instances = 300, std::uint64_t seed = 202)
{
    // Within one unit holds while costs differ by at most a factor of two. With wider
    // cost ratios the integer optimum drifts from the continuous one; those misses are
    // counted and reported but do not decide the outcome.
    ppialloc::Rng rng(seed);
    const std::vector<double> close{1.0, 2.0}, wide{0.5, 1.0, 1.5, 2.0, 3.0};
    std::size_t wide_miss = 0, wide_used = 0;
    for (const auto* costs : {&close, &wide}) {
        for (std::size_t k = 0; k < instances; ++k) {
            std::vector<double> A(3), w(3), c(3);
            for (int q = 0; q < 3; ++q) {
                A[q] = std::exp(rng.uniform(-2.0, 2.0));
                w[q] = rng.uniform(0.2, 2.0);
                c[q] = (*costs)[rng.below(costs->size())];
            }
            const double B = 20.0 + static_cast<double>(rng.below(81));
            const auto frac = ppialloc::neyman_allocation(A, w, c, B);
            if (*std::min_element(frac.begin(), frac.end()) < 1.0)
                continue; // the grid forces n >= 1; the continuous rule does not
            const auto n = ppialloc::round_allocation(frac, c, B);
            const auto g = grid_optimum3(A, w, c, B);
            bool off = false;
            for (int q = 0; q < 3; ++q)
                off |= std::abs(n[q] - g.n[q]) > 1;
            if (costs == &wide) {
                ++wide_used;
                wide_miss += off;
            } else if (off) {
                return fail("instance %.0f: rounded (%.0f, ...) vs grid optimum (%.0f, ...)",
                            static_cast<double>(k), static_cast<double>(n[0]),
                            static_cast<double>(g.n[0]));
            }
        }
    }
    return {true, std::to_string(instances) + " instances within one unit; cost ratio 6: " +
                      std::to_string(wide_miss) + " of " + std::to_string(wide_used) +
                      " off by more"};
}

// Bounded check model: the synthetic pair clipped to [-2,2].
inline std::pair<double, double> clipped_pair(ppialloc::Rng& rng)
{
    const double u = rng.normal(), e = rng.normal(), eta = rng.normal();
    const double y = std::clamp(u + 0.5 * eta, -2.0, 2.0);
    const double s = std::clamp(0.7 * u + std::sqrt(1.0 - 0.49) * e, -2.0, 2.0);
    return {y, s};
}

// Empirical coverage of the variance upper bound at s = 20 pairs.
inline Outcome bernstein_coverage(std::size_t trials = 5000, std::uint64_t seed = 303)
{
    ppialloc::Rng rng(seed);
    // population Var(Y - S) of the clipped model
    ppialloc::PairedStats pop;
    for (int i = 0; i < 400000; ++i) {
        const auto [y, s] = clipped_pair(rng);
        pop.update(y, s);
    }
    const double A = pop.tuned_residual_variance(1.0);

    ppialloc::ConfidenceConfig cfg;
    cfg.R = 4.0;
    cfg.delta = 0.05;
    cfg.Q = 1;
    cfg.T_max = 1;
    const double dq = cfg.delta_qt();
    std::size_t covered = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        ppialloc::PairedStats st;
        for (int i = 0; i < 20; ++i) {
            const auto [y, s] = clipped_pair(rng);
            st.update(y, s);
        }
        if (A <= ppialloc::a_ucb_ppi(st.tuned_residual_variance(1.0), 20, cfg))
            ++covered;
    }
    const double freq = static_cast<double>(covered) / static_cast<double>(trials);
    const double need = 1.0 - dq - 3.0 * std::sqrt(dq * (1.0 - dq) / static_cast<double>(trials));
    if (freq < need)
        return fail("coverage %.4f below %.4f (A=%.4f)", freq, need, A);
    return {true, "coverage " + std::to_string(freq) + " >= " + std::to_string(need)};
}

// Analytic MNL Hessian against central differences of the expected score.
inline Outcome hessian_fd(std::size_t cases = 200, std::uint64_t seed = 404)
{
    using ppialloc::Matrix;
    using ppialloc::Vector;
    ppialloc::Rng rng(seed);
    double worst = 0.0;
    for (std::size_t k = 0; k < cases; ++k) {
        const std::size_t K = 2 + rng.below(4);
        const std::size_t d = 1 + rng.below(K - 1);
        Matrix X(K, d);
        for (Eigen::Index i = 0; i < X.size(); ++i)
            X.data()[i] = rng.uniform(-2.0, 2.0);
        Vector beta(d), beta0(d);
        for (std::size_t j = 0; j < d; ++j) {
            beta[j] = rng.uniform(-1.0, 1.0);
            beta0[j] = rng.uniform(-1.0, 1.0);
        }
        const Vector p0 = ppialloc::mnl_probs(X, beta0);
        auto expected_score = [&](const Vector& b) {
            Vector g = Vector::Zero(d);
            for (std::size_t y = 0; y < K; ++y)
                g += p0[y] * ppialloc::mnl_score(X, y, b);
            return g;
        };
        const Matrix H = ppialloc::mnl_hessian(X, beta);
        const double h = 1e-5;
        for (std::size_t j = 0; j < d; ++j) {
            Vector bp = beta, bm = beta;
            bp[j] += h;
            bm[j] -= h;
            const Vector col = (expected_score(bp) - expected_score(bm)) / (2.0 * h);
            for (std::size_t i = 0; i < d; ++i) {
                const double err = std::abs(col[i] - H(i, j));
                worst = std::max(worst, err);
                if (err > 1e-6)
                    return fail("Hessian entry off by %.3g (K=%.0f, d=%.0f)", err,
                                static_cast<double>(K), static_cast<double>(d));
            }
        }
    }
    return {true, "worst entry error " + std::to_string(worst)};
}

// Budget identity, feasibility, termination rule and seed determinism over
// random configurations of every policy.
inline Outcome budget_and_determinism(std::size_t configs = 300, std::uint64_t seed = 505)
{
    using namespace ppialloc;
    Rng rng(seed);
    const PolicyKind kinds[] = {PolicyKind::oracle, PolicyKind::uniform, PolicyKind::epsilon_greedy,
                                PolicyKind::etc, PolicyKind::ucb_ppi, PolicyKind::ucb_ppipp};
    const double cost_grid[] = {0.25, 0.5, 1.0, 1.3, 2.0, 3.7};
    for (std::size_t k = 0; k < configs; ++k) {
        const std::size_t Q = 2 + rng.below(7);
        std::vector<double> A(Q);
        auto qs = unit_questions(Q);
        double init = 0.0;
        PolicyConfig pc;
        pc.kind = kinds[rng.below(6)];
        pc.K = 2 + rng.below(3);
        pc.radius = rng.below(2) ? RadiusKind::ppi : RadiusKind::ppipp;
        pc.confidence.R = rng.uniform(0.0, 2.0);
        for (std::size_t q = 0; q < Q; ++q) {
            A[q] = std::exp(rng.uniform(-2.0, 2.0));
            qs[q].weight = rng.uniform(0.1, 2.0);
            qs[q].cost = cost_grid[rng.below(6)];
            init += qs[q].cost * static_cast<double>(pc.K);
        }
        const double B = std::round((init + rng.uniform(0.0, 200.0)) * 100.0) / 100.0;
        const testenv::GaussianEnv env(A);
        const std::uint64_t s = rng.below(1u << 30);
        AllocationState st1, st2;
        const auto r1 = run_episode(pc, env, B, qs, s, {}, &st1);
        const auto r2 = run_episode(pc, env, B, qs, s, {}, &st2);

        std::int64_t used = 0, max_cu = 0;
        for (std::size_t q = 0; q < Q; ++q) {
            used += to_units(qs[q].cost) * static_cast<std::int64_t>(st1.n[q]);
            max_cu = std::max(max_cu, to_units(qs[q].cost));
        }
        if (used + st1.remaining_units() != to_units(B))
            return fail("budget identity broken in config %.0f", static_cast<double>(k));
        if (st1.remaining_units() < 0 || st1.remaining_units() >= max_cu)
            return fail("bad terminal remaining %.6g in config %.0f", st1.remaining(),
                        static_cast<double>(k));
        if (r1.n != r2.n || std::memcmp(&r1.mse, &r2.mse, sizeof(double)) != 0)
            return fail("same seed gave different results in config %.0f",
                        static_cast<double>(k));
    }
    return {true, std::to_string(configs) + " random configurations"};
}

} // namespace props
