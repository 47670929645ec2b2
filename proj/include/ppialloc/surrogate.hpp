#pragma once

#include "environments.hpp"
#include "rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

namespace ppialloc {

// Stand-in for a 68-question paired human/LLM survey battery. Difficulties
// span [0.024, 0.239] with mean 0.106 and CV 0.63; 32 questions carry almost
// no model signal (lambda < 0.05, 26 of them exactly 0) and hold the larger
// difficulties.
struct SurrogateOptions {
    std::size_t respondents = 1271;
    double binary_fraction = 0.4; // share of yes/no items, the rest are 5-point
    std::uint64_t seed = 7;
    std::uint64_t module_seed = 2;
};

struct SurrogateTargets {
    std::vector<double> A;
    std::vector<double> lambda;
};

[[nodiscard]] inline std::vector<double> log_spaced(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * static_cast<double>(i) /
                                           static_cast<double>(n - 1));
    return v;
}

[[nodiscard]] inline std::vector<double> lin_spaced(double lo, double hi, std::size_t n)
{
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

[[nodiscard]] inline SurrogateTargets surrogate_targets()
{
    // inner endpoints solve mean = 0.106, CV = 0.63 for the two log-spaced blocks
    SurrogateTargets t;
    t.A = log_spaced(0.11545858, 0.239, 32);
    const auto useful = log_spaced(0.024, 0.08689937, 36);
    t.A.insert(t.A.end(), useful.begin(), useful.end());
    t.lambda.assign(26, 0.0);
    const auto weak = lin_spaced(0.01, 0.04, 6);
    t.lambda.insert(t.lambda.end(), weak.begin(), weak.end());
    // easiest questions get the strongest model signal
    const auto strong = lin_spaced(0.72, 0.06, 36);
    t.lambda.insert(t.lambda.end(), strong.begin(), strong.end());
    return t;
}

namespace detail {

inline constexpr std::array<double, 5> likert_levels{0.0, 0.25, 0.5, 0.75, 1.0};

// Symmetric 5-point marginal with variance v, 0.005 <= v <= 0.25. Both end
// levels always carry at least 1% so that min-max scaling leaves the item
// on [0,1] unchanged.
inline std::array<double, 5> likert_marginal(double v)
{
    constexpr double e_min = 0.01;
    if (v >= 0.0625 + 0.375 * e_min) {
        const double m = (v - 0.0625) / 0.1875;
        return {m / 2, (1.0 - m) / 2, 0.0, (1.0 - m) / 2, m / 2};
    }
    const double k = (v - 0.5 * e_min) / 0.0625;
    return {e_min, k / 2, 1.0 - 2.0 * e_min - k, k / 2, e_min};
}

// yes/no item with variance v, mass on the extreme levels
inline std::array<double, 5> binary_marginal(double v)
{
    const double p = (1.0 - std::sqrt(std::max(1.0 - 4.0 * v, 0.0))) / 2.0;
    return {1.0 - p, 0.0, 0.0, 0.0, p};
}

// largest-remainder integer counts summing to n
inline std::array<std::size_t, 5> level_counts(const std::array<double, 5>& p, std::size_t n)
{
    std::array<std::size_t, 5> c{};
    std::array<double, 5> rem{};
    std::size_t used = 0;
    for (std::size_t j = 0; j < 5; ++j) {
        const double raw = p[j] * static_cast<double>(n);
        c[j] = static_cast<std::size_t>(std::floor(raw));
        rem[j] = raw - static_cast<double>(c[j]);
        used += c[j];
    }
    std::array<std::size_t, 5> order{0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t i = 0; used < n; ++i, ++used)
        ++c[order[i % 5]];
    return c;
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[rng.below(i)]);
}

} // namespace detail

struct SurrogateQuestion {
    std::string id;
    std::vector<double> human, llm;
};

// Each question: exact marginal counts for the human column; a stratified
// subset of round(lambda N) respondents gets llm = human, the rest get an
// llm answer with the same marginal but independent of the human answer.
// That makes the full-sample coefficient close to lambda and the residual
// variance close to (1 - lambda^2) Var(human) = A.
[[nodiscard]] inline std::vector<SurrogateQuestion> generate_surrogate(const SurrogateOptions& opt = {})
{
    const auto t = surrogate_targets();
    const std::size_t Q = t.A.size();
    const std::size_t N = opt.respondents;
    if (N < 2)
        throw config_error("surrogate: need at least 2 respondents");
    Rng rng(opt.seed);

    const auto nb = static_cast<std::size_t>(std::llround(opt.binary_fraction * static_cast<double>(Q)));
    std::vector<bool> binary(Q, false);
    for (std::size_t i = 0; i < nb; ++i) {
        const double pos = nb == 1 ? 0.0
                                   : static_cast<double>(Q - 1) * static_cast<double>(i) /
                                         static_cast<double>(nb - 1);
        binary[static_cast<std::size_t>(std::llround(pos))] = true;
    }

    std::vector<SurrogateQuestion> out(Q);
    for (std::size_t q = 0; q < Q; ++q) {
        const double lam = t.lambda[q];
        const double v = t.A[q] / (1.0 - lam * lam);
        const auto p = binary[q] ? detail::binary_marginal(v) : detail::likert_marginal(v);
        const auto cnt = detail::level_counts(p, N);

        std::vector<double> y;
        y.reserve(N);
        for (std::size_t j = 0; j < 5; ++j)
            y.insert(y.end(), cnt[j], detail::likert_levels[j]);

        const auto m = static_cast<std::size_t>(std::llround(lam * static_cast<double>(N)));
        const auto copies = detail::level_counts(p, m);
        std::vector<double> s(N, 0.0);
        std::size_t start = 0;
        for (std::size_t j = 0; j < 5; ++j) {
            const std::size_t nc = std::min(copies[j], cnt[j]);
            for (std::size_t i = 0; i < nc; ++i)
                s[start + i] = y[start + i];
            // the remainder of this level: llm follows the marginal
            const auto rest = detail::level_counts(p, cnt[j] - nc);
            std::size_t k = start + nc;
            for (std::size_t l = 0; l < 5; ++l)
                for (std::size_t i = 0; i < rest[l]; ++i)
                    s[k++] = detail::likert_levels[l];
            start += cnt[j];
        }

        std::vector<std::size_t> perm(N);
        std::iota(perm.begin(), perm.end(), 0);
        detail::shuffle(perm, rng);
        out[q].human.resize(N);
        out[q].llm.resize(N);
        for (std::size_t i = 0; i < N; ++i) {
            out[q].human[i] = y[perm[i]];
            out[q].llm[i] = s[perm[i]];
        }
    }

    // present questions in a shuffled order with opaque ids
    std::vector<std::size_t> order(Q);
    std::iota(order.begin(), order.end(), 0);
    detail::shuffle(order, rng);
    std::vector<SurrogateQuestion> shuffled;
    shuffled.reserve(Q);
    for (std::size_t i = 0; i < Q; ++i) {
        shuffled.push_back(std::move(out[order[i]]));
        char buf[24];
        std::snprintf(buf, sizeof buf, "q%02zu", i + 1);
        shuffled.back().id = buf;
    }
    return shuffled;
}

// 14 task-type modules: six over the low-signal questions and eight over the
// rest, sizes fixed, membership drawn from module_seed.
[[nodiscard]] inline std::vector<std::pair<std::string, std::string>>
surrogate_modules(const std::vector<SurrogateQuestion>& qs, const SurrogateOptions& opt = {})
{
    const std::vector<std::size_t> weak_sizes{16, 6, 4, 3, 2, 1};
    const std::vector<std::size_t> useful_sizes{10, 8, 6, 4, 3, 2, 2, 1};
    std::vector<std::size_t> weak, useful;
    for (std::size_t i = 0; i < qs.size(); ++i) {
        ReplayQuestion rq;
        rq.human = qs[i].human;
        rq.llm = qs[i].llm;
        summarize(rq);
        (rq.lambda < 0.05 ? weak : useful).push_back(i);
    }
    if (weak.size() != 32 || useful.size() != 36)
        throw data_error("surrogate_modules: unexpected signal split");
    Rng rng(opt.module_seed);
    detail::shuffle(weak, rng);
    detail::shuffle(useful, rng);

    std::vector<std::pair<std::string, std::string>> map;
    std::size_t mod = 0;
    auto assign = [&](const std::vector<std::size_t>& pool, const std::vector<std::size_t>& sizes) {
        std::size_t at = 0;
        for (std::size_t s : sizes) {
            char buf[24];
            std::snprintf(buf, sizeof buf, "m%02zu", ++mod);
            for (std::size_t i = 0; i < s; ++i)
                map.emplace_back(qs[pool[at++]].id, buf);
        }
    };
    assign(weak, weak_sizes);
    assign(useful, useful_sizes);
    std::sort(map.begin(), map.end());
    return map;
}

inline void write_surrogate_csv(std::ostream& os, const std::vector<SurrogateQuestion>& qs)
{
    os << "question_id,respondent_id,human,llm\n";
    for (const auto& q : qs)
        for (std::size_t i = 0; i < q.human.size(); ++i)
            os << q.id << ",r" << (i + 1) << ',' << q.human[i] << ',' << q.llm[i] << '\n';
}

inline void write_module_csv(std::ostream& os,
                             const std::vector<std::pair<std::string, std::string>>& map)
{
    os << "question_id,module_id\n";
    for (const auto& [q, m] : map)
        os << q << ',' << m << '\n';
}

[[nodiscard]] inline ReplayDataset surrogate_dataset(const SurrogateOptions& opt = {})
{
    std::stringstream ss;
    write_surrogate_csv(ss, generate_surrogate(opt));
    return replay_parse(ss, "surrogate");
}

} // namespace ppialloc
