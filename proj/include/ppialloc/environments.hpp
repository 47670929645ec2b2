#pragma once

#include "core_stats.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "policies.hpp"
#include "rng.hpp"

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ppialloc {

// ---------------------------------------------------------------- synthetic

struct SyntheticSpec {
    std::size_t Q = 100;
    double h = 2.0;
    double rho = 0.7;
    double sigma_eta = 0.5;
    std::uint32_t seed = 42; // fixes the v_q draw

    void validate() const
    {
        if (Q < 1)
            throw config_error("synthetic: Q must be at least 1");
        if (!(h >= 0.0))
            throw domain_error("synthetic: h must be nonnegative");
        if (!(rho >= 0.0 && rho <= 1.0))
            throw config_error("synthetic: rho must lie in [0,1]");
        if (!(sigma_eta >= 0.0))
            throw config_error("synthetic: sigma_eta must be nonnegative");
    }
};

// h / sinh(h), with its limit 1 at h = 0
[[nodiscard]] inline double loguniform_norm(double h)
{
    return h < 1e-8 ? 1.0 : h / std::sinh(h);
}

[[nodiscard]] inline std::vector<double> synthetic_draw_vq(const SyntheticSpec& spec, Rng& rng)
{
    spec.validate();
    std::vector<double> v(spec.Q, 1.0);
    if (spec.h == 0.0)
        return v;
    const double k = loguniform_norm(spec.h);
    for (auto& x : v)
        x = k * std::exp(rng.uniform(-spec.h, spec.h));
    return v;
}

// The experiment draw: U_q from the legacy MT19937 stream keyed by spec.seed,
// so a given seed reproduces the same difficulty profile everywhere.
[[nodiscard]] inline std::vector<double> synthetic_draw_vq(const SyntheticSpec& spec)
{
    spec.validate();
    std::vector<double> v(spec.Q, 1.0);
    if (spec.h == 0.0)
        return v;
    const double k = loguniform_norm(spec.h);
    const auto u = legacy_uniform(spec.seed, -spec.h, spec.h, spec.Q);
    for (std::size_t q = 0; q < spec.Q; ++q)
        v[q] = k * std::exp(u[q]);
    return v;
}

class SyntheticEnv {
public:
    using tracker_type = PairedStats;

    explicit SyntheticEnv(const SyntheticSpec& spec) : SyntheticEnv(spec, synthetic_draw_vq(spec)) {}

    SyntheticEnv(const SyntheticSpec& spec, std::vector<double> v) : spec_(spec), v_(std::move(v))
    {
        spec_.validate();
        if (v_.size() != spec_.Q)
            throw config_error("synthetic: v has wrong length");
        const double f = 1.0 - spec_.rho * spec_.rho + spec_.sigma_eta * spec_.sigma_eta;
        a_.resize(v_.size());
        sd_.resize(v_.size());
        for (std::size_t q = 0; q < v_.size(); ++q) {
            a_[q] = v_[q] * f;
            sd_[q] = std::sqrt(v_[q]);
        }
        orth_ = std::sqrt(1.0 - spec_.rho * spec_.rho);
    }

    [[nodiscard]] std::size_t size() const { return v_.size(); }
    [[nodiscard]] const std::vector<double>& difficulty() const { return a_; }
    [[nodiscard]] const std::vector<double>& scale() const { return v_; }
    [[nodiscard]] double optimal_lambda(std::size_t) const { return spec_.rho; }
    [[nodiscard]] double population_llm_mean(std::size_t) const { return 0.0; }
    [[nodiscard]] double true_mean(std::size_t) const { return 0.0; }
    [[nodiscard]] const SyntheticSpec& spec() const { return spec_; }

    [[nodiscard]] std::pair<double, double> sample_pair(std::size_t q, Rng& rng) const
    {
        const double u = rng.normal();
        const double e = rng.normal();
        const double eta = rng.normal();
        const double y = sd_[q] * (u + spec_.sigma_eta * eta);
        const double s = sd_[q] * (spec_.rho * u + orth_ * e);
        return {y, s};
    }

    void observe(std::size_t q, Rng& rng, PairedStats& st) const
    {
        const auto [y, s] = sample_pair(q, rng);
        st.update(y, s);
    }

private:
    SyntheticSpec spec_;
    std::vector<double> v_, a_, sd_;
    double orth_ = 0.0;
};

// ------------------------------------------------------------------- replay

struct ReplayQuestion {
    std::string id;
    std::vector<std::string> respondents;
    std::vector<double> human; // scaled to [0,1]
    std::vector<double> llm;
    double A = 0.0;      // full-sample residual variance at lambda
    double lambda = 0.0; // full-sample clipped coefficient
    double llm_mean = 0.0;
    bool degenerate = false;
};

struct ReplayDataset {
    std::vector<ReplayQuestion> questions; // in order of first appearance

    [[nodiscard]] std::vector<const ReplayQuestion*> usable() const
    {
        std::vector<const ReplayQuestion*> out;
        for (const auto& q : questions)
            if (!q.degenerate)
                out.push_back(&q);
        return out;
    }
};

namespace detail {

using csv_tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;

inline std::vector<std::string> split_csv(const std::string& line)
{
    std::string l = line;
    if (!l.empty() && l.back() == '\r')
        l.pop_back();
    csv_tokenizer tok(l);
    return {tok.begin(), tok.end()};
}

inline double parse_number(const std::string& s, const std::string& where)
{
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw data_error(where + ": '" + s + "' is not a number");
    }
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos])))
        ++pos;
    if (pos != s.size() || !std::isfinite(v))
        throw data_error(where + ": '" + s + "' is not a finite number");
    return v;
}

} // namespace detail

// Full-sample summary of one question: clipped lambda and its residual variance.
inline void summarize(ReplayQuestion& q)
{
    PairedStats st;
    for (std::size_t i = 0; i < q.human.size(); ++i)
        st.update(q.human[i], q.llm[i]);
    q.llm_mean = st.n() ? st.mean_s() : 0.0;
    if (st.n() < 2) {
        q.degenerate = true;
        return;
    }
    q.lambda = fit_lambda(st);
    q.A = st.tuned_residual_variance(q.lambda);
    q.degenerate = !(q.A > 1e-12);
}

[[nodiscard]] inline ReplayDataset replay_parse(std::istream& in, const std::string& name = "dataset")
{
    std::string line;
    if (!std::getline(in, line))
        throw data_error(name + ": empty file");
    const auto header = detail::split_csv(line);
    const std::vector<std::string> want{"question_id", "respondent_id", "human", "llm"};
    if (header != want)
        throw data_error(name + ": header must be question_id,respondent_id,human,llm");

    ReplayDataset ds;
    std::unordered_map<std::string, std::size_t> at;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r")
            continue;
        const auto f = detail::split_csv(line);
        const std::string where = name + " line " + std::to_string(row);
        if (f.size() != 4)
            throw data_error(where + ": expected 4 fields, got " + std::to_string(f.size()));
        auto [it, fresh] = at.try_emplace(f[0], ds.questions.size());
        if (fresh) {
            ds.questions.emplace_back();
            ds.questions.back().id = f[0];
        }
        auto& q = ds.questions[it->second];
        q.respondents.push_back(f[1]);
        q.human.push_back(detail::parse_number(f[2], where));
        q.llm.push_back(detail::parse_number(f[3], where));
    }

    for (auto& q : ds.questions) {
        const auto [hlo, hhi] = std::minmax_element(q.human.begin(), q.human.end());
        if (*hlo == *hhi)
            throw data_error(name + ": question '" + q.id + "' has constant human responses");
        const auto [llo, lhi] = std::minmax_element(q.llm.begin(), q.llm.end());
        // one common scale for both columns keeps them comparable
        const double lo = std::min(*hlo, *llo);
        const double hi = std::max(*hhi, *lhi);
        for (auto& x : q.human)
            x = (x - lo) / (hi - lo);
        for (auto& x : q.llm)
            x = (x - lo) / (hi - lo);
        summarize(q);
    }
    return ds;
}

[[nodiscard]] inline ReplayDataset replay_ingest(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open dataset '" + path + "'");
    return replay_parse(in, path);
}

// With-replacement bootstrap over the respondent pool of each usable question.
// `scale` multiplies both columns of a question (used by the heterogeneity
// sweep: A scales with its square).
class ReplayEnv {
public:
    using tracker_type = PairedStats;

    explicit ReplayEnv(const ReplayDataset& ds, std::vector<double> scale = {})
    {
        for (const auto* q : ds.usable())
            qs_.push_back(q);
        if (qs_.empty())
            throw data_error("replay: no usable questions");
        if (scale.empty())
            scale.assign(qs_.size(), 1.0);
        if (scale.size() != qs_.size())
            throw config_error("replay: scale vector has wrong length");
        scale_ = std::move(scale);
        for (std::size_t i = 0; i < qs_.size(); ++i)
            a_.push_back(qs_[i]->A * scale_[i] * scale_[i]);
    }

    [[nodiscard]] std::size_t size() const { return qs_.size(); }
    [[nodiscard]] const std::vector<double>& difficulty() const { return a_; }
    [[nodiscard]] const ReplayQuestion& question(std::size_t q) const { return *qs_[q]; }
    [[nodiscard]] double population_llm_mean(std::size_t q) const
    {
        return scale_[q] * qs_[q]->llm_mean;
    }

    [[nodiscard]] std::pair<double, double> sample_pair(std::size_t q, Rng& rng) const
    {
        const auto& d = *qs_[q];
        const std::size_t i = rng.below(d.human.size());
        return {scale_[q] * d.human[i], scale_[q] * d.llm[i]};
    }

    void observe(std::size_t q, Rng& rng, PairedStats& st) const
    {
        const auto [y, s] = sample_pair(q, rng);
        st.update(y, s);
    }

private:
    std::vector<const ReplayQuestion*> qs_;
    std::vector<double> scale_;
    std::vector<double> a_;
};

// -------------------------------------------------------------- transforms

// log A^(h) = mean log A + h (log A - mean log A), then rescaled so the
// arithmetic mean is unchanged.
[[nodiscard]] inline std::vector<double> rescale_heterogeneity(const std::vector<double>& A, double h)
{
    if (!(h >= 0.0))
        throw domain_error("rescale_heterogeneity: h must be nonnegative");
    if (A.empty())
        return {};
    double mlog = 0.0, mean = 0.0;
    for (double a : A) {
        if (!(a > 0.0))
            throw domain_error("rescale_heterogeneity: difficulties must be positive");
        mlog += std::log(a);
        mean += a;
    }
    const double Q = static_cast<double>(A.size());
    mlog /= Q;
    mean /= Q;
    if (h == 1.0)
        return A;
    std::vector<double> out(A.size());
    double m2 = 0.0;
    for (std::size_t q = 0; q < A.size(); ++q) {
        out[q] = std::exp(mlog + h * (std::log(A[q]) - mlog));
        m2 += out[q];
    }
    m2 /= Q;
    for (auto& x : out)
        x *= mean / m2;
    return out;
}

// z_q ~ Uniform(-1,1), drawn once and shared across dispersion levels.
[[nodiscard]] inline std::vector<double> dispersion_draw(std::size_t Q, Rng& rng)
{
    std::vector<double> z(Q);
    for (auto& x : z)
        x = rng.uniform(-1.0, 1.0);
    return z;
}

[[nodiscard]] inline std::vector<double> disperse(const std::vector<double>& z, double a)
{
    if (!(a >= 0.0 && a <= 1.0))
        throw domain_error("disperse: a must lie in [0,1]");
    std::vector<double> v(z.size());
    for (std::size_t q = 0; q < z.size(); ++q)
        v[q] = std::clamp(1.0 + a * z[q], 0.0, 2.0);
    return v;
}

[[nodiscard]] inline std::vector<double> floor_positive(std::vector<double> v,
                                                        double floor_value = 0.05)
{
    for (auto& x : v)
        x = std::max(x, floor_value);
    return v;
}

struct ModuleGrouping {
    std::vector<std::string> module_ids;               // order of first appearance
    std::vector<std::vector<std::size_t>> members;     // question indices per module
    std::vector<double> A;                             // summed difficulty
};

// labels[q] is the module of question q.
[[nodiscard]] inline ModuleGrouping group_modules(const std::vector<double>& A,
                                                  const std::vector<std::string>& labels)
{
    if (labels.size() != A.size())
        throw domain_error("group_modules: every question needs exactly one module label");
    ModuleGrouping g;
    std::unordered_map<std::string, std::size_t> at;
    for (std::size_t q = 0; q < A.size(); ++q) {
        if (labels[q].empty())
            throw domain_error("group_modules: question " + std::to_string(q) + " is unlabeled");
        auto [it, fresh] = at.try_emplace(labels[q], g.module_ids.size());
        if (fresh) {
            g.module_ids.push_back(labels[q]);
            g.members.emplace_back();
            g.A.push_back(0.0);
        }
        g.members[it->second].push_back(q);
        g.A[it->second] += A[q];
    }
    return g;
}

[[nodiscard]] inline std::map<std::string, std::string> read_module_map(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw data_error("cannot open module map '" + path + "'");
    std::string line;
    if (!std::getline(in, line) ||
        detail::split_csv(line) != std::vector<std::string>{"question_id", "module_id"})
        throw data_error(path + ": header must be question_id,module_id");
    std::map<std::string, std::string> m;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r")
            continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 2)
            throw data_error(path + " line " + std::to_string(row) + ": expected 2 fields");
        if (!m.emplace(f[0], f[1]).second)
            throw data_error(path + ": question '" + f[0] + "' listed twice");
    }
    return m;
}

// Per-module state: one PairedStats per member question.
struct ModuleTracker {
    std::vector<PairedStats> members;
    std::size_t n = 0;
};

[[nodiscard]] inline std::size_t tracker_count(const ModuleTracker& t) { return t.n; }

[[nodiscard]] inline double difficulty_estimate(const ModuleTracker& t, DifficultyMode mode)
{
    double a = 0.0;
    for (const auto& m : t.members)
        a += difficulty_estimate(m, mode);
    return a;
}

// Sum of the per-question upper bounds.
[[nodiscard]] inline double difficulty_ucb(const ModuleTracker& t, DifficultyMode mode, double r)
{
    double a = 0.0;
    for (const auto& m : t.members) {
        const double v = std::sqrt(difficulty_estimate(m, mode)) + r;
        a += v * v;
    }
    return a;
}

// A budget unit sends one respondent to a module; that respondent answers
// every member question, so draws are matched on respondent id.
class ModuleEnv {
public:
    using tracker_type = ModuleTracker;

    ModuleEnv(const ReplayDataset& ds, const std::map<std::string, std::string>& module_of)
    {
        std::vector<const ReplayQuestion*> qs = ds.usable();
        if (qs.empty())
            throw data_error("modules: no usable questions");
        std::vector<double> A;
        std::vector<std::string> labels;
        for (const auto* q : qs) {
            auto it = module_of.find(q->id);
            if (it == module_of.end())
                throw data_error("modules: question '" + q->id + "' has no module");
            A.push_back(q->A);
            labels.push_back(it->second);
        }
        grouping_ = group_modules(A, labels);

        for (const auto& mem : grouping_.members) {
            // respondents present in every member question
            std::vector<std::unordered_map<std::string, std::size_t>> pos(mem.size());
            for (std::size_t j = 0; j < mem.size(); ++j)
                for (std::size_t i = 0; i < qs[mem[j]]->respondents.size(); ++i)
                    pos[j].emplace(qs[mem[j]]->respondents[i], i);
            Rows rows;
            rows.qs.resize(mem.size());
            for (std::size_t j = 0; j < mem.size(); ++j)
                rows.qs[j] = qs[mem[j]];
            for (std::size_t i = 0; i < qs[mem[0]]->respondents.size(); ++i) {
                const auto& rid = qs[mem[0]]->respondents[i];
                std::vector<std::size_t> r(mem.size());
                bool all = true;
                for (std::size_t j = 0; j < mem.size() && all; ++j) {
                    auto it = pos[j].find(rid);
                    if (it == pos[j].end())
                        all = false;
                    else
                        r[j] = it->second;
                }
                if (all)
                    rows.rows.push_back(std::move(r));
            }
            if (rows.rows.empty())
                throw data_error("modules: no respondent answered every question of a module");
            rows_.push_back(std::move(rows));
        }
    }

    [[nodiscard]] std::size_t size() const { return grouping_.A.size(); }
    [[nodiscard]] const std::vector<double>& difficulty() const { return grouping_.A; }
    [[nodiscard]] const ModuleGrouping& grouping() const { return grouping_; }

    void observe(std::size_t w, Rng& rng, ModuleTracker& t) const
    {
        const auto& m = rows_[w];
        if (t.members.empty())
            t.members.resize(m.qs.size());
        const auto& r = m.rows[rng.below(m.rows.size())];
        for (std::size_t j = 0; j < m.qs.size(); ++j)
            t.members[j].update(m.qs[j]->human[r[j]], m.qs[j]->llm[r[j]]);
        ++t.n;
    }

private:
    struct Rows {
        std::vector<const ReplayQuestion*> qs;
        std::vector<std::vector<std::size_t>> rows;
    };
    ModuleGrouping grouping_;
    std::vector<Rows> rows_;
};

} // namespace ppialloc
