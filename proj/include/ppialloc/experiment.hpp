#pragma once

#include "environments.hpp"
#include "errors.hpp"
#include "mestimation.hpp"
#include "policies.hpp"
#include "rng.hpp"
#include "surrogate.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#ifndef PPIALLOC_VERSION
#define PPIALLOC_VERSION "0.1.0"
#endif

namespace ppialloc {

enum class EnvKind { synthetic, replay, mnl, modules };
enum class SweepAxis { none, rho, h, a_weights, a_costs, alpha_etc };

[[nodiscard]] inline std::string_view axis_name(SweepAxis a)
{
    switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::rho: return "rho";
    case SweepAxis::h: return "h";
    case SweepAxis::a_weights: return "a_weights";
    case SweepAxis::a_costs: return "a_costs";
    case SweepAxis::alpha_etc: return "alpha_etc";
    }
    return "?";
}

[[nodiscard]] inline SweepAxis parse_axis(std::string_view s)
{
    for (auto a : {SweepAxis::none, SweepAxis::rho, SweepAxis::h, SweepAxis::a_weights,
                   SweepAxis::a_costs, SweepAxis::alpha_etc})
        if (axis_name(a) == s)
            return a;
    throw config_error("unknown sweep axis '" + std::string(s) + "'");
}

// Confidence range used when the config leaves R unset. These are the values
// that reproduce the published tables; see README for how they were chosen.
[[nodiscard]] inline double default_R(EnvKind k)
{
    switch (k) {
    case EnvKind::synthetic: return 0.05;
    case EnvKind::replay: return 0.15;
    case EnvKind::modules: return 0.15;
    case EnvKind::mnl: return 1.0;
    }
    return 1.0;
}

struct ExperimentConfig {
    EnvKind environment = EnvKind::synthetic;
    SyntheticSpec synthetic;
    MnlSpec mnl;
    SurrogateOptions surrogate;
    std::string data_path;    // empty: built-in surrogate
    std::string modules_path; // empty with modules env: surrogate module map
    std::vector<PolicyKind> policies{PolicyKind::oracle, PolicyKind::ucb_ppipp,
                                     PolicyKind::epsilon_greedy, PolicyKind::uniform};
    std::vector<double> budgets{2000};
    std::size_t replications = 200;
    std::uint64_t seed = 1;
    std::vector<double> checkpoints; // explicit list; empty means checkpoint_count points
    std::size_t checkpoint_count = 100;
    SweepAxis sweep = SweepAxis::none;
    std::vector<double> sweep_values;
    PolicyConfig policy;
    bool R_given = false;
    bool common_random_numbers = true;
    std::uint64_t dispersion_seed = 11;
    std::size_t threads = 0;
    nlohmann::json echo;

    [[nodiscard]] PolicyConfig policy_for(PolicyKind k) const
    {
        PolicyConfig p = policy;
        p.kind = k;
        if (!R_given)
            p.confidence.R = default_R(environment);
        return p;
    }

    void validate() const
    {
        if (replications < 1)
            throw config_error("replications must be at least 1");
        if (budgets.empty())
            throw config_error("budgets must not be empty");
        for (double b : budgets)
            if (!(b > 0.0))
                throw config_error("budgets must be positive");
        if (policies.empty())
            throw config_error("policies must not be empty");
        if (!std::is_sorted(checkpoints.begin(), checkpoints.end()))
            throw config_error("checkpoints must be sorted ascending");
        if (sweep != SweepAxis::none && sweep_values.empty())
            throw config_error("sweep needs at least one value");
        policy.validate();
        synthetic.validate();
        mnl.validate();
    }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& where)
{
    if (!j.is_object())
        throw config_error(where + " must be a JSON object");
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k))
            throw config_error("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out, const std::string& where)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw config_error(where + "." + key + ": " + e.what());
    }
}

} // namespace detail

[[nodiscard]] inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    using detail::read;
    ExperimentConfig c;
    c.echo = j;
    detail::reject_unknown(j,
                           {"environment", "synthetic", "mnl", "replay", "policies", "budgets",
                            "replications", "seed", "checkpoints", "sweep", "policy",
                            "common_random_numbers", "dispersion_seed", "threads"},
                           "config");
    if (j.contains("environment")) {
        const auto e = j.at("environment").get<std::string>();
        if (e == "synthetic")
            c.environment = EnvKind::synthetic;
        else if (e == "replay")
            c.environment = EnvKind::replay;
        else if (e == "mnl")
            c.environment = EnvKind::mnl;
        else if (e == "modules")
            c.environment = EnvKind::modules;
        else
            throw config_error("unknown environment '" + e + "'");
    }
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        detail::reject_unknown(s, {"Q", "h", "rho", "sigma_eta", "seed"}, "synthetic");
        read(s, "Q", c.synthetic.Q, "synthetic");
        read(s, "h", c.synthetic.h, "synthetic");
        read(s, "rho", c.synthetic.rho, "synthetic");
        read(s, "sigma_eta", c.synthetic.sigma_eta, "synthetic");
        read(s, "seed", c.synthetic.seed, "synthetic");
    }
    if (j.contains("mnl")) {
        const auto& s = j.at("mnl");
        detail::reject_unknown(s,
                               {"Q", "K", "d", "h", "rho", "noise_sd", "lambda", "mc_samples",
                                "scale_seed", "task_seed", "ridge", "criterion"},
                               "mnl");
        read(s, "Q", c.mnl.Q, "mnl");
        read(s, "K", c.mnl.K, "mnl");
        read(s, "d", c.mnl.d, "mnl");
        read(s, "h", c.mnl.h, "mnl");
        read(s, "rho", c.mnl.rho, "mnl");
        read(s, "noise_sd", c.mnl.noise_sd, "mnl");
        read(s, "lambda", c.mnl.lambda, "mnl");
        read(s, "mc_samples", c.mnl.mc_samples, "mnl");
        read(s, "scale_seed", c.mnl.scale_seed, "mnl");
        read(s, "task_seed", c.mnl.task_seed, "mnl");
        read(s, "ridge", c.mnl.ridge, "mnl");
        if (s.contains("criterion")) {
            const auto v = s.at("criterion").get<std::string>();
            if (v == "trace")
                c.mnl.criterion = Criterion::trace;
            else if (v == "det")
                c.mnl.criterion = Criterion::det;
            else
                throw config_error("mnl.criterion must be 'trace' or 'det'");
        }
    }
    if (j.contains("replay")) {
        const auto& s = j.at("replay");
        detail::reject_unknown(s,
                               {"data", "modules", "surrogate_seed", "binary_fraction",
                                "respondents", "module_seed"},
                               "replay");
        read(s, "data", c.data_path, "replay");
        read(s, "modules", c.modules_path, "replay");
        read(s, "surrogate_seed", c.surrogate.seed, "replay");
        read(s, "binary_fraction", c.surrogate.binary_fraction, "replay");
        read(s, "respondents", c.surrogate.respondents, "replay");
        read(s, "module_seed", c.surrogate.module_seed, "replay");
    }
    if (j.contains("policies")) {
        c.policies.clear();
        for (const auto& p : j.at("policies"))
            c.policies.push_back(parse_policy(p.get<std::string>()));
    }
    read(j, "budgets", c.budgets, "config");
    read(j, "replications", c.replications, "config");
    read(j, "seed", c.seed, "config");
    if (j.contains("checkpoints")) {
        const auto& cp = j.at("checkpoints");
        if (cp.is_number_integer())
            c.checkpoint_count = cp.get<std::size_t>();
        else
            read(j, "checkpoints", c.checkpoints, "config");
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        detail::reject_unknown(s, {"axis", "values"}, "sweep");
        if (s.contains("axis"))
            c.sweep = parse_axis(s.at("axis").get<std::string>());
        read(s, "values", c.sweep_values, "sweep");
    }
    if (j.contains("policy")) {
        const auto& s = j.at("policy");
        detail::reject_unknown(s,
                               {"K", "epsilon_c", "alpha", "R", "delta", "radius", "R_y", "R_s",
                                "M_y", "M_s", "v_min"},
                               "policy");
        read(s, "K", c.policy.K, "policy");
        read(s, "epsilon_c", c.policy.epsilon_c, "policy");
        read(s, "alpha", c.policy.alpha, "policy");
        if (s.contains("R")) {
            read(s, "R", c.policy.confidence.R, "policy");
            c.R_given = true;
        }
        read(s, "delta", c.policy.confidence.delta, "policy");
        read(s, "R_y", c.policy.confidence.R_y, "policy");
        read(s, "R_s", c.policy.confidence.R_s, "policy");
        read(s, "M_y", c.policy.confidence.M_y, "policy");
        read(s, "M_s", c.policy.confidence.M_s, "policy");
        read(s, "v_min", c.policy.confidence.v_min, "policy");
        if (s.contains("radius")) {
            const auto v = s.at("radius").get<std::string>();
            if (v == "ppi")
                c.policy.radius = RadiusKind::ppi;
            else if (v == "ppipp")
                c.policy.radius = RadiusKind::ppipp;
            else
                throw config_error("policy.radius must be 'ppi' or 'ppipp'");
        }
    }
    read(j, "common_random_numbers", c.common_random_numbers, "config");
    read(j, "dispersion_seed", c.dispersion_seed, "config");
    read(j, "threads", c.threads, "config");
    c.validate();
    return c;
}

[[nodiscard]] inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(path + ": " + e.what());
    }
    return parse_config(j);
}

// ------------------------------------------------------------------ results

struct CellResult {
    std::string policy;
    double budget = 0.0;
    std::optional<double> sweep_value;
    double oracle_mse = 0.0;
    std::vector<double> mse; // per replication
    std::vector<std::vector<std::size_t>> n;
    std::vector<std::vector<double>> trajectory;
};

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

[[nodiscard]] inline MeanSe mean_se(const std::vector<double>& x)
{
    MeanSe r;
    if (x.empty())
        return r;
    for (double v : x)
        r.mean += v;
    r.mean /= static_cast<double>(x.size());
    if (x.size() > 1) {
        double ss = 0.0;
        for (double v : x)
            ss += (v - r.mean) * (v - r.mean);
        r.se = std::sqrt(ss / static_cast<double>(x.size() - 1)) /
               std::sqrt(static_cast<double>(x.size()));
    }
    return r;
}

struct SummaryRow {
    std::string policy;
    double budget = 0.0;
    std::optional<double> sweep_value;
    double mean_mse = 0.0, se_mse = 0.0, gap_pct = 0.0, mean_regret = 0.0, se_regret = 0.0;
    double oracle_mse = 0.0;
};

struct TrajectoryRow {
    std::string policy;
    double budget_spent = 0.0;
    double mean_mse = 0.0, se_mse = 0.0;
};

struct ExperimentResult {
    SweepAxis sweep = SweepAxis::none;
    std::vector<CellResult> cells;
    std::vector<double> checkpoints; // for cells that carry trajectories
    nlohmann::json config_echo;
    std::vector<std::string> warnings;

    [[nodiscard]] const CellResult& cell(std::string_view policy, double budget,
                                         std::optional<double> sweep_value = std::nullopt) const
    {
        for (const auto& c : cells)
            if (c.policy == policy && c.budget == budget &&
                (!sweep_value || (c.sweep_value && *c.sweep_value == *sweep_value)))
                return c;
        throw std::out_of_range("no result for policy " + std::string(policy));
    }
};

[[nodiscard]] inline SummaryRow summarize(const CellResult& c)
{
    SummaryRow r;
    r.policy = c.policy;
    r.budget = c.budget;
    r.sweep_value = c.sweep_value;
    r.oracle_mse = c.oracle_mse;
    const auto m = mean_se(c.mse);
    r.mean_mse = m.mean;
    r.se_mse = m.se;
    std::vector<double> reg(c.mse.size());
    for (std::size_t i = 0; i < reg.size(); ++i)
        reg[i] = c.mse[i] - c.oracle_mse;
    const auto g = mean_se(reg);
    r.mean_regret = g.mean;
    r.se_regret = g.se;
    r.gap_pct = (m.mean - c.oracle_mse) / c.oracle_mse * 100.0;
    return r;
}

// Rows in cell order, each (budget, sweep value) block led by the
// continuous oracle bound.
[[nodiscard]] inline std::vector<SummaryRow> summary_rows(const ExperimentResult& res)
{
    std::vector<SummaryRow> rows;
    std::optional<std::pair<double, std::optional<double>>> last;
    for (const auto& c : res.cells) {
        const auto key = std::make_pair(c.budget, c.sweep_value);
        if (!last || *last != key) {
            SummaryRow b;
            b.policy = "oracle_bound";
            b.budget = c.budget;
            b.sweep_value = c.sweep_value;
            b.mean_mse = b.oracle_mse = c.oracle_mse;
            rows.push_back(b);
            last = key;
        }
        rows.push_back(summarize(c));
    }
    return rows;
}

[[nodiscard]] inline std::vector<TrajectoryRow> trajectory_rows(const ExperimentResult& res)
{
    std::vector<TrajectoryRow> rows;
    for (const auto& c : res.cells) {
        if (c.trajectory.empty() || c.trajectory.front().empty())
            continue;
        for (std::size_t k = 0; k < res.checkpoints.size(); ++k) {
            std::vector<double> v(c.trajectory.size());
            for (std::size_t r = 0; r < v.size(); ++r)
                v[r] = c.trajectory[r][k];
            const auto m = mean_se(v);
            rows.push_back({c.policy, res.checkpoints[k], m.mean, m.se});
        }
    }
    return rows;
}

// ----------------------------------------------------------------- running

// numbers in every output use six significant digits
[[nodiscard]] inline std::string fmt6(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}


template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& f)
{
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n)
                        return;
                    try {
                        f(i);
                    } catch (...) {
                        std::lock_guard lk(mu);
                        if (!err)
                            err = std::current_exception();
                        next.store(n);
                    }
                }
            });
    }
    if (err)
        std::rethrow_exception(err);
}

[[nodiscard]] inline std::vector<double> even_checkpoints(double lo, double hi, std::size_t count)
{
    std::vector<double> cp;
    if (count == 0)
        return cp;
    if (count == 1)
        return {hi};
    for (std::size_t i = 0; i < count; ++i)
        cp.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return cp;
}

namespace detail {

// Runs every (policy, budget, replication) for one environment instance.
template <class Env>
void run_block(const ExperimentConfig& cfg, const Env& env, const std::vector<QuestionSpec>& qs,
               std::optional<double> sweep_value, bool with_trajectory, ExperimentResult& out)
{
    std::vector<double> w, c;
    for (const auto& q : qs) {
        w.push_back(q.weight);
        c.push_back(q.cost);
    }
    const double bmax = *std::max_element(cfg.budgets.begin(), cfg.budgets.end());
    std::vector<double> checkpoints;
    if (with_trajectory) {
        double init = 0.0;
        for (double x : c)
            init += x * static_cast<double>(cfg.policy.K);
        checkpoints = cfg.checkpoints.empty()
                          ? even_checkpoints(init, bmax, cfg.checkpoint_count)
                          : cfg.checkpoints;
        out.checkpoints = checkpoints;
    }

    const std::size_t first = out.cells.size();
    for (double B : cfg.budgets)
        for (auto k : cfg.policies) {
            CellResult cell;
            cell.policy = std::string(policy_name(k));
            cell.budget = B;
            cell.sweep_value = sweep_value;
            cell.oracle_mse = oracle_mse(env.difficulty(), w, c, B);
            cell.mse.resize(cfg.replications);
            cell.n.resize(cfg.replications);
            if (with_trajectory && B == bmax)
                cell.trajectory.resize(cfg.replications);
            out.cells.push_back(std::move(cell));
        }

    const std::size_t P = cfg.policies.size();
    const std::size_t R = cfg.replications;
    const std::size_t total = cfg.budgets.size() * P * R;
    parallel_for(total, cfg.threads, [&](std::size_t i) {
        const std::size_t r = i % R;
        const std::size_t p = (i / R) % P;
        const std::size_t b = i / (R * P);
        auto& cell = out.cells[first + b * P + p];
        PolicyConfig pc = cfg.policy_for(cfg.policies[p]);
        if (cfg.sweep == SweepAxis::alpha_etc && sweep_value)
            pc.alpha = *sweep_value;
        const std::uint64_t seed =
            derive_seed(cfg.seed, cfg.common_random_numbers ? 0 : p + 1, b, r);
        const bool traj = !cell.trajectory.empty();
        const std::string at = "[policy " + cell.policy + ", budget " + fmt6(cell.budget) +
                               ", replication " + std::to_string(r) + "] ";
        EpisodeResult res;
        try {
            res = run_episode(pc, env, cell.budget, qs, seed,
                              traj ? checkpoints : std::vector<double>{});
        } catch (const config_error& e) {
            throw config_error(at + e.what());
        } catch (const data_error& e) {
            throw data_error(at + e.what());
        } catch (const std::exception& e) {
            throw std::runtime_error(at + e.what());
        }
        cell.mse[r] = res.mse;
        cell.n[r] = std::move(res.n);
        if (traj)
            cell.trajectory[r] = std::move(res.trajectory);
    });
}

inline std::vector<QuestionSpec> dispersed_questions(const ExperimentConfig& cfg, std::size_t Q,
                                                     std::optional<double> sweep_value)
{
    auto qs = unit_questions(Q);
    if (cfg.sweep != SweepAxis::a_weights && cfg.sweep != SweepAxis::a_costs)
        return qs;
    Rng rng(cfg.dispersion_seed);
    const auto z = dispersion_draw(Q, rng);
    const auto v = floor_positive(disperse(z, *sweep_value));
    for (std::size_t q = 0; q < Q; ++q) {
        if (cfg.sweep == SweepAxis::a_weights)
            qs[q].weight = v[q];
        else
            qs[q].cost = v[q];
    }
    return qs;
}

} // namespace detail

[[nodiscard]] inline ReplayDataset load_replay(const ExperimentConfig& cfg)
{
    if (cfg.data_path.empty())
        return surrogate_dataset(cfg.surrogate);
    return replay_ingest(cfg.data_path);
}

[[nodiscard]] inline std::map<std::string, std::string> load_modules(const ExperimentConfig& cfg)
{
    if (!cfg.modules_path.empty())
        return read_module_map(cfg.modules_path);
    if (!cfg.data_path.empty())
        throw config_error("modules environment with a dataset needs a module map");
    const auto qs = generate_surrogate(cfg.surrogate);
    const auto pairs = surrogate_modules(qs, cfg.surrogate);
    return {pairs.begin(), pairs.end()};
}

[[nodiscard]] inline ExperimentResult run_experiment(const ExperimentConfig& cfg)
{
    cfg.validate();
    ExperimentResult out;
    out.sweep = cfg.sweep;
    out.config_echo = cfg.echo;

    std::vector<std::optional<double>> values;
    if (cfg.sweep == SweepAxis::none)
        values.push_back(std::nullopt);
    else
        for (double v : cfg.sweep_values)
            values.push_back(v);

    std::optional<ReplayDataset> data;
    if (cfg.environment == EnvKind::replay || cfg.environment == EnvKind::modules) {
        data = load_replay(cfg);
        for (const auto& q : data->questions)
            if (q.degenerate)
                out.warnings.push_back("question '" + q.id +
                                       "' has zero rectification difficulty and is excluded");
    }

    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto sv = values[i];
        const bool traj = i == 0;
        switch (cfg.environment) {
        case EnvKind::synthetic: {
            SyntheticSpec spec = cfg.synthetic;
            if (cfg.sweep == SweepAxis::rho)
                spec.rho = *sv;
            else if (cfg.sweep == SweepAxis::h)
                spec.h = *sv;
            const SyntheticEnv env(spec);
            detail::run_block(cfg, env, detail::dispersed_questions(cfg, env.size(), sv), sv, traj,
                              out);
            break;
        }
        case EnvKind::mnl: {
            MnlSpec spec = cfg.mnl;
            if (cfg.sweep == SweepAxis::rho)
                spec.rho = *sv;
            else if (cfg.sweep == SweepAxis::h)
                spec.h = *sv;
            const MnlEnv env(spec);
            detail::run_block(cfg, env, detail::dispersed_questions(cfg, env.size(), sv), sv, traj,
                              out);
            break;
        }
        case EnvKind::replay: {
            if (cfg.sweep == SweepAxis::rho)
                throw config_error("rho sweep is not defined for replay data");
            std::vector<double> scale;
            if (cfg.sweep == SweepAxis::h) {
                const ReplayEnv base(*data);
                const auto target = rescale_heterogeneity(base.difficulty(), *sv);
                for (std::size_t q = 0; q < target.size(); ++q)
                    scale.push_back(std::sqrt(target[q] / base.difficulty()[q]));
            }
            const ReplayEnv env(*data, scale);
            detail::run_block(cfg, env, detail::dispersed_questions(cfg, env.size(), sv), sv, traj,
                              out);
            break;
        }
        case EnvKind::modules: {
            if (cfg.sweep == SweepAxis::rho || cfg.sweep == SweepAxis::h)
                throw config_error("rho and h sweeps are not defined for module runs");
            const ModuleEnv env(*data, load_modules(cfg));
            detail::run_block(cfg, env, detail::dispersed_questions(cfg, env.size(), sv), sv, traj,
                              out);
            break;
        }
        }
    }
    return out;
}

// OLS slope of log regret on log budget; nonpositive points are skipped.
struct SlopeFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    std::size_t used = 0;
    std::size_t skipped = 0;
};

[[nodiscard]] inline SlopeFit regret_slope(const std::vector<double>& budgets,
                                           const std::vector<double>& regrets)
{
    if (budgets.size() != regrets.size())
        throw domain_error("regret_slope: size mismatch");
    std::vector<double> x, y;
    SlopeFit f;
    for (std::size_t i = 0; i < budgets.size(); ++i) {
        if (regrets[i] > 0.0 && budgets[i] > 0.0) {
            x.push_back(std::log(budgets[i]));
            y.push_back(std::log(regrets[i]));
        } else {
            ++f.skipped;
        }
    }
    f.used = x.size();
    if (x.size() < 3)
        throw domain_error("regret_slope: need at least 3 points with positive regret");
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    f.slope = sxy / sxx;
    return f;
}

// ----------------------------------------------------------------- output

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows)
{
    os << "policy,budget,sweep_value,mean_mse,se_mse,gap_pct,mean_regret,se_regret\n";
    for (const auto& r : rows)
        os << r.policy << ',' << fmt6(r.budget) << ','
           << (r.sweep_value ? fmt6(*r.sweep_value) : std::string()) << ',' << fmt6(r.mean_mse)
           << ',' << fmt6(r.se_mse) << ',' << fmt6(r.gap_pct) << ',' << fmt6(r.mean_regret) << ','
           << fmt6(r.se_regret) << '\n';
}

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows)
{
    os << "policy,budget_spent,mean_mse,se_mse\n";
    for (const auto& r : rows)
        os << r.policy << ',' << fmt6(r.budget_spent) << ',' << fmt6(r.mean_mse) << ','
           << fmt6(r.se_mse) << '\n';
}

[[nodiscard]] inline nlohmann::json summary_json(const ExperimentResult& res)
{
    auto num = [](double v) { return nlohmann::json(std::stod(fmt6(v))); };
    nlohmann::json j;
    j["version"] = PPIALLOC_VERSION;
    j["config"] = res.config_echo;
    j["sweep_axis"] = std::string(axis_name(res.sweep));
    j["warnings"] = res.warnings;
    j["results"] = nlohmann::json::array();
    for (const auto& r : summary_rows(res)) {
        nlohmann::json o;
        o["policy"] = r.policy;
        o["budget"] = num(r.budget);
        o["sweep_value"] = r.sweep_value ? num(*r.sweep_value) : nlohmann::json(nullptr);
        o["mean_mse"] = num(r.mean_mse);
        o["se_mse"] = num(r.se_mse);
        o["gap_pct"] = num(r.gap_pct);
        o["mean_regret"] = num(r.mean_regret);
        o["se_regret"] = num(r.se_regret);
        j["results"].push_back(o);
    }
    j["trajectory"] = nlohmann::json::array();
    for (const auto& r : trajectory_rows(res))
        j["trajectory"].push_back({{"policy", r.policy},
                                   {"budget_spent", num(r.budget_spent)},
                                   {"mean_mse", num(r.mean_mse)},
                                   {"se_mse", num(r.se_mse)}});
    return j;
}

// Writes <prefix>.csv, <prefix>_trajectory.csv and <prefix>.json.
inline void emit_results(const ExperimentResult& res, const std::string& prefix)
{
    auto open = [](const std::string& p) {
        std::ofstream f(p);
        if (!f)
            throw std::runtime_error("cannot write '" + p + "'");
        return f;
    };
    {
        auto f = open(prefix + ".csv");
        write_summary_csv(f, summary_rows(res));
    }
    {
        auto f = open(prefix + "_trajectory.csv");
        write_trajectory_csv(f, trajectory_rows(res));
    }
    {
        auto f = open(prefix + ".json");
        f << summary_json(res).dump(2) << '\n';
    }
}

} // namespace ppialloc
