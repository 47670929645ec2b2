#include <ppialloc/experiment.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

namespace {

using ppialloc::config_error;
using ppialloc::data_error;

enum Exit { ok = 0, bad_config = 2, bad_data = 3, failure = 4 };

nlohmann::json read_json(const std::string& path)
{
    if (path.empty())
        return nlohmann::json::object();
    std::ifstream in(path);
    if (!in)
        throw config_error("cannot open config '" + path + "'");
    try {
        nlohmann::json j;
        in >> j;
        if (!j.is_object())
            throw config_error(path + ": top level must be a JSON object");
        return j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error(path + ": " + e.what());
    }
}

// The subcommand fixes the environment; a config that names another one is
// a mistake rather than something to silently override.
void set_environment(nlohmann::json& j, const std::string& env)
{
    if (j.contains("environment") && j["environment"] != env)
        throw config_error("config environment '" + j["environment"].dump() +
                           "' conflicts with this subcommand ('" + env + "')");
    j["environment"] = env;
}

std::vector<double> default_grid(const std::string& axis)
{
    if (axis == "rho")
        return {0.0, 0.3, 0.5, 0.7, 0.9};
    if (axis == "h")
        return {0.5, 1.0, 1.5, 2.0};
    if (axis == "alpha_etc")
        return {0.1, 0.2, 0.3, 0.4, 0.5};
    return {0.0, 0.25, 0.5, 0.75, 1.0};
}

void print_table(const ppialloc::ExperimentResult& res)
{
    std::printf("%-16s %8s %8s %12s %10s %8s\n", "policy", "budget", "sweep", "mean_mse", "se",
                "gap%");
    for (const auto& r : ppialloc::summary_rows(res))
        std::printf("%-16s %8s %8s %12s %10s %8.2f\n", r.policy.c_str(),
                    ppialloc::fmt6(r.budget).c_str(),
                    r.sweep_value ? ppialloc::fmt6(*r.sweep_value).c_str() : "-",
                    ppialloc::fmt6(r.mean_mse).c_str(), ppialloc::fmt6(r.se_mse).c_str(),
                    r.gap_pct);
}

int run(nlohmann::json j, const std::string& out, std::size_t threads, bool quiet)
{
    if (threads)
        j["threads"] = threads;
    ppialloc::ExperimentConfig cfg;
    try {
        cfg = ppialloc::parse_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw config_error(e.what());
    }
    const auto res = ppialloc::run_experiment(cfg);
    for (const auto& w : res.warnings)
        std::cerr << "warning: " << w << '\n';
    ppialloc::emit_results(res, out);
    if (!quiet)
        print_table(res);
    std::cerr << "wrote " << out << ".csv, " << out << "_trajectory.csv, " << out << ".json\n";
    return ok;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Adaptive human-label allocation under prediction-powered inference"};
    app.set_version_flag("--version", PPIALLOC_VERSION);
    app.require_subcommand(1);

    std::string config, out = "results", data, modules, axis, surrogate_out, modules_out;
    std::size_t threads = 0;
    bool quiet = false;
    ppialloc::SurrogateOptions sopt;

    auto common = [&](CLI::App* sub, bool config_required) {
        auto* o = sub->add_option("--config", config, "JSON experiment config");
        if (config_required)
            o->required();
        o->check(CLI::ExistingFile);
        sub->add_option("--out", out, "output prefix for <prefix>.csv, _trajectory.csv, .json")
            ->capture_default_str();
        sub->add_option("--threads", threads, "worker threads (0 = all cores)");
        sub->add_flag("--quiet", quiet, "do not print the summary table");
    };

    auto* simulate = app.add_subcommand("simulate", "synthetic Gaussian experiments");
    common(simulate, false);

    auto* replay = app.add_subcommand("replay", "bootstrap replay of a paired dataset");
    common(replay, false);
    replay->add_option("--data", data, "CSV question_id,respondent_id,human,llm (default: surrogate)")
        ->check(CLI::ExistingFile);
    replay->add_option("--modules", modules, "CSV question_id,module_id; allocate by module")
        ->check(CLI::ExistingFile);

    auto* mnl = app.add_subcommand("mnl", "multinomial logit partworth experiment");
    common(mnl, false);

    auto* sweep = app.add_subcommand("sweep", "one-axis parameter sweep");
    common(sweep, true);
    sweep->add_option("--axis", axis, "sweep axis")
        ->required()
        ->check(CLI::IsMember({"rho", "h", "a_weights", "a_costs", "alpha_etc"}));

    auto* gen = app.add_subcommand("gen-surrogate", "write the 68-question surrogate dataset");
    gen->add_option("--out", surrogate_out, "dataset CSV path")->required();
    gen->add_option("--modules-out", modules_out, "also write the 14-module map");
    gen->add_option("--seed", sopt.seed, "generator seed")->capture_default_str();
    gen->add_option("--respondents", sopt.respondents, "respondents per question")
        ->capture_default_str();
    gen->add_option("--binary-fraction", sopt.binary_fraction, "share of yes/no items")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    gen->add_option("--module-seed", sopt.module_seed, "module assignment seed")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_config;
    }

    try {
        if (*gen) {
            const auto qs = ppialloc::generate_surrogate(sopt);
            std::ofstream f(surrogate_out);
            if (!f)
                throw std::runtime_error("cannot write '" + surrogate_out + "'");
            ppialloc::write_surrogate_csv(f, qs);
            if (!modules_out.empty()) {
                std::ofstream m(modules_out);
                if (!m)
                    throw std::runtime_error("cannot write '" + modules_out + "'");
                ppialloc::write_module_csv(m, ppialloc::surrogate_modules(qs, sopt));
            }
            return ok;
        }

        auto j = read_json(config);
        if (*simulate) {
            set_environment(j, "synthetic");
        } else if (*replay) {
            const bool by_module = !modules.empty() || j.value("environment", "") == "modules";
            set_environment(j, by_module ? "modules" : "replay");
            if (!data.empty())
                j["replay"]["data"] = data;
            if (!modules.empty())
                j["replay"]["modules"] = modules;
        } else if (*mnl) {
            set_environment(j, "mnl");
        } else if (*sweep) {
            if (j.contains("sweep") && j["sweep"].contains("axis") && j["sweep"]["axis"] != axis)
                throw config_error("config sweep axis conflicts with --axis " + axis);
            j["sweep"]["axis"] = axis;
            if (!j["sweep"].contains("values"))
                j["sweep"]["values"] = default_grid(axis);
        }
        return run(std::move(j), out, threads, quiet);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return bad_config;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return bad_data;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return failure;
    }
}
