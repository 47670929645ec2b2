#include <ppialloc/experiment.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

using namespace ppialloc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config()
{
    nlohmann::json j = {{"environment", "synthetic"},
                        {"synthetic", {{"Q", 10}}},
                        {"policies", {"oracle", "ucb_ppipp", "uniform"}},
                        {"budgets", {100, 200}},
                        {"replications", 20},
                        {"checkpoints", 5},
                        {"seed", 3}};
    return parse_config(j);
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ','))
            f.push_back(cell);
        if (!line.empty() && line.back() == ',')
            f.emplace_back();
        rows.push_back(f);
    }
    return rows;
}

fs::path scratch(const std::string& name)
{
    auto d = fs::temp_directory_path() / ("ppialloc_test_" + name);
    fs::create_directories(d);
    return d;
}

} // namespace

TEST(RegretSlope, PlantedInverseSquare)
{
    std::vector<double> B{500, 1000, 2000, 5000, 10000}, r;
    for (double b : B)
        r.push_back(7.0 / (b * b));
    const auto f = regret_slope(B, r);
    EXPECT_NEAR(f.slope, -2.0, 1e-9);
    EXPECT_EQ(f.used, 5u);
    EXPECT_EQ(f.skipped, 0u);
}

TEST(RegretSlope, PlantedLogLaw)
{
    std::vector<double> B, r;
    for (double b = 500; b <= 10000; b *= 1.5) {
        B.push_back(b);
        r.push_back(3.0 * std::log(b) / (b * b));
    }
    const double s = regret_slope(B, r).slope;
    EXPECT_GT(s, -2.0);
    EXPECT_LT(s, -1.6);
}

TEST(RegretSlope, NonpositivePointsAreSkipped)
{
    const auto f = regret_slope({100, 200, 400, 800}, {1e-2, -1e-3, 1e-2 / 16, 1e-2 / 64});
    EXPECT_EQ(f.skipped, 1u);
    EXPECT_NEAR(f.slope, -2.0, 1e-9);
    EXPECT_THROW((void)regret_slope({100, 200, 400}, {1, 0, 1}), domain_error);
}

TEST(MeanSe, SampleSdOverRootN)
{
    const auto m = mean_se({1, 2, 3, 4});
    EXPECT_DOUBLE_EQ(m.mean, 2.5);
    EXPECT_NEAR(m.se, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
    EXPECT_EQ(mean_se({5}).se, 0.0);
}

TEST(Config, RejectsUnknownKeys)
{
    EXPECT_THROW((void)parse_config({{"budget", 100}}), config_error);
    EXPECT_THROW((void)parse_config({{"synthetic", {{"q", 5}}}}), config_error);
    EXPECT_THROW((void)parse_config({{"policy", {{"beta", 1}}}}), config_error);
    EXPECT_THROW((void)parse_config({{"sweep", {{"axis", "rho"}, {"grid", {1}}}}}), config_error);
}

TEST(Config, RejectsBadValues)
{
    EXPECT_THROW((void)parse_config({{"environment", "lab"}}), config_error);
    EXPECT_THROW((void)parse_config({{"policies", {"greedy"}}}), config_error);
    EXPECT_THROW((void)parse_config({{"replications", 0}}), config_error);
    EXPECT_THROW((void)parse_config({{"checkpoints", {10, 5}}}), config_error);
    EXPECT_THROW((void)parse_config({{"sweep", {{"axis", "gamma"}}}}), config_error);
    EXPECT_THROW((void)parse_config({{"sweep", {{"axis", "rho"}}}}), config_error);
    EXPECT_THROW((void)parse_config({{"budgets", "many"}}), config_error);
    EXPECT_THROW((void)parse_config({{"policy", {{"K", 1}}}}), config_error);
}

TEST(Config, DefaultsAndOverrides)
{
    const auto c = parse_config({{"environment", "replay"}, {"policy", {{"alpha", 0.4}}}});
    EXPECT_EQ(c.environment, EnvKind::replay);
    EXPECT_EQ(c.policy.alpha, 0.4);
    EXPECT_EQ(c.policy_for(PolicyKind::ucb_ppipp).confidence.R, default_R(EnvKind::replay));
    const auto d = parse_config({{"policy", {{"R", 3.0}}}});
    EXPECT_EQ(d.policy_for(PolicyKind::ucb_ppi).confidence.R, 3.0);
}

TEST(Experiment, DeterministicAndThreadIndependent)
{
    auto c = small_config();
    c.threads = 1;
    const auto a = run_experiment(c);
    c.threads = 4;
    const auto b = run_experiment(c);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        EXPECT_EQ(a.cells[i].mse, b.cells[i].mse);
        EXPECT_EQ(a.cells[i].n, b.cells[i].n);
        EXPECT_EQ(a.cells[i].trajectory, b.cells[i].trajectory);
    }
}

TEST(Experiment, SingleReplicationSameSeed)
{
    auto c = small_config();
    c.replications = 1;
    std::ostringstream x, y;
    write_summary_csv(x, summary_rows(run_experiment(c)));
    write_summary_csv(y, summary_rows(run_experiment(c)));
    EXPECT_EQ(x.str(), y.str());
}

TEST(Experiment, RegretAgainstTheContinuousBound)
{
    const auto res = run_experiment(small_config());
    for (const auto& cell : res.cells) {
        for (double m : cell.mse)
            EXPECT_GT(m, 0.0);
        const auto row = summarize(cell);
        EXPECT_NEAR(row.mean_regret, row.mean_mse - row.oracle_mse, 1e-12);
        EXPECT_NEAR(row.gap_pct, (row.mean_mse - row.oracle_mse) / row.oracle_mse * 100.0, 1e-9);
        if (cell.policy == "oracle") {
            // one label of discreteness per question at most
            EXPECT_GE(row.mean_regret, -0.01 * row.oracle_mse);
        }
    }
}

TEST(Experiment, BudgetMonotone)
{
    nlohmann::json j = {{"synthetic", {{"Q", 20}}},
                        {"budgets", {100, 200, 400, 800}},
                        {"replications", 30},
                        {"checkpoints", 0}};
    const auto res = run_experiment(parse_config(j));
    for (const char* p : {"oracle", "ucb_ppipp", "epsilon_greedy", "uniform"})
        for (double b : {100.0, 200.0, 400.0})
            EXPECT_GT(summarize(res.cell(p, b)).mean_mse, summarize(res.cell(p, 2 * b)).mean_mse)
                << p << " " << b;
}

TEST(Experiment, ErrorsCarryCoordinates)
{
    nlohmann::json j = {
        {"synthetic", {{"Q", 10}}}, {"budgets", {20}}, {"replications", 2}, {"threads", 1}};
    try {
        (void)run_experiment(parse_config(j));
        FAIL() << "budget below initialization accepted";
    } catch (const config_error& e) {
        EXPECT_NE(std::string(e.what()).find("[policy oracle, budget 20, replication"),
                  std::string::npos)
            << e.what();
    }
}

TEST(Experiment, DegenerateReplayQuestionsWarn)
{
    const auto dir = scratch("degenerate");
    const auto path = dir / "data.csv";
    {
        std::ofstream f(path);
        f << "question_id,respondent_id,human,llm\n";
        for (int i = 0; i < 40; ++i) {
            f << "easy," << i << ',' << i % 5 << ',' << i % 5 << '\n';
            f << "hard," << i << ',' << i % 3 << ',' << (i * 7) % 4 << '\n';
            f << "mid," << i << ',' << i % 4 << ',' << (i % 4 + i % 2) << '\n';
        }
    }
    nlohmann::json j = {{"environment", "replay"},
                        {"replay", {{"data", path.string()}}},
                        {"budgets", {60}},
                        {"replications", 3}};
    const auto res = run_experiment(parse_config(j));
    ASSERT_EQ(res.warnings.size(), 1u);
    EXPECT_NE(res.warnings[0].find("'easy'"), std::string::npos);
    for (const auto& c : res.cells)
        for (const auto& n : c.n)
            EXPECT_EQ(n.size(), 2u);
}

TEST(Output, CsvSchemaAndGapRoundTrip)
{
    const auto res = run_experiment(small_config());
    const auto rows = summary_rows(res);
    std::ostringstream os;
    write_summary_csv(os, rows);
    const auto csv = read_csv(os.str());
    ASSERT_EQ(csv.size(), rows.size() + 1);
    EXPECT_EQ(csv[0], (std::vector<std::string>{"policy", "budget", "sweep_value", "mean_mse",
                                                "se_mse", "gap_pct", "mean_regret", "se_regret"}));
    // one bound row plus one row per policy for each budget
    EXPECT_EQ(rows.size(), 2u * (1 + 3));
    double oracle = 0;
    for (std::size_t i = 1; i < csv.size(); ++i) {
        ASSERT_EQ(csv[i].size(), 8u);
        const auto& r = rows[i - 1];
        EXPECT_EQ(csv[i][0], r.policy);
        EXPECT_EQ(std::stod(csv[i][1]), std::stod(fmt6(r.budget)));
        EXPECT_TRUE(csv[i][2].empty());
        if (r.policy == "oracle_bound") {
            oracle = r.mean_mse;
            EXPECT_EQ(std::stod(csv[i][5]), 0.0);
            continue;
        }
        // gap from the unrounded numbers, then through the six-digit rendering
        const double gap = (r.mean_mse - oracle) / oracle * 100.0;
        EXPECT_NEAR(r.gap_pct, gap, 1e-9);
        EXPECT_EQ(csv[i][5], fmt6(gap));
        const double parsed = (std::stod(csv[i][3]) - std::stod(fmt6(oracle))) / std::stod(fmt6(oracle)) * 100.0;
        EXPECT_NEAR(std::stod(csv[i][5]), parsed, 1e-3 * std::max(1.0, std::abs(gap)));
    }
}

TEST(Output, EmptyResultIsHeaderOnly)
{
    const ExperimentResult empty;
    std::ostringstream a, b;
    write_summary_csv(a, summary_rows(empty));
    write_trajectory_csv(b, trajectory_rows(empty));
    EXPECT_EQ(a.str(), "policy,budget,sweep_value,mean_mse,se_mse,gap_pct,mean_regret,se_regret\n");
    EXPECT_EQ(b.str(), "policy,budget_spent,mean_mse,se_mse\n");
}

TEST(Output, ReemissionIsByteIdentical)
{
    const auto res = run_experiment(small_config());
    const auto dir = scratch("emit");
    emit_results(res, (dir / "a").string());
    emit_results(res, (dir / "b").string());
    for (const char* ext : {".csv", "_trajectory.csv", ".json"}) {
        const auto x = slurp(dir / (std::string("a") + ext));
        EXPECT_FALSE(x.empty());
        EXPECT_EQ(x, slurp(dir / (std::string("b") + ext))) << ext;
    }
}

TEST(Output, TrajectoryAndJson)
{
    const auto res = run_experiment(small_config());
    const auto traj = trajectory_rows(res);
    // five checkpoints for each policy at the largest budget
    EXPECT_EQ(traj.size(), 3u * 5u);
    const auto j = summary_json(res);
    EXPECT_EQ(j["version"], PPIALLOC_VERSION);
    EXPECT_EQ(j["results"].size(), summary_rows(res).size());
    EXPECT_EQ(j["trajectory"].size(), traj.size());
    EXPECT_EQ(j["config"]["seed"], 3);
    EXPECT_TRUE(j["warnings"].is_array());
}

TEST(Output, SweepValuesAppear)
{
    nlohmann::json j = {{"synthetic", {{"Q", 10}}},
                        {"policies", {"uniform"}},
                        {"budgets", {100}},
                        {"replications", 2},
                        {"sweep", {{"axis", "rho"}, {"values", {0.0, 0.5}}}}};
    const auto res = run_experiment(parse_config(j));
    std::ostringstream os;
    write_summary_csv(os, summary_rows(res));
    const auto csv = read_csv(os.str());
    ASSERT_EQ(csv.size(), 5u);
    EXPECT_EQ(csv[1][2], "0");
    EXPECT_EQ(csv[3][2], "0.5");
}

TEST(Sweeps, DispersionAppliesToWeightsOrCosts)
{
    auto c = parse_config({{"sweep", {{"axis", "a_costs"}, {"values", {1.0}}}}, {"synthetic", {{"Q", 30}}}});
    const auto qs = detail::dispersed_questions(c, 30, 1.0);
    bool varied = false;
    for (const auto& q : qs) {
        EXPECT_EQ(q.weight, 1.0);
        EXPECT_GE(q.cost, 0.05);
        EXPECT_LE(q.cost, 2.0);
        varied |= q.cost != 1.0;
    }
    EXPECT_TRUE(varied);
    c.sweep = SweepAxis::a_weights;
    const auto w = detail::dispersed_questions(c, 30, 1.0);
    for (std::size_t q = 0; q < 30; ++q)
        EXPECT_EQ(w[q].weight, qs[q].cost); // same z draw for both axes
}
