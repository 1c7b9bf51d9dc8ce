#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adecot/harness.hpp"

using namespace adecot;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("adecot_harness_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentConfig tiny(Strategy strategy, int n, int count) {
    ExperimentConfig cfg;
    cfg.strategy = strategy;
    cfg.search.n = n;
    cfg.generator.count = count;
    return cfg;
}

}  // namespace

TEST(ConfigParse, SectionsAndDefaults) {
    auto cfg = parse_config(R"(
# comment
[experiment]
strategy = bon
seeds = 1, 2,3
workers = 2

[search]
n = 16        ; inline comment
gamma = 0.3
n_high = unbounded
s_reject = -inf

[instances]
count = 10
bands = 0.5:8, 0.5:4

[simulator]
gen_noise = 6.5
)");
    EXPECT_EQ(cfg.strategy, Strategy::bon);
    EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_EQ(cfg.workers, 2);
    EXPECT_EQ(cfg.search.n, 16);
    EXPECT_DOUBLE_EQ(cfg.search.gamma, 0.3);
    EXPECT_EQ(cfg.search.n_high, kUnbounded);
    EXPECT_EQ(cfg.search.s_reject, -std::numeric_limits<double>::infinity());
    EXPECT_EQ(cfg.search.t_early, 8);
    EXPECT_EQ(cfg.generator.count, 10);
    ASSERT_EQ(cfg.generator.bands.size(), 2u);
    EXPECT_DOUBLE_EQ(cfg.generator.bands[1].mean, 4.0);
    EXPECT_DOUBLE_EQ(cfg.sim.gen_noise, 6.5);
}

TEST(ConfigParse, ErrorsCarryLineNumbers) {
    auto expect_error = [](const std::string& text, const std::string& fragment) {
        try {
            parse_config(text, "x.ini");
            ADD_FAILURE() << "no error for: " << text;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    expect_error("[search]\nn = 4\nbogus = 1\n", "x.ini:3: unknown key 'search.bogus'");
    expect_error("n = 4\n", "x.ini:1: key 'n' outside any section");
    expect_error("[search]\n\nn = four\n", "x.ini:3: invalid value 'four'");
    expect_error("[search\n", "x.ini:1: unterminated section header");
    expect_error("[search]\nn\n", "x.ini:2: expected 'key = value'");
    expect_error("[experiment]\nstrategy = greedy\n", "x.ini:2: unknown strategy 'greedy'");
    expect_error("[search]\nt_early = 20\n", "x.ini: checkpoints must satisfy");
    expect_error("[backend]\nkind = cloud\n", "x.ini:2: backend.kind");
}

TEST(ConfigParse, MissingFileIsConfigError) {
    EXPECT_THROW(load_config("/nonexistent/adecot.ini"), ConfigError);
}

TEST(LoadInstances, ReadsJsonLinesAndReportsBadLines) {
    auto dir = scratch("instances");
    fs::create_directories(dir);
    Image img = render_source(1, 4, 4, 3);
    {
        std::ofstream out(dir / "ok.jsonl");
        out << nlohmann::json{{"id", "a"}, {"instruction", "add a hat"}, {"source_b64", image_to_b64(img)}}.dump()
            << "\n\n";
    }
    auto insts = load_instances((dir / "ok.jsonl").string());
    ASSERT_EQ(insts.size(), 1u);
    EXPECT_EQ(insts[0].source, img);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << nlohmann::json{{"id", "a"}, {"instruction", "x"}, {"source_b64", image_to_b64(img)}}.dump() << "\n";
        out << "{\"id\": \"b\"}\n";
    }
    try {
        load_instances((dir / "bad.jsonl").string());
        ADD_FAILURE();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.jsonl:2:"), std::string::npos) << e.what();
    }
}

TEST(RunExperiment, BestOfNTotalNfe) {
    auto cfg = tiny(Strategy::bon, 4, 10);
    auto r = execute(cfg);
    ASSERT_EQ(r.seeds.size(), 1u);
    EXPECT_EQ(r.seeds[0].report.total_nfe, 10 * 4 * 28);
    EXPECT_EQ(report_json(r)["per_seed"][0]["report"]["total_nfe"], 1120);
}

TEST(RunExperiment, RerunIsByteIdentical) {
    auto a = scratch("rerun_a"), b = scratch("rerun_b");
    auto cfg = tiny(Strategy::ade_cot, 8, 6);
    cfg.seeds = {1, 2};
    cfg.output_dir = a.string();
    run_experiment(cfg);
    cfg.output_dir = b.string();
    cfg.workers = 3;
    run_experiment(cfg);
    EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
    EXPECT_EQ(slurp(a / "trace.jsonl"), slurp(b / "trace.jsonl"));
    EXPECT_FALSE(slurp(a / "report.json").empty());
}

TEST(RunExperiment, TraceHasOneLinePerInstanceStrategyAndSeed) {
    auto dir = scratch("trace_lines");
    auto cfg = tiny(Strategy::ade_cot, 4, 5);
    cfg.seeds = {3, 4};
    cfg.output_dir = dir.string();
    run_experiment(cfg);
    std::ifstream in(dir / "trace.jsonl");
    std::map<std::string, int> seen;
    std::string line;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        ++seen[j["strategy"].get<std::string>() + "/" + std::to_string(j["run_seed"].get<std::uint64_t>()) + "/" +
               j["instance_id"].get<std::string>()];
    }
    EXPECT_EQ(seen.size(), 2u * 2u * 5u);
    for (const auto& [key, n] : seen) EXPECT_EQ(n, 1) << key;
}

TEST(RunExperiment, AverageIsMeanOfSeeds) {
    auto cfg = tiny(Strategy::ade_cot, 8, 6);
    cfg.seeds = {1, 2, 3};
    auto j = report_json(execute(cfg));
    for (const char* key : {"eta", "xi", "mean_final_score", "total_nfe", "speedup_vs_bon"}) {
        double sum = 0;
        for (const auto& s : j["per_seed"]) sum += s["report"][key].get<double>();
        EXPECT_NEAR(j["average"][key].get<double>(), sum / 3, 1e-8 * std::max(1.0, std::abs(sum))) << key;
    }
    double ratio = 0;
    for (const auto& s : j["per_seed"]) ratio += s["vs_bon"]["nfe_ratio"].get<double>();
    EXPECT_NEAR(j["average"]["vs_bon"]["nfe_ratio"].get<double>(), ratio / 3, 1e-8);
}

TEST(RunExperiment, BestOfNComparedWithItselfIsUnity) {
    auto j = report_json(execute(tiny(Strategy::bon, 2, 4)));
    EXPECT_EQ(j["average"]["vs_bon"]["nfe_ratio"].get<double>(), 1.0);
    EXPECT_EQ(j["average"]["vs_bon"]["eta_ratio"].get<double>(), 1.0);
}

TEST(SweepBudgets, SingleBudget) {
    auto cfg = tiny(Strategy::ade_cot, 32, 6);
    auto rows = sweep_budgets(cfg, {1});
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].strategy, "bon");
    EXPECT_EQ(rows[1].strategy, "ade-cot");
    EXPECT_EQ(rows[0].mean_nfe, 28.0);
    EXPECT_EQ(rows[1].mean_nfe, 28.0);
    EXPECT_DOUBLE_EQ(rows[0].mean_score, rows[1].mean_score);
}

TEST(SweepBudgets, RowsPerStrategyAndCsv) {
    auto dir = scratch("sweep");
    auto cfg = tiny(Strategy::ade_cot, 32, 4);
    auto rows = sweep_budgets(cfg, {1, 2, 4, 8, 16, 32});
    ASSERT_EQ(rows.size(), 12u);
    for (int i = 0; i < 6; ++i) {
        EXPECT_EQ(rows[i].strategy, "bon");
        EXPECT_EQ(rows[6 + i].strategy, "ade-cot");
        EXPECT_EQ(rows[i].mean_nfe, 28.0 * (1 << i));
        EXPECT_LE(rows[6 + i].mean_nfe, rows[i].mean_nfe);
        if (i > 0) EXPECT_GE(rows[i].mean_score, rows[i - 1].mean_score);
    }
    write_curves(rows, dir.string());
    auto csv = slurp(dir / "curves.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "strategy,N,mean_nfe,mean_score,eta,xi,stderr_score");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
    EXPECT_THROW(sweep_budgets(cfg, {}), ConfigError);
    EXPECT_THROW(sweep_budgets(cfg, {0}), ConfigError);
}

TEST(VerifyBackend, SimulatorPassesAllChecks) {
    auto cfg = tiny(Strategy::bon, 4, 2);
    auto checks = verify_backend(cfg);
    EXPECT_EQ(checks.size(), 11u);
    for (const auto& c : checks) EXPECT_TRUE(c.ok) << c.name << ": " << c.detail;
}

TEST(ParallelFor, RethrowsFirstFailureAfterAllWork) {
    std::vector<int> done(20, 0);
    EXPECT_THROW(parallel_for(20, 4,
                              [&](std::size_t i) {
                                  done[i] = 1;
                                  if (i == 7 || i == 13) throw InvalidArgument("fail " + std::to_string(i));
                              }),
                 InvalidArgument);
    EXPECT_EQ(std::count(done.begin(), done.end(), 1), 20);
}
