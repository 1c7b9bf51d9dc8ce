#pragma once

// Experiment runner: configuration, backends, seeded runs, reports,
// scaling curves and a live-backend invariant check.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "adecot/core.hpp"
#include "adecot/metrics.hpp"
#include "adecot/remote.hpp"
#include "adecot/sim.hpp"
#include "adecot/strategies.hpp"
#include "adecot/trace.hpp"
#include "adecot/verifiers.hpp"

namespace adecot {

enum class BackendKind { simulator, remote };

struct ExperimentConfig {
    Strategy strategy = Strategy::ade_cot;
    SearchConfig search;
    BackendKind backend = BackendKind::simulator;
    RemoteOptions remote;
    GeneratorSpec generator;
    std::string instances_path;  // JSONL; replaces the generator when set
    SimParams sim;
    std::vector<std::uint64_t> seeds = {1};
    std::string output_dir = "out";
    int workers = 1;

    void validate() const {
        search.validate();
        if (seeds.empty()) throw ConfigError("at least one seed is required");
        if (workers < 1) throw ConfigError("workers must be positive");
        if (backend == BackendKind::simulator && !instances_path.empty()) {
            throw ConfigError("the simulator backend needs a generator spec, not an instance file");
        }
        if (remote.timeout_ms < 1 || remote.retries < 0) throw ConfigError("invalid remote timeout/retry settings");
    }
};

// ---------------------------------------------------------------------------
// Config files: "[section]" headers, "key = value" lines, '#' or ';' comments.

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double parse_real(const std::string& v) {
    if (v == "inf" || v == "+inf") return std::numeric_limits<double>::infinity();
    if (v == "-inf") return -std::numeric_limits<double>::infinity();
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
}

inline long long parse_int(const std::string& v) {
    std::size_t used = 0;
    long long i = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return i;
}

inline std::uint64_t parse_u64(const std::string& v) {
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    std::size_t used = 0;
    auto u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
}

}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
    ExperimentConfig cfg;
    auto& s = cfg.search;
    auto& g = cfg.generator;
    auto& p = cfg.sim;
    using Setter = std::function<void(const std::string&)>;
    auto real = [](double& dst) -> Setter { return [&dst](const std::string& v) { dst = detail::parse_real(v); }; };
    auto integer = [](int& dst) -> Setter {
        return [&dst](const std::string& v) {
            if (v == "unbounded" || v == "inf") {
                dst = kUnbounded;
                return;
            }
            auto i = detail::parse_int(v);
            if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max()) throw std::out_of_range(v);
            dst = static_cast<int>(i);
        };
    };
    std::map<std::string, Setter> keys = {
        {"experiment.strategy", [&](const std::string& v) { cfg.strategy = parse_strategy(v); }},
        {"experiment.seeds",
         [&](const std::string& v) {
             cfg.seeds.clear();
             for (const auto& item : detail::split(v, ',')) cfg.seeds.push_back(detail::parse_u64(item));
         }},
        {"experiment.output_dir", [&](const std::string& v) { cfg.output_dir = v; }},
        {"experiment.workers", integer(cfg.workers)},
        {"search.n", integer(s.n)},
        {"search.n_min", integer(s.n_min)},
        {"search.gamma", real(s.gamma)},
        {"search.s_max", real(s.s_max)},
        {"search.total_steps", integer(s.total_steps)},
        {"search.t_early", integer(s.t_early)},
        {"search.t_late", integer(s.t_late)},
        {"search.s_reject", real(s.s_reject)},
        {"search.tau_sim", real(s.tau_sim)},
        {"search.delta", real(s.delta)},
        {"search.n_high", integer(s.n_high)},
        {"search.s_high", integer(s.s_high)},
        {"search.lambda_reg", real(s.lambda_reg)},
        {"search.lambda_cap", real(s.lambda_cap)},
        {"search.change_window", integer(s.change_window)},
        {"search.mask_pad", integer(s.mask_pad)},
        {"search.zero_signal_margin", real(s.zero_signal_margin)},
        {"backend.kind",
         [&](const std::string& v) {
             if (v == "simulator") cfg.backend = BackendKind::simulator;
             else if (v == "remote") cfg.backend = BackendKind::remote;
             else throw ConfigError("backend.kind must be 'simulator' or 'remote'");
         }},
        {"backend.endpoint", [&](const std::string& v) { cfg.remote.endpoint = v; }},
        {"backend.timeout_ms", integer(cfg.remote.timeout_ms)},
        {"backend.retries", integer(cfg.remote.retries)},
        {"instances.count", integer(g.count)},
        {"instances.seed", [&](const std::string& v) { g.seed = detail::parse_u64(v); }},
        {"instances.bands",
         [&](const std::string& v) {
             g.bands.clear();
             for (const auto& item : detail::split(v, ',')) {
                 auto parts = detail::split(item, ':');
                 if (parts.size() != 2) throw ConfigError("bands are written weight:mean");
                 g.bands.push_back({detail::parse_real(parts[0]), detail::parse_real(parts[1])});
             }
         }},
        {"instances.spread", real(g.spread)},
        {"instances.ceiling_offset", real(g.ceiling_offset)},
        {"instances.max_modes", integer(g.max_modes)},
        {"instances.path", [&](const std::string& v) { cfg.instances_path = v; }},
        {"simulator.height", integer(p.height)},
        {"simulator.width", integer(p.width)},
        {"simulator.channels", integer(p.channels)},
        {"simulator.gen_noise", real(p.gen_noise)},
        {"simulator.cap_noise", real(p.cap_noise)},
        {"simulator.pixel_noise", real(p.pixel_noise)},
        {"simulator.embed_noise", real(p.embed_noise)},
        {"simulator.noise_exponent", real(p.noise_exponent)},
        {"simulator.short_run_factor", real(p.short_run_factor)},
    };

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    auto fail = [&](const std::string& msg) { throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg); };
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = detail::trim(raw.substr(0, raw.find_first_of("#;")));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        std::string key = detail::trim(line.substr(0, eq));
        std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty()) fail("key '" + key + "' outside any section");
        auto it = keys.find(section + "." + key);
        if (it == keys.end()) fail("unknown key '" + section + "." + key + "'");
        try {
            it->second(value);
        } catch (const ConfigError& e) {
            fail(e.what());
        } catch (const std::exception&) {
            fail("invalid value '" + value + "' for '" + section + "." + key + "'");
        }
    }
    p.s_max = s.s_max;
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

/// One JSON object per line: {id, instruction, source_b64, rewritten_instructions?}.
inline std::vector<EditInstance> load_instances(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path + ": cannot open instance file");
    std::vector<EditInstance> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            EditInstance inst;
            inst.id = j.at("id").get<std::string>();
            inst.instruction = j.at("instruction").get<std::string>();
            inst.source = image_from_b64(j.at("source_b64").get<std::string>());
            if (j.contains("rewritten_instructions")) {
                inst.rewritten_instructions = j.at("rewritten_instructions").get<std::vector<std::string>>();
            }
            inst.validate();
            out.push_back(std::move(inst));
        } catch (const std::exception& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (out.empty()) throw ConfigError(path + ": no instances");
    return out;
}

inline std::vector<EditInstance> experiment_instances(const ExperimentConfig& cfg) {
    if (!cfg.instances_path.empty()) return load_instances(cfg.instances_path);
    return generate_instances(cfg.generator, cfg.sim);
}

// ---------------------------------------------------------------------------
// Backends

struct Backend {
    std::shared_ptr<Sampler> sampler;
    VerifierSuite suite;
    std::shared_ptr<SimBackend> sim;  // set for the simulator
};

inline Backend make_backend(const ExperimentConfig& cfg, const std::vector<EditInstance>& instances) {
    Backend b;
    if (cfg.backend == BackendKind::simulator) {
        b.sim = std::make_shared<SimBackend>(cfg.sim, cfg.search.total_steps);
        b.sim->register_instances(instances);
        b.sampler = b.sim->sampler;
        b.suite = b.sim->suite();
        return b;
    }
    auto client = std::make_shared<JsonClient>(cfg.remote);
    b.sampler = std::make_shared<RemoteSampler>(client, cfg.search.total_steps);
    b.suite = {std::make_shared<RemoteGeneralScorer>(client), std::make_shared<RemoteRegionProvider>(client),
               std::make_shared<RemoteGrounder>(client),      std::make_shared<RemoteCaptionProvider>(client),
               std::make_shared<RemoteEmbedder>(client),      std::make_shared<RemoteQuestionProvider>(client),
               std::make_shared<RemoteAnswerProvider>(client)};
    return b;
}

/// Runs `fn(i)` for i in [0, count) on `workers` threads. The first failure,
/// by index, is rethrown after all workers finish.
inline void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < std::min<int>(workers, static_cast<int>(count)); ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Runs

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<RunTrace> bon;
    std::vector<RunTrace> traces;  // the configured strategy; same as bon for Strategy::bon
    EfficiencyReport report;
    EfficiencyReport bon_report;
    BonComparison vs_bon;
};

struct ExperimentResult {
    Strategy strategy = Strategy::ade_cot;
    SearchConfig search;
    std::vector<SeedRun> seeds;
    int degenerate_runs = 0;
};

inline SeedRun run_seed(const ExperimentConfig& cfg, const std::vector<EditInstance>& instances, Backend& backend,
                        std::uint64_t seed) {
    SeedRun run;
    run.seed = seed;
    run.bon.resize(instances.size());
    const bool separate = cfg.strategy != Strategy::bon;
    if (separate) run.traces.resize(instances.size());
    parallel_for(instances.size(), cfg.workers, [&](std::size_t i) {
        SearchContext ctx{*backend.sampler, backend.suite, seed, {}};
        run.bon[i] = best_of_n(instances[i], cfg.search, ctx);
        if (separate) run.traces[i] = run_strategy(cfg.strategy, instances[i], cfg.search, ctx);
    });
    if (!separate) run.traces = run.bon;
    run.report = build_report(run.traces, run.bon, cfg.search);
    run.bon_report = separate ? build_report(run.bon, run.bon, cfg.search) : run.report;
    run.vs_bon = compare_to_bon(run.report, run.bon_report);
    return run;
}

inline ExperimentResult execute(const ExperimentConfig& cfg) {
    cfg.validate();
    auto instances = experiment_instances(cfg);
    ExperimentResult result;
    result.strategy = cfg.strategy;
    result.search = cfg.search;
    for (auto seed : cfg.seeds) {
        // a fresh backend per seed keeps each seed's run independent of the others
        Backend backend = make_backend(cfg, instances);
        result.seeds.push_back(run_seed(cfg, instances, backend, seed));
        result.degenerate_runs += result.seeds.back().report.degenerate_runs;
    }
    return result;
}

struct AverageBlock {
    double eta = 0, xi = 0, mean_final_score = 0, total_nfe = 0, speedup_vs_bon = 0, mean_judge_queries = 0;
    double eta_ratio = 0, xi_ratio = 0, nfe_ratio = 0, score_delta = 0;
};

inline AverageBlock average(const ExperimentResult& r) {
    AverageBlock a;
    for (const auto& s : r.seeds) {
        a.eta += s.report.eta;
        a.xi += s.report.xi;
        a.mean_final_score += s.report.mean_final_score;
        a.total_nfe += static_cast<double>(s.report.total_nfe);
        a.speedup_vs_bon += s.report.speedup_vs_bon;
        a.mean_judge_queries += s.report.mean_judge_queries;
        a.eta_ratio += s.vs_bon.eta_ratio;
        a.xi_ratio += s.vs_bon.xi_ratio;
        a.nfe_ratio += s.vs_bon.nfe_ratio;
        a.score_delta += s.vs_bon.score_delta;
    }
    const double n = static_cast<double>(r.seeds.size());
    for (double* v : {&a.eta, &a.xi, &a.mean_final_score, &a.total_nfe, &a.speedup_vs_bon, &a.mean_judge_queries,
                      &a.eta_ratio, &a.xi_ratio, &a.nfe_ratio, &a.score_delta})
        *v /= n;
    return a;
}

inline nlohmann::json report_json(const ExperimentResult& r) {
    nlohmann::json j;
    j["strategy"] = to_string(r.strategy);
    j["config"] = to_json(r.search);
    j["instance_count"] = r.seeds.empty() ? 0 : r.seeds.front().report.instance_count;
    nlohmann::json seeds = nlohmann::json::array();
    nlohmann::json per_seed = nlohmann::json::array();
    for (const auto& s : r.seeds) {
        seeds.push_back(s.seed);
        per_seed.push_back({{"seed", s.seed},
                            {"report", to_json(s.report)},
                            {"bon", to_json(s.bon_report, false)},
                            {"vs_bon", to_json(s.vs_bon)}});
    }
    j["seeds"] = seeds;
    j["per_seed"] = per_seed;
    auto a = average(r);
    j["average"] = {{"eta", round9(a.eta)},
                    {"xi", round9(a.xi)},
                    {"mean_final_score", round9(a.mean_final_score)},
                    {"total_nfe", round9(a.total_nfe)},
                    {"speedup_vs_bon", round9(a.speedup_vs_bon)},
                    {"mean_judge_queries", round9(a.mean_judge_queries)},
                    {"vs_bon",
                     {{"eta_ratio", round9(a.eta_ratio)},
                      {"xi_ratio", round9(a.xi_ratio)},
                      {"nfe_ratio", round9(a.nfe_ratio)},
                      {"score_delta", round9(a.score_delta)}}}};
    j["degenerate_runs"] = r.degenerate_runs;
    return j;
}

inline void write_outputs(const ExperimentResult& r, const std::string& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(std::filesystem::path(dir) / "report.json", std::ios::binary);
        out << report_json(r).dump(2) << "\n";
        if (!out) throw Error("cannot write report.json in " + dir);
    }
    std::ofstream out(std::filesystem::path(dir) / "trace.jsonl", std::ios::binary);
    for (const auto& s : r.seeds) {
        for (std::size_t i = 0; i < s.bon.size(); ++i) {
            out << to_json(s.bon[i], image_fingerprint(s.bon[i].final_image)).dump() << "\n";
            if (r.strategy != Strategy::bon) {
                out << to_json(s.traces[i], image_fingerprint(s.traces[i].final_image)).dump() << "\n";
            }
        }
    }
    if (!out) throw Error("cannot write trace.jsonl in " + dir);
}

/// Runs every seed and writes report.json and trace.jsonl under output_dir.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    auto result = execute(cfg);
    write_outputs(result, cfg.output_dir);
    return result;
}

// ---------------------------------------------------------------------------
// Scaling curves

struct CurveRow {
    std::string strategy;
    int n = 0;
    double mean_nfe = 0;
    double mean_score = 0;
    double eta = 0;
    double xi = 0;
    double stderr_score = 0;
};

inline CurveRow curve_row(const ExperimentResult& r, bool bon_side, int n) {
    CurveRow row;
    row.strategy = bon_side ? "bon" : to_string(r.strategy);
    row.n = n;
    std::vector<double> scores;
    double nfe = 0;
    for (const auto& s : r.seeds) {
        const auto& rep = bon_side ? s.bon_report : s.report;
        row.eta += rep.eta / static_cast<double>(r.seeds.size());
        row.xi += rep.xi / static_cast<double>(r.seeds.size());
        for (const auto& pi : rep.per_instance) {
            scores.push_back(pi.score);
            nfe += static_cast<double>(pi.nfe);
        }
    }
    const double m = static_cast<double>(scores.size());
    row.mean_nfe = nfe / m;
    for (double v : scores) row.mean_score += v / m;
    double var = 0;
    for (double v : scores) var += (v - row.mean_score) * (v - row.mean_score);
    row.stderr_score = scores.size() > 1 ? std::sqrt(var / (m - 1)) / std::sqrt(m) : 0.0;
    return row;
}

inline std::vector<CurveRow> sweep_budgets(const ExperimentConfig& base, const std::vector<int>& budgets) {
    if (budgets.empty()) throw ConfigError("sweep needs at least one budget");
    std::vector<CurveRow> bon_rows, rows;
    for (int n : budgets) {
        if (n < 1) throw ConfigError("budgets must be at least 1");
        ExperimentConfig cfg = base;
        cfg.search.n = n;
        cfg.search.n_min = std::min(cfg.search.n_min, n);
        auto r = execute(cfg);
        bon_rows.push_back(curve_row(r, true, n));
        if (cfg.strategy != Strategy::bon) rows.push_back(curve_row(r, false, n));
    }
    bon_rows.insert(bon_rows.end(), rows.begin(), rows.end());
    return bon_rows;
}

inline void write_curves(const std::vector<CurveRow>& rows, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / "curves.csv", std::ios::binary);
    out << "strategy,N,mean_nfe,mean_score,eta,xi,stderr_score\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", r.strategy.c_str(), r.n, r.mean_nfe,
                      r.mean_score, r.eta, r.xi, r.stderr_score);
        out << buf;
    }
    if (!out) throw Error("cannot write curves.csv in " + dir);
}

// ---------------------------------------------------------------------------
// Live-backend checks

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

/// Sampler and provider contract checks against the configured backend,
/// using the first instance.
inline std::vector<CheckResult> verify_backend(const ExperimentConfig& cfg) {
    cfg.validate();
    auto instances = experiment_instances(cfg);
    Backend backend = make_backend(cfg, instances);
    const auto& inst = instances.front();
    const auto& sc = cfg.search;
    Sampler& sampler = *backend.sampler;
    std::vector<CheckResult> out;
    auto check = [&](const std::string& name, const std::function<std::string()>& body) {
        try {
            auto detail = body();
            out.push_back({name, detail.empty(), detail});
        } catch (const std::exception& e) {
            out.push_back({name, false, e.what()});
        }
    };
    const std::uint64_t seed = candidate_seed(cfg.seeds.front(), 0);

    check("spawn starts at T with nothing spent", [&]() -> std::string {
        auto s = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        return s.timestep == sc.total_steps && s.nfe_spent == 0 ? "" : "unexpected spawn state";
    });
    check("chained sampling charges exactly T", [&]() -> std::string {
        NfeLedger ledger;
        auto s = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        s = sampler.sample_partial(inst, s, sc.total_steps, sc.early_timestep(), ledger, Phase::early);
        if (ledger.total() != sc.t_early) return "early phase charged " + std::to_string(ledger.total());
        s = sampler.sample_partial(inst, s, sc.early_timestep(), 0, ledger, Phase::resume);
        return ledger.total() == sc.total_steps && s.nfe_spent == sc.total_steps
                   ? ""
                   : "chain charged " + std::to_string(ledger.total());
    });
    check("decode is deterministic per seed", [&]() -> std::string {
        NfeLedger ledger;
        auto a = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        a = sampler.sample_partial(inst, a, sc.total_steps, 0, ledger, Phase::full);
        auto b = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        b = sampler.sample_partial(inst, b, sc.total_steps, sc.early_timestep(), ledger, Phase::early);
        b = sampler.sample_partial(inst, b, sc.early_timestep(), 0, ledger, Phase::resume);
        return sampler.decode(inst, a) == sampler.decode(inst, b) ? "" : "images differ";
    });
    check("preview needs a prior sampling step", [&]() -> std::string {
        NfeLedger ledger;
        auto s = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        try {
            sampler.one_step_preview(inst, s, ledger);
        } catch (const InvalidArgument&) {
            return "";
        }
        return "preview at T did not fail";
    });
    check("one-step preview has source dimensions", [&]() -> std::string {
        NfeLedger ledger;
        auto s = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        s = sampler.sample_partial(inst, s, sc.total_steps, sc.early_timestep(), ledger, Phase::early);
        auto img = sampler.one_step_preview(inst, s, ledger);
        img.validate();
        return img.same_shape(inst.source) ? "" : "preview shape differs from source";
    });
    check("general score within [0, S_max]", [&]() -> std::string {
        NfeLedger ledger;
        auto s = sampler.spawn_candidate(inst, 0, seed, inst.instruction);
        s = sampler.sample_partial(inst, s, sc.total_steps, 0, ledger, Phase::full);
        double v = backend.suite.general->score(inst.source, sampler.decode(inst, s), inst.instruction).value();
        return v >= 0.0 && v <= sc.s_max ? "" : "score " + std::to_string(v);
    });
    check("region schema", [&]() -> std::string {
        backend.suite.region->identify(inst.source, inst.instruction);
        return "";
    });
    check("caption schema", [&]() -> std::string {
        auto c = backend.suite.captions->caption(inst.source, inst.instruction);
        return c.edited.empty() ? "empty edited caption" : "";
    });
    check("embeddings are unit norm", [&]() -> std::string {
        auto v = backend.suite.embedder->embed_image(inst.source);
        double n = 0;
        for (double x : v) n += x * x;
        return std::abs(std::sqrt(n) - 1.0) < 1e-6 ? "" : "norm " + std::to_string(std::sqrt(n));
    });
    check("exactly five questions", [&]() -> std::string {
        auto q = backend.suite.questions->questions(inst.source, inst.instruction);
        return q.size() == 5 ? "" : std::to_string(q.size()) + " questions";
    });
    check("Best-of-N charges N*T", [&]() -> std::string {
        SearchConfig small = sc;
        small.n = 2;
        small.n_min = 1;
        SearchContext ctx{sampler, backend.suite, cfg.seeds.front(), {}};
        auto t = best_of_n(inst, small, ctx);
        return t.ledger.total() == 2LL * sc.total_steps ? "" : "total " + std::to_string(t.ledger.total());
    });
    return out;
}

}  // namespace adecot
