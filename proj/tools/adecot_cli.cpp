#include <csignal>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adecot/harness.hpp"
#include "adecot/sim_server.hpp"

namespace {

enum Exit { ok = 0, config_error = 2, backend_error = 3, degenerate = 4 };

adecot::ExperimentConfig load(const std::string& path) {
    auto cfg = adecot::load_config(path);
    if (const char* env = std::getenv("ADECOT_ENDPOINT"); env && *env) cfg.remote.endpoint = env;
    return cfg;
}

void print_summary(const adecot::ExperimentResult& r) {
    auto a = adecot::average(r);
    std::printf("strategy %s  seeds %zu  instances %d\n", adecot::to_string(r.strategy), r.seeds.size(),
                r.seeds.front().report.instance_count);
    std::printf("  mean score %.4f  eta %.4f  xi %.4f  mean NFE/instance %.1f\n", a.mean_final_score, a.eta, a.xi,
                a.total_nfe / r.seeds.front().report.instance_count);
    std::printf("  vs bon: NFE ratio %.3fx  eta ratio %.3f  score delta %+.4f\n", a.nfe_ratio, a.eta_ratio,
                a.score_delta);
}

adecot::SimServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Budget-aware test-time search for image editing"};
    app.require_subcommand(1);

    std::string config_path;
    std::string strategy;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string budgets = "1,2,4,8,16,32";
    std::string host = "127.0.0.1";
    int port = 8080;

    auto* run = app.add_subcommand("run", "run one strategy and write report.json and trace.jsonl");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--strategy", strategy, "bon | early-prune-additional | early-prune-intermediate | ade-cot");
    run->add_option("--seed", seeds, "run seed (repeatable)");
    run->add_option("--out", out_dir, "output directory");

    auto* sweep = app.add_subcommand("sweep", "scaling curves over sampling budgets, written to curves.csv");
    sweep->add_option("--config", config_path, "config file")->required();
    sweep->add_option("--budgets", budgets, "comma-separated budgets");
    sweep->add_option("--out", out_dir, "output directory");

    auto* verify = app.add_subcommand("verify", "check sampler and provider contracts against the backend");
    verify->add_option("--config", config_path, "config file")->required();

    auto* serve = app.add_subcommand("serve-sim", "serve the simulator over the remote protocol");
    serve->add_option("--config", config_path, "config file (instances and simulator sections)")->required();
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "port");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = load(config_path);
        if (!strategy.empty()) cfg.strategy = adecot::parse_strategy(strategy);
        if (!seeds.empty()) cfg.seeds = seeds;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.validate();

        if (*run) {
            auto r = adecot::run_experiment(cfg);
            print_summary(r);
            std::printf("  wrote %s/report.json and %s/trace.jsonl\n", cfg.output_dir.c_str(), cfg.output_dir.c_str());
            return r.degenerate_runs > 0 ? degenerate : ok;
        }
        if (*sweep) {
            std::vector<int> list;
            for (const auto& item : adecot::detail::split(budgets, ',')) {
                try {
                    list.push_back(std::stoi(item));
                } catch (const std::exception&) {
                    throw adecot::ConfigError("invalid budget '" + item + "'");
                }
            }
            auto rows = adecot::sweep_budgets(cfg, list);
            adecot::write_curves(rows, cfg.output_dir);
            for (const auto& r : rows) {
                std::printf("%-26s N=%-3d NFE %8.1f  score %.4f  eta %.4f  xi %.4f\n", r.strategy.c_str(), r.n,
                            r.mean_nfe, r.mean_score, r.eta, r.xi);
            }
            std::printf("wrote %s/curves.csv\n", cfg.output_dir.c_str());
            return ok;
        }
        if (*verify) {
            bool all = true;
            for (const auto& c : adecot::verify_backend(cfg)) {
                std::printf("%s  %s%s%s\n", c.ok ? "PASS" : "FAIL", c.name.c_str(), c.detail.empty() ? "" : ": ",
                            c.detail.c_str());
                all = all && c.ok;
            }
            return all ? ok : backend_error;
        }
        if (*serve) {
            adecot::SimServer server(adecot::experiment_instances(cfg), cfg.sim, cfg.search.total_steps);
            g_server = &server;
            std::signal(SIGINT, [](int) {
                if (g_server) g_server->stop();
            });
            std::signal(SIGTERM, [](int) {
                if (g_server) g_server->stop();
            });
            std::printf("serving %d simulated instances on %s:%d\n", cfg.generator.count, host.c_str(), port);
            std::fflush(stdout);
            server.serve(host, port);
            return ok;
        }
    } catch (const adecot::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return config_error;
    } catch (const adecot::BackendUnavailable& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return backend_error;
    } catch (const adecot::ProtocolError& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return backend_error;
    } catch (const adecot::ProviderError& e) {
        std::fprintf(stderr, "backend error: %s\n", e.what());
        return backend_error;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return ok;
}
