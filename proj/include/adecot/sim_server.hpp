#pragma once

// HTTP server exposing the simulator over the remote sampler and provider
// protocol. Used by tests and by `adecot serve-sim`.

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "adecot/remote.hpp"
#include "adecot/sim.hpp"

namespace adecot {

enum class Fault { http_500, malformed_json, wrong_arity, drop_connection };

class SimServer {
  public:
    SimServer(std::vector<EditInstance> instances, SimParams params = {}, int total_steps = 28)
        : backend_(params, total_steps) {
        for (auto& inst : instances) {
            backend_.world->register_instance(inst);
            instances_.emplace(inst.id, std::move(inst));
        }
        install();
    }

    ~SimServer() { stop(); }
    SimServer(const SimServer&) = delete;
    SimServer& operator=(const SimServer&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    int start(const std::string& host = "127.0.0.1", int port = 0) {
        port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        if (port_ < 0) throw BackendUnavailable("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
        return port_;
    }

    /// Serves on the calling thread until stop() is called elsewhere.
    void serve(const std::string& host, int port) {
        if (!server_.listen(host, port)) throw BackendUnavailable("cannot listen on " + host + ":" + std::to_string(port));
    }

    void stop() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }
    SimBackend& backend() { return backend_; }

    /// Queues `count` faults for the next requests to `path`.
    void inject(const std::string& path, Fault fault, int count = 1) {
        std::lock_guard lock(mutex_);
        for (int i = 0; i < count; ++i) faults_[path].push_back(fault);
    }

    std::int64_t requests(const std::string& path) const {
        std::lock_guard lock(mutex_);
        auto it = counts_.find(path);
        return it == counts_.end() ? 0 : it->second;
    }

  private:
    using Entry = std::variant<CandidateState, Image>;
    using Handler = std::function<nlohmann::json(const nlohmann::json&)>;

    void route(const std::string& path, Handler handler) {
        server_.Post(path, [this, path, handler](const httplib::Request& req, httplib::Response& res) {
            std::optional<Fault> fault;
            {
                std::lock_guard lock(mutex_);
                ++counts_[path];
                auto& queue = faults_[path];
                if (!queue.empty()) {
                    fault = queue.front();
                    queue.pop_front();
                }
            }
            if (fault == Fault::http_500) {
                res.status = 500;
                res.set_content(R"({"error":"injected"})", "application/json");
                return;
            }
            if (fault == Fault::malformed_json) {
                res.set_content("{\"sc\": 7.0,", "application/json");
                return;
            }
            if (fault == Fault::drop_connection) {
                res.status = 503;
                return;
            }
            try {
                auto body = nlohmann::json::parse(req.body);
                auto reply = handler(body);
                if (fault == Fault::wrong_arity && reply.contains("questions")) reply["questions"].erase(0);
                res.set_content(reply.dump(), "application/json");
            } catch (const nlohmann::json::exception& e) {
                res.status = 400;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            } catch (const ProviderError& e) {
                res.status = 422;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            } catch (const Error& e) {
                res.status = 400;
                res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            }
        });
    }

    const EditInstance& instance(const std::string& id) const {
        auto it = instances_.find(id);
        if (it == instances_.end()) throw InvalidArgument("unknown instance '" + id + "'");
        return it->second;
    }

    std::string store(Entry entry) {
        std::lock_guard lock(mutex_);
        std::string ref = "L" + std::to_string(++next_ref_);
        latents_.emplace(ref, std::move(entry));
        return ref;
    }

    Entry fetch(const std::string& ref) const {
        std::lock_guard lock(mutex_);
        auto it = latents_.find(ref);
        if (it == latents_.end()) throw InvalidArgument("unknown latent_ref '" + ref + "'");
        return it->second;
    }

    struct Lookup {
        const EditInstance* instance;
        CandidateState state;
    };

    Lookup candidate(const std::string& ref) const {
        auto entry = fetch(ref);
        auto* state = std::get_if<CandidateState>(&entry);
        if (!state) throw InvalidArgument("latent_ref '" + ref + "' holds a decoded short run");
        std::lock_guard lock(mutex_);
        return {&instances_.at(owners_.at(ref)), *state};
    }

    void install() {
        SimSampler& sampler = *backend_.sampler;
        const int total = sampler.total_steps();

        route("/v1/sample", [this, &sampler, total](const nlohmann::json& b) {
            const auto& inst = instance(b.at("instance_id").get<std::string>());
            const int from_t = b.at("from_t").get<int>();
            const int to_t = b.at("to_t").get<int>();
            NfeLedger ledger;
            std::string ref;
            if (b.contains("latent_ref")) {
                auto [owner, state] = candidate(b.at("latent_ref").get<std::string>());
                state = sampler.sample_partial(inst, state, from_t, to_t, ledger, Phase::full);
                ref = store(state);
            } else {
                auto state = sampler.spawn_candidate(inst, 0, b.at("candidate_seed").get<std::uint64_t>(),
                                                     b.value("prompt", inst.instruction));
                if (from_t == total) {
                    state = sampler.sample_partial(inst, state, from_t, to_t, ledger, Phase::full);
                    ref = store(state);
                } else {
                    if (to_t != 0) throw InvalidArgument("a fresh short run must end at to_t = 0");
                    ref = store(sampler.short_run_preview(inst, state, from_t, ledger));
                }
            }
            {
                std::lock_guard lock(mutex_);
                owners_[ref] = inst.id;
            }
            return nlohmann::json{{"latent_ref", ref}, {"steps_charged", ledger.total()}};
        });

        route("/v1/preview", [this, &sampler](const nlohmann::json& b) {
            auto [inst, state] = candidate(b.at("latent_ref").get<std::string>());
            NfeLedger ledger;
            Image img = sampler.one_step_preview(*inst, state, ledger);
            return nlohmann::json{{"image_b64", image_to_b64(img)}, {"steps_charged", ledger.total()}};
        });

        route("/v1/decode", [this, &sampler](const nlohmann::json& b) {
            auto ref = b.at("latent_ref").get<std::string>();
            auto entry = fetch(ref);
            if (auto* img = std::get_if<Image>(&entry)) return nlohmann::json{{"image_b64", image_to_b64(*img)}};
            auto [inst, state] = candidate(ref);
            return nlohmann::json{{"image_b64", image_to_b64(sampler.decode(*inst, state))}};
        });

        route("/v1/general_score", [this](const nlohmann::json& b) {
            return wire::general_score_to_json(backend_.general->score(image_from_b64(b.at("source_b64").get<std::string>()),
                                                                       image_from_b64(b.at("edited_b64").get<std::string>()),
                                                                       b.at("instruction").get<std::string>()));
        });

        route("/v1/region", [this](const nlohmann::json& b) {
            return wire::region_to_json(
                backend_.region->identify(image_from_b64(b.at("source_b64").get<std::string>()), b.at("instruction").get<std::string>()));
        });

        route("/v1/ground", [this](const nlohmann::json& b) {
            auto mask = backend_.grounder->ground(image_from_b64(b.at("source_b64").get<std::string>()),
                                                  b.at("objects").get<std::vector<std::string>>());
            return nlohmann::json{{"mask_b64", base64_encode(std::string(mask.begin(), mask.end()))}};
        });

        route("/v1/caption", [this](const nlohmann::json& b) {
            return wire::captions_to_json(
                backend_.captions->caption(image_from_b64(b.at("source_b64").get<std::string>()), b.at("instruction").get<std::string>()));
        });

        route("/v1/embed", [this](const nlohmann::json& b) {
            if (b.contains("image_b64")) {
                return wire::vector_to_json(backend_.embedder->embed_image(image_from_b64(b.at("image_b64").get<std::string>())));
            }
            return wire::vector_to_json(backend_.embedder->embed_text(b.at("text").get<std::string>()));
        });

        route("/v1/questions", [this](const nlohmann::json& b) {
            return wire::questions_to_json(backend_.questions->questions(image_from_b64(b.at("source_b64").get<std::string>()),
                                                                         b.at("instruction").get<std::string>()));
        });

        route("/v1/answers", [this](const nlohmann::json& b) {
            return wire::answers_to_json(backend_.answers->answers(
                image_from_b64(b.at("source_b64").get<std::string>()), image_from_b64(b.at("edited_b64").get<std::string>()),
                b.at("instruction").get<std::string>(), b.at("questions").get<std::vector<std::string>>()));
        });
    }

    SimBackend backend_;
    std::map<std::string, EditInstance> instances_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = -1;

    mutable std::mutex mutex_;
    std::unordered_map<std::string, Entry> latents_;
    std::unordered_map<std::string, std::string> owners_;
    std::map<std::string, std::deque<Fault>> faults_;
    std::map<std::string, std::int64_t> counts_;
    std::uint64_t next_ref_ = 0;
};

}  // namespace adecot
