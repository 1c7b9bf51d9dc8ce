#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adecot/core.hpp"

namespace adecot {

enum class Strategy { bon, early_prune_additional, early_prune_intermediate, ade_cot };

inline const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::bon: return "bon";
        case Strategy::early_prune_additional: return "early-prune-additional";
        case Strategy::early_prune_intermediate: return "early-prune-intermediate";
        case Strategy::ade_cot: return "ade-cot";
    }
    return "?";
}

inline Strategy parse_strategy(const std::string& s) {
    if (s == "bon") return Strategy::bon;
    if (s == "early-prune-additional") return Strategy::early_prune_additional;
    if (s == "early-prune-intermediate") return Strategy::early_prune_intermediate;
    if (s == "ade-cot") return Strategy::ade_cot;
    throw ConfigError("unknown strategy '" + s + "'");
}

enum class EventKind {
    scored,     // preview scored at an intermediate timestep
    pruned,     // dropped by the score threshold
    duplicate,  // dropped by the similarity filter
    skipped,    // not retained at the late checkpoint
    completed,  // fully denoised and scored
    selected,   // final answer
};

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::scored: return "scored";
        case EventKind::pruned: return "pruned";
        case EventKind::duplicate: return "duplicate";
        case EventKind::skipped: return "skipped";
        case EventKind::completed: return "completed";
        case EventKind::selected: return "selected";
    }
    return "?";
}

struct TraceEvent {
    int candidate_id = 0;
    EventKind kind = EventKind::scored;
    int timestep = 0;
    std::optional<ScoreBreakdown> score;
    std::optional<double> quality;  // evaluation score of a completed image
    std::int64_t ledger_total = 0;  // cumulative NFE when the event was logged
};

struct RunTrace {
    std::string instance_id;
    Strategy strategy = Strategy::bon;
    std::uint64_t run_seed = 0;
    SearchConfig config;
    std::vector<TraceEvent> events;
    NfeLedger ledger;

    int final_candidate = -1;
    Image final_image;
    ScoreBreakdown final_score;
    double final_quality = 0.0;

    bool stopped_early = false;
    int n_cnt_final = 0;
    int n_a = 0;
    bool degenerate = false;
    std::int64_t judge_queries = 0;

    void log(int candidate_id, EventKind kind, int timestep, std::optional<ScoreBreakdown> score = std::nullopt,
             std::optional<double> quality = std::nullopt) {
        events.push_back({candidate_id, kind, timestep, std::move(score), quality, ledger.total()});
    }

    /// Ids of every candidate that reached timestep 0, in completion order.
    std::vector<int> completed_ids() const {
        std::vector<int> out;
        for (const auto& e : events)
            if (e.kind == EventKind::completed) out.push_back(e.candidate_id);
        return out;
    }
};

/// Ledger total at the completion of the first candidate whose quality
/// reaches `reference`; the full total when none does.
inline std::int64_t nfe_min_of(const RunTrace& trace, double reference) {
    bool any = false;
    for (const auto& e : trace.events) {
        if (e.kind != EventKind::completed) continue;
        any = true;
        if (e.quality && *e.quality >= reference) return e.ledger_total;
    }
    if (!any) throw InvalidArgument("nfe_min_of: trace has no fully denoised candidate");
    return trace.ledger.total();
}

// ---------------------------------------------------------------------------
// Serialization

/// Rounds to 9 significant digits so output bytes are stable.
inline double round9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

inline nlohmann::json to_json(const ScoreBreakdown& s) {
    nlohmann::json j;
    j["s_gen"] = round9(s.s_gen);
    j["s_reg"] = s.s_reg ? nlohmann::json(round9(*s.s_reg)) : nlohmann::json(nullptr);
    j["s_cap"] = s.s_cap ? nlohmann::json(round9(*s.s_cap)) : nlohmann::json(nullptr);
    j["s_spec"] = s.s_spec ? nlohmann::json(*s.s_spec) : nlohmann::json(nullptr);
    j["unified"] = round9(s.unified);
    return j;
}

inline nlohmann::json to_json(const SearchConfig& c) {
    return {{"n", c.n},
            {"n_min", c.n_min},
            {"gamma", round9(c.gamma)},
            {"s_max", round9(c.s_max)},
            {"total_steps", c.total_steps},
            {"t_early", c.t_early},
            {"t_late", c.t_late},
            {"s_reject", round9(c.s_reject)},
            {"tau_sim", round9(c.tau_sim)},
            {"delta", round9(c.delta)},
            {"n_high", c.n_high},
            {"s_high", c.s_high},
            {"lambda_reg", round9(c.lambda_reg)},
            {"lambda_cap", round9(c.lambda_cap)}};
}

inline std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline nlohmann::json to_json(const RunTrace& t, std::uint64_t final_image_hash = 0) {
    nlohmann::json j;
    j["instance_id"] = t.instance_id;
    j["strategy"] = to_string(t.strategy);
    j["run_seed"] = t.run_seed;
    j["config"] = to_json(t.config);
    j["n_a"] = t.n_a;
    j["stopped_early"] = t.stopped_early;
    j["n_cnt_final"] = t.n_cnt_final;
    j["degenerate"] = t.degenerate;
    j["judge_queries"] = t.judge_queries;
    j["nfe_total"] = t.ledger.total();
    nlohmann::json phases = nlohmann::json::object();
    for (auto p : {Phase::full, Phase::probe, Phase::early, Phase::late, Phase::finish, Phase::resume,
                   Phase::short_preview, Phase::preview}) {
        auto steps = t.ledger.steps_for(p);
        if (steps > 0) phases[to_string(p)] = steps;
    }
    j["nfe_by_phase"] = phases;
    j["final"] = {{"candidate_id", t.final_candidate},
                  {"score", to_json(t.final_score)},
                  {"quality", round9(t.final_quality)},
                  {"image", hex64(final_image_hash)}};
    nlohmann::json events = nlohmann::json::array();
    for (const auto& e : t.events) {
        nlohmann::json ev;
        ev["candidate_id"] = e.candidate_id;
        ev["kind"] = to_string(e.kind);
        ev["timestep"] = e.timestep;
        if (e.score) ev["score"] = to_json(*e.score);
        if (e.quality) ev["quality"] = round9(*e.quality);
        ev["ledger_total"] = e.ledger_total;
        events.push_back(std::move(ev));
    }
    j["events"] = std::move(events);
    return j;
}

}  // namespace adecot
