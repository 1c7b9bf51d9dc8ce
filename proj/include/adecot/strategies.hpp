#pragma once

// Search pipelines: Best-of-N, early pruning (both cost modes) and the
// adaptive pipeline (difficulty budget, edit-specific early pruning,
// depth-first opportunistic stopping, centroid tie-breaking).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "adecot/core.hpp"
#include "adecot/rng.hpp"
#include "adecot/sampler.hpp"
#include "adecot/trace.hpp"
#include "adecot/verifiers.hpp"

namespace adecot {

/// Maps (instance, candidate index) to the prompt used for that candidate.
using PromptRewriter = std::function<std::string(const EditInstance&, int)>;

struct SearchContext {
    Sampler& sampler;
    VerifierSuite& verifiers;
    std::uint64_t run_seed = 0;
    PromptRewriter rewrite;  // empty means identity

    std::string prompt_for(const EditInstance& instance, int index) const {
        return rewrite ? rewrite(instance, index) : instance.instruction;
    }

    CandidateState spawn(const EditInstance& instance, int index) const {
        return sampler.spawn_candidate(instance, index, candidate_seed(run_seed, index), prompt_for(instance, index));
    }
};

/// A candidate paused at a checkpoint with its latest preview and score.
struct Candidate {
    CandidateState state;
    Image preview;
    ScoreBreakdown score;
};

/// A fully denoised member of the final selection pool.
struct PoolEntry {
    int candidate_id = 0;
    Image image;
    ScoreBreakdown score;
    double quality = 0.0;
};

// ---------------------------------------------------------------------------
// Difficulty-aware budget

/// N_a = N_min + ceil((N - N_min) * (1 - S/S_max)^gamma), S clamped to [0, S_max].
/// Uses std::pow, so gamma = 0 yields N for every S.
inline int adaptive_budget(double s, const SearchConfig& config) {
    const double frac = 1.0 - std::clamp(s, 0.0, config.s_max) / config.s_max;
    const double term = static_cast<double>(config.n - config.n_min) * std::pow(frac, config.gamma);
    return std::min(config.n, config.n_min + static_cast<int>(std::ceil(term)));
}

struct AdaptResult {
    int n_a = 0;
    CandidateState probe;
    Image image;
    std::optional<double> s_gen;
};

/// Fully generates one probe (index 0) and scores it with the general
/// verifier only. A failing judge leaves the budget at N.
inline AdaptResult adapt_num(const EditInstance& instance, const SearchConfig& config, SearchContext& ctx,
                             Evaluator& ev, RunTrace& trace) {
    AdaptResult out;
    out.probe = ctx.spawn(instance, 0);
    out.probe = ctx.sampler.sample_partial(instance, out.probe, config.total_steps, 0, trace.ledger, Phase::probe);
    out.image = ctx.sampler.decode(instance, out.probe);
    try {
        out.s_gen = ev.general(out.image);
    } catch (const Error&) {
        out.s_gen.reset();
    }
    if (out.s_gen) {
        out.n_a = adaptive_budget(*out.s_gen, config);
        ScoreBreakdown s;
        s.s_gen = *out.s_gen;
        s.finalize(config.lambda_reg, config.lambda_cap);
        trace.log(0, EventKind::completed, 0, s, *out.s_gen);
    } else {
        out.n_a = config.n;
        trace.log(0, EventKind::completed, 0);
    }
    trace.n_a = out.n_a;
    return out;
}

// ---------------------------------------------------------------------------
// Edit-specific early pruning

struct EarlyResult {
    std::vector<Candidate> ordered;  // descending unified score
    bool degenerate = false;
};

inline bool score_order(const Candidate& a, const Candidate& b) {
    if (a.score.unified != b.score.unified) return a.score.unified > b.score.unified;
    return a.state.candidate_id < b.state.candidate_id;
}

/// Candidates 1..budget: sample to the early checkpoint, preview, refine the
/// region mask if no preview shows signal, score with the unified score,
/// drop those under S_rj, drop near-duplicates, sort.
inline EarlyResult early_prune(const EditInstance& instance, int budget, const SearchConfig& config,
                               SearchContext& ctx, Evaluator& ev, RunTrace& trace) {
    EarlyResult out;
    if (budget < 1) return out;
    const int t_e = config.early_timestep();

    std::vector<Candidate> all;
    all.reserve(static_cast<std::size_t>(budget));
    for (int i = 1; i <= budget; ++i) {
        Candidate c;
        c.state = ctx.spawn(instance, i);
        c.state = ctx.sampler.sample_partial(instance, c.state, config.total_steps, t_e, trace.ledger, Phase::early);
        c.preview = ctx.sampler.one_step_preview(instance, c.state, trace.ledger);
        c.score.s_gen = ev.general(c.preview);
        all.push_back(std::move(c));
    }

    auto& mask = ev.artifacts().mask;
    if (mask.available()) {
        mask = refine_until_signal(
            mask,
            [&](const RegionMask& m) {
                std::vector<double> scores;
                for (const auto& c : all)
                    scores.push_back(region_score(change_map(c.preview, instance.source, config.change_window), m));
                return scores;
            },
            config.mask_pad, config.change_window, config.zero_signal_margin);
    }

    std::vector<Candidate> kept;
    for (auto& c : all) {
        c.score.s_reg = ev.region(c.preview);
        c.score.s_cap = ev.caption(c.preview);
        c.score.finalize(config.lambda_reg, config.lambda_cap);
        c.state.score_history.push_back({t_e, c.score});
        trace.log(c.state.candidate_id, EventKind::scored, t_e, c.score);
    }
    for (auto& c : all) {
        if (c.score.unified < config.s_reject) {
            trace.log(c.state.candidate_id, EventKind::pruned, t_e, c.score);
        } else {
            kept.push_back(c);
        }
    }
    if (kept.empty()) {
        auto best = std::min_element(all.begin(), all.end(), score_order);
        out.ordered.push_back(std::move(*best));
        out.degenerate = true;
        return out;
    }

    std::sort(kept.begin(), kept.end(), score_order);
    if (ctx.verifiers.embedder) {
        std::vector<SimilarityItem> items;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            items.push_back({static_cast<int>(i), kept[i].score.unified, ctx.verifiers.embedder->embed_image(kept[i].preview)});
        }
        std::vector<bool> retained(kept.size(), false);
        for (const auto& item : similarity_filter(std::move(items), config.tau_sim)) retained[item.id] = true;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            if (retained[i]) {
                out.ordered.push_back(std::move(kept[i]));
            } else {
                trace.log(kept[i].state.candidate_id, EventKind::duplicate, t_e, kept[i].score);
            }
        }
    } else {
        out.ordered = std::move(kept);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Depth-first opportunistic stopping

struct StopResult {
    std::vector<PoolEntry> pool;
    int n_cnt = 0;
    bool stopped_early = false;
    bool degenerate = false;
    std::vector<double> s_rt_history;  // S_rt after each processed candidate
    int processed = 0;
};

/// Sequential pass over candidates sorted by early score. A candidate is
/// finished when its late preview score reaches S_rt - delta; finishing
/// adds S_spec, and the pass ends once N_high intent-aligned results exist.
inline StopResult adaptive_stop(const EditInstance& instance, std::vector<Candidate> candidates,
                                const SearchConfig& config, SearchContext& ctx, Evaluator& ev, RunTrace& trace) {
    StopResult out;
    if (candidates.empty()) {
        out.degenerate = true;
        return out;
    }
    const int t_e = config.early_timestep();
    const int t_l = config.late_timestep();
    double s_rt = 0.0;
    for (auto& c : candidates) {
        if (out.n_cnt >= config.n_high) break;
        ++out.processed;
        c.state = ctx.sampler.sample_partial(instance, c.state, t_e, t_l, trace.ledger, Phase::late);
        c.preview = ctx.sampler.one_step_preview(instance, c.state, trace.ledger);
        ScoreBreakdown late = ev.unified(c.preview);
        c.state.score_history.push_back({t_l, late});
        trace.log(c.state.candidate_id, EventKind::scored, t_l, late);
        if (late.unified >= s_rt - config.delta) {
            s_rt = std::max(s_rt, late.unified);
            c.state = ctx.sampler.sample_partial(instance, c.state, t_l, 0, trace.ledger, Phase::finish);
            Image image = ctx.sampler.decode(instance, c.state);
            ScoreBreakdown final = ev.final_score(image);
            c.state.score_history.push_back({0, final});
            if (final.s_spec && *final.s_spec >= config.s_high) ++out.n_cnt;
            trace.log(c.state.candidate_id, EventKind::completed, 0, final, final.s_gen);
            out.pool.push_back({c.state.candidate_id, std::move(image), final, final.s_gen});
        } else {
            trace.log(c.state.candidate_id, EventKind::skipped, t_l, late);
        }
        out.s_rt_history.push_back(s_rt);
    }
    out.stopped_early = out.n_cnt >= config.n_high;
    return out;
}

// ---------------------------------------------------------------------------
// Final selection

/// Argmax of the unified score. Exact ties go to the member with the highest
/// mean embedding similarity to the other tied members, then to the lowest id.
inline std::size_t select_final(const std::vector<PoolEntry>& pool, Embedder* embedder) {
    if (pool.empty()) throw InvalidArgument("select_final: empty pool");
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& e : pool) best = std::max(best, e.score.unified);
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i].score.unified == best) tied.push_back(i);
    auto lowest_id = [&](const std::vector<std::size_t>& idx) {
        return *std::min_element(idx.begin(), idx.end(),
                                 [&](auto a, auto b) { return pool[a].candidate_id < pool[b].candidate_id; });
    };
    if (tied.size() == 1 || embedder == nullptr) return lowest_id(tied);

    std::vector<std::vector<double>> emb;
    for (auto i : tied) emb.push_back(embedder->embed_image(pool[i].image));
    std::vector<double> centrality(tied.size(), 0.0);
    for (std::size_t a = 0; a < tied.size(); ++a) {
        for (std::size_t b = 0; b < tied.size(); ++b)
            if (a != b) centrality[a] += cosine_similarity(emb[a], emb[b]);
        centrality[a] /= static_cast<double>(tied.size() - 1);
    }
    const double top = *std::max_element(centrality.begin(), centrality.end());
    std::vector<std::size_t> central;
    for (std::size_t a = 0; a < tied.size(); ++a)
        if (centrality[a] == top) central.push_back(tied[a]);
    return lowest_id(central);
}

inline void finish_trace(RunTrace& trace, const PoolEntry& chosen, const Evaluator& ev) {
    trace.final_candidate = chosen.candidate_id;
    trace.final_image = chosen.image;
    trace.final_score = chosen.score;
    trace.final_quality = chosen.quality;
    trace.judge_queries = ev.judge_queries();
    trace.log(chosen.candidate_id, EventKind::selected, 0, chosen.score, chosen.quality);
}

inline RunTrace new_trace(const EditInstance& instance, Strategy strategy, const SearchConfig& config,
                          const SearchContext& ctx) {
    config.validate();
    instance.validate();
    if (ctx.sampler.total_steps() != config.total_steps) {
        throw ConfigError("sampler runs " + std::to_string(ctx.sampler.total_steps()) + " steps but T = " +
                          std::to_string(config.total_steps));
    }
    RunTrace trace;
    trace.instance_id = instance.id;
    trace.strategy = strategy;
    trace.run_seed = ctx.run_seed;
    trace.config = config;
    return trace;
}

// ---------------------------------------------------------------------------
// Pipelines

/// N full generations scored by the general verifier; argmax wins.
inline RunTrace best_of_n(const EditInstance& instance, const SearchConfig& config, SearchContext& ctx) {
    RunTrace trace = new_trace(instance, Strategy::bon, config, ctx);
    Evaluator ev(instance, config, ctx.verifiers);
    std::vector<PoolEntry> pool;
    for (int i = 0; i < config.n; ++i) {
        auto state = ctx.spawn(instance, i);
        state = ctx.sampler.sample_partial(instance, state, config.total_steps, 0, trace.ledger, Phase::full);
        Image image = ctx.sampler.decode(instance, state);
        ScoreBreakdown s = ev.general_only(image);
        trace.log(i, EventKind::completed, 0, s, s.s_gen);
        pool.push_back({i, std::move(image), s, s.s_gen});
    }
    trace.n_a = config.n;
    finish_trace(trace, pool[select_final(pool, nullptr)], ev);
    return trace;
}

enum class PruneMode { additional_steps, intermediate_state };

/// Early pruning with the general verifier. intermediate_state previews the
/// paused trajectory and resumes survivors; additional_steps previews with a
/// separate t_e-step run and regenerates survivors from scratch.
inline RunTrace early_prune_baseline(const EditInstance& instance, const SearchConfig& config, PruneMode mode,
                                     SearchContext& ctx) {
    RunTrace trace = new_trace(instance,
                               mode == PruneMode::additional_steps ? Strategy::early_prune_additional
                                                                   : Strategy::early_prune_intermediate,
                               config, ctx);
    Evaluator ev(instance, config, ctx.verifiers);
    const int t_e = config.early_timestep();
    std::vector<Candidate> all;
    for (int i = 0; i < config.n; ++i) {
        Candidate c;
        c.state = ctx.spawn(instance, i);
        if (mode == PruneMode::intermediate_state) {
            c.state = ctx.sampler.sample_partial(instance, c.state, config.total_steps, t_e, trace.ledger, Phase::early);
            c.preview = ctx.sampler.one_step_preview(instance, c.state, trace.ledger);
        } else {
            c.preview = ctx.sampler.short_run_preview(instance, c.state, config.t_early, trace.ledger);
        }
        c.score = ev.general_only(c.preview);
        trace.log(i, EventKind::scored, t_e, c.score);
        all.push_back(std::move(c));
    }

    std::vector<Candidate*> survivors;
    for (auto& c : all) {
        if (c.score.unified < config.s_reject) {
            trace.log(c.state.candidate_id, EventKind::pruned, t_e, c.score);
        } else {
            survivors.push_back(&c);
        }
    }
    if (survivors.empty()) {
        trace.degenerate = true;
        survivors.push_back(&*std::min_element(all.begin(), all.end(), score_order));
    }

    std::vector<PoolEntry> pool;
    for (Candidate* c : survivors) {
        if (mode == PruneMode::intermediate_state) {
            c->state = ctx.sampler.sample_partial(instance, c->state, t_e, 0, trace.ledger, Phase::resume);
        } else {
            c->state = ctx.sampler.sample_partial(instance, c->state, config.total_steps, 0, trace.ledger, Phase::full);
        }
        Image image = ctx.sampler.decode(instance, c->state);
        ScoreBreakdown s = ev.general_only(image);
        trace.log(c->state.candidate_id, EventKind::completed, 0, s, s.s_gen);
        pool.push_back({c->state.candidate_id, std::move(image), s, s.s_gen});
    }
    trace.n_a = config.n;
    finish_trace(trace, pool[select_final(pool, nullptr)], ev);
    return trace;
}

/// Probe, then budget N_a - 1 early candidates, then the depth-first pass;
/// the probe joins the final pool with the full final score.
inline RunTrace ade_cot(const EditInstance& instance, const SearchConfig& config, SearchContext& ctx) {
    RunTrace trace = new_trace(instance, Strategy::ade_cot, config, ctx);
    Evaluator ev(instance, config, ctx.verifiers);

    AdaptResult adapt = adapt_num(instance, config, ctx, ev, trace);
    ev.prepare_edit_specific();
    EarlyResult early = early_prune(instance, adapt.n_a - 1, config, ctx, ev, trace);
    ev.prepare_questions();
    StopResult stop = adaptive_stop(instance, std::move(early.ordered), config, ctx, ev, trace);

    std::vector<PoolEntry> pool = std::move(stop.pool);
    try {
        ScoreBreakdown s;
        s.s_gen = adapt.s_gen ? *adapt.s_gen : ev.general(adapt.image);
        s.s_reg = ev.region(adapt.image);
        s.s_cap = ev.caption(adapt.image);
        s.s_spec = ev.specific(adapt.image);
        s.finalize(config.lambda_reg, config.lambda_cap);
        for (auto& e : trace.events) {
            if (e.candidate_id == 0 && e.kind == EventKind::completed) {
                e.score = s;
                e.quality = s.s_gen;
            }
        }
        pool.push_back({0, adapt.image, s, s.s_gen});
    } catch (const Error&) {
        if (pool.empty()) throw;
    }

    trace.stopped_early = stop.stopped_early;
    trace.n_cnt_final = stop.n_cnt;
    trace.degenerate = early.degenerate;
    finish_trace(trace, pool[select_final(pool, ctx.verifiers.embedder.get())], ev);
    return trace;
}

inline RunTrace run_strategy(Strategy strategy, const EditInstance& instance, const SearchConfig& config,
                             SearchContext& ctx) {
    switch (strategy) {
        case Strategy::bon: return best_of_n(instance, config, ctx);
        case Strategy::early_prune_additional:
            return early_prune_baseline(instance, config, PruneMode::additional_steps, ctx);
        case Strategy::early_prune_intermediate:
            return early_prune_baseline(instance, config, PruneMode::intermediate_state, ctx);
        case Strategy::ade_cot: return ade_cot(instance, config, ctx);
    }
    throw InvalidArgument("unknown strategy");
}

}  // namespace adecot
