#pragma once

// Simulator studies: how well previews predict final scores, and how often
// early pruning discards candidates that would have ended well.

#include <cmath>
#include <cstdint>
#include <vector>

#include "adecot/core.hpp"
#include "adecot/sim.hpp"
#include "adecot/strategies.hpp"
#include "adecot/verifiers.hpp"

namespace adecot {

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("pearson: need two equal-length samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

struct CorrelationStudy {
    std::size_t candidates = 0;
    double r_early = 0.0;
    double r_late = 0.0;
};

/// Unified preview score at the early and late checkpoints against the
/// unified score of the decoded image, over `per_instance` candidates each.
inline CorrelationStudy preview_correlation_study(const std::vector<EditInstance>& instances, SimBackend& backend,
                                                  const SearchConfig& config, std::uint64_t run_seed,
                                                  int per_instance) {
    VerifierSuite suite = backend.suite();
    SearchContext ctx{*backend.sampler, suite, run_seed, {}};
    std::vector<double> early, late, final;
    for (const auto& inst : instances) {
        Evaluator ev(inst, config, suite);
        ev.prepare_edit_specific();
        for (int i = 0; i < per_instance; ++i) {
            NfeLedger ledger;
            auto state = ctx.spawn(inst, i);
            state = backend.sampler->sample_partial(inst, state, config.total_steps, config.early_timestep(), ledger,
                                                    Phase::early);
            early.push_back(ev.unified(backend.sampler->one_step_preview(inst, state, ledger)).unified);
            state = backend.sampler->sample_partial(inst, state, config.early_timestep(), config.late_timestep(),
                                                    ledger, Phase::late);
            late.push_back(ev.unified(backend.sampler->one_step_preview(inst, state, ledger)).unified);
            state = backend.sampler->sample_partial(inst, state, config.late_timestep(), 0, ledger, Phase::finish);
            final.push_back(ev.unified(backend.sampler->decode(inst, state)).unified);
        }
    }
    return {early.size(), pearson(early, final), pearson(late, final)};
}

struct MisjudgementStudy {
    int eventually_high = 0;     // candidates whose final quality reaches the bar
    int general_discarded = 0;   // of those, pruned when judged by S_gen alone
    int unified_discarded = 0;   // of those, pruned when judged by the unified score
};

/// Prunes each instance's N early previews at S_rj twice, once by the
/// general score and once by the unified score, and counts eventually-high
/// candidates lost by each rule.
inline MisjudgementStudy misjudgement_study(const std::vector<EditInstance>& instances, SimBackend& backend,
                                            const SearchConfig& config, std::uint64_t run_seed,
                                            double high_quality = 6.0) {
    VerifierSuite suite = backend.suite();
    SearchContext ctx{*backend.sampler, suite, run_seed, {}};
    MisjudgementStudy out;
    for (const auto& inst : instances) {
        Evaluator ev(inst, config, suite);
        ev.prepare_edit_specific();
        for (int i = 0; i < config.n; ++i) {
            NfeLedger ledger;
            auto state = ctx.spawn(inst, i);
            state = backend.sampler->sample_partial(inst, state, config.total_steps, config.early_timestep(), ledger,
                                                    Phase::early);
            ScoreBreakdown s = ev.unified(backend.sampler->one_step_preview(inst, state, ledger));
            state = backend.sampler->sample_partial(inst, state, config.early_timestep(), 0, ledger, Phase::resume);
            double quality = ev.general(backend.sampler->decode(inst, state));
            if (quality < high_quality) continue;
            ++out.eventually_high;
            if (s.s_gen < config.s_reject) ++out.general_discarded;
            if (s.unified < config.s_reject) ++out.unified_discarded;
        }
    }
    return out;
}

}  // namespace adecot
