#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "adecot/core.hpp"
#include "adecot/trace.hpp"

namespace adecot {

/// Tolerance under which a result counts as no worse than Best-of-N.
inline constexpr double kNonDegradedTolerance = 1e-9;

struct InstanceRow {
    std::string instance_id;
    int sigma = 0;     // 1 when the result is non-degraded
    double score = 0;  // S^(i)
    std::int64_t nfe = 0;
    std::int64_t nfe_min = 0;
};

/// eta = (1/M) * sum sigma_i * (S_i / S_max) * (N*T / NFE_i)
inline double reasoning_efficiency(const std::vector<InstanceRow>& rows, int n, int total_steps, double s_max) {
    if (rows.empty()) throw InvalidArgument("reasoning_efficiency: no rows");
    double sum = 0.0;
    for (const auto& r : rows) {
        if (r.nfe <= 0) throw InvalidArgument("reasoning_efficiency: row '" + r.instance_id + "' has NFE = 0");
        if (r.sigma) sum += (r.score / s_max) * (static_cast<double>(n) * total_steps / static_cast<double>(r.nfe));
    }
    return sum / static_cast<double>(rows.size());
}

/// xi = (1/M) * sum sigma_i * NFE_min_i / NFE_i
inline double outcome_efficiency(const std::vector<InstanceRow>& rows) {
    if (rows.empty()) throw InvalidArgument("outcome_efficiency: no rows");
    double sum = 0.0;
    for (const auto& r : rows) {
        if (r.nfe <= 0) throw InvalidArgument("outcome_efficiency: row '" + r.instance_id + "' has NFE = 0");
        if (r.nfe_min > r.nfe) throw InvalidArgument("outcome_efficiency: NFE_min exceeds NFE for '" + r.instance_id + "'");
        if (r.sigma) sum += static_cast<double>(r.nfe_min) / static_cast<double>(r.nfe);
    }
    return sum / static_cast<double>(rows.size());
}

struct EfficiencyReport {
    std::string strategy;
    int instance_count = 0;
    double eta = 0.0;
    double xi = 0.0;
    double mean_final_score = 0.0;
    std::int64_t total_nfe = 0;
    double speedup_vs_bon = 1.0;
    double mean_judge_queries = 0.0;
    int degenerate_runs = 0;
    std::vector<InstanceRow> per_instance;
};

/// Rows and aggregates for `traces` judged against the Best-of-N traces of
/// the same instances, matched by position.
inline EfficiencyReport build_report(const std::vector<RunTrace>& traces, const std::vector<RunTrace>& bon,
                                     const SearchConfig& config) {
    if (traces.empty()) throw InvalidArgument("build_report: no traces");
    if (traces.size() != bon.size()) throw InvalidArgument("build_report: reference has a different instance count");
    EfficiencyReport rep;
    rep.strategy = to_string(traces.front().strategy);
    rep.instance_count = static_cast<int>(traces.size());
    std::int64_t bon_total = 0;
    double score_sum = 0.0;
    double query_sum = 0.0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        if (t.instance_id != bon[i].instance_id) throw InvalidArgument("build_report: instance order differs from reference");
        const double reference = bon[i].final_quality;
        InstanceRow row;
        row.instance_id = t.instance_id;
        row.sigma = t.final_quality >= reference - kNonDegradedTolerance ? 1 : 0;
        row.score = t.final_quality;
        row.nfe = t.ledger.total();
        row.nfe_min = nfe_min_of(t, reference - kNonDegradedTolerance);
        rep.per_instance.push_back(row);
        rep.total_nfe += row.nfe;
        bon_total += bon[i].ledger.total();
        score_sum += row.score;
        query_sum += static_cast<double>(t.judge_queries);
        if (t.degenerate) ++rep.degenerate_runs;
    }
    rep.eta = reasoning_efficiency(rep.per_instance, config.n, config.total_steps, config.s_max);
    rep.xi = outcome_efficiency(rep.per_instance);
    rep.mean_final_score = score_sum / static_cast<double>(traces.size());
    rep.mean_judge_queries = query_sum / static_cast<double>(traces.size());
    rep.speedup_vs_bon = static_cast<double>(bon_total) / static_cast<double>(rep.total_nfe);
    return rep;
}

struct BonComparison {
    double eta_ratio = 1.0;
    double xi_ratio = 1.0;
    double nfe_ratio = 1.0;  // BoN NFE over this strategy's NFE
    double score_delta = 0.0;
};

inline double safe_ratio(double a, double b) {
    if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
    return a / b;
}

inline BonComparison compare_to_bon(const EfficiencyReport& ade, const EfficiencyReport& bon) {
    if (ade.per_instance.size() != bon.per_instance.size()) throw InvalidArgument("compare_to_bon: instance sets differ");
    for (std::size_t i = 0; i < ade.per_instance.size(); ++i) {
        if (ade.per_instance[i].instance_id != bon.per_instance[i].instance_id) {
            throw InvalidArgument("compare_to_bon: instance sets differ");
        }
    }
    BonComparison c;
    c.eta_ratio = safe_ratio(ade.eta, bon.eta);
    c.xi_ratio = safe_ratio(ade.xi, bon.xi);
    c.nfe_ratio = safe_ratio(static_cast<double>(bon.total_nfe), static_cast<double>(ade.total_nfe));
    c.score_delta = ade.mean_final_score - bon.mean_final_score;
    return c;
}

inline nlohmann::json to_json(const EfficiencyReport& r, bool with_rows = true) {
    nlohmann::json j;
    j["strategy"] = r.strategy;
    j["instance_count"] = r.instance_count;
    j["eta"] = round9(r.eta);
    j["xi"] = round9(r.xi);
    j["mean_final_score"] = round9(r.mean_final_score);
    j["total_nfe"] = r.total_nfe;
    j["speedup_vs_bon"] = round9(r.speedup_vs_bon);
    j["mean_judge_queries"] = round9(r.mean_judge_queries);
    j["degenerate_runs"] = r.degenerate_runs;
    if (with_rows) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& row : r.per_instance) {
            rows.push_back({{"instance_id", row.instance_id},
                            {"sigma", row.sigma},
                            {"score", round9(row.score)},
                            {"nfe", row.nfe},
                            {"nfe_min", row.nfe_min}});
        }
        j["per_instance"] = std::move(rows);
    }
    return j;
}

inline nlohmann::json to_json(const BonComparison& c) {
    return {{"eta_ratio", round9(c.eta_ratio)},
            {"xi_ratio", round9(c.xi_ratio)},
            {"nfe_ratio", round9(c.nfe_ratio)},
            {"score_delta", round9(c.score_delta)}};
}

}  // namespace adecot
