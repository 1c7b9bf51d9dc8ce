#include <gtest/gtest.h>

#include "adecot/metrics.hpp"

using namespace adecot;

namespace {

InstanceRow row(int sigma, double score, std::int64_t nfe, std::int64_t nfe_min = 0) {
    return {"r", sigma, score, nfe, nfe_min == 0 ? nfe : nfe_min};
}

RunTrace trace_with(const std::string& id, Strategy strategy, const std::vector<double>& qualities, int cost) {
    RunTrace t;
    t.instance_id = id;
    t.strategy = strategy;
    for (std::size_t i = 0; i < qualities.size(); ++i) {
        t.ledger.charge(static_cast<int>(i), Phase::full, cost);
        t.log(static_cast<int>(i), EventKind::completed, 0, std::nullopt, qualities[i]);
    }
    t.final_quality = *std::max_element(qualities.begin(), qualities.end());
    return t;
}

}  // namespace

TEST(ReasoningEfficiency, AllFactorsUnity) {
    EXPECT_NEAR(reasoning_efficiency({row(1, 10.0, 32 * 28)}, 32, 28, 10.0), 1.0, 1e-12);
}

TEST(ReasoningEfficiency, DegradedRowContributesNothing) {
    EXPECT_EQ(reasoning_efficiency({row(0, 10.0, 28)}, 32, 28, 10.0), 0.0);
}

TEST(ReasoningEfficiency, TwoRowFixture) {
    std::vector<InstanceRow> rows = {row(1, 8.0, 448), row(1, 6.0, 896)};
    EXPECT_NEAR(reasoning_efficiency(rows, 32, 28, 10.0), (0.8 * 2 + 0.6 * 1) / 2, 1e-12);
    EXPECT_NEAR(reasoning_efficiency(rows, 32, 28, 10.0), 1.1, 1e-12);
}

TEST(ReasoningEfficiency, ZeroNfeRowIsAnError) {
    EXPECT_THROW(reasoning_efficiency({row(1, 5.0, 0)}, 32, 28, 10.0), InvalidArgument);
    EXPECT_THROW(reasoning_efficiency({}, 32, 28, 10.0), InvalidArgument);
}

TEST(OutcomeEfficiency, Fixtures) {
    EXPECT_EQ(outcome_efficiency({row(1, 7.0, 112, 112)}), 1.0);
    EXPECT_EQ(outcome_efficiency({row(0, 7.0, 112, 28)}), 0.0);
    EXPECT_NEAR(outcome_efficiency({row(1, 7.0, 112, 28)}), 0.25, 1e-12);
    EXPECT_THROW(outcome_efficiency({row(1, 7.0, 28, 112)}), InvalidArgument);
}

TEST(BuildReport, SigmaUsesToleranceAgainstBestOfN) {
    std::vector<RunTrace> bon = {trace_with("a", Strategy::bon, {6.0, 8.0}, 28),
                                 trace_with("b", Strategy::bon, {7.0}, 28)};
    std::vector<RunTrace> ade = {trace_with("a", Strategy::ade_cot, {8.0 - 1e-10}, 28),
                                 trace_with("b", Strategy::ade_cot, {7.0 - 1e-8, 5.0}, 28)};
    SearchConfig c;
    c.n = 2;
    auto rep = build_report(ade, bon, c);
    ASSERT_EQ(rep.per_instance.size(), 2u);
    EXPECT_EQ(rep.per_instance[0].sigma, 1);
    EXPECT_EQ(rep.per_instance[0].nfe_min, 28);
    EXPECT_EQ(rep.per_instance[1].sigma, 0);
    EXPECT_EQ(rep.per_instance[1].nfe_min, 56);
    EXPECT_EQ(rep.total_nfe, 28 + 56);
    EXPECT_NEAR(rep.speedup_vs_bon, 84.0 / 84.0, 1e-12);
    EXPECT_NEAR(rep.eta, ((8.0 - 1e-10) / 10.0 * 56.0 / 28.0) / 2, 1e-12);
    EXPECT_NEAR(rep.xi, 0.5, 1e-12);
}

TEST(BuildReport, MismatchedReferenceIsAnError) {
    std::vector<RunTrace> bon = {trace_with("a", Strategy::bon, {6.0}, 28)};
    std::vector<RunTrace> other = {trace_with("b", Strategy::ade_cot, {6.0}, 28)};
    SearchConfig c;
    EXPECT_THROW(build_report(other, bon, c), InvalidArgument);
    EXPECT_THROW(build_report({}, {}, c), InvalidArgument);
}

TEST(CompareToBon, SelfComparisonIsUnity) {
    std::vector<RunTrace> bon = {trace_with("a", Strategy::bon, {6.0, 8.0}, 28)};
    SearchConfig c;
    c.n = 2;
    auto rep = build_report(bon, bon, c);
    auto cmp = compare_to_bon(rep, rep);
    EXPECT_EQ(cmp.eta_ratio, 1.0);
    EXPECT_EQ(cmp.xi_ratio, 1.0);
    EXPECT_EQ(cmp.nfe_ratio, 1.0);
    EXPECT_EQ(cmp.score_delta, 0.0);
}

TEST(CompareToBon, HalfTheNfeIsRatioTwo) {
    EfficiencyReport bon, ade;
    bon.per_instance = ade.per_instance = {row(1, 8.0, 56)};
    bon.total_nfe = 112;
    ade.total_nfe = 56;
    EXPECT_EQ(compare_to_bon(ade, bon).nfe_ratio, 2.0);
    ade.per_instance[0].instance_id = "other";
    EXPECT_THROW(compare_to_bon(ade, bon), InvalidArgument);
}

TEST(ReportJson, NumbersRoundedToNineDigits) {
    EfficiencyReport r;
    r.strategy = "bon";
    r.eta = 1.0 / 3.0;
    r.per_instance = {row(1, 2.0 / 3.0, 28)};
    auto j = to_json(r);
    EXPECT_EQ(j["eta"].dump(), "0.333333333");
    EXPECT_EQ(j["per_instance"][0]["score"].dump(), "0.666666667");
    EXPECT_FALSE(to_json(r, false).contains("per_instance"));
}
