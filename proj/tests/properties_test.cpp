#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "adecot/metrics.hpp"
#include "adecot/strategies.hpp"
#include "test_support.hpp"

using namespace adecot;
using namespace testing_support;

namespace {

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}
    double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    bool coin(double p = 0.5) { return real(0.0, 1.0) < p; }
    std::vector<double> unit(int dim) {
        std::normal_distribution<double> n;
        std::vector<double> v(static_cast<std::size_t>(dim));
        double norm = 0;
        for (auto& x : v) norm += (x = n(rng)) * x;
        for (auto& x : v) x /= std::sqrt(norm);
        return v;
    }
};

}  // namespace

TEST(BudgetLaw, EndpointsBoundsAndMonotonicity) {
    Gen g(1);
    for (int trial = 0; trial < 10000; ++trial) {
        SearchConfig c;
        c.n = g.integer(2, 64);
        c.n_min = g.integer(1, c.n);
        c.gamma = g.real(0.0, 2.0);
        ASSERT_EQ(adaptive_budget(0.0, c), c.n);
        ASSERT_EQ(adaptive_budget(c.s_max, c), c.n_min) << "gamma " << c.gamma;
        double s1 = g.real(0.0, 10.0), s2 = g.real(0.0, 10.0);
        if (s1 > s2) std::swap(s1, s2);
        int a1 = adaptive_budget(s1, c), a2 = adaptive_budget(s2, c);
        ASSERT_GE(a1, a2);
        ASSERT_GE(a2, c.n_min);
        ASSERT_LE(a1, c.n);
    }
}

TEST(BudgetLaw, ZeroGammaKeepsFullBudget) {
    SearchConfig c;
    c.gamma = 0.0;
    for (double s : {0.0, 3.0, 9.999, 10.0}) EXPECT_EQ(adaptive_budget(s, c), c.n) << s;
}

TEST(Softmax, SumsToOne) {
    Gen g(2);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> v(static_cast<std::size_t>(g.integer(1, 256)));
        double scale = g.coin() ? 1.0 : 50.0;
        for (auto& x : v) x = g.real(-scale, scale);
        auto w = softmax(v);
        double sum = 0;
        for (double x : w) sum += x;
        ASSERT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(RegionScore, MonotoneInMaskAndBounded) {
    Gen g(3);
    for (int trial = 0; trial < 1000; ++trial) {
        int h = g.integer(1, 12), w = g.integer(1, 12);
        ChangeMap d;
        d.height = d.source_height = h;
        d.width = d.source_width = w;
        d.delta.resize(static_cast<std::size_t>(h) * w);
        for (auto& x : d.delta) x = g.real(0.0, 1.0);
        auto mask = RegionMask::filled(h, w, false);
        for (auto& cell : mask.cells) cell = g.coin(0.3);
        double before = region_score(d, mask);
        ASSERT_GE(before, 0.0);
        ASSERT_LE(before, 1.0);
        auto grown = mask;
        grown.at(g.integer(0, h - 1), g.integer(0, w - 1)) = 1;
        ASSERT_GE(region_score(d, grown), before);
    }
}

TEST(UnifiedScore, CaptionContributionScalesWithLambda) {
    Gen g(4);
    for (int trial = 0; trial < 1000; ++trial) {
        SearchConfig c;
        c.lambda_cap = g.real(0.0, 5.0);
        SearchConfig d = c;
        d.lambda_cap = 2 * c.lambda_cap;
        double cap = g.real(-1.0, 1.0);
        ASSERT_EQ(unified_score(0.0, std::nullopt, cap, d), 2 * unified_score(0.0, std::nullopt, cap, c));
        double gen = g.real(0.0, 10.0), reg = g.real(0.0, 1.0);
        double base = unified_score(gen, reg, std::nullopt, c);
        ASSERT_NEAR(unified_score(gen, reg, cap, d) - base, 2 * (unified_score(gen, reg, cap, c) - base), 1e-12);
    }
}

TEST(SimilarityFilter, Idempotent) {
    Gen g(5);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<SimilarityItem> items;
        int n = g.integer(1, 20);
        auto anchor = g.unit(4);
        for (int i = 0; i < n; ++i) {
            auto v = g.coin(0.4) ? anchor : g.unit(4);
            if (g.coin()) v[0] += g.real(-0.05, 0.05);
            items.push_back({i, std::round(g.real(0, 10) * 4) / 4, v});
        }
        double tau = g.coin() ? 0.98 : g.real(0.0, 1.0);
        auto once = similarity_filter(items, tau);
        auto twice = similarity_filter(once, tau);
        ASSERT_EQ(once.size(), twice.size());
        for (std::size_t i = 0; i < once.size(); ++i) ASSERT_EQ(once[i].id, twice[i].id);
    }
}

TEST(Answers, CountWithinBounds) {
    struct RandomAnswers : AnswerProvider {
        Gen* g;
        std::vector<std::string> answers(const Image&, const Image&, const std::string&,
                                         const std::vector<std::string>& qs) override {
            static const char* words[] = {"yes", "no", "Yes", "", "yes ", "maybe"};
            std::vector<std::string> out;
            std::size_t n = g->coin(0.9) ? qs.size() : static_cast<std::size_t>(g->integer(0, 7));
            for (std::size_t i = 0; i < n; ++i) out.push_back(words[g->integer(0, 5)]);
            return out;
        }
    };
    Gen g(6);
    RandomAnswers p;
    p.g = &g;
    EditInstance inst;
    inst.id = "x";
    inst.instruction = "x";
    inst.source = Image(1, 1, 1);
    QuestionSet qs{std::vector<std::string>(5, "q?"), std::nullopt};
    for (int trial = 0; trial < 2000; ++trial) {
        auto s = answer_questions(inst, inst.source, qs, p);
        if (s) {
            ASSERT_GE(*s, 0);
            ASSERT_LE(*s, 5);
        }
    }
}

TEST(Metrics, PermutationInvariantAndDegradedRowRemoval) {
    Gen g(7);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<InstanceRow> rows;
        int m = g.integer(2, 30);
        for (int i = 0; i < m; ++i) {
            std::int64_t nfe = 28 * g.integer(1, 32);
            rows.push_back({"r" + std::to_string(i), g.coin(0.7) ? 1 : 0, g.real(0, 10), nfe,
                            28 * g.integer(1, static_cast<int>(nfe / 28))});
        }
        double eta = reasoning_efficiency(rows, 32, 28, 10), xi = outcome_efficiency(rows);
        auto shuffled = rows;
        std::shuffle(shuffled.begin(), shuffled.end(), g.rng);
        ASSERT_NEAR(reasoning_efficiency(shuffled, 32, 28, 10), eta, 1e-12);
        ASSERT_NEAR(outcome_efficiency(shuffled), xi, 1e-12);
        ASSERT_NEAR(reasoning_efficiency(rows, 64, 28, 10), 2 * eta, 1e-12);

        auto it = std::find_if(rows.begin(), rows.end(), [](const InstanceRow& r) { return r.sigma == 0; });
        if (it != rows.end() && rows.size() > 1) {
            rows.erase(it);
            ASSERT_GE(reasoning_efficiency(rows, 32, 28, 10), eta);
            ASSERT_GE(outcome_efficiency(rows), xi);
        }
    }
}

TEST(SelectFinal, ScaleInvariant) {
    Gen g(8);
    for (int trial = 0; trial < 500; ++trial) {
        Scripted s;
        std::vector<PoolEntry> pool;
        int n = g.integer(1, 8);
        for (int i = 0; i < n; ++i) {
            int id = g.integer(0, 50);
            if (s.book->scripts.count(id)) continue;
            s[id].embedding = g.unit(3);
            ScoreBreakdown sc;
            sc.unified = g.integer(0, 12) / 4.0;
            pool.push_back({id, s.book->image(id, 0, false), sc, sc.unified});
        }
        auto choice = select_final(pool, s.suite.embedder.get());
        for (double k : {0.5, 1.25, 3.0, 7.75}) {
            auto scaled = pool;
            for (auto& e : scaled) e.score.unified *= k;
            ASSERT_EQ(select_final(scaled, s.suite.embedder.get()), choice);
        }
    }
}

TEST(AdaptiveStop, NothingProcessedAfterQuotaAndThresholdNeverDecreases) {
    Gen g(9);
    for (int trial = 0; trial < 300; ++trial) {
        SearchConfig c;
        c.n_high = g.integer(1, 5);
        c.delta = g.real(0.0, 2.0);
        Scripted s(c);
        std::vector<int> ids;
        int n = g.integer(1, 16);
        for (int i = 1; i <= n; ++i) {
            s[i].late = g.real(3.0, 10.0);
            s[i].spec = g.integer(3, 5);
            ids.push_back(i);
        }
        auto ctx = s.context();
        RunTrace trace;
        Evaluator ev(s.instance, c, s.suite);
        ev.prepare_questions();
        std::vector<Candidate> cands;
        for (int id : ids) {
            Candidate cand;
            cand.state = ctx.spawn(s.instance, id);
            cand.state = ctx.sampler.sample_partial(s.instance, cand.state, 28, c.early_timestep(), trace.ledger,
                                                    Phase::early);
            cands.push_back(std::move(cand));
        }
        auto r = adaptive_stop(s.instance, cands, c, ctx, ev, trace);
        for (std::size_t i = 1; i < r.s_rt_history.size(); ++i) ASSERT_GE(r.s_rt_history[i], r.s_rt_history[i - 1]);
        int aligned = 0;
        for (const auto& e : trace.events) {
            if (e.kind == EventKind::scored) ASSERT_LT(aligned, c.n_high);
            if (e.kind == EventKind::completed && e.score->s_spec >= c.s_high) ++aligned;
        }
        ASSERT_LE(r.n_cnt, c.n_high);
        for (const auto& p : r.pool) ASSERT_EQ(trace.ledger.steps_for(p.candidate_id), 28);
    }
}

TEST(AdeCot, PhaseCostConservationUnderRandomSchedules) {
    Gen g(10);
    GeneratorSpec spec;
    spec.count = 20;
    auto instances = generate_instances(spec);
    for (int trial = 0; trial < 20; ++trial) {
        SearchConfig c;
        c.total_steps = g.integer(6, 40);
        c.t_early = g.integer(1, c.total_steps - 2);
        c.t_late = g.integer(c.t_early + 1, c.total_steps - 1);
        c.n = g.integer(2, 16);
        c.n_high = g.integer(1, 4);
        Harness h(SimParams{}, c.total_steps);
        auto ctx = h.context(static_cast<std::uint64_t>(trial));
        const auto& inst = instances[static_cast<std::size_t>(trial)];
        auto t = ade_cot(inst, c, ctx);
        for (int id : t.completed_ids()) ASSERT_EQ(t.ledger.steps_for(id), c.total_steps) << inst.id << " " << id;
        std::int64_t sum = 0;
        for (const auto& e : t.ledger.entries()) sum += e.steps;
        ASSERT_EQ(sum, t.ledger.total());
    }
}

TEST(AdeCot, ZeroThresholdsDominateBestOfN) {
    Gen g(11);
    GeneratorSpec spec;
    spec.count = 10;
    spec.seed = 77;
    auto instances = generate_instances(spec);
    for (const auto& inst : instances) {
        SearchConfig c;
        c.n = g.integer(2, 10);
        c.s_reject = -std::numeric_limits<double>::infinity();
        c.tau_sim = 1.0;
        c.delta = std::numeric_limits<double>::infinity();
        c.n_high = std::numeric_limits<int>::max();
        c.gamma = 0.0;
        Harness h;
        auto ctx = h.context(g.integer(0, 1000));
        auto bon = best_of_n(inst, c, ctx);
        auto ade = ade_cot(inst, c, ctx);
        auto a = bon.completed_ids(), b = ade.completed_ids();
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        ASSERT_EQ(a, b);
        for (const auto& e : ade.events)
            if (e.kind == EventKind::completed && e.candidate_id == bon.final_candidate)
                ASSERT_GE(ade.final_score.unified, e.score->unified);
    }
}
