#include <gtest/gtest.h>

#include <set>

#include "adecot/sim.hpp"
#include "adecot/studies.hpp"
#include "test_support.hpp"

using namespace adecot;
using namespace testing_support;

TEST(OneStepEstimate, DirectEvaluation) {
    EXPECT_DOUBLE_EQ(one_step_estimate(0.5, 0.5, 1.0), 0.0);
    EXPECT_DOUBLE_EQ(one_step_estimate(0.37, 0.0, 12.0), 0.37);
    std::vector<double> x = {0.5, 1.0}, eps = {1.0, 0.5};
    auto out = one_step_estimate(x, 0.5, eps);
    EXPECT_DOUBLE_EQ(out[0], 0.0);
    EXPECT_DOUBLE_EQ(out[1], 0.75);
    std::vector<double> short_eps = {1.0};
    EXPECT_THROW(one_step_estimate(x, 0.5, short_eps), DimensionMismatch);
}

TEST(NoiseSchedule, LinearBoundariesAndMonotone) {
    auto s = NoiseSchedule::linear(28);
    EXPECT_EQ(s(0), 0.0);
    EXPECT_EQ(s(28), 1.0);
    for (int t = 1; t <= 28; ++t) EXPECT_GE(s(t), s(t - 1));
    EXPECT_THROW(s(29), InvalidArgument);
    EXPECT_THROW(NoiseSchedule({0.0, 0.8}), InvalidArgument);
    EXPECT_THROW(NoiseSchedule({0.0, 0.6, 0.5, 1.0}), InvalidArgument);
}

class SimSamplerTest : public ::testing::Test {
  protected:
    Harness h;
    EditInstance inst = sim_instance("s-1", {QualityDistribution::Kind::normal, 6.5, 1.2});
    NfeLedger ledger;
    Sampler& sampler() { return *h.backend.sampler; }
};

TEST_F(SimSamplerTest, PartialSampleChargesStepDifference) {
    auto s = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    EXPECT_EQ(s.timestep, 28);
    EXPECT_EQ(s.nfe_spent, 0);
    s = sampler().sample_partial(inst, s, 28, 8, ledger, Phase::early);
    EXPECT_EQ(s.timestep, 8);
    EXPECT_EQ(ledger.total(), 20);
    EXPECT_EQ(s.nfe_spent, 20);
}

TEST_F(SimSamplerTest, EmptyIntervalChargesNothing) {
    auto s = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    s = sampler().sample_partial(inst, s, 28, 8, ledger, Phase::early);
    auto same = sampler().sample_partial(inst, s, 8, 8, ledger, Phase::late);
    EXPECT_EQ(ledger.total(), 20);
    EXPECT_EQ(same.timestep, 8);
    EXPECT_EQ(same.latent, s.latent);
    EXPECT_EQ(ledger.entries().size(), 1u);
}

TEST_F(SimSamplerTest, ChainedSamplingMatchesSinglePass) {
    NfeLedger single;
    auto a = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    a = sampler().sample_partial(inst, a, 28, 0, single, Phase::full);
    auto b = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    b = sampler().sample_partial(inst, b, 28, 8, ledger, Phase::early);
    b = sampler().sample_partial(inst, b, 8, 0, ledger, Phase::resume);
    EXPECT_EQ(single.total(), 28);
    EXPECT_EQ(ledger.total(), single.total());
    EXPECT_EQ(sampler().decode(inst, a), sampler().decode(inst, b));
}

TEST_F(SimSamplerTest, TimestepOrderViolations) {
    auto s = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    EXPECT_THROW(sampler().sample_partial(inst, s, 20, 8, ledger, Phase::early), InvalidArgument);
    s = sampler().sample_partial(inst, s, 28, 8, ledger, Phase::early);
    EXPECT_THROW(sampler().sample_partial(inst, s, 8, 12, ledger, Phase::late), InvalidArgument);
    EXPECT_THROW(sampler().sample_partial(inst, s, 8, -1, ledger, Phase::late), InvalidArgument);
    EXPECT_EQ(ledger.total(), 20);
}

TEST_F(SimSamplerTest, PreviewNeedsCachedPredictionAndIsFree) {
    auto s = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    EXPECT_THROW(sampler().one_step_preview(inst, s, ledger), InvalidArgument);
    s = sampler().sample_partial(inst, s, 28, 20, ledger, Phase::early);
    auto img = sampler().one_step_preview(inst, s, ledger);
    EXPECT_NO_THROW(img.validate());
    EXPECT_TRUE(img.same_shape(inst.source));
    EXPECT_EQ(ledger.total(), 8);
    EXPECT_EQ(s.nfe_spent, 8);
}

TEST_F(SimSamplerTest, DecodeRequiresCleanState) {
    auto s = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    s = sampler().sample_partial(inst, s, 28, 1, ledger, Phase::early);
    EXPECT_THROW(sampler().decode(inst, s), InvalidArgument);
}

TEST_F(SimSamplerTest, SpawnIsDeterministicPerSeed) {
    auto a = sampler().spawn_candidate(inst, 0, 77, inst.instruction);
    auto b = sampler().spawn_candidate(inst, 5, 77, inst.instruction);
    auto c = sampler().spawn_candidate(inst, 6, 78, inst.instruction);
    EXPECT_EQ(SimSampler::latent_of(a).hidden.q_star, SimSampler::latent_of(b).hidden.q_star);
    EXPECT_EQ(SimSampler::latent_of(a).x_t, SimSampler::latent_of(b).x_t);
    EXPECT_NE(SimSampler::latent_of(a).hidden.q_star, SimSampler::latent_of(c).hidden.q_star);
}

TEST_F(SimSamplerTest, DistinctSeedsGiveDistinctCandidates) {
    std::set<int> ids;
    std::set<double> qualities;
    for (int i = 0; i < 16; ++i) {
        auto s = sampler().spawn_candidate(inst, i, candidate_seed(3, i), inst.instruction);
        ids.insert(s.candidate_id);
        qualities.insert(SimSampler::latent_of(s).hidden.q_star);
    }
    EXPECT_EQ(ids.size(), 16u);
    EXPECT_EQ(qualities.size(), 16u);
}

TEST_F(SimSamplerTest, ShortRunChargesItsSteps) {
    auto s = sampler().spawn_candidate(inst, 0, 11, inst.instruction);
    auto img = sampler().short_run_preview(inst, s, 8, ledger);
    EXPECT_TRUE(img.same_shape(inst.source));
    EXPECT_EQ(ledger.total(), 8);
    EXPECT_EQ(ledger.steps_for(Phase::short_preview), 8);
    EXPECT_EQ(s.timestep, 28);
}

TEST(SimSpawn, UniformQualityMeanMatches) {
    Harness h;
    auto inst = sim_instance("mc", {QualityDistribution::Kind::uniform, 4.0, 9.0});
    double sum = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        auto s = h.backend.sampler->spawn_candidate(inst, i, candidate_seed(1, i), inst.instruction);
        sum += SimSampler::latent_of(s).hidden.q_star;
    }
    EXPECT_NEAR(sum / n, 6.5, 0.05);
}

TEST(SimSpawn, CeilingCollapsesDraws) {
    Harness h;
    QualityDistribution d{QualityDistribution::Kind::normal, 7.0, 1.0, 7.5};
    auto inst = sim_instance("ceil", d);
    int converged = 0;
    for (int i = 0; i < 2000; ++i) {
        auto s = h.backend.sampler->spawn_candidate(inst, i, candidate_seed(1, i), inst.instruction);
        const auto& hidden = SimSampler::latent_of(s).hidden;
        EXPECT_LE(hidden.q_star, 7.5);
        if (hidden.converged) {
            ++converged;
            EXPECT_EQ(hidden.q_star, 7.5);
        }
    }
    // P(z >= 0.5) is about 0.31
    EXPECT_NEAR(converged / 2000.0, 0.3085, 0.03);
}

TEST(SimNoiseless, PreviewAndDecodeScoreTheHiddenQuality) {
    Harness h(noiseless());
    auto inst = sim_instance("n0", fixed_quality(8.0));
    NfeLedger ledger;
    auto s = h.backend.sampler->spawn_candidate(inst, 0, 5, inst.instruction);
    s = h.backend.sampler->sample_partial(inst, s, 28, 20, ledger, Phase::early);
    auto preview = h.backend.sampler->one_step_preview(inst, s, ledger);
    EXPECT_DOUBLE_EQ(h.backend.general->score(inst.source, preview, inst.instruction).value(), 8.0);
    s = h.backend.sampler->sample_partial(inst, s, 20, 0, ledger, Phase::resume);
    auto final = h.backend.sampler->decode(inst, s);
    EXPECT_DOUBLE_EQ(h.backend.general->score(inst.source, final, inst.instruction).value(), 8.0);
}

TEST(SimLatentPreview, EstimateRecoversObservedQuality) {
    Harness h;
    auto inst = sim_instance("lat", {QualityDistribution::Kind::normal, 6.0, 1.0});
    NfeLedger ledger;
    auto s = h.backend.sampler->spawn_candidate(inst, 0, 9, inst.instruction);
    for (int t : {24, 20, 12, 4}) {
        s = h.backend.sampler->sample_partial(inst, s, s.timestep, t, ledger, Phase::early);
        const auto& latent = SimSampler::latent_of(s);
        double sigma = h.backend.sampler->schedule()(t);
        auto obs = h.backend.world->observe(inst, s.seed, latent.hidden, t, 28, SimView::trajectory);
        EXPECT_NEAR(sim_preview_quality(latent, sigma, 10.0), obs.gen_obs, 1e-9);
    }
    s = h.backend.sampler->sample_partial(inst, s, 4, 0, ledger, Phase::finish);
    const auto& clean = SimSampler::latent_of(s);
    EXPECT_NEAR(sim_preview_quality(clean, 0.0, 10.0), clean.hidden.q_star, 1e-12);
}

TEST(SimNoise, ChannelNoiseShrinksTowardCleanTimestep) {
    SimParams p;
    for (int t = 1; t <= 28; ++t) EXPECT_LE(p.noise_factor(t - 1, 28), p.noise_factor(t, 28));
    EXPECT_EQ(p.noise_factor(0, 28), 0.0);
}

TEST(SimNoise, ObservationErrorBoundedByChannelStd) {
    Harness h;
    auto inst = sim_instance("err", {QualityDistribution::Kind::normal, 6.0, 1.0});
    const auto& p = h.backend.world->params();
    for (int t : {20, 12, 4, 0}) {
        double sum_sq = 0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            auto hidden = h.backend.world->draw_hidden(inst, candidate_seed(2, i));
            hidden.q_star = 5.0;  // away from the clamp bounds
            auto obs = h.backend.world->observe(inst, candidate_seed(2, i), hidden, t, 28, SimView::trajectory);
            sum_sq += (obs.gen_obs - 5.0) * (obs.gen_obs - 5.0);
        }
        double expected = p.gen_noise * p.noise_factor(t, 28);
        EXPECT_LE(std::sqrt(sum_sq / n), expected * 1.05 + 1e-12) << "t=" << t;
    }
}

TEST(SimCorrelation, EarlyModerateLateStrong) {
    SimParams params;
    SimBackend backend(params);
    GeneratorSpec spec;
    spec.count = 125;
    auto instances = generate_instances(spec, params);
    backend.register_instances(instances);
    auto study = preview_correlation_study(instances, backend, SearchConfig{}, 1, 8);
    EXPECT_EQ(study.candidates, 1000u);
    EXPECT_GE(study.r_early, 0.4);
    EXPECT_LE(study.r_early, 0.7);
    EXPECT_GE(study.r_late, 0.9);
}
