#pragma once

// Stochastic stand-in for a flow-matching editor and its judges.
//
// Every candidate carries one hidden quality q*. Anything observed about it
// at remaining timestep t (general score, caption similarity, pixel change,
// embedding) is q* plus channel noise of std s_ch * (t/T)^p, drawn from a
// counter-based generator so results are order independent. Rendered
// images are registered in a shared SimWorld so the simulated providers can
// look up what an image "shows".

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "adecot/core.hpp"
#include "adecot/providers.hpp"
#include "adecot/rng.hpp"
#include "adecot/sampler.hpp"
#include "adecot/verifiers.hpp"

namespace adecot {

struct SimParams {
    int height = 32;
    int width = 32;
    int channels = 3;
    double s_max = 10.0;

    // channel noise std at t = T; decays as (t/T)^noise_exponent
    double gen_noise = 8.0;
    double cap_noise = 3.0;       // in quality units, before cap_slope
    double pixel_noise = 0.12;
    double embed_noise = 0.06;
    double noise_exponent = 3.0;
    double short_run_factor = 0.5;  // short runs are sharper than a one-step preview at the same depth

    double cap_slope = 0.04;           // caption similarity per quality point
    double region_hit_threshold = 5.0;
    double change_amplitude = 0.4;
    double collateral_amplitude = 0.2;
    double texture_amplitude = 0.004;
    double mode_jitter = 0.05;
    int embed_dim = 64;

    // rubric thresholds for the simulated yes/no checks
    double rubric_quality = 8.0;
    double rubric_distractors[3] = {4.0, 5.0, 7.0};

    double noise_factor(int t, int total) const {
        if (t <= 0) return 0.0;
        return std::pow(static_cast<double>(t) / total, noise_exponent);
    }
};

/// Hidden per-candidate draw.
struct SimHidden {
    double q_star = 0.0;
    bool converged = false;
    int mode = -1;
    bool region_hit = false;
};

enum class SimView { trajectory, short_run, source };

/// What a rendered image shows.
struct SimObservation {
    std::uint64_t instance_key = 0;
    std::uint64_t candidate_seed = 0;
    int timestep = 0;
    int total_steps = 28;
    SimView view = SimView::trajectory;
    SimHidden hidden;
    double gen_obs = 0.0;
    double cap_obs = 0.0;
};

struct SimLatent : LatentPayload {
    std::uint64_t instance_key = 0;
    std::uint64_t seed = 0;
    int timestep = 0;
    SimHidden hidden;
    double x_t = 0.0;
    std::optional<double> eps;  // cached prediction from the last step
};

inline std::uint64_t image_fingerprint(const Image& image) {
    std::uint64_t h = hash_combine(hash_combine(hash_combine(0x51ed2701ULL, image.height), image.width), image.channels);
    for (double v : image.data) {
        auto q = static_cast<std::uint64_t>(std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
        h = hash_combine(h, q);
    }
    return h;
}

inline double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 65535.0) / 65535.0; }

inline Captions sim_captions(const SimMeta& meta) {
    std::string edited = meta.scene;
    auto pos = edited.find(meta.edit_object);
    if (!meta.edit_object.empty() && pos != std::string::npos) {
        edited.replace(pos, meta.edit_object.size(), meta.edit_result);
    } else {
        edited += " with " + meta.edit_result;
    }
    return {"a photo of " + meta.scene, "a photo of " + edited};
}

inline std::vector<double> unit_vector(std::uint64_t key, int dim) {
    KeyedRng rng(key);
    std::vector<double> v(static_cast<std::size_t>(dim));
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

/// Registry shared by the simulated sampler and providers.
class SimWorld {
  public:
    explicit SimWorld(SimParams params = {}) : params_(params) {}

    const SimParams& params() const { return params_; }

    static std::uint64_t instance_key(const EditInstance& instance) { return hash_string(instance.id); }

    void register_instance(const EditInstance& instance) {
        if (!instance.sim_meta) throw InvalidArgument("instance '" + instance.id + "' has no simulator metadata");
        std::lock_guard lock(mutex_);
        auto key = instance_key(instance);
        if (instances_.count(key)) return;
        instances_.emplace(key, Record{instance.id, *instance.sim_meta, instance.source.height,
                                       instance.source.width});
        SimObservation obs;
        obs.instance_key = key;
        obs.view = SimView::source;
        images_.emplace(image_fingerprint(instance.source), obs);
    }

    SimHidden draw_hidden(const EditInstance& instance, std::uint64_t seed) const {
        const auto& meta = require_meta(instance);
        KeyedRng rng{instance_key(instance), seed, 0x71ULL};
        const auto& dist = meta.quality;
        double q = dist.kind == QualityDistribution::Kind::uniform ? dist.a + (dist.b - dist.a) * rng.uniform()
                                                                   : dist.a + dist.b * rng.normal();
        q = std::clamp(q, 0.0, params_.s_max);
        SimHidden h;
        if (q >= dist.ceiling) {
            h.q_star = dist.ceiling;
            h.converged = true;
            h.mode = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(std::max(1, meta.correct_modes)));
        } else {
            h.q_star = q;
        }
        h.region_hit = h.q_star >= params_.region_hit_threshold;
        return h;
    }

    /// Noisy channel observations of a candidate at remaining timestep t.
    SimObservation observe(const EditInstance& instance, std::uint64_t seed, const SimHidden& hidden, int t,
                           int total_steps, SimView view) const {
        double f = params_.noise_factor(t, total_steps);
        if (view == SimView::short_run) f *= params_.short_run_factor;
        KeyedRng rng{instance_key(instance), seed, static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(view), 0x0bULL};
        SimObservation obs;
        obs.instance_key = instance_key(instance);
        obs.candidate_seed = seed;
        obs.timestep = t;
        obs.total_steps = total_steps;
        obs.view = view;
        obs.hidden = hidden;
        obs.gen_obs = std::clamp(hidden.q_star + params_.gen_noise * f * rng.normal(), 0.0, params_.s_max);
        obs.cap_obs = std::clamp(hidden.q_star + params_.cap_noise * f * rng.normal(), 0.0, params_.s_max);
        return obs;
    }

    /// Draws the image for an observation and registers it.
    Image render(const EditInstance& instance, const SimObservation& obs, int total_steps) {
        const auto& meta = require_meta(instance);
        const Image& src = instance.source;
        Image out = src;
        const double f = params_.noise_factor(obs.timestep, total_steps) *
                         (obs.view == SimView::short_run ? params_.short_run_factor : 1.0);
        Rect target = meta.edit_region;
        if (!obs.hidden.region_hit) {
            int shift = src.width / 2;
            target.x0 = (target.x0 + shift) % src.width;
            target.x1 = std::min(src.width, target.x0 + meta.edit_region.x1 - meta.edit_region.x0);
        }
        const double collateral = params_.collateral_amplitude * (1.0 - obs.hidden.q_star / params_.s_max);
        KeyedRng noise{obs.instance_key, obs.candidate_seed, static_cast<std::uint64_t>(obs.timestep),
                       static_cast<std::uint64_t>(obs.view), 0x9cULL};
        KeyedRng texture{obs.instance_key, obs.candidate_seed, 0x7eULL};
        KeyedRng pattern{obs.instance_key, 0x9aULL};
        for (int y = 0; y < src.height; ++y) {
            for (int x = 0; x < src.width; ++x) {
                double change = target.contains(y, x) ? params_.change_amplitude : 0.0;
                change += collateral * pattern.uniform();
                for (int c = 0; c < src.channels; ++c) {
                    double s = src.at(y, x, c);
                    double sign = s < 0.5 ? 1.0 : -1.0;
                    double v = s + sign * change + params_.pixel_noise * f * noise.normal() +
                               params_.texture_amplitude * texture.uniform();
                    out.at(y, x, c) = quantize(v);
                }
            }
        }
        std::lock_guard lock(mutex_);
        images_[image_fingerprint(out)] = obs;
        return out;
    }

    std::optional<SimObservation> lookup(const Image& image) const {
        std::lock_guard lock(mutex_);
        auto it = images_.find(image_fingerprint(image));
        if (it == images_.end()) return std::nullopt;
        return it->second;
    }

    const SimMeta& meta_for(std::uint64_t key) const {
        std::lock_guard lock(mutex_);
        auto it = instances_.find(key);
        if (it == instances_.end()) throw ProviderError("unknown simulated instance");
        return it->second.meta;
    }

    /// Instance behind a registered source image.
    std::uint64_t source_key(const Image& source) const {
        auto obs = lookup(source);
        if (!obs || obs->view != SimView::source) throw ProviderError("image is not a registered source");
        return obs->instance_key;
    }

    std::vector<double> embed_text(const std::string& text) const {
        return unit_vector(hash_combine(hash_string(text), 0x7e47ULL), params_.embed_dim);
    }

    std::vector<double> embed_observation(const SimObservation& obs) const {
        const SimMeta& meta = meta_for(obs.instance_key);
        const auto captions = sim_captions(meta);
        const int d = params_.embed_dim;
        double a;
        std::vector<double> ref;
        std::vector<double> u;
        if (obs.view == SimView::source) {
            a = meta.caption_alignment;
            ref = embed_text(captions.original);
            u = unit_vector(hash_combine(obs.instance_key, 0x50ULL), d);
        } else {
            a = std::clamp(params_.cap_slope * obs.cap_obs, -1.0, 1.0);
            ref = embed_text(captions.edited);
            if (obs.hidden.converged) {
                u = unit_vector(hash_combine(obs.instance_key, 0x3000ULL + static_cast<std::uint64_t>(obs.hidden.mode)), d);
                auto jitter = unit_vector(hash_combine(obs.candidate_seed, 0x31ULL), d);
                for (int i = 0; i < d; ++i) u[i] += params_.mode_jitter * jitter[i];
            } else {
                u = unit_vector(hash_combine(hash_combine(obs.instance_key, obs.candidate_seed), 0x32ULL), d);
            }
            double e = params_.embed_noise * params_.noise_factor(obs.timestep, obs.total_steps) *
                       (obs.view == SimView::short_run ? params_.short_run_factor : 1.0);
            if (e > 0.0) {
                KeyedRng rng{obs.instance_key, obs.candidate_seed, static_cast<std::uint64_t>(obs.timestep),
                             static_cast<std::uint64_t>(obs.view), 0x33ULL};
                for (int i = 0; i < d; ++i) u[i] += e * rng.normal();
            }
        }
        // u orthogonal to ref, unit length; then mix so that <out, ref> = a
        double dot = 0.0;
        for (int i = 0; i < d; ++i) dot += u[i] * ref[i];
        double norm = 0.0;
        for (int i = 0; i < d; ++i) {
            u[i] -= dot * ref[i];
            norm += u[i] * u[i];
        }
        norm = std::sqrt(norm);
        const double b = std::sqrt(std::max(0.0, 1.0 - a * a));
        std::vector<double> out(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) out[i] = a * ref[i] + b * u[i] / norm;
        return out;
    }

  private:
    struct Record {
        std::string id;
        SimMeta meta;
        int height = 0;
        int width = 0;
    };

    static const SimMeta& require_meta(const EditInstance& instance) {
        if (!instance.sim_meta) throw InvalidArgument("instance '" + instance.id + "' has no simulator metadata");
        return *instance.sim_meta;
    }

    SimParams params_;
    mutable std::mutex mutex_;
    std::unordered_map<std::uint64_t, Record> instances_;
    std::unordered_map<std::uint64_t, SimObservation> images_;
};

// ---------------------------------------------------------------------------
// Sampler

class SimSampler : public Sampler {
  public:
    SimSampler(std::shared_ptr<SimWorld> world, int total_steps = 28)
        : world_(std::move(world)), total_steps_(total_steps), schedule_(NoiseSchedule::linear(total_steps)) {}

    int total_steps() const override { return total_steps_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    SimWorld& world() { return *world_; }

    /// Hidden draw behind a candidate, for studies and tests.
    static const SimLatent& latent_of(const CandidateState& state) {
        auto p = dynamic_cast<const SimLatent*>(state.latent.get());
        if (!p) throw InvalidArgument("candidate does not hold a simulator latent");
        return *p;
    }

  protected:
    LatentHandle do_spawn(const EditInstance& instance, const CandidateState& state) override {
        world_->register_instance(instance);
        auto latent = std::make_shared<SimLatent>();
        latent->instance_key = SimWorld::instance_key(instance);
        latent->seed = state.seed;
        latent->timestep = total_steps_;
        latent->hidden = world_->draw_hidden(instance, state.seed);
        KeyedRng rng{latent->instance_key, state.seed, 0x40ULL};
        latent->x_t = rng.normal();
        return latent;
    }

    SampleResult do_sample(const EditInstance& instance, const CandidateState& state, int to_t) override {
        const auto& prev = latent_of(state);
        auto next = std::make_shared<SimLatent>(prev);
        next->timestep = to_t;
        const double sigma = schedule_(to_t);
        const double x0 = prev.hidden.q_star / world_->params().s_max;
        KeyedRng rng{prev.instance_key, prev.seed, 0x40ULL};
        const double noise = rng.normal();
        next->x_t = (1.0 - sigma) * x0 + sigma * noise;
        if (sigma > 0.0) {
            auto obs = world_->observe(instance, prev.seed, prev.hidden, to_t, total_steps_, SimView::trajectory);
            next->eps = (next->x_t - obs.gen_obs / world_->params().s_max) / sigma;
        } else {
            next->eps = 0.0;
        }
        return {next, state.timestep - to_t};
    }

    ImageResult do_preview(const EditInstance& instance, const CandidateState& state) override {
        const auto& latent = latent_of(state);
        if (!latent.eps) throw InvalidArgument("missing cached prediction for preview");
        auto obs = world_->observe(instance, latent.seed, latent.hidden, state.timestep, total_steps_,
                                   SimView::trajectory);
        return {world_->render(instance, obs, total_steps_), 0};
    }

    ImageResult do_short_run(const EditInstance& instance, const CandidateState& state, int steps) override {
        const auto& latent = latent_of(state);
        int depth = total_steps_ - steps;
        auto obs = world_->observe(instance, latent.seed, latent.hidden, depth, total_steps_, SimView::short_run);
        return {world_->render(instance, obs, total_steps_), steps};
    }

    Image do_decode(const EditInstance& instance, const CandidateState& state) override {
        const auto& latent = latent_of(state);
        auto obs = world_->observe(instance, latent.seed, latent.hidden, 0, total_steps_, SimView::trajectory);
        return world_->render(instance, obs, total_steps_);
    }

  private:
    std::shared_ptr<SimWorld> world_;
    int total_steps_;
    NoiseSchedule schedule_;
};

/// Quality the one-step preview of a simulator latent decodes to:
/// x_t - sigma * eps, rescaled to the score range.
inline double sim_preview_quality(const SimLatent& latent, double sigma, double s_max) {
    return one_step_estimate(latent.x_t, sigma, latent.eps.value_or(0.0)) * s_max;
}

// ---------------------------------------------------------------------------
// Providers

class SimGeneralScorer : public GeneralScorer {
  public:
    explicit SimGeneralScorer(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    GeneralScore score(const Image&, const Image& edited, const std::string&) override {
        auto obs = world_->lookup(edited);
        if (!obs || obs->view == SimView::source) throw ProviderError("general scorer: unknown image");
        return {obs->gen_obs, obs->gen_obs};
    }

  private:
    std::shared_ptr<SimWorld> world_;
};

class SimRegionProvider : public RegionProvider {
  public:
    explicit SimRegionProvider(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    RegionObjects identify(const Image& source, const std::string&) override {
        const auto& meta = world_->meta_for(world_->source_key(source));
        RegionObjects out;
        if (meta.mask_origin == RegionOrigin::edit_object) out.edit_object = std::vector<std::string>{meta.edit_object};
        if (meta.mask_origin == RegionOrigin::inverted_keep_object) out.keep_object = std::vector<std::string>{"background"};
        return out;
    }

  private:
    std::shared_ptr<SimWorld> world_;
};

/// Grounds the edit object to its (possibly misplaced) rectangle and
/// anything else to the complement.
class SimGrounder : public Grounder {
  public:
    explicit SimGrounder(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    std::vector<std::uint8_t> ground(const Image& source, const std::vector<std::string>& objects) override {
        const auto& meta = world_->meta_for(world_->source_key(source));
        Rect r = meta.edit_region;
        r.x0 = std::clamp(r.x0 + meta.mask_offset, 0, source.width);
        r.x1 = std::clamp(r.x1 + meta.mask_offset, 0, source.width);
        bool is_edit = std::find(objects.begin(), objects.end(), meta.edit_object) != objects.end();
        std::vector<std::uint8_t> mask(source.pixel_count());
        for (int y = 0; y < source.height; ++y)
            for (int x = 0; x < source.width; ++x)
                mask[static_cast<std::size_t>(y) * source.width + x] = (r.contains(y, x) == is_edit) ? 1 : 0;
        return mask;
    }

  private:
    std::shared_ptr<SimWorld> world_;
};

class SimCaptionProvider : public CaptionProvider {
  public:
    explicit SimCaptionProvider(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    Captions caption(const Image& source, const std::string&) override {
        return sim_captions(world_->meta_for(world_->source_key(source)));
    }

  private:
    std::shared_ptr<SimWorld> world_;
};

class SimEmbedder : public Embedder {
  public:
    explicit SimEmbedder(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    std::vector<double> embed_image(const Image& image) override {
        auto obs = world_->lookup(image);
        if (!obs) throw ProviderError("embedder: unknown image");
        return world_->embed_observation(*obs);
    }
    std::vector<double> embed_text(const std::string& text) override { return world_->embed_text(text); }

  private:
    std::shared_ptr<SimWorld> world_;
};

class SimQuestionProvider : public QuestionProvider {
  public:
    explicit SimQuestionProvider(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    std::vector<std::string> questions(const Image& source, const std::string&) override {
        const auto& meta = world_->meta_for(world_->source_key(source));
        return {
            "Is the change confined to the " + meta.edit_object + "?",
            "Does the " + meta.edit_result + " look natural and complete?",
            "Is a " + meta.edit_result + " visible?",
            "Is the original " + meta.edit_object + " gone?",
            "Is the rest of the scene (" + meta.scene + ") intact?",
        };
    }

  private:
    std::shared_ptr<SimWorld> world_;
};

/// Rubric: region hit, quality at least rubric_quality, and three distractor
/// thresholds, all judged on the observed quality of the edited image.
class SimAnswerProvider : public AnswerProvider {
  public:
    explicit SimAnswerProvider(std::shared_ptr<SimWorld> world) : world_(std::move(world)) {}
    std::vector<std::string> answers(const Image&, const Image& edited, const std::string&,
                                     const std::vector<std::string>& questions) override {
        auto obs = world_->lookup(edited);
        if (!obs || obs->view == SimView::source) throw ProviderError("answer provider: unknown image");
        const auto& p = world_->params();
        const double q = obs->gen_obs;
        std::vector<bool> yes = {obs->hidden.region_hit, q >= p.rubric_quality, q >= p.rubric_distractors[0],
                                 q >= p.rubric_distractors[1], q >= p.rubric_distractors[2]};
        std::vector<std::string> out;
        for (std::size_t i = 0; i < questions.size(); ++i) out.push_back(i < yes.size() && yes[i] ? "yes" : "no");
        return out;
    }

  private:
    std::shared_ptr<SimWorld> world_;
};

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct DifficultyBand {
    double weight = 1.0;
    double mean = 6.5;
};

struct GeneratorSpec {
    int count = 200;
    std::uint64_t seed = 2024;
    std::vector<DifficultyBand> bands = {{0.3, 8.5}, {0.4, 6.5}, {0.3, 4.5}};
    double spread = 1.2;
    double ceiling_offset = 0.5;  // ceiling = mean + offset * spread, capped at S_max
    int max_modes = 2;
    double keep_object_fraction = 0.1;
    double unavailable_mask_fraction = 0.1;
    double misplaced_mask_fraction = 0.2;
    double weak_caption_fraction = 0.15;
};

inline Image render_source(std::uint64_t key, int height, int width, int channels) {
    Image img(height, width, channels);
    KeyedRng rng{key, 0x5eULL};
    std::vector<double> base(static_cast<std::size_t>(channels)), gx(base.size()), gy(base.size());
    for (int c = 0; c < channels; ++c) {
        base[c] = 0.2 + 0.6 * rng.uniform();
        gx[c] = 0.2 * (rng.uniform() - 0.5);
        gy[c] = 0.2 * (rng.uniform() - 0.5);
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < channels; ++c) {
                double v = base[c] + gx[c] * x / width + gy[c] * y / height + 0.05 * (rng.uniform() - 0.5);
                img.at(y, x, c) = quantize(std::clamp(v, 0.1, 0.9));
            }
    return img;
}

inline std::vector<EditInstance> generate_instances(const GeneratorSpec& spec, const SimParams& params = {}) {
    static const char* kObjects[] = {"car", "dog", "vase", "hat", "bicycle", "lamp", "cup", "bench"};
    static const char* kResults[] = {"truck", "cat", "bouquet", "crown", "scooter", "candle", "teapot", "sofa"};
    static const char* kPlaces[] = {"on a street", "in a garden", "on a table", "by the sea", "in a kitchen",
                                    "in a park"};
    static const char* kColors[] = {"red", "blue", "old", "small", "shiny", "wooden"};
    if (spec.count < 1) throw InvalidArgument("generator count must be positive");
    if (spec.bands.empty()) throw InvalidArgument("generator needs at least one difficulty band");
    double total_weight = 0.0;
    for (const auto& b : spec.bands) total_weight += b.weight;
    if (!(total_weight > 0.0)) throw InvalidArgument("difficulty band weights must sum to a positive value");

    std::vector<EditInstance> out;
    out.reserve(static_cast<std::size_t>(spec.count));
    for (int i = 0; i < spec.count; ++i) {
        KeyedRng rng{spec.seed, static_cast<std::uint64_t>(i), 0x6eULL};
        char id[32];
        std::snprintf(id, sizeof id, "sim-%04d", i);
        EditInstance inst;
        inst.id = id;
        double pick = rng.uniform() * total_weight;
        const DifficultyBand* band = &spec.bands.back();
        for (const auto& b : spec.bands) {
            if (pick < b.weight) {
                band = &b;
                break;
            }
            pick -= b.weight;
        }
        SimMeta meta;
        meta.quality.kind = QualityDistribution::Kind::normal;
        meta.quality.a = band->mean;
        meta.quality.b = spec.spread;
        meta.quality.ceiling = std::min(params.s_max, band->mean + spec.ceiling_offset * spec.spread);
        int k = static_cast<int>(rng.next_u64() % 8);
        meta.edit_object = kObjects[k];
        meta.edit_result = kResults[k];
        meta.scene = std::string("a ") + kColors[rng.next_u64() % 6] + " " + meta.edit_object + " " +
                     kPlaces[rng.next_u64() % 6];
        int rh = std::max(4, params.height / 4 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(std::max(1, params.height / 8))));
        int rw = std::max(4, params.width / 4 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(std::max(1, params.width / 8))));
        int y0 = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(params.height - rh + 1));
        int x0 = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(params.width / 2 - rw / 2 + 1));
        meta.edit_region = {y0, x0, y0 + rh, x0 + rw};
        double u = rng.uniform();
        meta.mask_origin = u < spec.unavailable_mask_fraction ? RegionOrigin::unavailable
                           : u < spec.unavailable_mask_fraction + spec.keep_object_fraction
                               ? RegionOrigin::inverted_keep_object
                               : RegionOrigin::edit_object;
        if (rng.uniform() < spec.misplaced_mask_fraction) meta.mask_offset = 4 + static_cast<int>(rng.next_u64() % 5);
        meta.caption_alignment = rng.uniform() < spec.weak_caption_fraction ? 0.22 : 0.31;
        meta.correct_modes = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(std::max(1, spec.max_modes)));
        inst.instruction = "replace the " + meta.edit_object + " with a " + meta.edit_result;
        inst.source = render_source(hash_string(inst.id), params.height, params.width, params.channels);
        inst.sim_meta = meta;
        out.push_back(std::move(inst));
    }
    return out;
}

/// Sampler plus the full set of simulated providers over one world.
struct SimBackend {
    std::shared_ptr<SimWorld> world;
    std::shared_ptr<SimSampler> sampler;
    std::shared_ptr<SimGeneralScorer> general;
    std::shared_ptr<SimRegionProvider> region;
    std::shared_ptr<SimGrounder> grounder;
    std::shared_ptr<SimCaptionProvider> captions;
    std::shared_ptr<SimEmbedder> embedder;
    std::shared_ptr<SimQuestionProvider> questions;
    std::shared_ptr<SimAnswerProvider> answers;

    explicit SimBackend(SimParams params = {}, int total_steps = 28)
        : world(std::make_shared<SimWorld>(params)),
          sampler(std::make_shared<SimSampler>(world, total_steps)),
          general(std::make_shared<SimGeneralScorer>(world)),
          region(std::make_shared<SimRegionProvider>(world)),
          grounder(std::make_shared<SimGrounder>(world)),
          captions(std::make_shared<SimCaptionProvider>(world)),
          embedder(std::make_shared<SimEmbedder>(world)),
          questions(std::make_shared<SimQuestionProvider>(world)),
          answers(std::make_shared<SimAnswerProvider>(world)) {}

    VerifierSuite suite() const { return {general, region, grounder, captions, embedder, questions, answers}; }

    void register_instances(const std::vector<EditInstance>& instances) {
        for (const auto& inst : instances) world->register_instance(inst);
    }
};

}  // namespace adecot
