#pragma once

#include <span>
#include <string>
#include <vector>

#include "adecot/core.hpp"

namespace adecot {

/// Noise scale sigma_t indexed by remaining timestep t in [0, T].
/// sigma_T = 1, sigma_0 = 0, non-increasing as t decreases.
class NoiseSchedule {
  public:
    static NoiseSchedule linear(int total_steps) {
        if (total_steps < 1) throw InvalidArgument("schedule needs at least one step");
        std::vector<double> sigma(static_cast<std::size_t>(total_steps) + 1);
        for (int t = 0; t <= total_steps; ++t) {
            sigma[static_cast<std::size_t>(t)] = static_cast<double>(t) / total_steps;
        }
        return NoiseSchedule(std::move(sigma));
    }

    explicit NoiseSchedule(std::vector<double> sigma) : sigma_(std::move(sigma)) {
        if (sigma_.size() < 2) throw InvalidArgument("schedule needs at least one step");
        if (sigma_.front() != 0.0 || sigma_.back() != 1.0) {
            throw InvalidArgument("schedule must satisfy sigma_0 = 0 and sigma_T = 1");
        }
        for (std::size_t t = 1; t < sigma_.size(); ++t) {
            if (sigma_[t] < sigma_[t - 1]) throw InvalidArgument("schedule must be monotone");
        }
    }

    int total_steps() const { return static_cast<int>(sigma_.size()) - 1; }

    double operator()(int t) const {
        if (t < 0 || t > total_steps()) throw InvalidArgument("timestep outside schedule");
        return sigma_[static_cast<std::size_t>(t)];
    }

  private:
    std::vector<double> sigma_;
};

/// Flow-matching clean estimate: x_{0|t} = x_t - sigma_t * eps.
inline double one_step_estimate(double x_t, double sigma, double eps) { return x_t - sigma * eps; }

inline std::vector<double> one_step_estimate(std::span<const double> x_t, double sigma,
                                             std::span<const double> eps) {
    if (x_t.size() != eps.size()) throw DimensionMismatch("latent and prediction sizes differ");
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = one_step_estimate(x_t[i], sigma, eps[i]);
    return out;
}

/// Partial denoising, one-step previews and decoding over backend-owned latents.
///
/// The public entry points validate timestep order and charge the ledger;
/// backends implement the do_* hooks and report how many steps they ran.
class Sampler {
  public:
    virtual ~Sampler() = default;

    virtual int total_steps() const = 0;

    /// Fresh candidate at timestep T with nothing spent.
    CandidateState spawn_candidate(const EditInstance& instance, int candidate_id, std::uint64_t seed,
                                   std::string prompt) {
        CandidateState state;
        state.candidate_id = candidate_id;
        state.seed = seed;
        state.timestep = total_steps();
        state.prompt = std::move(prompt);
        state.latent = do_spawn(instance, state);
        return state;
    }

    /// Denoise from `from_t` down to `to_t`, charging the steps to `ledger`.
    CandidateState sample_partial(const EditInstance& instance, CandidateState state, int from_t, int to_t,
                                  NfeLedger& ledger, Phase phase) {
        if (state.timestep != from_t) {
            throw InvalidArgument("timestep-order violation: state is at t=" + std::to_string(state.timestep) +
                                  ", asked to start at t=" + std::to_string(from_t));
        }
        if (to_t < 0 || to_t > from_t) {
            throw InvalidArgument("timestep-order violation: cannot sample from t=" + std::to_string(from_t) +
                                  " to t=" + std::to_string(to_t));
        }
        if (to_t == from_t) return state;
        auto result = do_sample(instance, state, to_t);
        ledger.charge(state.candidate_id, phase, result.steps_charged);
        state.latent = std::move(result.latent);
        state.timestep = to_t;
        state.nfe_spent += result.steps_charged;
        return state;
    }

    /// Decoded x_{0|t}. Free when the backend can reuse its last prediction;
    /// otherwise the extra evaluation is charged under Phase::preview.
    Image one_step_preview(const EditInstance& instance, CandidateState& state, NfeLedger& ledger) {
        if (state.timestep <= 0) throw InvalidArgument("preview requires timestep > 0");
        if (state.timestep >= total_steps()) {
            throw InvalidArgument("missing cached prediction: no sampling step has run for this candidate");
        }
        auto result = do_preview(instance, state);
        if (result.steps_charged > 0) {
            ledger.charge(state.candidate_id, Phase::preview, result.steps_charged);
            state.nfe_spent += result.steps_charged;
        }
        return std::move(result.image);
    }

    /// Separate short denoising run of `steps` steps from the candidate's
    /// initial noise, decoded. The candidate's own trajectory is untouched.
    Image short_run_preview(const EditInstance& instance, CandidateState& state, int steps, NfeLedger& ledger) {
        if (steps < 1 || steps > total_steps()) throw InvalidArgument("short run length outside [1, T]");
        auto result = do_short_run(instance, state, steps);
        ledger.charge(state.candidate_id, Phase::short_preview, result.steps_charged);
        state.nfe_spent += result.steps_charged;
        return std::move(result.image);
    }

    Image decode(const EditInstance& instance, const CandidateState& state) {
        if (state.timestep != 0) throw InvalidArgument("decode requires a fully denoised candidate");
        return do_decode(instance, state);
    }

  protected:
    struct SampleResult {
        LatentHandle latent;
        std::int64_t steps_charged = 0;
    };
    struct ImageResult {
        Image image;
        std::int64_t steps_charged = 0;
    };

    virtual LatentHandle do_spawn(const EditInstance& instance, const CandidateState& state) = 0;
    virtual SampleResult do_sample(const EditInstance& instance, const CandidateState& state, int to_t) = 0;
    virtual ImageResult do_preview(const EditInstance& instance, const CandidateState& state) = 0;
    virtual ImageResult do_short_run(const EditInstance& instance, const CandidateState& state, int steps) = 0;
    virtual Image do_decode(const EditInstance& instance, const CandidateState& state) = 0;
};

}  // namespace adecot
