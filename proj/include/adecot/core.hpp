#pragma once

// Shared domain types: images, edit instances, candidate trajectories,
// score channels, search hyperparameters and the NFE ledger.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adecot {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
  public:
    using Error::Error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

/// A sampler or provider endpoint could not be reached after all retries.
class BackendUnavailable : public Error {
  public:
    using Error::Error;
};

/// A peer answered, but with a body that violates the wire schema.
class ProtocolError : public Error {
  public:
    using Error::Error;
};

/// A verifier provider failed to produce a usable answer.
class ProviderError : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Image

struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> data;  // row-major, channel innermost

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
        if (h <= 0 || w <= 0 || c <= 0) {
            throw InvalidArgument("image dimensions must be positive");
        }
    }

    std::size_t index(int y, int x, int c) const {
        return (static_cast<std::size_t>(y) * width + x) * channels + c;
    }
    double at(int y, int x, int c) const { return data[index(y, x, c)]; }
    double& at(int y, int x, int c) { return data[index(y, x, c)]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

    bool same_shape(const Image& other) const {
        return height == other.height && width == other.width && channels == other.channels;
    }

    /// Throws unless the length matches H·W·C and every value lies in [0,1].
    void validate() const {
        if (height <= 0 || width <= 0 || channels <= 0) {
            throw InvalidArgument("image dimensions must be positive");
        }
        if (data.size() != static_cast<std::size_t>(height) * width * channels) {
            throw InvalidArgument("image data length does not match H*W*C");
        }
        for (double v : data) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw InvalidArgument("image value outside [0,1]");
            }
        }
    }

    friend bool operator==(const Image&, const Image&) = default;
};

// ---------------------------------------------------------------------------
// Edit instances

/// Half-open pixel rectangle [y0,y1) x [x0,x1).
struct Rect {
    int y0 = 0;
    int x0 = 0;
    int y1 = 0;
    int x1 = 0;

    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
    int area() const { return std::max(0, y1 - y0) * std::max(0, x1 - x0); }
    friend bool operator==(const Rect&, const Rect&) = default;
};

enum class RegionOrigin { edit_object, inverted_keep_object, unavailable };

struct QualityDistribution {
    enum class Kind { normal, uniform };
    Kind kind = Kind::normal;
    double a = 6.5;  // mean, or lower bound for uniform
    double b = 1.2;  // std, or upper bound for uniform
    /// Capability ceiling: draws at or above it collapse onto it.
    double ceiling = std::numeric_limits<double>::infinity();
};

/// Hidden ground truth consumed only by the simulated backend and providers.
struct SimMeta {
    QualityDistribution quality;
    Rect edit_region;
    RegionOrigin mask_origin = RegionOrigin::edit_object;
    int mask_offset = 0;              // grounding error, pixels shifted along x
    double caption_alignment = 0.31;  // similarity of original caption to the source
    std::string scene;                // e.g. "red car on a street"
    std::string edit_object;          // noun phrase the edit targets
    std::string edit_result;          // noun phrase after the edit
    int correct_modes = 1;            // distinct looks among converged candidates
};

struct EditInstance {
    std::string id;
    Image source;
    std::string instruction;
    std::vector<std::string> rewritten_instructions;
    std::optional<SimMeta> sim_meta;

    void validate() const {
        if (id.empty()) throw InvalidArgument("instance id is empty");
        if (instruction.empty()) throw InvalidArgument("instance instruction is empty");
        source.validate();
    }
};

// ---------------------------------------------------------------------------
// Scores

struct ScoreBreakdown {
    double s_gen = 0.0;
    std::optional<double> s_reg;
    std::optional<double> s_cap;
    std::optional<int> s_spec;
    double unified = 0.0;

    /// Recomputes `unified` from the channels; absent channels add zero.
    void finalize(double lambda_reg, double lambda_cap) {
        unified = s_gen + lambda_reg * s_reg.value_or(0.0) + lambda_cap * s_cap.value_or(0.0) +
                  static_cast<double>(s_spec.value_or(0));
    }

    friend bool operator==(const ScoreBreakdown&, const ScoreBreakdown&) = default;
};

// ---------------------------------------------------------------------------
// Search configuration

inline constexpr int kUnbounded = std::numeric_limits<int>::max();

struct SearchConfig {
    int n = 32;          // original sampling budget N
    int n_min = 1;       // minimal budget
    double gamma = 0.15;
    double s_max = 10.0;
    int total_steps = 28;  // T
    int t_early = 8;       // steps completed at the early pruning checkpoint
    int t_late = 16;       // steps completed at the late retaining checkpoint
    double s_reject = 5.0;
    double tau_sim = 0.98;
    double delta = 0.5;
    int n_high = 4;
    int s_high = 5;
    double lambda_reg = 1.0;
    double lambda_cap = 3.0;

    // region verifier
    int change_window = 8;
    int mask_pad = 2;
    double zero_signal_margin = 0.05;

    /// Remaining-noise timestep at the early checkpoint.
    int early_timestep() const { return total_steps - t_early; }
    /// Remaining-noise timestep at the late checkpoint.
    int late_timestep() const { return total_steps - t_late; }

    void validate() const {
        if (n < 1) throw ConfigError("N must be positive");
        if (n_min < 1 || n_min > n) throw ConfigError("N_min must lie in [1, N]");
        if (!(gamma >= 0.0)) throw ConfigError("gamma must be nonnegative");
        if (!(s_max > 0.0)) throw ConfigError("S_max must be positive");
        if (total_steps < 1) throw ConfigError("T must be positive");
        if (!(0 < t_early && t_early < t_late && t_late < total_steps)) {
            throw ConfigError("checkpoints must satisfy 0 < t_e < t_l < T");
        }
        if (!(tau_sim >= 0.0 && tau_sim <= 1.0)) throw ConfigError("tau_sim must lie in [0,1]");
        if (!(delta >= 0.0)) throw ConfigError("delta must be nonnegative");
        if (n_high < 1) throw ConfigError("N_high must be positive");
        if (s_high < 1) throw ConfigError("S_high must be positive");
        if (!(lambda_reg >= 0.0) || !(lambda_cap >= 0.0)) throw ConfigError("lambdas must be nonnegative");
        if (change_window < 1) throw ConfigError("change_window must be positive");
        if (mask_pad < 1) throw ConfigError("mask_pad must be positive");
    }
};

// ---------------------------------------------------------------------------
// Candidate trajectories

/// Backend-owned latent payload. The core never looks inside.
class LatentPayload {
  public:
    virtual ~LatentPayload() = default;
};
using LatentHandle = std::shared_ptr<const LatentPayload>;

struct ScoreRecord {
    int timestep = 0;
    ScoreBreakdown score;
};

struct CandidateState {
    int candidate_id = 0;
    std::uint64_t seed = 0;
    LatentHandle latent;
    int timestep = 0;  // remaining noise level; T at spawn, 0 when clean
    std::string prompt;
    std::int64_t nfe_spent = 0;
    std::vector<ScoreRecord> score_history;
};

// ---------------------------------------------------------------------------
// NFE ledger

enum class Phase {
    full,           // one-shot T -> 0
    probe,          // difficulty probe
    early,          // T -> early checkpoint
    late,           // early -> late checkpoint
    finish,         // late -> 0
    resume,         // early -> 0
    short_preview,  // separate short denoise used as a preview
    preview,        // one-step preview that could not reuse a cached prediction
};

inline const char* to_string(Phase p) {
    switch (p) {
        case Phase::full: return "full";
        case Phase::probe: return "probe";
        case Phase::early: return "early";
        case Phase::late: return "late";
        case Phase::finish: return "finish";
        case Phase::resume: return "resume";
        case Phase::short_preview: return "short_preview";
        case Phase::preview: return "preview";
    }
    return "?";
}

struct LedgerEntry {
    int candidate_id = 0;
    Phase phase = Phase::full;
    std::int64_t steps = 0;
    friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Append-only record of denoising steps. Appends are serialized, so
/// concurrent writers get a single total order.
class NfeLedger {
  public:
    NfeLedger() = default;
    NfeLedger(const NfeLedger& other) {
        std::lock_guard lock(other.mutex_);
        entries_ = other.entries_;
        total_ = other.total_;
    }
    NfeLedger& operator=(const NfeLedger& other) {
        if (this != &other) {
            std::scoped_lock lock(mutex_, other.mutex_);
            entries_ = other.entries_;
            total_ = other.total_;
        }
        return *this;
    }

    /// Appends an entry and returns the new running total.
    std::int64_t charge(int candidate_id, Phase phase, std::int64_t steps) {
        if (steps < 0) throw InvalidArgument("ledger charge must be nonnegative");
        std::lock_guard lock(mutex_);
        entries_.push_back({candidate_id, phase, steps});
        total_ += steps;
        return total_;
    }

    std::int64_t total() const {
        std::lock_guard lock(mutex_);
        return total_;
    }

    std::vector<LedgerEntry> entries() const {
        std::lock_guard lock(mutex_);
        return entries_;
    }

    std::int64_t steps_for(int candidate_id) const {
        std::lock_guard lock(mutex_);
        std::int64_t sum = 0;
        for (const auto& e : entries_) {
            if (e.candidate_id == candidate_id) sum += e.steps;
        }
        return sum;
    }

    std::int64_t steps_for(Phase phase) const {
        std::lock_guard lock(mutex_);
        std::int64_t sum = 0;
        for (const auto& e : entries_) {
            if (e.phase == phase) sum += e.steps;
        }
        return sum;
    }

  private:
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
    std::int64_t total_ = 0;
};

/// Value-style charge: returns a copy of `ledger` with one more entry.
inline NfeLedger ledger_charge(NfeLedger ledger, int candidate_id, Phase phase, std::int64_t steps) {
    ledger.charge(candidate_id, phase, steps);
    return ledger;
}

}  // namespace adecot
