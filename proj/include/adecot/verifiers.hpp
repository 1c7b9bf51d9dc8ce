#pragma once

// Scoring stack: general score, edited-region correctness, caption
// consistency, the unified score, near-duplicate filtering and the
// instance-specific yes/no verifier.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "adecot/core.hpp"
#include "adecot/providers.hpp"

namespace adecot {

// ---------------------------------------------------------------------------
// Region masks and change maps

struct RegionMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> cells;  // row-major, 0 or 1
    RegionOrigin origin = RegionOrigin::unavailable;
    int dilation_radius = 0;

    static RegionMask unavailable() { return {}; }

    static RegionMask filled(int h, int w, bool value, RegionOrigin origin = RegionOrigin::edit_object) {
        RegionMask m;
        m.height = h;
        m.width = w;
        m.cells.assign(static_cast<std::size_t>(h) * w, value ? 1 : 0);
        m.origin = origin;
        return m;
    }

    static RegionMask from_rect(int h, int w, const Rect& r, RegionOrigin origin = RegionOrigin::edit_object) {
        auto m = filled(h, w, false, origin);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (r.contains(y, x)) m.at(y, x) = 1;
        return m;
    }

    bool available() const { return origin != RegionOrigin::unavailable && !cells.empty(); }
    std::uint8_t at(int y, int x) const { return cells[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int y, int x) { return cells[static_cast<std::size_t>(y) * width + x]; }
    std::size_t count() const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), 1)); }
    bool full() const { return !cells.empty() && count() == cells.size(); }

    friend bool operator==(const RegionMask&, const RegionMask&) = default;
};

/// Per-pixel (or per-window) mean absolute change across channels.
struct ChangeMap {
    int height = 0;  // pooled grid
    int width = 0;
    int window = 1;
    int source_height = 0;
    int source_width = 0;
    std::vector<double> delta;

    double at(int y, int x) const { return delta[static_cast<std::size_t>(y) * width + x]; }
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

inline ChangeMap change_map(const Image& edited, const Image& source, int window = 1) {
    if (!edited.same_shape(source)) throw DimensionMismatch("change_map: image dimensions differ");
    if (window < 1) throw InvalidArgument("change_map: window must be positive");
    const int h = source.height;
    const int w = source.width;
    const int c = source.channels;
    std::vector<double> per_pixel(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double sum = 0.0;
            for (int k = 0; k < c; ++k) sum += std::abs(edited.at(y, x, k) - source.at(y, x, k));
            per_pixel[static_cast<std::size_t>(y) * w + x] = sum / c;
        }
    }
    ChangeMap out;
    out.window = window;
    out.source_height = h;
    out.source_width = w;
    if (window == 1) {
        out.height = h;
        out.width = w;
        out.delta = std::move(per_pixel);
        return out;
    }
    out.height = ceil_div(h, window);
    out.width = ceil_div(w, window);
    out.delta.assign(static_cast<std::size_t>(out.height) * out.width, 0.0);
    for (int by = 0; by < out.height; ++by) {
        for (int bx = 0; bx < out.width; ++bx) {
            double sum = 0.0;
            int n = 0;
            for (int y = by * window; y < std::min(h, (by + 1) * window); ++y) {
                for (int x = bx * window; x < std::min(w, (bx + 1) * window); ++x) {
                    sum += per_pixel[static_cast<std::size_t>(y) * w + x];
                    ++n;
                }
            }
            out.delta[static_cast<std::size_t>(by) * out.width + bx] = sum / n;
        }
    }
    return out;
}

/// Max-pools a pixel mask onto window x window blocks.
inline RegionMask pool_mask(const RegionMask& mask, int window) {
    if (window == 1) return mask;
    RegionMask out = mask;
    out.height = ceil_div(mask.height, window);
    out.width = ceil_div(mask.width, window);
    out.cells.assign(static_cast<std::size_t>(out.height) * out.width, 0);
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) out.at(y / window, x / window) = 1;
    return out;
}

/// Softmax over all entries jointly.
inline std::vector<double> softmax(std::span<const double> values) {
    std::vector<double> out(values.size());
    if (values.empty()) return out;
    const double peak = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out[i] = std::exp(values[i] - peak);
        sum += out[i];
    }
    for (auto& v : out) v /= sum;
    return out;
}

/// Share of softmax-normalized change that falls inside the mask.
inline double region_score(const ChangeMap& delta, const RegionMask& region) {
    const RegionMask* mask = &region;
    RegionMask pooled;
    if (region.height == delta.source_height && region.width == delta.source_width && delta.window > 1) {
        pooled = pool_mask(region, delta.window);
        mask = &pooled;
    }
    if (mask->height != delta.height || mask->width != delta.width) {
        throw DimensionMismatch("region_score: mask and change map dimensions differ");
    }
    const auto weights = softmax(delta.delta);
    double score = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (mask->cells[i]) score += weights[i];
    }
    return std::clamp(score, 0.0, 1.0);
}

/// Square (Chebyshev) dilation by `pad` pixels.
inline RegionMask dilate(const RegionMask& mask, int pad) {
    RegionMask out = mask;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(y, x)) continue;
            bool hit = false;
            for (int dy = -pad; dy <= pad && !hit; ++dy) {
                for (int dx = -pad; dx <= pad && !hit; ++dx) {
                    int yy = y + dy;
                    int xx = x + dx;
                    if (yy >= 0 && yy < mask.height && xx >= 0 && xx < mask.width && mask.at(yy, xx)) hit = true;
                }
            }
            if (hit) out.at(y, x) = 1;
        }
    }
    out.dilation_radius = mask.dilation_radius + pad;
    return out;
}

/// Fraction of the (pooled) grid the mask covers, the score a uniform
/// change map would give.
inline double uniform_baseline(const RegionMask& mask, int window) {
    auto pooled = pool_mask(mask, window);
    if (pooled.cells.empty()) return 0.0;
    return static_cast<double>(pooled.count()) / static_cast<double>(pooled.cells.size());
}

/// True when S_reg beats the uniform-change baseline by more than `margin`.
inline bool has_region_signal(double s_reg, const RegionMask& mask, int window, double margin) {
    if (!mask.available() || mask.count() == 0) return false;
    return s_reg > (1.0 + margin) * uniform_baseline(mask, window);
}

/// One refinement step: grows the mask by `pad` when no candidate shows
/// a region signal, otherwise returns it unchanged.
inline RegionMask refine_mask(const RegionMask& region, std::span<const double> candidate_scores, int pad,
                              int window = 1, double margin = 0.05) {
    if (!region.available()) throw InvalidArgument("refine_mask: region verifier is unavailable");
    for (double s : candidate_scores) {
        if (has_region_signal(s, region, window, margin)) return region;
    }
    if (region.count() == 0) {
        // Nothing to grow from: an empty mask dilates to full coverage in one step
        // only if seeded, so seed the centre pixel.
        RegionMask seeded = region;
        seeded.at(region.height / 2, region.width / 2) = 1;
        seeded.dilation_radius = region.dilation_radius;
        return dilate(seeded, pad);
    }
    return dilate(region, pad);
}

/// Repeats refine_mask until some candidate shows signal or the mask is full.
/// `score_all` maps a mask to the per-candidate S_reg values.
inline RegionMask refine_until_signal(RegionMask region, const std::function<std::vector<double>(const RegionMask&)>& score_all,
                                      int pad, int window, double margin, int* iterations = nullptr) {
    int steps = 0;
    while (region.available() && !region.full()) {
        auto scores = score_all(region);
        auto next = refine_mask(region, scores, pad, window, margin);
        if (next == region) break;
        region = std::move(next);
        ++steps;
    }
    if (iterations) *iterations = steps;
    return region;
}

/// Builds the expected edit mask from the region provider and grounder.
/// Edit objects map to their mask; keep objects map to the complement;
/// anything else, or any provider failure, disables the region verifier.
inline RegionMask build_region_mask(const Image& source, const std::string& instruction, RegionProvider& region,
                                    Grounder& grounder) {
    try {
        RegionObjects objects = region.identify(source, instruction);
        auto to_mask = [&](const std::vector<std::uint8_t>& cells, RegionOrigin origin, bool invert) {
            if (cells.size() != source.pixel_count()) throw DimensionMismatch("grounded mask has wrong size");
            RegionMask m;
            m.height = source.height;
            m.width = source.width;
            m.origin = origin;
            m.cells.resize(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) m.cells[i] = (cells[i] != 0) != invert ? 1 : 0;
            return m;
        };
        if (objects.edit_object && !objects.edit_object->empty()) {
            return to_mask(grounder.ground(source, *objects.edit_object), RegionOrigin::edit_object, false);
        }
        if (objects.keep_object && !objects.keep_object->empty()) {
            return to_mask(grounder.ground(source, *objects.keep_object), RegionOrigin::inverted_keep_object, true);
        }
    } catch (const Error&) {
    }
    return RegionMask::unavailable();
}

// ---------------------------------------------------------------------------
// Similarity

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionMismatch("embedding sizes differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Captions

struct CaptionPair {
    std::string original_caption;
    std::string edited_caption;
    std::optional<double> source_alignment;
    std::optional<double> caption_divergence;
    bool reliable = false;
    std::vector<double> edited_embedding;  // cached text embedding, may be empty

    static constexpr double kMinSourceAlignment = 0.27;
    static constexpr double kMaxCaptionSimilarity = 0.9;

    static bool is_reliable(double source_alignment, double caption_divergence) {
        return source_alignment >= kMinSourceAlignment && caption_divergence < kMaxCaptionSimilarity;
    }
};

inline std::set<std::string> caption_tokens(const std::string& text) {
    std::set<std::string> tokens;
    std::string current;
    for (char ch : text) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        } else if (!current.empty()) {
            tokens.insert(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.insert(std::move(current));
    return tokens;
}

/// Token-level Jaccard similarity of two lowercased captions.
inline double jaccard_similarity(const std::string& a, const std::string& b) {
    auto ta = caption_tokens(a);
    auto tb = caption_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    std::size_t common = 0;
    for (const auto& t : ta) common += tb.count(t);
    return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
}

inline CaptionPair target_caption(const EditInstance& instance, CaptionProvider& provider, Embedder& embedder) {
    CaptionPair pair;
    try {
        Captions captions = provider.caption(instance.source, instance.instruction);
        pair.original_caption = captions.original;
        pair.edited_caption = captions.edited;
        pair.source_alignment =
            cosine_similarity(embedder.embed_image(instance.source), embedder.embed_text(captions.original));
        pair.caption_divergence = jaccard_similarity(captions.original, captions.edited);
        pair.reliable = CaptionPair::is_reliable(*pair.source_alignment, *pair.caption_divergence);
        if (pair.reliable) pair.edited_embedding = embedder.embed_text(captions.edited);
    } catch (const Error&) {
        pair = CaptionPair{};
    }
    return pair;
}

inline std::optional<double> caption_score(const Image& image, const CaptionPair& caption, Embedder& embedder) {
    if (!caption.reliable) return std::nullopt;
    try {
        auto text = caption.edited_embedding.empty() ? embedder.embed_text(caption.edited_caption)
                                                     : caption.edited_embedding;
        return cosine_similarity(embedder.embed_image(image), text);
    } catch (const Error&) {
        return std::nullopt;
    }
}

// ---------------------------------------------------------------------------
// Unified score

/// S = S_gen + lambda_reg * S_reg + lambda_cap * S_cap, unclamped.
inline double unified_score(double s_gen, std::optional<double> s_reg, std::optional<double> s_cap,
                            const SearchConfig& config) {
    return s_gen + config.lambda_reg * s_reg.value_or(0.0) + config.lambda_cap * s_cap.value_or(0.0);
}

// ---------------------------------------------------------------------------
// Near-duplicate filter

struct SimilarityItem {
    int id = 0;
    double score = 0.0;
    std::vector<double> embedding;
};

/// Greedy by descending score (ties by id): keeps an item iff its similarity
/// to every kept item is at most tau. Output is in descending score order.
inline std::vector<SimilarityItem> similarity_filter(std::vector<SimilarityItem> items, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgument("similarity_filter: tau must lie in [0,1]");
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    std::vector<SimilarityItem> kept;
    for (auto& item : items) {
        bool distinct = std::all_of(kept.begin(), kept.end(), [&](const SimilarityItem& k) {
            return cosine_similarity(item.embedding, k.embedding) <= tau;
        });
        if (distinct) kept.push_back(std::move(item));
    }
    return kept;
}

/// Image form: embeds each preview, returns indices of the retained
/// candidates in descending score order.
inline std::vector<std::size_t> similarity_filter(const std::vector<std::pair<Image, double>>& candidates, double tau,
                                                  Embedder& embedder) {
    std::vector<SimilarityItem> items;
    items.reserve(candidates.size());
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        items.push_back({static_cast<int>(i), candidates[i].second, embedder.embed_image(candidates[i].first)});
    }
    std::vector<std::size_t> out;
    for (const auto& item : similarity_filter(std::move(items), tau)) out.push_back(static_cast<std::size_t>(item.id));
    return out;
}

// ---------------------------------------------------------------------------
// Instance-specific verifier

struct QuestionSet {
    static constexpr std::size_t kQuestionCount = 5;
    std::vector<std::string> questions;
    std::optional<std::vector<bool>> answers;

    bool valid() const { return questions.size() == kQuestionCount; }
};

/// Asks once per edit case. A malformed reply is retried once; a second
/// failure yields an empty set, which disables S_spec downstream.
inline QuestionSet instance_questions(const EditInstance& instance, QuestionProvider& provider) {
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            auto qs = provider.questions(instance.source, instance.instruction);
            if (qs.size() != QuestionSet::kQuestionCount) {
                throw ProtocolError("expected exactly 5 questions");
            }
            return QuestionSet{std::move(qs), std::nullopt};
        } catch (const ProtocolError&) {
            continue;
        } catch (const Error&) {
            break;
        }
    }
    return {};
}

/// Number of "yes" answers in [0,5]; anything but "yes" counts as "no".
/// Absent when the question set is unusable or the provider fails.
inline std::optional<int> answer_questions(const EditInstance& instance, const Image& image, const QuestionSet& qs,
                                           AnswerProvider& provider) {
    if (!qs.valid()) return std::nullopt;
    for (int attempt = 0; attempt < 2; ++attempt) {
        try {
            auto answers = provider.answers(instance.source, image, instance.instruction, qs.questions);
            if (answers.size() != QuestionSet::kQuestionCount) throw ProtocolError("expected 5 answers");
            return static_cast<int>(std::count(answers.begin(), answers.end(), std::string("yes")));
        } catch (const ProtocolError&) {
            continue;
        } catch (const Error&) {
            break;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Provider bundle and per-instance evaluation

/// The providers one run uses, plus a count of multimodal-judge queries.
struct VerifierSuite {
    std::shared_ptr<GeneralScorer> general;
    std::shared_ptr<RegionProvider> region;
    std::shared_ptr<Grounder> grounder;
    std::shared_ptr<CaptionProvider> captions;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<QuestionProvider> questions;
    std::shared_ptr<AnswerProvider> answers;
};

/// Per-instance artifacts, computed once and shared across candidates.
struct InstanceArtifacts {
    RegionMask mask;
    CaptionPair caption;
    QuestionSet questions;
};

/// Scores images of one instance. Counts judge queries (general score,
/// region, caption, questions, answers); embeddings are not counted.
class Evaluator {
  public:
    Evaluator(const EditInstance& instance, const SearchConfig& config, VerifierSuite& suite)
        : instance_(instance), config_(config), suite_(suite) {}

    const InstanceArtifacts& artifacts() const { return artifacts_; }
    InstanceArtifacts& artifacts() { return artifacts_; }
    std::int64_t judge_queries() const { return queries_; }

    /// Region mask, caption and questions: one query each per instance.
    void prepare_edit_specific() {
        if (suite_.region && suite_.grounder) {
            ++queries_;
            artifacts_.mask = build_region_mask(instance_.source, instance_.instruction, *suite_.region, *suite_.grounder);
        }
        if (suite_.captions && suite_.embedder) {
            ++queries_;
            artifacts_.caption = target_caption(instance_, *suite_.captions, *suite_.embedder);
        }
    }

    void prepare_questions() {
        if (suite_.questions) {
            ++queries_;
            artifacts_.questions = instance_questions(instance_, *suite_.questions);
        }
    }

    /// General score, retried once on a malformed reply.
    double general(const Image& image) {
        for (int attempt = 0;; ++attempt) {
            ++queries_;
            try {
                return suite_.general->score(instance_.source, image, instance_.instruction).value();
            } catch (const ProtocolError&) {
                if (attempt >= 1) throw;
            }
        }
    }

    std::optional<double> region(const Image& image) const {
        if (!artifacts_.mask.available()) return std::nullopt;
        return region_score(change_map(image, instance_.source, config_.change_window), artifacts_.mask);
    }

    std::optional<double> caption(const Image& image) {
        if (!suite_.embedder) return std::nullopt;
        return caption_score(image, artifacts_.caption, *suite_.embedder);
    }

    std::optional<int> specific(const Image& image) {
        if (!suite_.answers || !artifacts_.questions.valid()) return std::nullopt;
        ++queries_;
        return answer_questions(instance_, image, artifacts_.questions, *suite_.answers);
    }

    ScoreBreakdown general_only(const Image& image) {
        ScoreBreakdown s;
        s.s_gen = general(image);
        s.finalize(config_.lambda_reg, config_.lambda_cap);
        return s;
    }

    /// S_gen + S_reg + S_cap, no instance-specific term.
    ScoreBreakdown unified(const Image& image) {
        ScoreBreakdown s;
        s.s_gen = general(image);
        s.s_reg = region(image);
        s.s_cap = caption(image);
        s.finalize(config_.lambda_reg, config_.lambda_cap);
        return s;
    }

    /// Unified score plus S_spec.
    ScoreBreakdown final_score(const Image& image) {
        ScoreBreakdown s = unified(image);
        s.s_spec = specific(image);
        s.finalize(config_.lambda_reg, config_.lambda_cap);
        return s;
    }

  private:
    const EditInstance& instance_;
    const SearchConfig& config_;
    VerifierSuite& suite_;
    InstanceArtifacts artifacts_;
    std::int64_t queries_ = 0;
};

}  // namespace adecot
