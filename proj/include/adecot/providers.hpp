#pragma once

// Verifier provider interfaces and the JSON bodies they exchange.
//
// Each provider is a narrow interface so that simulated, in-process and
// remote implementations are interchangeable. The wire helpers below are the
// single definition of the response schemas for every implementation.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "adecot/core.hpp"

namespace adecot {

using json = nlohmann::json;

struct GeneralScore {
    double sc = 0.0;  // semantic consistency
    double pq = 0.0;  // perceptual quality
    double value() const { return std::sqrt(sc * pq); }
};

struct RegionObjects {
    std::optional<std::vector<std::string>> edit_object;
    std::optional<std::vector<std::string>> keep_object;
};

struct Captions {
    std::string original;
    std::string edited;
};

class GeneralScorer {
  public:
    virtual ~GeneralScorer() = default;
    virtual GeneralScore score(const Image& source, const Image& edited, const std::string& instruction) = 0;
};

class RegionProvider {
  public:
    virtual ~RegionProvider() = default;
    virtual RegionObjects identify(const Image& source, const std::string& instruction) = 0;
};

/// Turns object names into a binary H x W mask over the source image.
class Grounder {
  public:
    virtual ~Grounder() = default;
    virtual std::vector<std::uint8_t> ground(const Image& source, const std::vector<std::string>& objects) = 0;
};

class CaptionProvider {
  public:
    virtual ~CaptionProvider() = default;
    virtual Captions caption(const Image& source, const std::string& instruction) = 0;
};

/// Unit-norm embeddings; similarity is their dot product.
class Embedder {
  public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed_image(const Image& image) = 0;
    virtual std::vector<double> embed_text(const std::string& text) = 0;
};

class QuestionProvider {
  public:
    virtual ~QuestionProvider() = default;
    virtual std::vector<std::string> questions(const Image& source, const std::string& instruction) = 0;
};

class AnswerProvider {
  public:
    virtual ~AnswerProvider() = default;
    /// One "yes"/"no" per question, in order.
    virtual std::vector<std::string> answers(const Image& source, const Image& edited, const std::string& instruction,
                                             const std::vector<std::string>& questions) = 0;
};

// ---------------------------------------------------------------------------
// Wire schemas

namespace wire {

inline const json& require(const json& body, const char* key) {
    if (!body.is_object() || !body.contains(key)) {
        throw ProtocolError(std::string("response missing key '") + key + "'");
    }
    return body.at(key);
}

inline double require_number(const json& body, const char* key) {
    const auto& v = require(body, key);
    if (!v.is_number()) throw ProtocolError(std::string("key '") + key + "' is not a number");
    return v.get<double>();
}

inline std::string require_string(const json& body, const char* key) {
    const auto& v = require(body, key);
    if (!v.is_string()) throw ProtocolError(std::string("key '") + key + "' is not a string");
    return v.get<std::string>();
}

// {sc, pq}
inline json general_score_to_json(const GeneralScore& s) { return {{"sc", s.sc}, {"pq", s.pq}}; }
inline GeneralScore general_score_from_json(const json& body) {
    return {require_number(body, "sc"), require_number(body, "pq")};
}

// {edit_object: [..]|null, keep_object: [..]|null}
inline json region_to_json(const RegionObjects& r) {
    json out = json::object();
    out["edit_object"] = r.edit_object ? json(*r.edit_object) : json(nullptr);
    out["keep_object"] = r.keep_object ? json(*r.keep_object) : json(nullptr);
    return out;
}
inline RegionObjects region_from_json(const json& body) {
    auto list = [&](const char* key) -> std::optional<std::vector<std::string>> {
        const auto& v = require(body, key);
        if (v.is_null()) return std::nullopt;
        if (!v.is_array()) throw ProtocolError(std::string("key '") + key + "' must be an array or null");
        std::vector<std::string> out;
        for (const auto& item : v) {
            if (!item.is_string()) throw ProtocolError(std::string("key '") + key + "' holds a non-string");
            out.push_back(item.get<std::string>());
        }
        return out;
    };
    return {list("edit_object"), list("keep_object")};
}

// {original_caption, edited_caption}
inline json captions_to_json(const Captions& c) {
    json out = json::object();
    out["original_caption"] = c.original;
    out["edited_caption"] = c.edited;
    return out;
}
inline Captions captions_from_json(const json& body) {
    return {require_string(body, "original_caption"), require_string(body, "edited_caption")};
}

// {questions: [5 strings]}
inline json questions_to_json(const std::vector<std::string>& qs) { return {{"questions", qs}}; }
inline std::vector<std::string> questions_from_json(const json& body) {
    const auto& v = require(body, "questions");
    if (!v.is_array()) throw ProtocolError("'questions' must be an array");
    std::vector<std::string> out;
    for (const auto& q : v) {
        if (!q.is_string()) throw ProtocolError("'questions' holds a non-string");
        out.push_back(q.get<std::string>());
    }
    if (out.size() != 5) {
        throw ProtocolError("expected exactly 5 questions, got " + std::to_string(out.size()));
    }
    return out;
}

// {Q1..Q5: "yes"|"no"}
inline json answers_to_json(const std::vector<std::string>& answers) {
    json out = json::object();
    for (std::size_t i = 0; i < answers.size(); ++i) out["Q" + std::to_string(i + 1)] = answers[i];
    return out;
}
inline std::vector<std::string> answers_from_json(const json& body, std::size_t count = 5) {
    if (!body.is_object()) throw ProtocolError("answers must be a JSON object");
    if (body.size() != count) throw ProtocolError("answers must have exactly " + std::to_string(count) + " keys");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < count; ++i) {
        auto key = "Q" + std::to_string(i + 1);
        auto value = require_string(body, key.c_str());
        if (value != "yes" && value != "no") throw ProtocolError(key + " must be \"yes\" or \"no\"");
        out.push_back(value);
    }
    return out;
}

// {vector: [floats]}
inline json vector_to_json(const std::vector<double>& v) { return {{"vector", v}}; }
inline std::vector<double> vector_from_json(const json& body) {
    const auto& v = require(body, "vector");
    if (!v.is_array() || v.empty()) throw ProtocolError("'vector' must be a non-empty array");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ProtocolError("'vector' holds a non-number");
        out.push_back(x.get<double>());
    }
    return out;
}

}  // namespace wire

}  // namespace adecot
