#pragma once

// JSON-over-HTTP clients for a remote sampler and remote verifier providers.
// Images travel as base64-encoded 16-bit PAM.

#include <chrono>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <boost/beast/core/detail/base64.hpp>
#include <httplib.h>
#include <json.hpp>

#include "adecot/core.hpp"
#include "adecot/providers.hpp"
#include "adecot/sampler.hpp"

namespace adecot {

// ---------------------------------------------------------------------------
// Codecs

inline std::string base64_encode(const std::string& bytes) {
    namespace b64 = boost::beast::detail::base64;
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

inline std::string base64_decode(const std::string& text) {
    namespace b64 = boost::beast::detail::base64;
    if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
    std::string out(b64::decoded_size(text.size()), '\0');
    auto [written, read] = b64::decode(out.data(), text.data(), text.size());
    std::size_t padding = 0;
    while (padding < 2 && padding < text.size() && text[text.size() - 1 - padding] == '=') ++padding;
    if (read + padding < text.size()) throw ProtocolError("invalid base64 payload");
    out.resize(written);
    return out;
}

/// Portable arbitrary map (P7), MAXVAL 65535, big-endian samples.
inline std::string encode_pam(const Image& image) {
    image.validate();
    std::ostringstream head;
    head << "P7\nWIDTH " << image.width << "\nHEIGHT " << image.height << "\nDEPTH " << image.channels
         << "\nMAXVAL 65535\n";
    if (image.channels == 1) head << "TUPLTYPE GRAYSCALE\n";
    if (image.channels == 3) head << "TUPLTYPE RGB\n";
    head << "ENDHDR\n";
    std::string out = head.str();
    out.reserve(out.size() + image.data.size() * 2);
    for (double v : image.data) {
        auto q = static_cast<std::uint16_t>(std::lround(v * 65535.0));
        out.push_back(static_cast<char>(q >> 8));
        out.push_back(static_cast<char>(q & 0xff));
    }
    return out;
}

inline Image decode_pam(const std::string& bytes) {
    std::size_t end = bytes.find("ENDHDR\n");
    if (bytes.rfind("P7\n", 0) != 0 || end == std::string::npos) throw ProtocolError("not a PAM image");
    std::istringstream head(bytes.substr(3, end - 3));
    int width = 0, height = 0, depth = 0, maxval = 0;
    std::string key;
    while (head >> key) {
        if (key == "WIDTH") head >> width;
        else if (key == "HEIGHT") head >> height;
        else if (key == "DEPTH") head >> depth;
        else if (key == "MAXVAL") head >> maxval;
        else if (key == "TUPLTYPE") head >> key;
        else throw ProtocolError("unknown PAM header field '" + key + "'");
    }
    if (width <= 0 || height <= 0 || depth <= 0 || maxval != 65535) throw ProtocolError("unsupported PAM header");
    const std::size_t offset = end + 7;
    const std::size_t count = static_cast<std::size_t>(width) * height * depth;
    if (bytes.size() != offset + count * 2) throw ProtocolError("PAM payload has the wrong length");
    Image img(height, width, depth);
    for (std::size_t i = 0; i < count; ++i) {
        auto hi = static_cast<unsigned char>(bytes[offset + 2 * i]);
        auto lo = static_cast<unsigned char>(bytes[offset + 2 * i + 1]);
        img.data[i] = static_cast<double>((hi << 8) | lo) / 65535.0;
    }
    return img;
}

inline std::string image_to_b64(const Image& image) { return base64_encode(encode_pam(image)); }
inline Image image_from_b64(const std::string& text) { return decode_pam(base64_decode(text)); }

// ---------------------------------------------------------------------------
// HTTP client

struct RemoteOptions {
    std::string endpoint = "http://127.0.0.1:8080";
    int timeout_ms = 10000;
    int retries = 2;
    int backoff_ms = 50;
};

/// POSTs JSON bodies. Transport failures and 5xx replies are retried;
/// exhausting the retries raises BackendUnavailable. Other non-2xx replies
/// and unparsable bodies raise ProtocolError.
class JsonClient {
  public:
    explicit JsonClient(RemoteOptions options) : options_(std::move(options)) {}

    const RemoteOptions& options() const { return options_; }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
        const std::string payload = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= options_.retries; ++attempt) {
            if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(options_.backoff_ms * attempt));
            httplib::Client client(options_.endpoint);
            auto timeout = std::chrono::milliseconds(options_.timeout_ms);
            client.set_connection_timeout(timeout);
            client.set_read_timeout(timeout);
            client.set_write_timeout(timeout);
            auto res = client.Post(path, payload, "application/json");
            if (!res) {
                last_error = httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status < 200 || res->status >= 300) {
                throw ProtocolError(path + ": HTTP " + std::to_string(res->status) + " " + res->body);
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::parse_error& e) {
                throw ProtocolError(path + ": malformed JSON reply: " + e.what());
            }
        }
        throw BackendUnavailable(options_.endpoint + path + " unreachable after " +
                                 std::to_string(options_.retries + 1) + " attempts: " + last_error);
    }

  private:
    RemoteOptions options_;
};

// ---------------------------------------------------------------------------
// Sampler

struct RemoteLatent : LatentPayload {
    std::string ref;  // empty until the first sampling call
};

/// Server owns latents; this side only keeps their references.
class RemoteSampler : public Sampler {
  public:
    RemoteSampler(std::shared_ptr<JsonClient> client, int total_steps)
        : client_(std::move(client)), total_steps_(total_steps) {}

    int total_steps() const override { return total_steps_; }

  protected:
    static const RemoteLatent& latent_of(const CandidateState& state) {
        auto p = dynamic_cast<const RemoteLatent*>(state.latent.get());
        if (!p) throw InvalidArgument("candidate does not hold a remote latent");
        return *p;
    }

    static std::int64_t steps_of(const nlohmann::json& reply) {
        const auto& v = wire::require(reply, "steps_charged");
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
            throw ProtocolError("'steps_charged' must be a nonnegative integer");
        }
        return v.get<std::int64_t>();
    }

    LatentHandle do_spawn(const EditInstance&, const CandidateState&) override {
        return std::make_shared<RemoteLatent>();
    }

    SampleResult do_sample(const EditInstance& instance, const CandidateState& state, int to_t) override {
        nlohmann::json body = {{"instance_id", instance.id},
                               {"candidate_seed", state.seed},
                               {"prompt", state.prompt},
                               {"from_t", state.timestep},
                               {"to_t", to_t}};
        const auto& latent = latent_of(state);
        if (!latent.ref.empty()) body["latent_ref"] = latent.ref;
        auto reply = client_->post("/v1/sample", body);
        auto next = std::make_shared<RemoteLatent>();
        next->ref = wire::require_string(reply, "latent_ref");
        return {next, steps_of(reply)};
    }

    ImageResult do_preview(const EditInstance&, const CandidateState& state) override {
        auto reply = client_->post("/v1/preview", {{"latent_ref", latent_of(state).ref}});
        return {image_from_b64(wire::require_string(reply, "image_b64")), steps_of(reply)};
    }

    /// A fresh seeded run of `steps` steps (no latent_ref), then decoded.
    ImageResult do_short_run(const EditInstance& instance, const CandidateState& state, int steps) override {
        nlohmann::json body = {{"instance_id", instance.id},
                               {"candidate_seed", state.seed},
                               {"prompt", state.prompt},
                               {"from_t", steps},
                               {"to_t", 0}};
        auto reply = client_->post("/v1/sample", body);
        auto ref = wire::require_string(reply, "latent_ref");
        auto charged = steps_of(reply);
        auto decoded = client_->post("/v1/decode", {{"latent_ref", ref}});
        return {image_from_b64(wire::require_string(decoded, "image_b64")), charged};
    }

    Image do_decode(const EditInstance&, const CandidateState& state) override {
        auto reply = client_->post("/v1/decode", {{"latent_ref", latent_of(state).ref}});
        return image_from_b64(wire::require_string(reply, "image_b64"));
    }

  private:
    std::shared_ptr<JsonClient> client_;
    int total_steps_;
};

// ---------------------------------------------------------------------------
// Providers

class RemoteGeneralScorer : public GeneralScorer {
  public:
    explicit RemoteGeneralScorer(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    GeneralScore score(const Image& source, const Image& edited, const std::string& instruction) override {
        return wire::general_score_from_json(client_->post(
            "/v1/general_score",
            {{"source_b64", image_to_b64(source)}, {"edited_b64", image_to_b64(edited)}, {"instruction", instruction}}));
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

class RemoteRegionProvider : public RegionProvider {
  public:
    explicit RemoteRegionProvider(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    RegionObjects identify(const Image& source, const std::string& instruction) override {
        return wire::region_from_json(
            client_->post("/v1/region", {{"source_b64", image_to_b64(source)}, {"instruction", instruction}}));
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

/// Mask comes back as base64 of H*W bytes, nonzero meaning inside.
class RemoteGrounder : public Grounder {
  public:
    explicit RemoteGrounder(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    std::vector<std::uint8_t> ground(const Image& source, const std::vector<std::string>& objects) override {
        auto reply = client_->post("/v1/ground", {{"source_b64", image_to_b64(source)}, {"objects", objects}});
        auto bytes = base64_decode(wire::require_string(reply, "mask_b64"));
        if (bytes.size() != source.pixel_count()) throw ProtocolError("grounded mask has the wrong size");
        return {bytes.begin(), bytes.end()};
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

class RemoteCaptionProvider : public CaptionProvider {
  public:
    explicit RemoteCaptionProvider(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    Captions caption(const Image& source, const std::string& instruction) override {
        return wire::captions_from_json(
            client_->post("/v1/caption", {{"source_b64", image_to_b64(source)}, {"instruction", instruction}}));
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

class RemoteEmbedder : public Embedder {
  public:
    explicit RemoteEmbedder(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    std::vector<double> embed_image(const Image& image) override {
        return wire::vector_from_json(client_->post("/v1/embed", {{"image_b64", image_to_b64(image)}}));
    }
    std::vector<double> embed_text(const std::string& text) override {
        return wire::vector_from_json(client_->post("/v1/embed", {{"text", text}}));
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

class RemoteQuestionProvider : public QuestionProvider {
  public:
    explicit RemoteQuestionProvider(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    std::vector<std::string> questions(const Image& source, const std::string& instruction) override {
        return wire::questions_from_json(
            client_->post("/v1/questions", {{"source_b64", image_to_b64(source)}, {"instruction", instruction}}));
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

class RemoteAnswerProvider : public AnswerProvider {
  public:
    explicit RemoteAnswerProvider(std::shared_ptr<JsonClient> c) : client_(std::move(c)) {}
    std::vector<std::string> answers(const Image& source, const Image& edited, const std::string& instruction,
                                     const std::vector<std::string>& questions) override {
        return wire::answers_from_json(client_->post("/v1/answers", {{"source_b64", image_to_b64(source)},
                                                                     {"edited_b64", image_to_b64(edited)},
                                                                     {"instruction", instruction},
                                                                     {"questions", questions}}),
                                       questions.size());
    }

  private:
    std::shared_ptr<JsonClient> client_;
};

}  // namespace adecot
