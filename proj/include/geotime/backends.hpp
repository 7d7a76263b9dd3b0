#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geotime/errors.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Requests
// ---------------------------------------------------------------------------

enum class BackendKind { kChat, kVision, kEmbed, kSearch, kGeocode };

inline const char* to_string(BackendKind k) {
    switch (k) {
        case BackendKind::kChat: return "chat";
        case BackendKind::kVision: return "vision";
        case BackendKind::kEmbed: return "embed";
        case BackendKind::kSearch: return "search";
        case BackendKind::kGeocode: return "geocode";
    }
    return "?";
}

struct ChatRequest {
    std::string model_id;
    std::vector<std::pair<std::string, std::string>> messages;  // (role, content)
    double temperature = 0.0;
    int max_tokens = 64;
};

struct VisionRequest {
    std::string image_ref;
    std::string prompt;  // catalog template with placeholders substituted
    int max_tokens = 64;
};

enum class EmbedModality { kImage, kText };

inline const char* to_string(EmbedModality m) {
    return m == EmbedModality::kImage ? "image" : "text";
}

struct EmbedRequest {
    EmbedModality modality = EmbedModality::kText;
    std::string payload;  // image reference or raw text
};

struct SearchRequest {
    std::string query;
    int top_k = 5;
};

struct GeocodeRequest {
    std::string query;
};

// Canonical request serializations. nlohmann::json objects keep keys sorted,
// so dump() of these is a stable byte string; the digest of that string is
// the cache/replay key. Preconditions are enforced here so every provider
// (live, cached, replay) rejects the same bad inputs.

inline json canonical_json(const ChatRequest& req) {
    if (req.messages.empty()) throw EmptyInput("chat request has no messages");
    if (req.temperature < 0) throw ConfigError("negative temperature");
    json msgs = json::array();
    for (const auto& [role, content] : req.messages) msgs.push_back({role, content});
    return {{"kind", "chat"},
            {"model", req.model_id},
            {"messages", msgs},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
}

inline json canonical_json(const VisionRequest& req) {
    if (req.prompt.empty()) throw EmptyInput("vision request has no prompt");
    if (req.image_ref.empty()) throw EmptyInput("vision request has no image");
    return {{"kind", "vision"},
            {"image", req.image_ref},
            {"prompt", req.prompt},
            {"max_tokens", req.max_tokens}};
}

inline json canonical_json(const EmbedRequest& req) {
    if (req.payload.empty()) throw EmptyInput("embed request has empty payload");
    return {{"kind", "embed"}, {"modality", to_string(req.modality)}, {"payload", req.payload}};
}

inline json canonical_json(const SearchRequest& req) {
    if (trim(req.query).empty()) throw EmptyQuery("empty search query");
    if (req.top_k < 1) throw ConfigError("top_k must be >= 1");
    return {{"kind", "search"}, {"query", req.query}, {"top_k", req.top_k}};
}

inline json canonical_json(const GeocodeRequest& req) {
    if (trim(req.query).empty()) throw EmptyQuery("empty geocode query");
    return {{"kind", "geocode"}, {"query", req.query}};
}

template <typename Request>
std::string request_digest(const Request& req) {
    return digest_of(canonical_json(req).dump());
}

struct CacheKey {
    BackendKind kind = BackendKind::kChat;
    std::string digest;
};

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

struct EmbeddingVector {
    std::vector<double> values;
    EmbedModality modality = EmbedModality::kText;

    void validate() const {
        if (values.empty()) throw MalformedResponse("empty embedding vector");
        for (double v : values)
            if (!std::isfinite(v)) throw MalformedResponse("non-finite embedding value");
    }

    EmbeddingVector normalized() const {
        validate();
        double sq = 0;
        for (double v : values) sq += v * v;
        if (sq <= 0) throw MalformedResponse("zero embedding vector");
        EmbeddingVector out{values, modality};
        double inv = 1.0 / std::sqrt(sq);
        for (double& v : out.values) v *= inv;
        return out;
    }
};

// score = 100 · max(0, cosine). Positive-only so the 0–100 threshold axis is
// meaningful; symmetric by construction.
inline double similarity_score(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.values.size() != b.values.size())
        throw DimensionMismatch("embedding dimensions differ: " +
                                std::to_string(a.values.size()) + " vs " +
                                std::to_string(b.values.size()));
    a.validate();
    b.validate();
    double dot = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na <= 0 || nb <= 0) return 0.0;
    double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    return 100.0 * std::max(0.0, cosine);
}

// ---------------------------------------------------------------------------
// Search results
// ---------------------------------------------------------------------------

struct SearchResult {
    int rank = 0;
    std::string title;
    std::string snippet;
    std::string url;
    std::optional<std::string> thumbnail_ref;
};

// ---------------------------------------------------------------------------
// Canonical response payloads
//
// Every provider (live, cache, replay, recorder) speaks these JSON shapes;
// live clients translate their wire formats into them.
// ---------------------------------------------------------------------------

inline json make_answer_response(const std::string& answer) { return {{"answer", answer}}; }

inline std::string read_answer_response(const json& j) {
    if (!j.is_object() || !j.contains("answer") || !j["answer"].is_string())
        throw MalformedResponse("expected {\"answer\": string}, got: " + j.dump());
    return j["answer"].get<std::string>();
}

inline json make_embed_response(const EmbeddingVector& v) { return {{"vector", v.values}}; }

inline EmbeddingVector read_embed_response(const json& j, EmbedModality modality) {
    if (!j.is_object() || !j.contains("vector") || !j["vector"].is_array())
        throw MalformedResponse("expected {\"vector\": [...]}, got: " + j.dump());
    EmbeddingVector v;
    v.modality = modality;
    for (const auto& x : j["vector"]) {
        if (!x.is_number()) throw MalformedResponse("non-numeric embedding entry");
        v.values.push_back(x.get<double>());
    }
    v.validate();
    return v;
}

inline json make_search_response(const std::vector<SearchResult>& results) {
    json arr = json::array();
    for (const auto& r : results) {
        json item = {{"title", r.title}, {"snippet", r.snippet}, {"url", r.url}};
        if (r.thumbnail_ref) item["thumbnail_url"] = *r.thumbnail_ref;
        arr.push_back(std::move(item));
    }
    return {{"results", arr}};
}

inline std::vector<SearchResult> read_search_response(const json& j) {
    if (!j.is_object() || !j.contains("results") || !j["results"].is_array())
        throw MalformedResponse("expected {\"results\": [...]}, got: " + j.dump());
    std::vector<SearchResult> out;
    int rank = 0;
    for (const auto& item : j["results"]) {
        if (!item.is_object()) throw MalformedResponse("search result is not an object");
        SearchResult r;
        r.rank = rank++;
        r.title = item.value("title", "");
        r.snippet = item.value("snippet", "");
        r.url = item.value("url", "");
        if (item.contains("thumbnail_url") && item["thumbnail_url"].is_string())
            r.thumbnail_ref = item["thumbnail_url"].get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

inline json make_geocode_response(const std::optional<GeocodePlace>& place) {
    if (!place) return {{"found", false}};
    json j = {{"found", true}};
    if (place->area) j["area"] = *place->area;
    if (place->city) j["city"] = *place->city;
    if (place->country) j["country"] = *place->country;
    return j;
}

inline std::optional<GeocodePlace> read_geocode_response(const json& j) {
    if (!j.is_object() || !j.contains("found") || !j["found"].is_boolean())
        throw MalformedResponse("expected {\"found\": bool, ...}, got: " + j.dump());
    if (!j["found"].get<bool>()) return std::nullopt;
    GeocodePlace p;
    if (j.contains("area") && j["area"].is_string()) p.area = j["area"].get<std::string>();
    if (j.contains("city") && j["city"].is_string()) p.city = j["city"].get<std::string>();
    if (j.contains("country") && j["country"].is_string())
        p.country = j["country"].get<std::string>();
    return p;
}

// ---------------------------------------------------------------------------
// Backend interfaces
// ---------------------------------------------------------------------------

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string chat_complete(const ChatRequest& req) = 0;
};

class VisionBackend {
public:
    virtual ~VisionBackend() = default;
    virtual std::string vision_qa(const VisionRequest& req) = 0;
};

class EmbeddingBackend {
public:
    virtual ~EmbeddingBackend() = default;
    virtual EmbeddingVector embed(const EmbedRequest& req) = 0;
};

class SearchBackend {
public:
    virtual ~SearchBackend() = default;
    virtual std::vector<SearchResult> web_search(const SearchRequest& req) = 0;
};

class GeocodeBackend {
public:
    virtual ~GeocodeBackend() = default;
    // nullopt = clean miss; transport problems throw GeocodeUnavailable.
    virtual std::optional<GeocodePlace> geocode(const GeocodeRequest& req) = 0;
};

// The full set a pipeline run needs; individual members may be null when an
// ablation or replay setup never touches them.
struct Backends {
    std::shared_ptr<ChatBackend> chat;
    std::shared_ptr<VisionBackend> vision;
    std::shared_ptr<EmbeddingBackend> embedding;
    std::shared_ptr<SearchBackend> search;
    std::shared_ptr<GeocodeBackend> geocode;
};

// ---------------------------------------------------------------------------
// Retry policy
// ---------------------------------------------------------------------------

struct RetryPolicy {
    int max_retries = 3;
    std::chrono::milliseconds base_delay{1000};
    double multiplier = 2.0;
};

// Runs fn, retrying on Timeout/RateLimited with exponential backoff. The
// sleeper is injectable so tests do not wait.
template <typename Fn>
auto retry_call(const RetryPolicy& policy, Fn&& fn,
                const std::function<void(std::chrono::milliseconds)>& sleeper = nullptr)
    -> decltype(fn()) {
    auto delay = policy.base_delay;
    for (int attempt = 0;; ++attempt) {
        try {
            return fn();
        } catch (const Timeout&) {
            if (attempt >= policy.max_retries) throw;
        } catch (const RateLimited&) {
            if (attempt >= policy.max_retries) throw;
        }
        if (sleeper)
            sleeper(delay);
        else
            std::this_thread::sleep_for(delay);
        delay = std::chrono::milliseconds(
            static_cast<long long>(static_cast<double>(delay.count()) * policy.multiplier));
    }
}

}  // namespace geotime
