#pragma once

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "geotime/backends.hpp"
#include "geotime/errors.hpp"
#include "geotime/util.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Endpoint configuration
// ---------------------------------------------------------------------------

struct EndpointConfig {
    std::string endpoint;  // full URL including path
    std::string api_key;
    std::string model_id;  // chat / vision only
    int max_concurrent = 4;
    int min_interval_ms = 0;
    int timeout_seconds = 30;
    RetryPolicy retry;
};

namespace detail {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /rest, at least "/"
};

inline SplitUrl split_url(const std::string& url) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint URL lacks scheme: " + url);
    size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) return {url, "/"};
    return {url.substr(0, slash), url.substr(slash)};
}

// Caps in-flight requests and enforces a minimum spacing between request
// starts. Shared by all clones of one backend handle.
class Throttle {
public:
    Throttle(int max_concurrent, std::chrono::milliseconds min_interval)
        : max_(max_concurrent < 1 ? 1 : max_concurrent), interval_(min_interval) {}

    class Guard {
    public:
        explicit Guard(Throttle* t) : t_(t) {}
        Guard(Guard&& o) noexcept : t_(std::exchange(o.t_, nullptr)) {}
        Guard(const Guard&) = delete;
        ~Guard() {
            if (t_) t_->release();
        }

    private:
        Throttle* t_;
    };

    Guard acquire() {
        std::chrono::steady_clock::time_point wait_until;
        {
            std::unique_lock<std::mutex> lock(mu_);
            cv_.wait(lock, [&] { return in_flight_ < max_; });
            ++in_flight_;
            auto now = std::chrono::steady_clock::now();
            wait_until = next_start_ > now ? next_start_ : now;
            next_start_ = wait_until + interval_;
        }
        if (interval_.count() > 0) std::this_thread::sleep_until(wait_until);
        return Guard(this);
    }

private:
    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
    }

    std::mutex mu_;
    std::condition_variable cv_;
    int in_flight_ = 0;
    const int max_;
    std::chrono::steady_clock::time_point next_start_{};
    const std::chrono::milliseconds interval_;
};

inline bool transport_retryable(httplib::Error e) {
    switch (e) {
        case httplib::Error::Connection:
        case httplib::Error::ConnectionTimeout:
        case httplib::Error::Read:
        case httplib::Error::Write:
        case httplib::Error::ProxyConnection:
            return true;
        default:
            return false;
    }
}

inline json parse_http_result(const httplib::Result& res, const std::string& what) {
    if (!res) {
        if (transport_retryable(res.error()))
            throw Timeout(what + ": " + httplib::to_string(res.error()));
        throw MalformedResponse(what + ": transport error: " + httplib::to_string(res.error()));
    }
    if (res->status == 429) throw RateLimited(what + ": HTTP 429");
    if (res->status == 408 || res->status >= 500)
        throw Timeout(what + ": HTTP " + std::to_string(res->status));
    if (res->status < 200 || res->status >= 300)
        throw MalformedResponse(what + ": HTTP " + std::to_string(res->status) + ": " +
                                res->body.substr(0, 200));
    try {
        return json::parse(res->body);
    } catch (const json::exception& e) {
        throw MalformedResponse(what + ": response is not JSON: " + e.what());
    }
}

inline httplib::Headers auth_headers(const EndpointConfig& cfg) {
    httplib::Headers h;
    if (!cfg.api_key.empty()) h.emplace("Authorization", "Bearer " + cfg.api_key);
    return h;
}

inline json http_post(const EndpointConfig& cfg, Throttle& throttle, const json& body,
                      const std::string& what) {
    return retry_call(cfg.retry, [&] {
        auto guard = throttle.acquire();
        SplitUrl url = split_url(cfg.endpoint);
        httplib::Client cli(url.base);
        cli.set_connection_timeout(cfg.timeout_seconds, 0);
        cli.set_read_timeout(cfg.timeout_seconds, 0);
        cli.set_write_timeout(cfg.timeout_seconds, 0);
        auto res = cli.Post(url.path, auth_headers(cfg), body.dump(), "application/json");
        return parse_http_result(res, what);
    });
}

inline json http_get(const EndpointConfig& cfg, Throttle& throttle, const std::string& query_string,
                     const std::string& what) {
    return retry_call(cfg.retry, [&] {
        auto guard = throttle.acquire();
        SplitUrl url = split_url(cfg.endpoint);
        httplib::Client cli(url.base);
        cli.set_connection_timeout(cfg.timeout_seconds, 0);
        cli.set_read_timeout(cfg.timeout_seconds, 0);
        std::string path = url.path;
        path += path.find('?') == std::string::npos ? "?" : "&";
        path += query_string;
        auto res = cli.Get(path, auth_headers(cfg));
        return parse_http_result(res, what);
    });
}

// Local file → data URL; http(s)/data references pass through untouched.
inline std::string image_payload(const std::string& image_ref) {
    if (image_ref.rfind("http://", 0) == 0 || image_ref.rfind("https://", 0) == 0 ||
        image_ref.rfind("data:", 0) == 0)
        return image_ref;
    std::ifstream in(image_ref, std::ios::binary);
    if (!in) throw InputUnreadable("cannot read image: " + image_ref);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::string ext = std::filesystem::path(image_ref).extension().string();
    std::string mime = "application/octet-stream";
    if (ext == ".jpg" || ext == ".jpeg") mime = "image/jpeg";
    else if (ext == ".png") mime = "image/png";
    else if (ext == ".gif") mime = "image/gif";
    else if (ext == ".webp") mime = "image/webp";
    return "data:" + mime + ";base64," + base64_encode(bytes);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Live clients
// ---------------------------------------------------------------------------

class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(EndpointConfig cfg)
        : cfg_(std::move(cfg)),
          throttle_(cfg_.max_concurrent, std::chrono::milliseconds(cfg_.min_interval_ms)) {}

    std::string chat_complete(const ChatRequest& req) override {
        canonical_json(req);  // validate preconditions
        json messages = json::array();
        for (const auto& [role, content] : req.messages)
            messages.push_back({{"role", role}, {"content", content}});
        json body = {{"model", req.model_id.empty() ? cfg_.model_id : req.model_id},
                     {"messages", messages},
                     {"temperature", req.temperature},
                     {"max_tokens", req.max_tokens}};
        json r = detail::http_post(cfg_, throttle_, body, "chat");
        return trim(first_choice_content(r));
    }

    static std::string first_choice_content(const json& r) {
        if (!r.is_object() || !r.contains("choices") || !r["choices"].is_array() ||
            r["choices"].empty())
            throw MalformedResponse("chat response has no choices: " + r.dump().substr(0, 200));
        const json& msg = r["choices"][0];
        if (msg.contains("message") && msg["message"].is_object() &&
            msg["message"].contains("content") && msg["message"]["content"].is_string())
            return msg["message"]["content"].get<std::string>();
        throw MalformedResponse("chat choice has no message content");
    }

private:
    EndpointConfig cfg_;
    detail::Throttle throttle_;
};

class HttpVisionBackend : public VisionBackend {
public:
    explicit HttpVisionBackend(EndpointConfig cfg)
        : cfg_(std::move(cfg)),
          throttle_(cfg_.max_concurrent, std::chrono::milliseconds(cfg_.min_interval_ms)) {}

    std::string vision_qa(const VisionRequest& req) override {
        canonical_json(req);  // validate preconditions
        json content = json::array({
            {{"type", "text"}, {"text", req.prompt}},
            {{"type", "image_url"}, {"image_url", {{"url", detail::image_payload(req.image_ref)}}}},
        });
        json body = {{"model", cfg_.model_id},
                     {"messages", json::array({{{"role", "user"}, {"content", content}}})},
                     {"temperature", 0.0},
                     {"max_tokens", req.max_tokens}};
        json r = detail::http_post(cfg_, throttle_, body, "vision");
        return trim(HttpChatBackend::first_choice_content(r));
    }

private:
    EndpointConfig cfg_;
    detail::Throttle throttle_;
};

class HttpEmbeddingBackend : public EmbeddingBackend {
public:
    explicit HttpEmbeddingBackend(EndpointConfig cfg)
        : cfg_(std::move(cfg)),
          throttle_(cfg_.max_concurrent, std::chrono::milliseconds(cfg_.min_interval_ms)) {}

    EmbeddingVector embed(const EmbedRequest& req) override {
        canonical_json(req);  // validate preconditions
        std::string payload = req.modality == EmbedModality::kImage
                                  ? detail::image_payload(req.payload)
                                  : req.payload;
        json body = {{"modality", to_string(req.modality)}, {"payload", payload}};
        json r = detail::http_post(cfg_, throttle_, body, "embed");
        return read_embed_response(r, req.modality).normalized();
    }

private:
    EndpointConfig cfg_;
    detail::Throttle throttle_;
};

class HttpSearchBackend : public SearchBackend {
public:
    explicit HttpSearchBackend(EndpointConfig cfg)
        : cfg_(std::move(cfg)),
          throttle_(cfg_.max_concurrent, std::chrono::milliseconds(cfg_.min_interval_ms)) {}

    std::vector<SearchResult> web_search(const SearchRequest& req) override {
        canonical_json(req);  // validate preconditions
        json body = {{"query", req.query}, {"top_k", req.top_k}};
        json r;
        try {
            r = detail::http_post(cfg_, throttle_, body, "search");
        } catch (const MalformedResponse& e) {
            // Quota exhaustion is commonly reported as 403 with a quota message.
            if (std::string(e.what()).find("quota") != std::string::npos) throw QuotaExceeded(e.what());
            throw;
        }
        auto results = read_search_response(r);
        if (results.size() > static_cast<size_t>(req.top_k))
            results.resize(static_cast<size_t>(req.top_k));
        return results;
    }

private:
    EndpointConfig cfg_;
    detail::Throttle throttle_;
};

class HttpGeocodeBackend : public GeocodeBackend {
public:
    explicit HttpGeocodeBackend(EndpointConfig cfg)
        : cfg_(std::move(cfg)),
          throttle_(cfg_.max_concurrent, std::chrono::milliseconds(cfg_.min_interval_ms)) {}

    std::optional<GeocodePlace> geocode(const GeocodeRequest& req) override {
        canonical_json(req);  // validate preconditions
        json r;
        try {
            r = detail::http_get(cfg_, throttle_, "q=" + url_encode(req.query), "geocode");
        } catch (const BackendError& e) {
            throw GeocodeUnavailable(e.what());
        }
        return parse_place(r);
    }

    // Accepts {found, area?, city?, country?}, a bare component object, a
    // provider-style {address: {...}} object, or an array of either.
    static std::optional<GeocodePlace> parse_place(const json& r) {
        if (r.is_array()) {
            if (r.empty()) return std::nullopt;
            return parse_place(r[0]);
        }
        if (!r.is_object() || r.empty()) return std::nullopt;
        if (r.contains("found")) return read_geocode_response(r);
        const json& src = r.contains("address") && r["address"].is_object() ? r["address"] : r;
        GeocodePlace p;
        auto pick = [&](std::initializer_list<const char*> keys) -> std::optional<std::string> {
            for (const char* k : keys)
                if (src.contains(k) && src[k].is_string()) return src[k].get<std::string>();
            return std::nullopt;
        };
        p.area = pick({"area", "attraction", "tourism", "neighbourhood", "suburb"});
        p.city = pick({"city", "town", "village", "municipality"});
        p.country = pick({"country"});
        if (p.empty()) return std::nullopt;
        return p;
    }

private:
    EndpointConfig cfg_;
    detail::Throttle throttle_;
};

struct HttpEndpoints {
    EndpointConfig chat;
    EndpointConfig vision;
    EndpointConfig embed;
    EndpointConfig search;
    EndpointConfig geocode;
};

inline Backends make_http_backends(const HttpEndpoints& endpoints) {
    Backends b;
    if (!endpoints.chat.endpoint.empty())
        b.chat = std::make_shared<HttpChatBackend>(endpoints.chat);
    if (!endpoints.vision.endpoint.empty())
        b.vision = std::make_shared<HttpVisionBackend>(endpoints.vision);
    if (!endpoints.embed.endpoint.empty())
        b.embedding = std::make_shared<HttpEmbeddingBackend>(endpoints.embed);
    if (!endpoints.search.endpoint.empty())
        b.search = std::make_shared<HttpSearchBackend>(endpoints.search);
    if (!endpoints.geocode.endpoint.empty())
        b.geocode = std::make_shared<HttpGeocodeBackend>(endpoints.geocode);
    return b;
}

}  // namespace geotime
