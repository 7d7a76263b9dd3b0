#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geotime/backends.hpp"
#include "geotime/errors.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Call log — canonical requests in issue order, for tests and traces.
// ---------------------------------------------------------------------------

class CallLog {
public:
    void record(const json& canonical_request) {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.push_back(canonical_request);
    }

    std::vector<json> entries() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_;
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.size();
    }

    size_t count_kind(const std::string& kind) const {
        std::lock_guard<std::mutex> lock(mu_);
        size_t n = 0;
        for (const auto& e : entries_)
            if (e.value("kind", "") == kind) ++n;
        return n;
    }

    template <typename Pred>
    size_t count_if(Pred pred) const {
        std::lock_guard<std::mutex> lock(mu_);
        size_t n = 0;
        for (const auto& e : entries_)
            if (pred(e)) ++n;
        return n;
    }

    void clear() {
        std::lock_guard<std::mutex> lock(mu_);
        entries_.clear();
    }

private:
    mutable std::mutex mu_;
    std::vector<json> entries_;
};

// ---------------------------------------------------------------------------
// Replay store
//
// On disk: {"version": 1, "entries": {digest: {"request": <canonical JSON>,
// "response": <canonical response JSON>}}}. The digest key is recomputed from
// the embedded request at load time, so fixtures can be authored or edited by
// hand without computing hashes.
// ---------------------------------------------------------------------------

class ReplayStore {
public:
    struct Entry {
        json request;
        json response;
    };

    void put(const json& canonical_request, const json& response) {
        std::lock_guard<std::mutex> lock(mu_);
        entries_[digest_of(canonical_request.dump())] = Entry{canonical_request, response};
    }

    std::optional<json> find(const std::string& digest) const {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = entries_.find(digest);
        if (it == entries_.end()) return std::nullopt;
        return it->second.response;
    }

    size_t size() const {
        std::lock_guard<std::mutex> lock(mu_);
        return entries_.size();
    }

    // Typed builders mirroring how the pipeline issues requests.

    void put_chat(const std::string& model, const std::string& prompt,
                  const std::string& answer, int max_tokens = 64) {
        ChatRequest req{model, {{"user", prompt}}, 0.0, max_tokens};
        put(canonical_json(req), make_answer_response(answer));
    }

    void put_vision(const std::string& image_ref, const std::string& prompt,
                    const std::string& answer, int max_tokens = 64) {
        VisionRequest req{image_ref, prompt, max_tokens};
        put(canonical_json(req), make_answer_response(answer));
    }

    void put_embed(EmbedModality modality, const std::string& payload,
                   const std::vector<double>& vector) {
        EmbedRequest req{modality, payload};
        put(canonical_json(req), make_embed_response(EmbeddingVector{vector, modality}));
    }

    void put_search(const std::string& query, int top_k,
                    const std::vector<SearchResult>& results) {
        SearchRequest req{query, top_k};
        put(canonical_json(req), make_search_response(results));
    }

    void put_geocode(const std::string& query, const std::optional<GeocodePlace>& place) {
        GeocodeRequest req{query};
        put(canonical_json(req), make_geocode_response(place));
    }

    // --- persistence ---

    void save(const std::filesystem::path& path) const {
        json entries = json::object();
        {
            std::lock_guard<std::mutex> lock(mu_);
            for (const auto& [digest, entry] : entries_)
                entries[digest] = {{"request", entry.request}, {"response", entry.response}};
        }
        json doc = {{"version", 1}, {"entries", entries}};
        std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot write replay fixture: " + path.string());
        out << doc.dump(2) << "\n";
    }

    static std::shared_ptr<ReplayStore> load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("cannot read replay fixture: " + path.string());
        json doc;
        try {
            in >> doc;
        } catch (const json::exception& e) {
            throw ConfigError("replay fixture is not valid JSON: " + path.string() + ": " + e.what());
        }
        if (!doc.is_object() || doc.value("version", 0) != 1 || !doc.contains("entries"))
            throw ConfigError("unsupported replay fixture layout: " + path.string());
        auto store = std::make_shared<ReplayStore>();
        for (const auto& [key, value] : doc["entries"].items()) {
            if (!value.is_object() || !value.contains("request") || !value.contains("response"))
                throw ConfigError("replay entry '" + key + "' lacks request/response");
            store->put(value["request"], value["response"]);
        }
        return store;
    }

private:
    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Replay-backed providers
// ---------------------------------------------------------------------------

namespace detail {

inline json replay_lookup(const ReplayStore& store, const json& canonical) {
    auto response = store.find(digest_of(canonical.dump()));
    if (!response)
        throw ReplayMiss("no replay entry for request: " + canonical.dump());
    return *response;
}

}  // namespace detail

class ReplayChatBackend : public ChatBackend {
public:
    ReplayChatBackend(std::shared_ptr<ReplayStore> store, std::shared_ptr<CallLog> log = nullptr)
        : store_(std::move(store)), log_(std::move(log)) {}

    std::string chat_complete(const ChatRequest& req) override {
        json canonical = canonical_json(req);
        if (log_) log_->record(canonical);
        return read_answer_response(detail::replay_lookup(*store_, canonical));
    }

private:
    std::shared_ptr<ReplayStore> store_;
    std::shared_ptr<CallLog> log_;
};

class ReplayVisionBackend : public VisionBackend {
public:
    ReplayVisionBackend(std::shared_ptr<ReplayStore> store, std::shared_ptr<CallLog> log = nullptr)
        : store_(std::move(store)), log_(std::move(log)) {}

    std::string vision_qa(const VisionRequest& req) override {
        json canonical = canonical_json(req);
        if (log_) log_->record(canonical);
        return read_answer_response(detail::replay_lookup(*store_, canonical));
    }

private:
    std::shared_ptr<ReplayStore> store_;
    std::shared_ptr<CallLog> log_;
};

class ReplayEmbeddingBackend : public EmbeddingBackend {
public:
    ReplayEmbeddingBackend(std::shared_ptr<ReplayStore> store,
                           std::shared_ptr<CallLog> log = nullptr)
        : store_(std::move(store)), log_(std::move(log)) {}

    EmbeddingVector embed(const EmbedRequest& req) override {
        json canonical = canonical_json(req);
        if (log_) log_->record(canonical);
        // Normalized on the way out, same contract as a live provider.
        return read_embed_response(detail::replay_lookup(*store_, canonical), req.modality)
            .normalized();
    }

private:
    std::shared_ptr<ReplayStore> store_;
    std::shared_ptr<CallLog> log_;
};

class ReplaySearchBackend : public SearchBackend {
public:
    ReplaySearchBackend(std::shared_ptr<ReplayStore> store, std::shared_ptr<CallLog> log = nullptr)
        : store_(std::move(store)), log_(std::move(log)) {}

    std::vector<SearchResult> web_search(const SearchRequest& req) override {
        json canonical = canonical_json(req);
        if (log_) log_->record(canonical);
        return read_search_response(detail::replay_lookup(*store_, canonical));
    }

private:
    std::shared_ptr<ReplayStore> store_;
    std::shared_ptr<CallLog> log_;
};

class ReplayGeocodeBackend : public GeocodeBackend {
public:
    ReplayGeocodeBackend(std::shared_ptr<ReplayStore> store, std::shared_ptr<CallLog> log = nullptr)
        : store_(std::move(store)), log_(std::move(log)) {}

    std::optional<GeocodePlace> geocode(const GeocodeRequest& req) override {
        json canonical = canonical_json(req);
        if (log_) log_->record(canonical);
        return read_geocode_response(detail::replay_lookup(*store_, canonical));
    }

private:
    std::shared_ptr<ReplayStore> store_;
    std::shared_ptr<CallLog> log_;
};

inline Backends make_replay_backends(std::shared_ptr<ReplayStore> store,
                                     std::shared_ptr<CallLog> log = nullptr) {
    Backends b;
    b.chat = std::make_shared<ReplayChatBackend>(store, log);
    b.vision = std::make_shared<ReplayVisionBackend>(store, log);
    b.embedding = std::make_shared<ReplayEmbeddingBackend>(store, log);
    b.search = std::make_shared<ReplaySearchBackend>(store, log);
    b.geocode = std::make_shared<ReplayGeocodeBackend>(store, log);
    return b;
}

// ---------------------------------------------------------------------------
// Recording wrappers — pass through to a live provider while filling a
// ReplayStore, so a recorded run can later be replayed offline.
// ---------------------------------------------------------------------------

class RecordingChatBackend : public ChatBackend {
public:
    RecordingChatBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    std::string chat_complete(const ChatRequest& req) override {
        std::string answer = inner_->chat_complete(req);
        store_->put(canonical_json(req), make_answer_response(answer));
        return answer;
    }

private:
    std::shared_ptr<ChatBackend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

class RecordingVisionBackend : public VisionBackend {
public:
    RecordingVisionBackend(std::shared_ptr<VisionBackend> inner, std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    std::string vision_qa(const VisionRequest& req) override {
        std::string answer = inner_->vision_qa(req);
        store_->put(canonical_json(req), make_answer_response(answer));
        return answer;
    }

private:
    std::shared_ptr<VisionBackend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

class RecordingEmbeddingBackend : public EmbeddingBackend {
public:
    RecordingEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner,
                              std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    EmbeddingVector embed(const EmbedRequest& req) override {
        EmbeddingVector v = inner_->embed(req);
        store_->put(canonical_json(req), make_embed_response(v));
        return v;
    }

private:
    std::shared_ptr<EmbeddingBackend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

class RecordingSearchBackend : public SearchBackend {
public:
    RecordingSearchBackend(std::shared_ptr<SearchBackend> inner, std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    std::vector<SearchResult> web_search(const SearchRequest& req) override {
        auto results = inner_->web_search(req);
        store_->put(canonical_json(req), make_search_response(results));
        return results;
    }

private:
    std::shared_ptr<SearchBackend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

class RecordingGeocodeBackend : public GeocodeBackend {
public:
    RecordingGeocodeBackend(std::shared_ptr<GeocodeBackend> inner, std::shared_ptr<ReplayStore> store)
        : inner_(std::move(inner)), store_(std::move(store)) {}

    std::optional<GeocodePlace> geocode(const GeocodeRequest& req) override {
        auto place = inner_->geocode(req);
        store_->put(canonical_json(req), make_geocode_response(place));
        return place;
    }

private:
    std::shared_ptr<GeocodeBackend> inner_;
    std::shared_ptr<ReplayStore> store_;
};

inline Backends make_recording_backends(const Backends& live, std::shared_ptr<ReplayStore> store) {
    Backends b;
    if (live.chat) b.chat = std::make_shared<RecordingChatBackend>(live.chat, store);
    if (live.vision) b.vision = std::make_shared<RecordingVisionBackend>(live.vision, store);
    if (live.embedding)
        b.embedding = std::make_shared<RecordingEmbeddingBackend>(live.embedding, store);
    if (live.search) b.search = std::make_shared<RecordingSearchBackend>(live.search, store);
    if (live.geocode) b.geocode = std::make_shared<RecordingGeocodeBackend>(live.geocode, store);
    return b;
}

}  // namespace geotime
