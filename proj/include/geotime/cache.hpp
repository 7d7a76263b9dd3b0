#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <functional>
#include <thread>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "geotime/backends.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// File cache: one JSON file per request digest, grouped by backend kind.
// Each file holds the canonical request, the canonical response, and a
// write timestamp. I/O problems degrade to pass-through, never to failure.
// ---------------------------------------------------------------------------

class CacheStore {
public:
    explicit CacheStore(std::filesystem::path root) : root_(std::move(root)) {}

    const std::filesystem::path& root() const { return root_; }

    std::optional<json> lookup(BackendKind kind, const std::string& digest) const {
        std::error_code ec;
        auto path = entry_path(kind, digest);
        if (!std::filesystem::exists(path, ec) || ec) return std::nullopt;
        try {
            std::ifstream in(path, std::ios::binary);
            if (!in) return std::nullopt;
            json doc;
            in >> doc;
            if (!doc.is_object() || !doc.contains("response")) return std::nullopt;
            return doc["response"];
        } catch (const std::exception&) {
            return std::nullopt;  // corrupted entry counts as a miss
        }
    }

    void store(BackendKind kind, const std::string& digest, const json& request,
               const json& response) const {
        try {
            auto path = entry_path(kind, digest);
            std::filesystem::create_directories(path.parent_path());
            json doc = {{"request", request}, {"response", response}, {"stored_at", now_utc()}};
            // Write-then-rename keeps concurrent readers away from partial files;
            // equal keys always carry equal payloads, so last-write-wins is safe.
            auto tmp = path;
            tmp += ".tmp." + std::to_string(
                static_cast<unsigned long>(reinterpret_cast<uintptr_t>(this) & 0xffff) ^
                static_cast<unsigned long>(
                    std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffffff));
            {
                std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
                if (!out) throw std::runtime_error("open failed");
                out << doc.dump(2) << "\n";
            }
            std::filesystem::rename(tmp, path);
        } catch (const std::exception& e) {
            std::cerr << "warning: cache write failed for " << digest << ": " << e.what() << "\n";
        }
    }

    struct Stats {
        size_t entries = 0;
        uintmax_t bytes = 0;
        std::map<std::string, size_t> by_kind;
    };

    Stats stats() const {
        Stats s;
        std::error_code ec;
        if (!std::filesystem::exists(root_, ec) || ec) return s;
        for (const auto& dir : std::filesystem::directory_iterator(root_, ec)) {
            if (!dir.is_directory()) continue;
            for (const auto& f : std::filesystem::directory_iterator(dir.path(), ec)) {
                if (!f.is_regular_file() || f.path().extension() != ".json") continue;
                ++s.entries;
                s.bytes += f.file_size(ec);
                ++s.by_kind[dir.path().filename().string()];
            }
        }
        return s;
    }

    size_t purge() const {
        size_t removed = 0;
        std::error_code ec;
        if (!std::filesystem::exists(root_, ec) || ec) return 0;
        for (const auto& dir : std::filesystem::directory_iterator(root_, ec)) {
            if (!dir.is_directory()) continue;
            for (const auto& f : std::filesystem::directory_iterator(dir.path(), ec)) {
                if (!f.is_regular_file() || f.path().extension() != ".json") continue;
                if (std::filesystem::remove(f.path(), ec) && !ec) ++removed;
            }
        }
        return removed;
    }

private:
    std::filesystem::path entry_path(BackendKind kind, const std::string& digest) const {
        return root_ / to_string(kind) / (digest + ".json");
    }

    static std::string now_utc() {
        auto now = std::chrono::system_clock::now();
        std::time_t t = std::chrono::system_clock::to_time_t(now);
        std::tm tm{};
        gmtime_r(&t, &tm);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
        return buf;
    }

    std::filesystem::path root_;
};

// ---------------------------------------------------------------------------
// Caching wrappers
// ---------------------------------------------------------------------------

class CachedChatBackend : public ChatBackend {
public:
    CachedChatBackend(std::shared_ptr<ChatBackend> inner, std::shared_ptr<CacheStore> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string chat_complete(const ChatRequest& req) override {
        json canonical = canonical_json(req);
        std::string digest = digest_of(canonical.dump());
        if (auto hit = cache_->lookup(BackendKind::kChat, digest))
            return read_answer_response(*hit);
        std::string answer = inner_->chat_complete(req);
        cache_->store(BackendKind::kChat, digest, canonical, make_answer_response(answer));
        return answer;
    }

private:
    std::shared_ptr<ChatBackend> inner_;
    std::shared_ptr<CacheStore> cache_;
};

class CachedVisionBackend : public VisionBackend {
public:
    CachedVisionBackend(std::shared_ptr<VisionBackend> inner, std::shared_ptr<CacheStore> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::string vision_qa(const VisionRequest& req) override {
        json canonical = canonical_json(req);
        std::string digest = digest_of(canonical.dump());
        if (auto hit = cache_->lookup(BackendKind::kVision, digest))
            return read_answer_response(*hit);
        std::string answer = inner_->vision_qa(req);
        cache_->store(BackendKind::kVision, digest, canonical, make_answer_response(answer));
        return answer;
    }

private:
    std::shared_ptr<VisionBackend> inner_;
    std::shared_ptr<CacheStore> cache_;
};

class CachedEmbeddingBackend : public EmbeddingBackend {
public:
    CachedEmbeddingBackend(std::shared_ptr<EmbeddingBackend> inner,
                           std::shared_ptr<CacheStore> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    EmbeddingVector embed(const EmbedRequest& req) override {
        json canonical = canonical_json(req);
        std::string digest = digest_of(canonical.dump());
        if (auto hit = cache_->lookup(BackendKind::kEmbed, digest))
            return read_embed_response(*hit, req.modality);
        EmbeddingVector v = inner_->embed(req);
        cache_->store(BackendKind::kEmbed, digest, canonical, make_embed_response(v));
        return v;
    }

private:
    std::shared_ptr<EmbeddingBackend> inner_;
    std::shared_ptr<CacheStore> cache_;
};

class CachedSearchBackend : public SearchBackend {
public:
    CachedSearchBackend(std::shared_ptr<SearchBackend> inner, std::shared_ptr<CacheStore> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::vector<SearchResult> web_search(const SearchRequest& req) override {
        json canonical = canonical_json(req);
        std::string digest = digest_of(canonical.dump());
        if (auto hit = cache_->lookup(BackendKind::kSearch, digest))
            return read_search_response(*hit);
        auto results = inner_->web_search(req);
        cache_->store(BackendKind::kSearch, digest, canonical, make_search_response(results));
        return results;
    }

private:
    std::shared_ptr<SearchBackend> inner_;
    std::shared_ptr<CacheStore> cache_;
};

class CachedGeocodeBackend : public GeocodeBackend {
public:
    CachedGeocodeBackend(std::shared_ptr<GeocodeBackend> inner, std::shared_ptr<CacheStore> cache)
        : inner_(std::move(inner)), cache_(std::move(cache)) {}

    std::optional<GeocodePlace> geocode(const GeocodeRequest& req) override {
        json canonical = canonical_json(req);
        std::string digest = digest_of(canonical.dump());
        if (auto hit = cache_->lookup(BackendKind::kGeocode, digest))
            return read_geocode_response(*hit);
        auto place = inner_->geocode(req);
        cache_->store(BackendKind::kGeocode, digest, canonical, make_geocode_response(place));
        return place;
    }

private:
    std::shared_ptr<GeocodeBackend> inner_;
    std::shared_ptr<CacheStore> cache_;
};

inline Backends make_cached_backends(const Backends& inner, std::shared_ptr<CacheStore> cache) {
    Backends b;
    if (inner.chat) b.chat = std::make_shared<CachedChatBackend>(inner.chat, cache);
    if (inner.vision) b.vision = std::make_shared<CachedVisionBackend>(inner.vision, cache);
    if (inner.embedding)
        b.embedding = std::make_shared<CachedEmbeddingBackend>(inner.embedding, cache);
    if (inner.search) b.search = std::make_shared<CachedSearchBackend>(inner.search, cache);
    if (inner.geocode) b.geocode = std::make_shared<CachedGeocodeBackend>(inner.geocode, cache);
    return b;
}

}  // namespace geotime
