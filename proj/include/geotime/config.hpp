#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geotime/combiner.hpp"
#include "geotime/errors.hpp"
#include "geotime/noise_filter.hpp"
#include "geotime/retriever.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Pipeline configuration
//
// Precedence: CLI flags > config file > built-in defaults. Environment
// variables supply credentials (and endpoint overrides) only, never tuning
// parameters.
// ---------------------------------------------------------------------------

struct ServiceSettings {
    std::string endpoint;
    std::string api_key;
    std::string model_id;
};

struct PipelineConfig {
    int hash_threshold = 5;
    double retrieval_threshold = 90.0;
    std::string schedule = "singles,pairs,all";
    std::string retrieval_mode = "image_image";

    // Ablations. The hierarchy restrictions are mutually exclusive.
    bool no_filter = false;
    bool no_retrieval = false;
    bool hier_1_only = false;  // singleton combinations only
    bool hier_3_only = false;  // full-set combination only

    int workers = 1;
    int top_k = 5;
    int epoch_year = 2021;  // open-ended "since YYYY" ranges close here
    bool fail_open = false;  // filter accepts on backend failure
    bool fail_hard = false;  // total perception failure aborts the task

    std::string cache_dir;     // empty → no response cache
    std::string replay_path;   // non-empty → offline replay backends
    std::string record_path;   // non-empty → record live responses here

    ServiceSettings chat;    // also used by the date/deduction prompts
    ServiceSettings vision;  // falls back to chat credentials
    ServiceSettings embed;   // falls back to chat credentials
    ServiceSettings search;
    ServiceSettings geocode;

    void validate() const {
        if (hash_threshold < 1) throw ConfigError("hash threshold must be >= 1");
        if (retrieval_threshold < 0.0 || retrieval_threshold > 100.0)
            throw ConfigError("retrieval threshold must be in [0,100]");
        if (workers < 1) throw ConfigError("worker count must be >= 1");
        if (top_k < 1) throw ConfigError("top_k must be >= 1");
        if (hier_1_only && hier_3_only)
            throw ConfigError("hier_1_only and hier_3_only are mutually exclusive");
        CombinationSchedule::parse(schedule);          // throws on bad schedule
        retrieval_mode_from_string(retrieval_mode);    // throws on bad mode
    }

    // The schedule after applying hierarchy ablations.
    CombinationSchedule effective_schedule() const {
        if (hier_1_only) return CombinationSchedule{{{LevelSpec::Kind::kSingles}}};
        if (hier_3_only) return CombinationSchedule{{{LevelSpec::Kind::kAll}}};
        return CombinationSchedule::parse(schedule);
    }

    HierarchyConfig hierarchy_config() const {
        HierarchyConfig h;
        h.schedule = effective_schedule();
        h.hash_threshold = hash_threshold;
        return h;
    }

    NoiseFilterConfig filter_config() const {
        NoiseFilterConfig f;
        f.enabled = !no_filter;
        f.fail_open = fail_open;
        return f;
    }

    RetrieverConfig retriever_config() const {
        RetrieverConfig r;
        r.retrieval_threshold = retrieval_threshold;
        r.mode = retrieval_mode_from_string(retrieval_mode);
        r.top_k = top_k;
        r.no_retrieval = no_retrieval;
        return r;
    }

    // Snapshot stored with run artifacts. Credentials are scrubbed.
    nlohmann::json to_json() const {
        auto service = [](const ServiceSettings& s) {
            return nlohmann::json{{"endpoint", s.endpoint}, {"model_id", s.model_id}};
        };
        return {{"ht", hash_threshold},
                {"rt", retrieval_threshold},
                {"schedule", schedule},
                {"retrieval_mode", retrieval_mode},
                {"no_filter", no_filter},
                {"no_retrieval", no_retrieval},
                {"hier_1_only", hier_1_only},
                {"hier_3_only", hier_3_only},
                {"workers", workers},
                {"top_k", top_k},
                {"epoch_year", epoch_year},
                {"fail_open", fail_open},
                {"fail_hard", fail_hard},
                {"cache_dir", cache_dir},
                {"replay_path", replay_path},
                {"record_path", record_path},
                {"backends",
                 {{"chat", service(chat)},
                  {"vision", service(vision)},
                  {"embed", service(embed)},
                  {"search", service(search)},
                  {"geocode", service(geocode)}}}};
    }
};

namespace detail {

inline void read_service(const nlohmann::json& j, const char* key, ServiceSettings& out) {
    if (!j.contains(key)) return;
    const auto& s = j.at(key);
    if (s.contains("endpoint")) out.endpoint = s.at("endpoint").get<std::string>();
    if (s.contains("api_key")) out.api_key = s.at("api_key").get<std::string>();
    if (s.contains("model_id")) out.model_id = s.at("model_id").get<std::string>();
}

}  // namespace detail

// Config-file layer: any known key present overrides the current value.
inline void apply_config_json(PipelineConfig& config, const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    if (j.contains("ht")) config.hash_threshold = j.at("ht").get<int>();
    if (j.contains("rt")) config.retrieval_threshold = j.at("rt").get<double>();
    if (j.contains("schedule")) config.schedule = j.at("schedule").get<std::string>();
    if (j.contains("retrieval_mode"))
        config.retrieval_mode = j.at("retrieval_mode").get<std::string>();
    if (j.contains("no_filter")) config.no_filter = j.at("no_filter").get<bool>();
    if (j.contains("no_retrieval")) config.no_retrieval = j.at("no_retrieval").get<bool>();
    if (j.contains("hier_1_only")) config.hier_1_only = j.at("hier_1_only").get<bool>();
    if (j.contains("hier_3_only")) config.hier_3_only = j.at("hier_3_only").get<bool>();
    if (j.contains("workers")) config.workers = j.at("workers").get<int>();
    if (j.contains("top_k")) config.top_k = j.at("top_k").get<int>();
    if (j.contains("epoch_year")) config.epoch_year = j.at("epoch_year").get<int>();
    if (j.contains("fail_open")) config.fail_open = j.at("fail_open").get<bool>();
    if (j.contains("fail_hard")) config.fail_hard = j.at("fail_hard").get<bool>();
    if (j.contains("cache_dir")) config.cache_dir = j.at("cache_dir").get<std::string>();
    if (j.contains("replay_path")) config.replay_path = j.at("replay_path").get<std::string>();
    if (j.contains("record_path")) config.record_path = j.at("record_path").get<std::string>();
    if (j.contains("backends")) {
        const auto& b = j.at("backends");
        detail::read_service(b, "chat", config.chat);
        detail::read_service(b, "vision", config.vision);
        detail::read_service(b, "embed", config.embed);
        detail::read_service(b, "search", config.search);
        detail::read_service(b, "geocode", config.geocode);
    }
}

inline PipelineConfig load_config_file(const std::filesystem::path& path) {
    PipelineConfig config;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path.string() + ": " + e.what());
    }
    apply_config_json(config, j);
    return config;
}

// CLI layer: only the flags actually passed are present.
struct ConfigOverrides {
    std::optional<int> hash_threshold;
    std::optional<double> retrieval_threshold;
    std::optional<std::string> schedule;
    std::optional<std::string> retrieval_mode;
    std::optional<bool> no_filter;
    std::optional<bool> no_retrieval;
    std::optional<std::string> hier;  // "1", "3", or "full"
    std::optional<int> workers;
    std::optional<int> top_k;
    std::optional<std::string> replay_path;
    std::optional<std::string> record_path;
    std::optional<std::string> cache_dir;
};

inline void apply_overrides(PipelineConfig& config, const ConfigOverrides& o) {
    if (o.hash_threshold) config.hash_threshold = *o.hash_threshold;
    if (o.retrieval_threshold) config.retrieval_threshold = *o.retrieval_threshold;
    if (o.schedule) config.schedule = *o.schedule;
    if (o.retrieval_mode) config.retrieval_mode = *o.retrieval_mode;
    if (o.no_filter) config.no_filter = *o.no_filter;
    if (o.no_retrieval) config.no_retrieval = *o.no_retrieval;
    if (o.hier) {
        std::string h = to_lower(trim(*o.hier));
        if (h == "1" || h == "1st" || h == "first") {
            config.hier_1_only = true;
            config.hier_3_only = false;
        } else if (h == "3" || h == "3rd" || h == "third") {
            config.hier_3_only = true;
            config.hier_1_only = false;
        } else if (h == "full" || h == "all" || h == "default") {
            config.hier_1_only = false;
            config.hier_3_only = false;
        } else {
            throw ConfigError("unknown --hier value: " + *o.hier);
        }
    }
    if (o.workers) config.workers = *o.workers;
    if (o.top_k) config.top_k = *o.top_k;
    if (o.replay_path) config.replay_path = *o.replay_path;
    if (o.record_path) config.record_path = *o.record_path;
    if (o.cache_dir) config.cache_dir = *o.cache_dir;
}

// Environment layer: credentials and endpoint overrides only. The vision and
// embedding services ride the chat credentials unless set separately.
inline void apply_env(PipelineConfig& config,
                      const std::function<const char*(const char*)>& getenv_fn = nullptr) {
    auto get = [&](const char* name) -> std::optional<std::string> {
        const char* v = getenv_fn ? getenv_fn(name) : std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    if (auto v = get("CHAT_API_KEY")) {
        config.chat.api_key = *v;
        if (config.vision.api_key.empty()) config.vision.api_key = *v;
        if (config.embed.api_key.empty()) config.embed.api_key = *v;
    }
    if (auto v = get("SEARCH_API_KEY")) config.search.api_key = *v;
    if (auto v = get("GEOCODE_API_KEY")) config.geocode.api_key = *v;
    if (auto v = get("CHAT_ENDPOINT")) config.chat.endpoint = *v;
    if (auto v = get("VISION_ENDPOINT")) config.vision.endpoint = *v;
    if (auto v = get("EMBED_ENDPOINT")) config.embed.endpoint = *v;
    if (auto v = get("SEARCH_ENDPOINT")) config.search.endpoint = *v;
    if (auto v = get("GEOCODE_ENDPOINT")) config.geocode.endpoint = *v;
}

// Full resolution: defaults, then the optional file, then CLI, then env.
inline PipelineConfig resolve_config(const std::optional<std::filesystem::path>& config_file,
                                     const ConfigOverrides& overrides,
                                     bool read_env = true) {
    PipelineConfig config;
    if (config_file) config = load_config_file(*config_file);
    apply_overrides(config, overrides);
    if (read_env) apply_env(config);
    config.validate();
    return config;
}

// ---------------------------------------------------------------------------
// Dataset I/O (JSON Lines, one task per line)
// ---------------------------------------------------------------------------

inline ImageTask task_from_dataset_json(const nlohmann::json& j, size_t line_number) {
    if (!j.is_object()) throw DatasetError("line " + std::to_string(line_number) + ": not an object");
    ImageTask task;
    if (j.contains("id")) task.id = j.at("id").get<std::string>();
    if (j.contains("image_path")) task.image_ref = j.at("image_path").get<std::string>();
    if (task.id.empty()) {
        // fall back to the image filename stem, then the line number
        std::string stem = std::filesystem::path(task.image_ref).stem().string();
        task.id = stem.empty() ? "task" + std::to_string(line_number) : stem;
    }
    if (j.contains("gold_time") && !j.at("gold_time").is_null())
        task.gold_time = j.at("gold_time").get<std::string>();
    if (j.contains("gold_location") && !j.at("gold_location").is_null())
        task.gold_location = j.at("gold_location").get<std::string>();
    if (j.contains("choices") && !j.at("choices").is_null()) {
        for (const auto& [key, value] : j.at("choices").items()) {
            ChoiceSet cs;
            cs.options = value.at("options").get<std::vector<std::string>>();
            if (value.contains("gold") && !value.at("gold").is_null())
                cs.gold = value.at("gold").get<std::string>();
            task.choices[key] = std::move(cs);
        }
    }
    task.validate();
    return task;
}

inline std::vector<ImageTask> load_dataset(const std::filesystem::path& path) {
    std::string content = read_text_file(path);
    std::vector<ImageTask> tasks;
    std::set<std::string> ids;
    size_t line_number = 0;
    for (const auto& line : split(content, '\n')) {
        ++line_number;
        std::string t = trim(line);
        if (t.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(t);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(line_number) + ": " + e.what());
        }
        ImageTask task = task_from_dataset_json(j, line_number);
        if (!ids.insert(task.id).second)
            throw DatasetError(path.string() + ": duplicate task id " + task.id);
        tasks.push_back(std::move(task));
    }
    if (tasks.empty()) throw DatasetError(path.string() + ": dataset is empty");
    return tasks;
}

}  // namespace geotime
