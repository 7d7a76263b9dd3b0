#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "geotime/backends.hpp"
#include "geotime/cache.hpp"
#include "geotime/combiner.hpp"
#include "geotime/config.hpp"
#include "geotime/errors.hpp"
#include "geotime/evalkit.hpp"
#include "geotime/http_backends.hpp"
#include "geotime/noise_filter.hpp"
#include "geotime/perceiver.hpp"
#include "geotime/replay.hpp"
#include "geotime/retriever.hpp"
#include "geotime/trace.hpp"
#include "geotime/types.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Session wiring: config → concrete backend stack
// ---------------------------------------------------------------------------

inline constexpr const char* kDefaultChatModel = "default-chat";

// Everything a run needs, built once and shared across workers.
struct PipelineSession {
    PipelineConfig config;
    Backends backends;
    std::shared_ptr<ReplayStore> replay_store;   // set when replaying or recording
    std::shared_ptr<CacheStore> cache_store;     // set when caching
    std::shared_ptr<CallLog> call_log;           // optional instrumentation
    const PromptCatalog* catalog = &PromptCatalog::builtin();

    std::string chat_model_id() const {
        return config.chat.model_id.empty() ? kDefaultChatModel : config.chat.model_id;
    }
};

inline HttpEndpoints endpoints_from_config(const PipelineConfig& config) {
    auto ep = [](const ServiceSettings& s) {
        EndpointConfig e;
        e.endpoint = s.endpoint;
        e.api_key = s.api_key;
        e.model_id = s.model_id;
        return e;
    };
    HttpEndpoints endpoints;
    endpoints.chat = ep(config.chat);
    endpoints.vision = ep(config.vision);
    endpoints.embed = ep(config.embed);
    endpoints.search = ep(config.search);
    endpoints.geocode = ep(config.geocode);
    // vision and embedding ride the chat endpoint's credentials when unset
    if (endpoints.vision.api_key.empty()) endpoints.vision.api_key = endpoints.chat.api_key;
    if (endpoints.embed.api_key.empty()) endpoints.embed.api_key = endpoints.chat.api_key;
    return endpoints;
}

// Builds the backend stack: replay fixture, or live HTTP optionally wrapped in
// a response cache and a fixture recorder.
inline PipelineSession make_session(PipelineConfig config,
                                    std::shared_ptr<CallLog> call_log = nullptr,
                                    std::shared_ptr<ReplayStore> preloaded_store = nullptr) {
    config.validate();
    PipelineSession session;
    session.config = config;
    session.call_log = call_log;

    if (!config.replay_path.empty() || preloaded_store) {
        if (!config.record_path.empty())
            throw ConfigError("recording requires live backends, not a replay fixture");
        session.replay_store =
            preloaded_store ? preloaded_store : ReplayStore::load(config.replay_path);
        session.backends = make_replay_backends(session.replay_store, call_log);
        return session;
    }

    session.backends = make_http_backends(endpoints_from_config(config));
    if (!config.cache_dir.empty()) {
        session.cache_store = std::make_shared<CacheStore>(config.cache_dir);
        session.backends = make_cached_backends(session.backends, session.cache_store);
    }
    if (!config.record_path.empty()) {
        session.replay_store = std::make_shared<ReplayStore>();
        session.backends = make_recording_backends(session.backends, session.replay_store);
    }
    return session;
}

// Gold labels and raw predictions standardize through the same geocoding path
// the pipeline itself uses.
inline LocationStandardizer make_location_standardizer(const PipelineSession& session) {
    auto geocode = session.backends.geocode;
    std::shared_ptr<Reasoner> reasoner;
    if (session.backends.chat)
        reasoner = std::make_shared<Reasoner>(session.backends.chat, session.chat_model_id(),
                                              session.catalog);
    return [geocode, reasoner](const std::string& label) -> LocationValue {
        LocationAssist assist;
        if (reasoner) {
            assist.continent_of_country = [reasoner](const std::string& country) {
                return reasoner->infer_continent(country);
            };
            assist.validate_location = [reasoner](const std::string& loc) {
                return reasoner->validate_location(loc);
            };
        }
        return normalize_location(
            label,
            [geocode](const std::string& q) -> std::optional<GeocodePlace> {
                if (!geocode) return std::nullopt;
                return geocode->geocode(GeocodeRequest{q});
            },
            assist);
    };
}

// ---------------------------------------------------------------------------
// Single-task run
// ---------------------------------------------------------------------------

struct TaskRunResult {
    TaskTrace trace;
    TaskPredictions predictions;
};

namespace detail {

// Multi-choice questions name their dimension in the key ("time_period",
// "country", ...); anything not clearly temporal is treated as spatial.
inline Dimension choice_dimension(const std::string& key) {
    std::string k = to_lower(key);
    for (const char* hint : {"time", "period", "year", "date", "decade", "era", "when"})
        if (k.find(hint) != std::string::npos) return Dimension::kTime;
    return Dimension::kLocation;
}

// The slot of the final prediction that best matches a choice key.
inline std::string choice_payload(const std::string& key, const Prediction& pred) {
    if (pred.dimension == Dimension::kTime) return pred.value;
    auto value = LocationValue::from_normalized_key(pred.value);
    if (!value) return pred.value;
    std::string k = to_lower(key);
    if (k.find("country") != std::string::npos && value->country) return *value->country;
    if ((k.find("region") != std::string::npos || k.find("continent") != std::string::npos) &&
        value->continent)
        return *value->continent;
    std::string finest = value->finest();
    return finest.empty() ? pred.value : finest;
}

}  // namespace detail

// Full per-task flow: perceive, per-dimension hierarchy + retrieval fallback,
// finalize, then map predictions onto any multi-choice questions.
inline TaskRunResult run_task(const ImageTask& task, const PipelineSession& session) {
    const PipelineConfig& config = session.config;
    TaskRunResult result;
    TaskTrace& trace = result.trace;
    trace.task_id = task.id;
    trace.image_ref = task.image_ref;
    trace.schedule = config.effective_schedule().to_string();
    trace.hash_threshold = config.hash_threshold;
    trace.retrieval_threshold = config.retrieval_threshold;
    trace.retrieval_mode = config.retrieval_mode;

    if (!session.backends.vision || !session.backends.chat) {
        trace.error = "vision and chat backends are required to run a task";
        return result;
    }

    PerceiverConfig pconfig;
    pconfig.fail_hard = config.fail_hard;
    Perceiver perceiver(session.backends.vision, session.backends.geocode, pconfig,
                        session.catalog);
    Reasoner reasoner(session.backends.chat, session.chat_model_id(), session.catalog);
    NoiseFilter filter(session.backends.vision, config.filter_config(), session.catalog);
    CandidateFactory factory(&reasoner, session.backends.geocode, config.epoch_year);

    try {
        PerceiverOutput perception = perceiver.perceive(task.image_ref);
        trace.clues = perception.clues;
        trace.warnings = perception.warnings;

        for (Dimension dim : {Dimension::kLocation, Dimension::kTime}) {
            DimensionTrace dt;
            dt.dimension = dim;
            if (perception.clues.empty()) {
                dt.board = BoardSnapshot::from(VoteBoard(dim, config.hash_threshold));
                trace.warnings.push_back(std::string("no clues extracted; ") + to_string(dim) +
                                         " prediction is none");
            } else {
                HierarchyResult hier = run_hierarchy(task.image_ref, perception.clues, dim,
                                                     config.hierarchy_config(), reasoner, filter,
                                                     factory);
                dt.combinations = std::move(hier.records);
                dt.combinations_evaluated = hier.combinations_evaluated;

                auto retrieval = maybe_retrieve(task.image_ref, perception.clues, dim, hier.board,
                                                config.retriever_config(), reasoner, filter,
                                                factory, session.backends.search.get(),
                                                session.backends.embedding.get());
                bool used_retrieval = false;
                if (retrieval) {
                    for (const auto& s : retrieval->snippets)
                        if (s.voted) used_retrieval = true;
                    dt.retrieval = std::move(*retrieval);
                }
                // threshold_reached is sticky, so it covers a stop in either
                // the hierarchy or the retrieval stage
                dt.early_stopped = hier.board.threshold_reached();
                dt.board = BoardSnapshot::from(hier.board);
                dt.prediction = hier.board.finalize(dt.early_stopped, used_retrieval);
            }
            if (dim == Dimension::kTime) {
                result.predictions.time = dt.prediction;
                trace.time = std::move(dt);
            } else {
                result.predictions.location = dt.prediction;
                trace.location = std::move(dt);
            }
        }

        for (const auto& [key, choice_set] : task.choices) {
            Dimension dim = detail::choice_dimension(key);
            const std::optional<Prediction>& pred = dim == Dimension::kTime
                                                        ? result.predictions.time
                                                        : result.predictions.location;
            if (!pred) continue;  // nothing to map onto the options
            try {
                auto selected =
                    reasoner.select_choice(detail::choice_payload(key, *pred), choice_set.options);
                if (selected) {
                    trace.choice_answers[key] = *selected;
                    result.predictions.choice_answers[key] = *selected;
                }
            } catch (const BackendError& e) {
                trace.warnings.push_back("choice '" + key + "' failed: " + e.what());
            }
        }
    } catch (const Error& e) {
        trace.error = e.what();
        result.predictions = TaskPredictions{};  // a failed task predicts nothing
    }
    return result;
}

// ---------------------------------------------------------------------------
// Prediction rows (JSON Lines)
// ---------------------------------------------------------------------------

inline nlohmann::json prediction_row_to_json(const std::string& task_id,
                                             const TaskPredictions& p,
                                             const std::optional<std::string>& error) {
    nlohmann::json row = {{"task_id", task_id}};
    row["time"] = p.time ? trace_json::prediction_to_json(*p.time) : nlohmann::json();
    row["location"] =
        p.location ? trace_json::prediction_to_json(*p.location) : nlohmann::json();
    row["choices"] = p.choice_answers;
    if (error) row["error"] = *error;
    return row;
}

inline std::pair<std::string, TaskPredictions> prediction_row_from_json(const nlohmann::json& j) {
    TaskPredictions p;
    if (j.contains("time") && !j.at("time").is_null())
        p.time = trace_json::prediction_from_json(j.at("time"));
    if (j.contains("location") && !j.at("location").is_null())
        p.location = trace_json::prediction_from_json(j.at("location"));
    if (j.contains("choices"))
        p.choice_answers = j.at("choices").get<std::map<std::string, std::string>>();
    return {j.at("task_id").get<std::string>(), std::move(p)};
}

inline std::map<std::string, TaskPredictions> load_predictions(
    const std::filesystem::path& path) {
    std::map<std::string, TaskPredictions> out;
    size_t line_number = 0;
    for (const auto& line : split(read_text_file(path), '\n')) {
        ++line_number;
        std::string t = trim(line);
        if (t.empty()) continue;
        try {
            auto [id, preds] = prediction_row_from_json(nlohmann::json::parse(t));
            out[id] = std::move(preds);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(path.string() + ":" + std::to_string(line_number) + ": " +
                               e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dataset run
// ---------------------------------------------------------------------------

struct RunArtifacts {
    std::filesystem::path out_dir;
    std::filesystem::path predictions_file;
    std::filesystem::path traces_dir;
    std::filesystem::path report_json;
    std::filesystem::path report_csv;
    std::filesystem::path config_snapshot;
    ScoreReport report;
    size_t tasks_total = 0;
    size_t tasks_resumed = 0;  // skipped via completion markers
    size_t tasks_failed = 0;
};

// Processes every task with a bounded worker pool. Each finished task writes
// its trace, then its prediction row; the row doubles as the completion
// marker, so re-running an interrupted run skips finished tasks. Outputs are
// assembled in dataset order, making results independent of worker count.
inline RunArtifacts run_dataset(const std::vector<ImageTask>& tasks,
                                const std::filesystem::path& out_dir,
                                const PipelineSession& session) {
    RunArtifacts artifacts;
    artifacts.out_dir = out_dir;
    artifacts.traces_dir = out_dir / "traces";
    artifacts.predictions_file = out_dir / "predictions.jsonl";
    artifacts.report_json = out_dir / "score_report.json";
    artifacts.report_csv = out_dir / "score_report.csv";
    artifacts.config_snapshot = out_dir / "config.json";
    artifacts.tasks_total = tasks.size();

    std::filesystem::create_directories(artifacts.traces_dir);
    std::filesystem::path rows_dir = out_dir / "tasks";
    std::filesystem::create_directories(rows_dir);
    atomic_write_file(artifacts.config_snapshot, session.config.to_json().dump(2) + "\n");

    std::atomic<size_t> next{0};
    std::atomic<size_t> resumed{0};
    std::mutex failures_mu;
    std::vector<std::string> failures;

    auto worker = [&]() {
        while (true) {
            size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            const ImageTask& task = tasks[i];
            std::filesystem::path row_path = rows_dir / (task.id + ".json");
            if (std::filesystem::exists(row_path)) {
                resumed.fetch_add(1);
                continue;
            }
            try {
                TaskRunResult result = run_task(task, session);
                write_task_trace(artifacts.traces_dir, result.trace);
                nlohmann::json row = prediction_row_to_json(task.id, result.predictions,
                                                            result.trace.error);
                atomic_write_file(row_path, row.dump() + "\n");
            } catch (const std::exception& e) {
                // keep the run going; the row records the failure
                TaskPredictions none;
                nlohmann::json row = prediction_row_to_json(task.id, none, e.what());
                atomic_write_file(row_path, row.dump() + "\n");
                std::lock_guard<std::mutex> lock(failures_mu);
                failures.push_back(task.id + ": " + e.what());
            }
        }
    };

    size_t worker_count = static_cast<size_t>(std::max(1, session.config.workers));
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (size_t i = 0; i < worker_count; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    artifacts.tasks_resumed = resumed.load();

    // Assemble the predictions file in dataset order from the per-task rows.
    std::string jsonl;
    std::map<std::string, TaskPredictions> predictions;
    for (const auto& task : tasks) {
        std::filesystem::path row_path = rows_dir / (task.id + ".json");
        nlohmann::json row = nlohmann::json::parse(read_text_file(row_path));
        if (row.contains("error")) ++artifacts.tasks_failed;
        jsonl += row.dump() + "\n";
        auto [id, preds] = prediction_row_from_json(row);
        predictions[id] = std::move(preds);
    }
    atomic_write_file(artifacts.predictions_file, jsonl);

    artifacts.report = score_run(tasks, predictions, make_location_standardizer(session));
    atomic_write_file(artifacts.report_json, artifacts.report.to_json().dump(2) + "\n");
    atomic_write_file(artifacts.report_csv, artifacts.report.to_csv());

    // Recording sessions accumulate request/response pairs in memory; persist
    // them once the whole dataset has been exercised.
    if (!session.config.record_path.empty() && session.replay_store)
        session.replay_store->save(session.config.record_path);
    return artifacts;
}

inline RunArtifacts run_dataset_file(const std::filesystem::path& dataset_path,
                                     const std::filesystem::path& out_dir,
                                     const PipelineSession& session) {
    return run_dataset(load_dataset(dataset_path), out_dir, session);
}

// ---------------------------------------------------------------------------
// Parameter sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    double value = 0.0;
    double time_f1_beta = 0.0;
    double location_f1_beta = 0.0;
    size_t early_stops = 0;
    size_t retrievals = 0;
};

struct SweepResult {
    std::string parameter;  // "ht" or "rt"
    std::vector<SweepRow> rows;
    std::filesystem::path table_json;
    std::filesystem::path table_csv;

    nlohmann::json to_json() const {
        nlohmann::json rows_json = nlohmann::json::array();
        for (const auto& r : rows)
            rows_json.push_back({{"value", r.value},
                                 {"time_x_f1_beta", r.time_f1_beta},
                                 {"location_x_f1_beta", r.location_f1_beta},
                                 {"early_stops", r.early_stops},
                                 {"retrievals", r.retrievals}});
        return {{"parameter", parameter}, {"rows", rows_json}};
    }

    std::string to_csv() const {
        std::string out = "value,time_x_f1_beta,location_x_f1_beta,early_stops,retrievals\n";
        char buf[160];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof(buf), "%g,%.6f,%.6f,%zu,%zu\n", r.value, r.time_f1_beta,
                          r.location_f1_beta, r.early_stops, r.retrievals);
            out += buf;
        }
        return out;
    }
};

namespace detail {

inline std::string render_sweep_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace detail

// One full run per value; the runs share the replay store / response cache of
// the base config.
inline SweepResult sweep(const std::vector<ImageTask>& tasks,
                         const std::filesystem::path& out_dir, const PipelineConfig& base_config,
                         const std::string& parameter, const std::vector<double>& values,
                         std::shared_ptr<ReplayStore> shared_store = nullptr) {
    if (values.empty()) throw EmptyInput("sweep without values");
    std::string param = to_lower(trim(parameter));
    if (param != "ht" && param != "rt")
        throw ConfigError("sweep parameter must be 'ht' or 'rt': " + parameter);

    if (!shared_store && !base_config.replay_path.empty())
        shared_store = ReplayStore::load(base_config.replay_path);

    SweepResult result;
    result.parameter = param;
    for (double value : values) {
        PipelineConfig config = base_config;
        if (param == "ht")
            config.hash_threshold = static_cast<int>(value);
        else
            config.retrieval_threshold = value;
        config.validate();

        PipelineSession session = make_session(config, nullptr, shared_store);
        std::filesystem::path run_dir =
            out_dir / (param + "_" + detail::render_sweep_value(value));
        RunArtifacts artifacts = run_dataset(tasks, run_dir, session);

        SweepRow row;
        row.value = value;
        row.time_f1_beta = artifacts.report.time.f1_beta;
        row.location_f1_beta = artifacts.report.location.f1_beta;
        row.early_stops = artifacts.report.early_stops;
        row.retrievals = artifacts.report.retrievals;
        result.rows.push_back(row);
    }

    result.table_json = out_dir / ("sweep_" + param + ".json");
    result.table_csv = out_dir / ("sweep_" + param + ".csv");
    atomic_write_file(result.table_json, result.to_json().dump(2) + "\n");
    atomic_write_file(result.table_csv, result.to_csv());
    return result;
}

}  // namespace geotime
