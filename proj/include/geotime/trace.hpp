#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geotime/combiner.hpp"
#include "geotime/errors.hpp"
#include "geotime/retriever.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Trace types
//
// A trace captures every decision made for a task — clue extraction, each
// combination's answer and verdict, the vote tallies, retrieval scoring — in
// deterministic JSON: no wall-clock fields, keys in sorted order, so the same
// inputs always produce byte-identical traces.
// ---------------------------------------------------------------------------

inline constexpr int kTraceSchemaVersion = 1;

// Frozen view of a vote board at the end of a dimension's run.
struct BoardSnapshot {
    std::map<std::string, int> counts;
    std::map<std::string, int> arrival_order;
    int hash_threshold = 5;
    bool threshold_reached = false;

    static BoardSnapshot from(const VoteBoard& board) {
        BoardSnapshot s;
        s.counts = board.counts();
        s.arrival_order = board.arrival_order();
        s.hash_threshold = board.hash_threshold();
        s.threshold_reached = board.threshold_reached();
        return s;
    }
};

struct DimensionTrace {
    Dimension dimension = Dimension::kTime;
    std::vector<CombinationRecord> combinations;
    BoardSnapshot board;
    bool early_stopped = false;
    int combinations_evaluated = 0;
    std::optional<RetrievalRecord> retrieval;
    std::optional<Prediction> prediction;
};

struct TaskTrace {
    int schema_version = kTraceSchemaVersion;
    std::string task_id;
    std::string image_ref;
    std::string schedule;
    int hash_threshold = 5;
    double retrieval_threshold = 90.0;
    std::string retrieval_mode = "image_image";
    std::vector<Clue> clues;
    std::vector<std::string> warnings;
    std::optional<DimensionTrace> time;
    std::optional<DimensionTrace> location;
    std::map<std::string, std::string> choice_answers;
    std::optional<std::string> error;  // set when the task failed outright
};

// ---------------------------------------------------------------------------
// JSON codecs
// ---------------------------------------------------------------------------

namespace trace_json {

using nlohmann::json;

inline json clue_to_json(const Clue& c) {
    json j = {{"id", c.id}, {"kind", to_string(c.kind)}, {"text", c.text}};
    if (c.confidence_note) j["confidence_note"] = *c.confidence_note;
    return j;
}

inline Clue clue_from_json(const json& j) {
    Clue c;
    c.id = j.at("id").get<int>();
    c.kind = clue_kind_from_string(j.at("kind").get<std::string>());
    c.text = j.at("text").get<std::string>();
    if (j.contains("confidence_note")) c.confidence_note = j["confidence_note"].get<std::string>();
    return c;
}

// The verdict flattens to its observable fields; the candidate it wrapped is
// already on the surrounding record as candidate_key.
inline json verdict_to_json(const FilterVerdict& v) {
    json j = {{"accepted", v.accepted}, {"bypass", v.bypass}, {"raw_answer", v.raw_answer}};
    if (v.warning) j["warning"] = *v.warning;
    return j;
}

inline FilterVerdict verdict_from_json(const json& j) {
    FilterVerdict v;
    v.accepted = j.at("accepted").get<bool>();
    v.bypass = j.at("bypass").get<bool>();
    v.raw_answer = j.at("raw_answer").get<std::string>();
    if (j.contains("warning")) v.warning = j["warning"].get<std::string>();
    return v;
}

inline json combination_to_json(const CombinationRecord& r) {
    json j = {{"clue_ids", r.clue_ids}, {"level", r.level},      {"raw_answer", r.raw_answer},
              {"refusal", r.refusal},   {"voted", r.voted},      {"early_stop", r.early_stop}};
    if (r.candidate_key) j["candidate_key"] = *r.candidate_key;
    if (r.vote_key) j["vote_key"] = *r.vote_key;
    if (r.verdict) j["verdict"] = verdict_to_json(*r.verdict);
    if (r.error) j["error"] = *r.error;
    return j;
}

inline CombinationRecord combination_from_json(const json& j) {
    CombinationRecord r;
    r.clue_ids = j.at("clue_ids").get<std::vector<int>>();
    r.level = j.at("level").get<int>();
    r.raw_answer = j.at("raw_answer").get<std::string>();
    r.refusal = j.at("refusal").get<bool>();
    r.voted = j.at("voted").get<bool>();
    r.early_stop = j.at("early_stop").get<bool>();
    if (j.contains("candidate_key")) r.candidate_key = j["candidate_key"].get<std::string>();
    if (j.contains("vote_key")) r.vote_key = j["vote_key"].get<std::string>();
    if (j.contains("verdict")) r.verdict = verdict_from_json(j["verdict"]);
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    return r;
}

inline json search_result_to_json(const SearchResult& r) {
    json j = {{"rank", r.rank}, {"title", r.title}, {"snippet", r.snippet}, {"url", r.url}};
    if (r.thumbnail_ref) j["thumbnail_ref"] = *r.thumbnail_ref;
    return j;
}

inline SearchResult search_result_from_json(const json& j) {
    SearchResult r;
    r.rank = j.at("rank").get<int>();
    r.title = j.at("title").get<std::string>();
    r.snippet = j.at("snippet").get<std::string>();
    r.url = j.at("url").get<std::string>();
    if (j.contains("thumbnail_ref")) r.thumbnail_ref = j["thumbnail_ref"].get<std::string>();
    return r;
}

inline json snippet_to_json(const SnippetRecord& s) {
    json j = {{"result_index", s.result_index},
              {"extract_answer", s.extract_answer},
              {"refusal", s.refusal},
              {"voted", s.voted},
              {"early_stop", s.early_stop}};
    if (s.agreement) j["agreement"] = *s.agreement;
    if (s.candidate_key) j["candidate_key"] = *s.candidate_key;
    if (s.vote_key) j["vote_key"] = *s.vote_key;
    if (s.verdict) j["verdict"] = verdict_to_json(*s.verdict);
    if (s.error) j["error"] = *s.error;
    return j;
}

inline SnippetRecord snippet_from_json(const json& j) {
    SnippetRecord s;
    s.result_index = j.at("result_index").get<int>();
    s.extract_answer = j.at("extract_answer").get<std::string>();
    s.refusal = j.at("refusal").get<bool>();
    s.voted = j.at("voted").get<bool>();
    s.early_stop = j.at("early_stop").get<bool>();
    if (j.contains("agreement")) s.agreement = j["agreement"].get<bool>();
    if (j.contains("candidate_key")) s.candidate_key = j["candidate_key"].get<std::string>();
    if (j.contains("vote_key")) s.vote_key = j["vote_key"].get<std::string>();
    if (j.contains("verdict")) s.verdict = verdict_from_json(j["verdict"]);
    if (j.contains("error")) s.error = j["error"].get<std::string>();
    return s;
}

inline json retrieval_to_json(const RetrievalRecord& r) {
    json results = json::array();
    for (const auto& res : r.results) results.push_back(search_result_to_json(res));
    json snippets = json::array();
    for (const auto& s : r.snippets) snippets.push_back(snippet_to_json(s));
    json j = {{"dimension", to_string(r.dimension)},
              {"query", r.query},
              {"mode", to_string(r.mode)},
              {"results", results},
              {"scores", r.scores},
              {"kept", r.kept},
              {"snippets", snippets},
              {"triggered", r.triggered}};
    if (r.error) j["error"] = *r.error;
    return j;
}

inline RetrievalRecord retrieval_from_json(const json& j) {
    RetrievalRecord r;
    r.dimension = dimension_from_string(j.at("dimension").get<std::string>());
    r.query = j.at("query").get<std::string>();
    r.mode = retrieval_mode_from_string(j.at("mode").get<std::string>());
    for (const auto& res : j.at("results")) r.results.push_back(search_result_from_json(res));
    r.scores = j.at("scores").get<std::vector<double>>();
    r.kept = j.at("kept").get<std::vector<int>>();
    for (const auto& s : j.at("snippets")) r.snippets.push_back(snippet_from_json(s));
    r.triggered = j.at("triggered").get<bool>();
    if (j.contains("error")) r.error = j["error"].get<std::string>();
    return r;
}

inline json prediction_to_json(const Prediction& p) {
    return {{"dimension", to_string(p.dimension)},
            {"value", p.value},
            {"vote_count", p.vote_count},
            {"stopped_early", p.stopped_early},
            {"used_retrieval", p.used_retrieval}};
}

inline Prediction prediction_from_json(const json& j) {
    Prediction p;
    p.dimension = dimension_from_string(j.at("dimension").get<std::string>());
    p.value = j.at("value").get<std::string>();
    p.vote_count = j.at("vote_count").get<int>();
    p.stopped_early = j.at("stopped_early").get<bool>();
    p.used_retrieval = j.at("used_retrieval").get<bool>();
    return p;
}

inline json board_to_json(const BoardSnapshot& b) {
    return {{"counts", b.counts},
            {"arrival_order", b.arrival_order},
            {"hash_threshold", b.hash_threshold},
            {"threshold_reached", b.threshold_reached}};
}

inline BoardSnapshot board_from_json(const json& j) {
    BoardSnapshot b;
    b.counts = j.at("counts").get<std::map<std::string, int>>();
    b.arrival_order = j.at("arrival_order").get<std::map<std::string, int>>();
    b.hash_threshold = j.at("hash_threshold").get<int>();
    b.threshold_reached = j.at("threshold_reached").get<bool>();
    return b;
}

inline json dimension_trace_to_json(const DimensionTrace& d) {
    json combos = json::array();
    for (const auto& c : d.combinations) combos.push_back(combination_to_json(c));
    json j = {{"dimension", to_string(d.dimension)},
              {"combinations", combos},
              {"board", board_to_json(d.board)},
              {"early_stopped", d.early_stopped},
              {"combinations_evaluated", d.combinations_evaluated}};
    if (d.retrieval) j["retrieval"] = retrieval_to_json(*d.retrieval);
    if (d.prediction) j["prediction"] = prediction_to_json(*d.prediction);
    return j;
}

inline DimensionTrace dimension_trace_from_json(const json& j) {
    DimensionTrace d;
    d.dimension = dimension_from_string(j.at("dimension").get<std::string>());
    for (const auto& c : j.at("combinations")) d.combinations.push_back(combination_from_json(c));
    d.board = board_from_json(j.at("board"));
    d.early_stopped = j.at("early_stopped").get<bool>();
    d.combinations_evaluated = j.at("combinations_evaluated").get<int>();
    if (j.contains("retrieval")) d.retrieval = retrieval_from_json(j["retrieval"]);
    if (j.contains("prediction")) d.prediction = prediction_from_json(j["prediction"]);
    return d;
}

}  // namespace trace_json

inline nlohmann::json to_json(const TaskTrace& t) {
    nlohmann::json clues = nlohmann::json::array();
    for (const auto& c : t.clues) clues.push_back(trace_json::clue_to_json(c));
    nlohmann::json j = {{"schema_version", t.schema_version},
                        {"task_id", t.task_id},
                        {"image_ref", t.image_ref},
                        {"schedule", t.schedule},
                        {"hash_threshold", t.hash_threshold},
                        {"retrieval_threshold", t.retrieval_threshold},
                        {"retrieval_mode", t.retrieval_mode},
                        {"clues", clues},
                        {"warnings", t.warnings},
                        {"choice_answers", t.choice_answers}};
    if (t.time) j["time"] = trace_json::dimension_trace_to_json(*t.time);
    if (t.location) j["location"] = trace_json::dimension_trace_to_json(*t.location);
    if (t.error) j["error"] = *t.error;
    return j;
}

inline TaskTrace task_trace_from_json(const nlohmann::json& j) {
    int version = j.at("schema_version").get<int>();
    if (version != kTraceSchemaVersion)
        throw ConfigError("unsupported trace schema version: " + std::to_string(version));
    TaskTrace t;
    t.schema_version = version;
    t.task_id = j.at("task_id").get<std::string>();
    t.image_ref = j.at("image_ref").get<std::string>();
    t.schedule = j.at("schedule").get<std::string>();
    t.hash_threshold = j.at("hash_threshold").get<int>();
    t.retrieval_threshold = j.at("retrieval_threshold").get<double>();
    t.retrieval_mode = j.at("retrieval_mode").get<std::string>();
    for (const auto& c : j.at("clues")) t.clues.push_back(trace_json::clue_from_json(c));
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    t.choice_answers = j.at("choice_answers").get<std::map<std::string, std::string>>();
    if (j.contains("time")) t.time = trace_json::dimension_trace_from_json(j["time"]);
    if (j.contains("location")) t.location = trace_json::dimension_trace_from_json(j["location"]);
    if (j.contains("error")) t.error = j["error"].get<std::string>();
    return t;
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

inline std::filesystem::path trace_path(const std::filesystem::path& dir,
                                        const std::string& task_id) {
    return dir / (task_id + ".json");
}

inline void write_task_trace(const std::filesystem::path& dir, const TaskTrace& trace) {
    atomic_write_file(trace_path(dir, trace.task_id), to_json(trace).dump(2) + "\n");
}

inline TaskTrace load_task_trace(const std::filesystem::path& path) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(path));
    return task_trace_from_json(j);
}

// Cross-check: every vote on the board must come from an accepted record, and
// tallies must agree. Returns a description of the first discrepancy, if any.
inline std::optional<std::string> check_trace_consistency(const DimensionTrace& d) {
    std::map<std::string, int> tallied;
    auto tally = [&](const std::optional<std::string>& key, bool voted) {
        if (voted && key) ++tallied[*key];
    };
    for (const auto& rec : d.combinations) tally(rec.vote_key, rec.voted);
    if (d.retrieval)
        for (const auto& s : d.retrieval->snippets) tally(s.vote_key, s.voted);
    if (tallied != d.board.counts) {
        return "vote tallies disagree with accepted records for dimension " +
               std::string(to_string(d.dimension));
    }
    return std::nullopt;
}

}  // namespace geotime
