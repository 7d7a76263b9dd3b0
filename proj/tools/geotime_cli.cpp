// geotime — command-line front end for the evidence-fusion pipeline.
//
//   geotime run      --dataset tasks.jsonl --out rundir [overrides]
//   geotime score    --dataset tasks.jsonl --predictions preds.jsonl [--out dir]
//   geotime trace    <task-id> --out rundir [--json]
//   geotime sweep    --dataset tasks.jsonl --out dir --param ht --values 1,5,10
//   geotime cache    <stats|purge> --cache-dir dir
//   geotime fixtures --dataset tasks.jsonl --record replay.json [--out rundir]

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <geotime/geotime.hpp>

namespace {

using namespace geotime;

struct CommonOpts {
    std::string config_file;
    ConfigOverrides overrides;

    // CLI11 needs stable storage for values before we know they were provided.
    int ht = 0;
    double rt = 0.0;
    std::string schedule;
    std::string retrieval_mode;
    std::string hier;
    int workers = 0;
    std::string replay;
    std::string record;
    std::string cache_dir;
};

void add_common_options(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_file, "JSON config file")
        ->check(CLI::ExistingFile);
    auto* ht = cmd->add_option("--ht", o.ht, "hash threshold (votes needed to stop early)");
    auto* rt = cmd->add_option("--rt", o.rt, "retrieval threshold (similarity cutoff, 0-100)");
    auto* sched = cmd->add_option("--schedule", o.schedule,
                                  "combination schedule, e.g. singles,pairs,all");
    auto* mode = cmd->add_option("--retrieval-mode", o.retrieval_mode,
                                 "image_image or image_text");
    auto* nf = cmd->add_flag("--no-filter", "disable the confidence filter");
    auto* nr = cmd->add_flag("--no-retrieval", "disable the retrieval fallback");
    auto* hier = cmd->add_option("--hier", o.hier, "hierarchy depth: 1, 3, or full");
    auto* workers = cmd->add_option("--workers", o.workers, "parallel task workers");
    auto* replay = cmd->add_option("--replay", o.replay, "replay fixture (offline run)")
                       ->check(CLI::ExistingFile);
    auto* record = cmd->add_option("--record", o.record, "record live responses to this fixture");
    auto* cache = cmd->add_option("--cache-dir", o.cache_dir, "response cache directory");

    cmd->callback([&o, ht, rt, sched, mode, nf, nr, hier, workers, replay, record, cache] {
        if (ht->count()) o.overrides.hash_threshold = o.ht;
        if (rt->count()) o.overrides.retrieval_threshold = o.rt;
        if (sched->count()) o.overrides.schedule = o.schedule;
        if (mode->count()) o.overrides.retrieval_mode = o.retrieval_mode;
        if (nf->count()) o.overrides.no_filter = true;
        if (nr->count()) o.overrides.no_retrieval = true;
        if (hier->count()) o.overrides.hier = o.hier;
        if (workers->count()) o.overrides.workers = o.workers;
        if (replay->count()) o.overrides.replay_path = o.replay;
        if (record->count()) o.overrides.record_path = o.record;
        if (cache->count()) o.overrides.cache_dir = o.cache_dir;
    });
}

PipelineConfig config_from(const CommonOpts& o) {
    std::optional<std::string> file;
    if (!o.config_file.empty()) file = o.config_file;
    return resolve_config(file, o.overrides);
}

std::string fmt(double v) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << v;
    return out.str();
}

void print_report_summary(const ScoreReport& report) {
    std::cout << "time      n=" << report.time.scored << "  acc=" << fmt(report.time.acc_pct)
              << "%  std=" << fmt(report.time.std_acc_pct) << "%  F1=" << fmt(report.time.f1)
              << "  F1b=" << fmt(report.time.f1_beta) << "\n";
    std::cout << "location  n=" << report.location.scored << "  acc="
              << fmt(report.location.acc_pct) << "%  std=" << fmt(report.location.std_acc_pct)
              << "%  F1=" << fmt(report.location.f1) << "  F1b="
              << fmt(report.location.f1_beta) << "\n";
    for (const auto& [key, m] : report.multichoice)
        std::cout << "choice:" << key << "  n=" << m.n << "  acc=" << fmt(m.accuracy_pct)
                  << "%  P=" << fmt(m.macro_precision) << "  F1=" << fmt(m.macro_f1) << "\n";
    std::cout << "early stops: " << report.early_stops << "   retrievals used: "
              << report.retrievals << "   skipped: " << report.skipped << "\n";
}

std::string combo_label(const std::vector<int>& ids) {
    std::string s = "{";
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(ids[i]);
    }
    return s + "}";
}

void render_verdict(std::ostream& out, const FilterVerdict& v) {
    if (v.bypass)
        out << "  bypass";
    else
        out << (v.accepted ? "  accepted" : "  rejected");
}

void render_dimension(std::ostream& out, const DimensionTrace& dt) {
    out << to_string(dt.dimension) << ":\n";
    out << "  combinations evaluated: " << dt.combinations_evaluated << "\n";
    for (const auto& rec : dt.combinations) {
        out << "    " << std::left << std::setw(10) << combo_label(rec.clue_ids) << std::right;
        if (rec.error) {
            out << "error: " << *rec.error << "\n";
            continue;
        }
        if (rec.refusal) {
            out << "refusal\n";
            continue;
        }
        out << "\"" << rec.raw_answer << "\"";
        if (rec.vote_key) out << " -> " << *rec.vote_key;
        if (rec.verdict) render_verdict(out, *rec.verdict);
        if (rec.voted) out << "  vote";
        if (rec.early_stop) out << "  [stop]";
        out << "\n";
    }
    out << "  board (HT=" << dt.board.hash_threshold << ", reached="
        << (dt.board.threshold_reached ? "yes" : "no") << "):\n";
    std::vector<std::pair<std::string, int>> order(dt.board.arrival_order.begin(),
                                                   dt.board.arrival_order.end());
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    for (const auto& [key, idx] : order)
        out << "    " << key << " = " << dt.board.counts.at(key) << "\n";
    if (dt.retrieval) {
        const auto& r = *dt.retrieval;
        out << "  retrieval (" << to_string(r.mode) << "):\n";
        if (r.error) out << "    error: " << *r.error << "\n";
        out << "    query: \"" << r.query << "\"\n";
        for (size_t i = 0; i < r.results.size(); ++i) {
            bool kept = std::find(r.kept.begin(), r.kept.end(), static_cast<int>(i)) !=
                        r.kept.end();
            out << "    [" << i << "] score " << fmt(i < r.scores.size() ? r.scores[i] : 0.0)
                << (kept ? "  kept    " : "  dropped ") << r.results[i].title << "\n";
        }
        for (const auto& s : r.snippets) {
            out << "      snippet[" << s.result_index << "] ";
            if (s.error) {
                out << "error: " << *s.error << "\n";
                continue;
            }
            if (s.refusal) {
                out << "refusal\n";
                continue;
            }
            out << "\"" << s.extract_answer << "\"";
            if (s.agreement) out << (*s.agreement ? "  agreed" : "  disagreed");
            if (s.vote_key) out << " -> " << *s.vote_key;
            if (s.verdict) render_verdict(out, *s.verdict);
            if (s.voted) out << "  vote";
            if (s.early_stop) out << "  [stop]";
            out << "\n";
        }
    }
    if (dt.prediction)
        out << "  prediction: " << dt.prediction->value << "  votes=" << dt.prediction->vote_count
            << "  early_stop=" << (dt.prediction->stopped_early ? "yes" : "no")
            << "  retrieval=" << (dt.prediction->used_retrieval ? "yes" : "no") << "\n";
    else
        out << "  prediction: none\n";
}

void render_trace(std::ostream& out, const TaskTrace& tr) {
    out << "task " << tr.task_id << " (" << tr.image_ref << ")\n";
    out << "schedule " << tr.schedule << "   HT=" << tr.hash_threshold << "   RT="
        << fmt(tr.retrieval_threshold) << "   mode=" << tr.retrieval_mode << "\n";
    if (tr.error) out << "error: " << *tr.error << "\n";
    out << "clues:\n";
    for (const auto& c : tr.clues)
        out << "  [" << c.id << "] " << std::left << std::setw(12) << to_string(c.kind)
            << std::right << c.text << "\n";
    for (const auto& w : tr.warnings) out << "warning: " << w << "\n";
    if (tr.time) render_dimension(out, *tr.time);
    if (tr.location) render_dimension(out, *tr.location);
    if (!tr.choice_answers.empty()) {
        out << "choices:\n";
        for (const auto& [key, answer] : tr.choice_answers)
            out << "  " << key << " = " << answer << "\n";
    }
}

int cmd_run(const CommonOpts& opts, const std::string& dataset, const std::string& out_dir) {
    auto session = make_session(config_from(opts));
    auto artifacts = run_dataset_file(dataset, out_dir, session);
    std::cout << "tasks: " << artifacts.tasks_total << "  resumed: " << artifacts.tasks_resumed
              << "  failed: " << artifacts.tasks_failed << "\n";
    print_report_summary(artifacts.report);
    std::cout << "predictions: " << artifacts.predictions_file.string() << "\n";
    std::cout << "report:      " << artifacts.report_json.string() << "\n";
    return artifacts.tasks_failed ? 3 : 0;
}

int cmd_score(const CommonOpts& opts, const std::string& dataset, const std::string& predictions,
              const std::string& out_dir) {
    auto session = make_session(config_from(opts));
    auto tasks = load_dataset(dataset);
    auto preds = load_predictions(predictions);
    auto report = score_run(tasks, preds, make_location_standardizer(session));
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        atomic_write_file(std::filesystem::path(out_dir) / "score_report.json",
                          report.to_json().dump(2) + "\n");
        atomic_write_file(std::filesystem::path(out_dir) / "score_report.csv", report.to_csv());
        std::cout << "report written to " << out_dir << "\n";
    }
    print_report_summary(report);
    return 0;
}

int cmd_trace(const std::string& task_id, const std::string& out_dir, bool raw_json) {
    auto path = trace_path(std::filesystem::path(out_dir) / "traces", task_id);
    auto tr = load_task_trace(path);
    if (raw_json)
        std::cout << to_json(tr).dump(2) << "\n";
    else
        render_trace(std::cout, tr);
    return 0;
}

int cmd_sweep(const CommonOpts& opts, const std::string& dataset, const std::string& out_dir,
              const std::string& param, const std::vector<double>& values) {
    auto tasks = load_dataset(dataset);
    auto result = sweep(tasks, out_dir, config_from(opts), param, values);
    std::cout << result.to_csv();
    std::cout << "tables: " << result.table_json.string() << ", " << result.table_csv.string()
              << "\n";
    return 0;
}

int cmd_cache(const CommonOpts& opts, const std::string& action) {
    auto config = config_from(opts);
    if (config.cache_dir.empty())
        throw ConfigError("cache requires --cache-dir (or cache_dir in the config file)");
    CacheStore store(config.cache_dir);
    if (action == "stats") {
        auto s = store.stats();
        std::cout << "entries: " << s.entries << "  bytes: " << s.bytes << "\n";
        for (const auto& [kind, n] : s.by_kind) std::cout << "  " << kind << ": " << n << "\n";
    } else {
        std::cout << "purged " << store.purge() << " entries\n";
    }
    return 0;
}

int cmd_fixtures(CommonOpts& opts, const std::string& dataset, std::string out_dir) {
    const std::string record = opts.record;
    if (out_dir.empty()) out_dir = record + ".run";
    auto session = make_session(config_from(opts));
    auto artifacts = run_dataset_file(dataset, out_dir, session);
    std::cout << "recorded " << (session.replay_store ? session.replay_store->size() : 0)
              << " exchanges to " << record << " (" << artifacts.tasks_failed << " task failures)"
              << "\n";
    return artifacts.tasks_failed ? 3 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geotime: predicts when and where an image was taken"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string dataset, out_dir, predictions, task_id, param, action;
    std::vector<double> values;
    bool raw_json = false;

    auto* run = app.add_subcommand("run", "run the pipeline over a dataset");
    run->add_option("--dataset", dataset, "JSONL task file")->required()
        ->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory")->required();
    add_common_options(run, opts);

    auto* score = app.add_subcommand("score", "score an existing predictions file");
    score->add_option("--dataset", dataset, "JSONL task file")->required()
        ->check(CLI::ExistingFile);
    score->add_option("--predictions", predictions, "predictions JSONL")->required()
        ->check(CLI::ExistingFile);
    score->add_option("--out", out_dir, "directory for report files");
    add_common_options(score, opts);

    auto* trace = app.add_subcommand("trace", "pretty-print a task's reasoning trace");
    trace->add_option("task_id", task_id, "task id")->required();
    trace->add_option("--out", out_dir, "run directory holding traces/")->required();
    trace->add_flag("--json", raw_json, "dump raw JSON instead");

    auto* sw = app.add_subcommand("sweep", "re-run a dataset over a parameter grid");
    sw->add_option("--dataset", dataset, "JSONL task file")->required()
        ->check(CLI::ExistingFile);
    sw->add_option("--out", out_dir, "output directory")->required();
    sw->add_option("--param", param, "ht or rt")->required();
    sw->add_option("--values", values, "comma-separated values")->required()->delimiter(',');
    add_common_options(sw, opts);

    auto* cache = app.add_subcommand("cache", "inspect or purge the response cache");
    cache->add_option("action", action, "stats or purge")->required()
        ->check(CLI::IsMember({"stats", "purge"}));
    add_common_options(cache, opts);

    auto* fixtures = app.add_subcommand("fixtures", "record live responses into a replay fixture");
    fixtures->add_option("--dataset", dataset, "JSONL task file")->required()
        ->check(CLI::ExistingFile);
    fixtures->add_option("--out", out_dir, "run directory (default: <record>.run)");
    add_common_options(fixtures, opts);
    fixtures->get_option("--record")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(opts, dataset, out_dir);
        if (score->parsed()) return cmd_score(opts, dataset, predictions, out_dir);
        if (trace->parsed()) return cmd_trace(task_id, out_dir, raw_json);
        if (sw->parsed()) return cmd_sweep(opts, dataset, out_dir, param, values);
        if (cache->parsed()) return cmd_cache(opts, action);
        if (fixtures->parsed()) return cmd_fixtures(opts, dataset, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
