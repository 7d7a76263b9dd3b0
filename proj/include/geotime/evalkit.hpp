#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geotime/errors.hpp"
#include "geotime/normalize.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Component sets
// ---------------------------------------------------------------------------

struct Component {
    std::string slot;   // year/month/day or continent/country/city/area
    std::string value;
    bool operator==(const Component&) const = default;
};

// The slot-structured decomposition of a label used by the metrics.
struct ComponentSet {
    Dimension dimension = Dimension::kTime;
    std::vector<Component> components;  // coarse to fine, slots unique

    size_t size() const { return components.size(); }

    const std::string* value_of(const std::string& slot) const {
        for (const auto& c : components)
            if (c.slot == slot) return &c.value;
        return nullptr;
    }
};

// Resolves a free-text location label into standardized slots.
using LocationStandardizer = std::function<LocationValue(const std::string&)>;

namespace detail {

inline ComponentSet location_components(const LocationValue& value) {
    ComponentSet set;
    set.dimension = Dimension::kLocation;
    if (value.continent) set.components.push_back({"continent", *value.continent});
    if (value.country) set.components.push_back({"country", *value.country});
    if (value.city) set.components.push_back({"city", *value.city});
    if (value.area) set.components.push_back({"area", *value.area});
    return set;
}

// Year slots compare by equality, except that a range value ("2018..2021")
// matches a single year it contains. Two ranges match only when identical.
inline bool year_values_match(const std::string& a, const std::string& b) {
    std::string fa = to_lower(trim(a)), fb = to_lower(trim(b));
    if (fa == fb) return true;
    auto parse_range = [](const std::string& s) -> std::optional<std::pair<int, int>> {
        size_t dots = s.find("..");
        if (dots == std::string::npos || s.size() != dots + 6) return std::nullopt;
        if (dots != 4) return std::nullopt;
        for (size_t i = 0; i < s.size(); ++i)
            if (i != dots && i != dots + 1 && !std::isdigit(static_cast<unsigned char>(s[i])))
                return std::nullopt;
        return std::make_pair(std::stoi(s.substr(0, 4)), std::stoi(s.substr(dots + 2)));
    };
    auto parse_year = [](const std::string& s) -> std::optional<int> {
        if (s.size() != 4) return std::nullopt;
        for (char c : s)
            if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
        return std::stoi(s);
    };
    if (auto range = parse_range(fa))
        if (auto year = parse_year(fb)) return *year >= range->first && *year <= range->second;
    if (auto range = parse_range(fb))
        if (auto year = parse_year(fa)) return *year >= range->first && *year <= range->second;
    return false;
}

inline bool values_match(Dimension dim, const std::string& slot, const std::string& a,
                         const std::string& b) {
    if (dim == Dimension::kTime && slot == "year") return year_values_match(a, b);
    return to_lower(trim(a)) == to_lower(trim(b));
}

}  // namespace detail

// Splits a label into metric slots. Time labels must already be in canonical
// shape; location labels go through the standardizer, except pipe-joined
// standardized keys which decompose directly.
inline ComponentSet to_component_set(const std::string& label, Dimension dimension,
                                     const LocationStandardizer& standardizer = nullptr) {
    std::string s = detail::trim_answer(label);
    if (s.empty()) throw BadGoldLabel("empty label");

    ComponentSet set;
    set.dimension = dimension;

    if (dimension == Dimension::kTime) {
        auto m = detail::match_time_at(s, 0);
        if (!m || m->begin != 0 || m->end != s.size())
            throw BadGoldLabel("unparseable time label: " + label);
        const std::string& c = m->canonical;
        if (c.find("..") != std::string::npos) {
            set.components.push_back({"year", c});  // a range occupies the year slot
            return set;
        }
        set.components.push_back({"year", c.substr(0, 4)});
        if (c.size() >= 7) set.components.push_back({"month", c.substr(5, 2)});
        if (c.size() >= 10) set.components.push_back({"day", c.substr(8, 2)});
        return set;
    }

    // Standardized keys ("area|city|country|continent") decompose directly.
    if (std::count(s.begin(), s.end(), '|') == 3) {
        if (auto value = LocationValue::from_normalized_key(s))
            return detail::location_components(*value);
        throw BadGoldLabel("empty standardized location key: " + label);
    }
    if (!standardizer) throw BadGoldLabel("no standardizer for location label: " + label);
    return detail::location_components(standardizer(s));
}

// ---------------------------------------------------------------------------
// Example-F1 family
// ---------------------------------------------------------------------------

// Slot-paired intersection. Time matches hierarchically: a month counts only
// under a matching year, a day only under matching year and month.
inline size_t component_intersection(const ComponentSet& gt, const ComponentSet& pred) {
    if (gt.dimension != pred.dimension)
        throw DimensionMismatch("component sets of different dimensions");
    size_t matched = 0;
    if (gt.dimension == Dimension::kTime) {
        const std::string* gy = gt.value_of("year");
        const std::string* py = pred.value_of("year");
        bool year_ok = gy && py && detail::values_match(gt.dimension, "year", *gy, *py);
        if (year_ok) ++matched;
        const std::string* gm = gt.value_of("month");
        const std::string* pm = pred.value_of("month");
        bool month_ok = year_ok && gm && pm && detail::values_match(gt.dimension, "month", *gm, *pm);
        if (month_ok) ++matched;
        const std::string* gd = gt.value_of("day");
        const std::string* pd = pred.value_of("day");
        if (month_ok && gd && pd && detail::values_match(gt.dimension, "day", *gd, *pd)) ++matched;
        return matched;
    }
    for (const char* slot : {"continent", "country", "city", "area"}) {
        const std::string* g = gt.value_of(slot);
        const std::string* p = pred.value_of(slot);
        if (g && p && detail::values_match(gt.dimension, slot, *g, *p)) ++matched;
    }
    return matched;
}

// 2|GT∩Pred| / (|GT|+|Pred|); both-empty defined as 0.
inline double example_f1(const ComponentSet& gt, const ComponentSet& pred) {
    size_t denom = gt.size() + pred.size();
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(component_intersection(gt, pred)) /
           static_cast<double>(denom);
}

// Brevity-penalized: e^{−(|Pred|/|GT| − 1)^+} · X-F1.
inline double example_f1_beta(const ComponentSet& gt, const ComponentSet& pred) {
    if (gt.size() == 0) throw BadGoldLabel("gold component set is empty");
    double ratio = static_cast<double>(pred.size()) / static_cast<double>(gt.size());
    double penalty = std::exp(-std::max(ratio - 1.0, 0.0));
    return penalty * example_f1(gt, pred);
}

// Exact match; the standardized mode compares full component sets, so a
// granularity mismatch ("2020" vs "2020-05") scores 0.
inline int exact_accuracy(const std::string& gold, const std::string& pred, Dimension dimension,
                          bool standardized, const LocationStandardizer& standardizer = nullptr) {
    if (trim(gold).empty()) throw BadGoldLabel("empty gold label");
    if (!standardized)
        return to_lower(trim(gold)) == to_lower(trim(pred)) ? 1 : 0;
    ComponentSet g = to_component_set(gold, dimension, standardizer);
    ComponentSet p;
    try {
        p = to_component_set(pred, dimension, standardizer);
    } catch (const Error&) {
        return 0;  // unstandardizable prediction cannot match
    }
    if (g.size() != p.size()) return 0;
    for (const auto& gc : g.components) {
        const std::string* pv = p.value_of(gc.slot);
        if (!pv || to_lower(trim(*pv)) != to_lower(trim(gc.value))) return 0;
    }
    return 1;
}

// ---------------------------------------------------------------------------
// Multi-choice metrics
// ---------------------------------------------------------------------------

struct MultichoiceMetrics {
    double accuracy_pct = 0.0;
    double macro_precision = 0.0;
    double macro_f1 = 0.0;
    size_t n = 0;
};

// Accuracy plus macro precision/F1 over the declared classes. A prediction
// outside the class set is simply wrong everywhere (its own bucket); a class
// never predicted contributes precision 0.
inline MultichoiceMetrics multichoice_metrics(const std::vector<std::string>& golds,
                                              const std::vector<std::string>& preds,
                                              const std::vector<std::string>& classes) {
    if (golds.empty()) throw EmptyInput("no labels to score");
    if (golds.size() != preds.size())
        throw LengthMismatch("golds and preds differ in length: " +
                             std::to_string(golds.size()) + " vs " + std::to_string(preds.size()));
    if (classes.empty()) throw EmptyInput("no classes declared");

    size_t correct = 0;
    std::map<std::string, size_t> tp, fp, fn;
    for (size_t i = 0; i < golds.size(); ++i) {
        std::string g = trim(golds[i]), p = trim(preds[i]);
        if (g == p) {
            ++correct;
            ++tp[g];
        } else {
            ++fp[p];  // harmless for out-of-set preds; macro only reads classes
            ++fn[g];
        }
    }

    double precision_sum = 0.0, f1_sum = 0.0;
    for (const auto& cls : classes) {
        double tpc = static_cast<double>(tp.count(cls) ? tp.at(cls) : 0);
        double fpc = static_cast<double>(fp.count(cls) ? fp.at(cls) : 0);
        double fnc = static_cast<double>(fn.count(cls) ? fn.at(cls) : 0);
        double precision = tpc + fpc > 0 ? tpc / (tpc + fpc) : 0.0;  // unpredicted class → 0
        double recall = tpc + fnc > 0 ? tpc / (tpc + fnc) : 0.0;
        double f1 = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
        precision_sum += precision;
        f1_sum += f1;
    }

    MultichoiceMetrics m;
    m.n = golds.size();
    m.accuracy_pct = 100.0 * static_cast<double>(correct) / static_cast<double>(golds.size());
    m.macro_precision = precision_sum / static_cast<double>(classes.size());
    m.macro_f1 = f1_sum / static_cast<double>(classes.size());
    return m;
}

// ---------------------------------------------------------------------------
// Run scoring
// ---------------------------------------------------------------------------

// What the pipeline produced for one task, as consumed by the scorer.
struct TaskPredictions {
    std::optional<Prediction> time;
    std::optional<Prediction> location;
    std::map<std::string, std::string> choice_answers;  // choice key → option
};

struct DimensionScore {
    double acc = 0.0;       // 0/1
    double std_acc = 0.0;   // 0/1
    double f1 = 0.0;
    double f1_beta = 0.0;
};

struct TaskScore {
    std::string task_id;
    std::optional<DimensionScore> time;      // present iff a time gold exists
    std::optional<DimensionScore> location;  // present iff a location gold exists
    std::optional<std::string> error;
};

struct DimensionAggregate {
    size_t scored = 0;
    double acc_pct = 0.0;
    double std_acc_pct = 0.0;
    double f1 = 0.0;
    double f1_beta = 0.0;
};

struct ScoreReport {
    std::vector<TaskScore> tasks;
    DimensionAggregate time;
    DimensionAggregate location;
    std::map<std::string, MultichoiceMetrics> multichoice;  // per choice key
    size_t early_stops = 0;
    size_t retrievals = 0;
    size_t skipped = 0;  // gold present but unscorable (bad gold)

    nlohmann::json to_json() const {
        nlohmann::json tasks_json = nlohmann::json::array();
        for (const auto& t : tasks) {
            nlohmann::json row = {{"task_id", t.task_id}};
            auto dim = [](const DimensionScore& d) {
                return nlohmann::json{{"acc", d.acc},
                                      {"std_acc", d.std_acc},
                                      {"x_f1", d.f1},
                                      {"x_f1_beta", d.f1_beta}};
            };
            if (t.time) row["time"] = dim(*t.time);
            if (t.location) row["location"] = dim(*t.location);
            if (t.error) row["error"] = *t.error;
            tasks_json.push_back(std::move(row));
        }
        auto agg = [](const DimensionAggregate& a) {
            return nlohmann::json{{"scored", a.scored},
                                  {"acc_pct", a.acc_pct},
                                  {"std_acc_pct", a.std_acc_pct},
                                  {"x_f1", a.f1},
                                  {"x_f1_beta", a.f1_beta}};
        };
        nlohmann::json mc = nlohmann::json::object();
        for (const auto& [key, m] : multichoice)
            mc[key] = {{"accuracy_pct", m.accuracy_pct},
                       {"macro_precision", m.macro_precision},
                       {"macro_f1", m.macro_f1},
                       {"n", m.n}};
        return {{"tasks", tasks_json},
                {"aggregate", {{"time", agg(time)}, {"location", agg(location)}}},
                {"multichoice", mc},
                {"early_stops", early_stops},
                {"retrievals", retrievals},
                {"skipped", skipped}};
    }

    // Mirrors the familiar table layout: one row per dimension, percentages
    // for accuracies, F1 values scaled by 100.
    std::string to_csv() const {
        char buf[160];
        std::string out = "dimension,n,acc_pct,x_f1,x_f1_beta,std_acc_pct\n";
        auto row = [&](const char* name, const DimensionAggregate& a) {
            std::snprintf(buf, sizeof(buf), "%s,%zu,%.2f,%.2f,%.2f,%.2f\n", name, a.scored,
                          a.acc_pct, 100.0 * a.f1, 100.0 * a.f1_beta, a.std_acc_pct);
            out += buf;
        };
        row("time", time);
        row("location", location);
        for (const auto& [key, m] : multichoice) {
            std::snprintf(buf, sizeof(buf), "choice:%s,%zu,%.2f,%.2f,%.2f,\n", key.c_str(), m.n,
                          m.accuracy_pct, 100.0 * m.macro_precision, 100.0 * m.macro_f1);
            out += buf;
        }
        return out;
    }
};

// Scores one dimension of one task; a missing prediction scores 0 on every
// metric per the scoring rule.
inline DimensionScore score_dimension(const std::string& gold,
                                      const std::optional<Prediction>& pred, Dimension dimension,
                                      const LocationStandardizer& standardizer) {
    DimensionScore s;
    if (!pred || trim(pred->value).empty()) return s;
    const std::string& value = pred->value;
    s.acc = exact_accuracy(gold, value, dimension, /*standardized=*/false, standardizer);
    s.std_acc = exact_accuracy(gold, value, dimension, /*standardized=*/true, standardizer);
    ComponentSet gt = to_component_set(gold, dimension, standardizer);
    try {
        ComponentSet pc = to_component_set(value, dimension, standardizer);
        s.f1 = example_f1(gt, pc);
        s.f1_beta = example_f1_beta(gt, pc);
    } catch (const Error&) {
        // unstandardizable prediction: F1 metrics stay 0
    }
    return s;
}

inline ScoreReport score_run(const std::vector<ImageTask>& tasks,
                             const std::map<std::string, TaskPredictions>& predictions,
                             const LocationStandardizer& standardizer) {
    ScoreReport report;
    double t_acc = 0, t_std = 0, t_f1 = 0, t_beta = 0;
    double l_acc = 0, l_std = 0, l_f1 = 0, l_beta = 0;

    std::map<std::string, std::vector<std::string>> mc_golds, mc_preds;
    std::map<std::string, std::set<std::string>> mc_classes;

    for (const auto& task : tasks) {
        TaskScore ts;
        ts.task_id = task.id;
        auto it = predictions.find(task.id);
        const TaskPredictions* tp = it == predictions.end() ? nullptr : &it->second;

        if (tp) {
            if (tp->time && tp->time->stopped_early) ++report.early_stops;
            if (tp->location && tp->location->stopped_early) ++report.early_stops;
            if (tp->time && tp->time->used_retrieval) ++report.retrievals;
            if (tp->location && tp->location->used_retrieval) ++report.retrievals;
        }

        if (task.gold_time && !trim(*task.gold_time).empty()) {
            try {
                ts.time = score_dimension(*task.gold_time, tp ? tp->time : std::nullopt,
                                          Dimension::kTime, standardizer);
                ++report.time.scored;
                t_acc += ts.time->acc;
                t_std += ts.time->std_acc;
                t_f1 += ts.time->f1;
                t_beta += ts.time->f1_beta;
            } catch (const Error& e) {
                ts.error = std::string("time gold unscorable: ") + e.what();
                ++report.skipped;
            }
        }
        if (task.gold_location && !trim(*task.gold_location).empty()) {
            try {
                ts.location = score_dimension(*task.gold_location,
                                              tp ? tp->location : std::nullopt,
                                              Dimension::kLocation, standardizer);
                ++report.location.scored;
                l_acc += ts.location->acc;
                l_std += ts.location->std_acc;
                l_f1 += ts.location->f1;
                l_beta += ts.location->f1_beta;
            } catch (const Error& e) {
                ts.error = std::string("location gold unscorable: ") + e.what();
                ++report.skipped;
            }
        }

        for (const auto& [key, choice_set] : task.choices) {
            if (!choice_set.gold) continue;  // no gold: nothing to score
            mc_golds[key].push_back(*choice_set.gold);
            std::string answer;
            if (tp) {
                auto ans = tp->choice_answers.find(key);
                if (ans != tp->choice_answers.end()) answer = ans->second;
            }
            mc_preds[key].push_back(answer);
            for (const auto& opt : choice_set.options) mc_classes[key].insert(opt);
        }

        report.tasks.push_back(std::move(ts));
    }

    if (report.time.scored) {
        double n = static_cast<double>(report.time.scored);
        report.time.acc_pct = 100.0 * t_acc / n;
        report.time.std_acc_pct = 100.0 * t_std / n;
        report.time.f1 = t_f1 / n;
        report.time.f1_beta = t_beta / n;
    }
    if (report.location.scored) {
        double n = static_cast<double>(report.location.scored);
        report.location.acc_pct = 100.0 * l_acc / n;
        report.location.std_acc_pct = 100.0 * l_std / n;
        report.location.f1 = l_f1 / n;
        report.location.f1_beta = l_beta / n;
    }
    for (const auto& [key, golds] : mc_golds) {
        std::vector<std::string> classes(mc_classes[key].begin(), mc_classes[key].end());
        report.multichoice[key] = multichoice_metrics(golds, mc_preds[key], classes);
    }
    return report;
}

}  // namespace geotime
