#pragma once

// Independent brute-force reference for the hierarchical combiner, built from
// nothing but nested loops and a map. Tests compare run_hierarchy against this
// simulator on generated scenarios; any disagreement in counts, order, early
// stop point, or final prediction is a combiner bug.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <geotime/combiner.hpp>
#include <geotime/replay.hpp>
#include <geotime/types.hpp>

#include "fixture_helpers.hpp"

namespace hiersim {

// A deduction answer and how the pipeline is expected to treat it. Only
// canonical year strings appear, so time normalization is a pure pass-through
// and the simulator never needs to model the converter.
struct Outcome {
    std::string answer;  // raw reasoner reply
    bool refusal;        // folds to "no"
    std::string key;     // vote-board key after normalization ("" if refusal)
};

inline const std::vector<Outcome>& palette() {
    static const std::vector<Outcome> p = {
        {"No", true, ""},
        {"2020", false, "2020"},
        {"1950", false, "1950"},
        {"'1950.'", false, "1950"},  // alias: lands in the same bucket
        {"1999", false, "1999"},
    };
    return p;
}

// Candidate keys the noise filter accepts; everything else is rejected.
inline const std::map<std::string, bool>& filter_table() {
    static const std::map<std::string, bool> t = {
        {"2020", true},
        {"1950", true},
        {"1999", false},
    };
    return t;
}

struct Scenario {
    int n = 1;
    int hash_threshold = 5;
    geotime::CombinationSchedule schedule;
    std::map<std::vector<int>, Outcome> answers;  // subset → scripted outcome
    std::vector<std::vector<int>> order;          // full enumeration order
};

namespace detail {

// Lexicographic k-subsets of {0..n-1} by straightforward recursion.
inline void gen_subsets(int n, int k, int next, std::vector<int>& cur,
                        std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == k) {
        out.push_back(cur);
        return;
    }
    for (int i = next; i <= n - (k - static_cast<int>(cur.size())); ++i) {
        cur.push_back(i);
        gen_subsets(n, k, i + 1, cur, out);
        cur.pop_back();
    }
}

inline std::vector<std::vector<int>> subsets_of_size(int n, int k) {
    std::vector<std::vector<int>> out;
    if (k < 1 || k > n) return out;
    std::vector<int> cur;
    gen_subsets(n, k, 0, cur, out);
    return out;
}

inline unsigned mix(unsigned seed, const std::vector<int>& subset) {
    unsigned h = 2166136261u ^ seed;
    for (int id : subset) {
        h ^= static_cast<unsigned>(id) + 0x9e3779b9u;
        h *= 16777619u;
    }
    return h;
}

}  // namespace detail

// Enumeration exactly as declared: levels in schedule order, lexicographic
// within a level, duplicates dropped on later appearance.
inline std::vector<std::vector<int>> enumerate(int n,
                                               const geotime::CombinationSchedule& schedule) {
    std::vector<std::vector<int>> out;
    std::set<std::vector<int>> seen;
    for (const auto& level : schedule.levels) {
        int k = 0;
        switch (level.kind) {
            case geotime::LevelSpec::Kind::kSingles: k = 1; break;
            case geotime::LevelSpec::Kind::kPairs: k = 2; break;
            case geotime::LevelSpec::Kind::kKSubsets: k = level.k; break;
            case geotime::LevelSpec::Kind::kAll: k = n; break;
        }
        for (auto& subset : detail::subsets_of_size(n, k))
            if (seen.insert(subset).second) out.push_back(std::move(subset));
    }
    return out;
}

inline Scenario make_scenario(int n, int hash_threshold, unsigned seed,
                              const geotime::CombinationSchedule& schedule = {}) {
    Scenario s;
    s.n = n;
    s.hash_threshold = hash_threshold;
    s.schedule = schedule;
    s.order = enumerate(n, schedule);
    for (const auto& subset : s.order)
        s.answers[subset] = palette()[detail::mix(seed, subset) % palette().size()];
    return s;
}

struct Expected {
    std::map<std::string, int> counts;
    std::optional<std::string> prediction;
    int prediction_votes = 0;
    bool early_stopped = false;
    int evaluated = 0;     // deduction calls issued
    int filter_calls = 0;  // filter prompts issued
};

// Sequential walk mirroring the stated combine → filter → vote → stop rule.
inline Expected simulate(const Scenario& s) {
    Expected e;
    std::map<std::string, int> arrival;
    int next_arrival = 0;
    for (const auto& subset : s.order) {
        ++e.evaluated;
        const Outcome& o = s.answers.at(subset);
        if (o.refusal) continue;
        ++e.filter_calls;
        if (!filter_table().at(o.key)) continue;
        if (!arrival.count(o.key)) arrival[o.key] = next_arrival++;
        int count = ++e.counts[o.key];
        if (count >= s.hash_threshold) {
            e.early_stopped = true;
            break;
        }
    }
    int best = -1, best_arrival = 0;
    for (const auto& [key, count] : e.counts) {
        if (count > best || (count == best && arrival[key] < best_arrival)) {
            best = count;
            best_arrival = arrival[key];
            e.prediction = key;
            e.prediction_votes = count;
        }
    }
    return e;
}

inline std::vector<geotime::Clue> make_clues(int n) {
    std::vector<geotime::Clue> clues(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        clues[static_cast<size_t>(i)].id = i;
        clues[static_cast<size_t>(i)].kind = geotime::ClueKind::kKeywords;
        clues[static_cast<size_t>(i)].text = "clue text " + std::to_string(i);
    }
    return clues;
}

// Installs every scripted deduction and the filter verdict table.
inline void script(geotime::ReplayStore& store, const Scenario& s, const std::string& image) {
    auto clues = make_clues(s.n);
    for (const auto& [subset, outcome] : s.answers) {
        std::vector<std::string> texts;
        for (int id : subset) texts.push_back(clues[static_cast<size_t>(id)].text);
        fixturekit::time_deduction(store, texts, outcome.answer);
    }
    for (const auto& [key, accepted] : filter_table())
        fixturekit::date_filter_answer(store, image, key, accepted ? "Yes" : "No");
}

}  // namespace hiersim
