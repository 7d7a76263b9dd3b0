#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geotime/backends.hpp"
#include "geotime/errors.hpp"
#include "geotime/noise_filter.hpp"
#include "geotime/normalize.hpp"
#include "geotime/reasoner.hpp"
#include "geotime/types.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Combination schedule
// ---------------------------------------------------------------------------

struct LevelSpec {
    enum class Kind { kSingles, kPairs, kKSubsets, kAll };
    Kind kind = Kind::kSingles;
    int k = 0;  // kKSubsets only

    bool operator==(const LevelSpec&) const = default;
};

struct CombinationSchedule {
    std::vector<LevelSpec> levels = {{LevelSpec::Kind::kSingles},
                                     {LevelSpec::Kind::kPairs},
                                     {LevelSpec::Kind::kAll}};

    // Comma-separated tokens: "singles", "pairs", "all", or "k<N>" for
    // N-element subsets (e.g. "singles,pairs,k3,all").
    static CombinationSchedule parse(const std::string& text) {
        CombinationSchedule s;
        s.levels.clear();
        for (const auto& part : split(text, ',')) {
            std::string token = to_lower(trim(part));
            if (token.empty()) continue;
            if (token == "singles") {
                s.levels.push_back({LevelSpec::Kind::kSingles});
            } else if (token == "pairs") {
                s.levels.push_back({LevelSpec::Kind::kPairs});
            } else if (token == "all") {
                s.levels.push_back({LevelSpec::Kind::kAll});
            } else if (token.size() > 1 && token[0] == 'k' &&
                       std::all_of(token.begin() + 1, token.end(),
                                   [](unsigned char c) { return std::isdigit(c); })) {
                int k = std::stoi(token.substr(1));
                if (k < 1) throw ConfigError("subset size must be >= 1: " + token);
                s.levels.push_back({LevelSpec::Kind::kKSubsets, k});
            } else {
                throw ConfigError("unknown schedule level: " + token);
            }
        }
        if (s.levels.empty()) throw ConfigError("empty combination schedule: " + text);
        return s;
    }

    std::string to_string() const {
        std::string out;
        for (const auto& level : levels) {
            if (!out.empty()) out += ",";
            switch (level.kind) {
                case LevelSpec::Kind::kSingles: out += "singles"; break;
                case LevelSpec::Kind::kPairs: out += "pairs"; break;
                case LevelSpec::Kind::kAll: out += "all"; break;
                case LevelSpec::Kind::kKSubsets: out += "k" + std::to_string(level.k); break;
            }
        }
        return out;
    }
};

// One enumerated combination: which clues, and which schedule level (1-based)
// produced it.
struct Combination {
    std::vector<int> clue_ids;  // sorted ascending
    int level = 0;
};

namespace detail {

inline void k_subsets(int n, int k, int level, std::set<std::vector<int>>& seen,
                      std::vector<Combination>& out) {
    if (k < 1 || k > n) return;  // level exceeds available clues: skipped
    std::vector<int> ids(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) ids[static_cast<size_t>(i)] = i;
    while (true) {
        if (seen.insert(ids).second) out.push_back({ids, level});
        // next combination in lexicographic order
        int i = k - 1;
        while (i >= 0 && ids[static_cast<size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++ids[static_cast<size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            ids[static_cast<size_t>(j)] = ids[static_cast<size_t>(j - 1)] + 1;
    }
}

}  // namespace detail

// Per level, subsets in lexicographic clue-id order; levels concatenated in
// schedule order; duplicates (e.g. "all" collapsing onto an earlier level at
// small n) dropped on later appearance.
inline std::vector<Combination> enumerate_combinations(int n, const CombinationSchedule& schedule) {
    if (n < 1) throw EmptyInput("no clues to combine");
    std::vector<Combination> out;
    std::set<std::vector<int>> seen;
    int level = 0;
    for (const auto& spec : schedule.levels) {
        ++level;
        switch (spec.kind) {
            case LevelSpec::Kind::kSingles: detail::k_subsets(n, 1, level, seen, out); break;
            case LevelSpec::Kind::kPairs: detail::k_subsets(n, 2, level, seen, out); break;
            case LevelSpec::Kind::kKSubsets: detail::k_subsets(n, spec.k, level, seen, out); break;
            case LevelSpec::Kind::kAll: detail::k_subsets(n, n, level, seen, out); break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Vote board
// ---------------------------------------------------------------------------

class VoteBoard {
public:
    explicit VoteBoard(Dimension dimension, int hash_threshold = 5)
        : dimension_(dimension), hash_threshold_(hash_threshold) {
        if (hash_threshold_ < 1) throw ConfigError("hash threshold must be >= 1");
    }

    Dimension dimension() const { return dimension_; }
    int hash_threshold() const { return hash_threshold_; }

    // Counts one vote; returns true when this vote reaches the threshold.
    bool record_vote(const Candidate& cand) {
        const std::string& key = cand.normalized;
        if (key.empty()) throw EmptyInput("vote with empty candidate key");
        if (!counts_.count(key)) {
            arrival_order_[key] = next_arrival_++;
            exemplar_.emplace(key, cand);
        }
        int count = ++counts_[key];
        if (count >= hash_threshold_) threshold_reached_ = true;
        return count >= hash_threshold_;
    }

    bool threshold_reached() const { return threshold_reached_; }
    bool empty() const { return counts_.empty(); }
    const std::map<std::string, int>& counts() const { return counts_; }
    const std::map<std::string, int>& arrival_order() const { return arrival_order_; }

    const Candidate* exemplar(const std::string& key) const {
        auto it = exemplar_.find(key);
        return it == exemplar_.end() ? nullptr : &it->second;
    }

    // Argmax by count, ties broken by earliest arrival; none when no votes.
    std::optional<Prediction> finalize(bool stopped_early, bool used_retrieval) const {
        if (counts_.empty()) return std::nullopt;
        const std::string* best = nullptr;
        int best_count = -1;
        int best_arrival = 0;
        for (const auto& [key, count] : counts_) {
            int arrival = arrival_order_.at(key);
            if (count > best_count || (count == best_count && arrival < best_arrival)) {
                best = &key;
                best_count = count;
                best_arrival = arrival;
            }
        }
        Prediction p;
        p.dimension = dimension_;
        p.value = *best;
        p.vote_count = best_count;
        p.stopped_early = stopped_early;
        p.used_retrieval = used_retrieval;
        return p;
    }

private:
    Dimension dimension_;
    int hash_threshold_;
    std::map<std::string, int> counts_;
    std::map<std::string, int> arrival_order_;
    std::map<std::string, Candidate> exemplar_;
    int next_arrival_ = 0;
    bool threshold_reached_ = false;
};

// Merges finer time keys into their year when the coarsen mode is on;
// location keys and year ranges pass through.
inline std::string coarsen_time_key(const std::string& key) {
    if (key.size() > 4 && key.find("..") == std::string::npos && is_canonical_time(key))
        return key.substr(0, 4);
    return key;
}

// ---------------------------------------------------------------------------
// Candidate construction (shared with the retriever)
// ---------------------------------------------------------------------------

// Bundles the normalization hops a raw reasoner answer needs to become a
// Candidate: date conversion via the reasoner, geocoding, continent lookup,
// and the validity prompt as a last resort.
class CandidateFactory {
public:
    CandidateFactory(const Reasoner* reasoner, std::shared_ptr<GeocodeBackend> geocode,
                     int epoch_year = 2021)
        : reasoner_(reasoner), geocode_(std::move(geocode)), epoch_year_(epoch_year) {}

    // Throws NormalizationFailed when the payload cannot be resolved;
    // backend errors propagate.
    Candidate make(Dimension dimension, const std::string& payload,
                   Provenance provenance) const {
        Candidate c;
        c.dimension = dimension;
        c.raw = payload;
        c.provenance = std::move(provenance);
        if (dimension == Dimension::kTime) {
            c.normalized = normalize_time(
                payload,
                [this](const std::string& s) { return reasoner_->convert_date(s); },
                epoch_year_);
        } else {
            LocationAssist assist;
            assist.continent_of_country = [this](const std::string& country) {
                return reasoner_->infer_continent(country);
            };
            assist.validate_location = [this](const std::string& loc) {
                return reasoner_->validate_location(loc);
            };
            LocationValue value = normalize_location(
                payload,
                [this](const std::string& q) -> std::optional<GeocodePlace> {
                    if (!geocode_) return std::nullopt;
                    return geocode_->geocode(GeocodeRequest{q});
                },
                assist);
            c.location = value;
            c.normalized = value.normalized_key();
        }
        return c;
    }

    int epoch_year() const { return epoch_year_; }

private:
    const Reasoner* reasoner_;
    std::shared_ptr<GeocodeBackend> geocode_;
    int epoch_year_;
};

// ---------------------------------------------------------------------------
// Hierarchy run
// ---------------------------------------------------------------------------

// Everything that happened for one enumerated combination, for the trace.
struct CombinationRecord {
    std::vector<int> clue_ids;
    int level = 0;
    std::string raw_answer;
    bool refusal = false;
    std::optional<std::string> candidate_key;  // normalized (pre-coarsening)
    std::optional<std::string> vote_key;       // key actually voted
    std::optional<FilterVerdict> verdict;
    std::optional<std::string> error;
    bool voted = false;
    bool early_stop = false;
};

struct HierarchyConfig {
    CombinationSchedule schedule;
    int hash_threshold = 5;
    bool coarsen_time_to_year = false;
};

struct HierarchyResult {
    VoteBoard board;
    std::vector<CombinationRecord> records;
    bool early_stopped = false;
    int combinations_evaluated = 0;  // reasoner deductions actually issued
};

// Walks the combination schedule for one dimension: deduce → normalize →
// filter → vote, halting the instant a candidate's count reaches HT.
inline HierarchyResult run_hierarchy(const std::string& image_ref,
                                     const std::vector<Clue>& clues, Dimension dimension,
                                     const HierarchyConfig& config, const Reasoner& reasoner,
                                     const NoiseFilter& filter,
                                     const CandidateFactory& factory) {
    if (clues.empty()) throw EmptyInput("hierarchy run without clues");
    HierarchyResult result{VoteBoard(dimension, config.hash_threshold), {}, false, 0};

    auto combos = enumerate_combinations(static_cast<int>(clues.size()), config.schedule);
    for (const auto& combo : combos) {
        CombinationRecord rec;
        rec.clue_ids = combo.clue_ids;
        rec.level = combo.level;

        std::vector<std::string> texts;
        texts.reserve(combo.clue_ids.size());
        for (int id : combo.clue_ids) texts.push_back(clues.at(static_cast<size_t>(id)).text);

        try {
            ++result.combinations_evaluated;
            ReasonerAnswer answer = dimension == Dimension::kTime
                                        ? reasoner.deduce_time(texts)
                                        : reasoner.deduce_location(texts);
            rec.raw_answer = answer.raw_answer;
            if (!answer.parsed) {
                rec.refusal = true;
                result.records.push_back(std::move(rec));
                continue;
            }
            Candidate cand;
            try {
                cand = factory.make(dimension, *answer.parsed,
                                    HierarchyProvenance{combo.level, combo.clue_ids});
            } catch (const NormalizationFailed& e) {
                rec.error = e.what();
                result.records.push_back(std::move(rec));
                continue;
            }
            rec.candidate_key = cand.normalized;

            FilterVerdict verdict = filter.filter_or_bypass(image_ref, cand);
            rec.verdict = verdict;
            if (verdict.accepted) {
                Candidate voted = cand;
                if (dimension == Dimension::kTime && config.coarsen_time_to_year)
                    voted.normalized = coarsen_time_key(voted.normalized);
                rec.vote_key = voted.normalized;
                rec.voted = true;
                bool stop = result.board.record_vote(voted);
                if (stop) {
                    rec.early_stop = true;
                    result.early_stopped = true;
                    result.records.push_back(std::move(rec));
                    break;
                }
            }
        } catch (const BackendError& e) {
            rec.error = e.what();  // this combination only; the run continues
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

}  // namespace geotime
