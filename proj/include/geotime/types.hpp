#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "geotime/errors.hpp"
#include "geotime/util.hpp"

namespace geotime {

enum class Dimension { kTime, kLocation };

inline const char* to_string(Dimension d) {
    return d == Dimension::kTime ? "time" : "location";
}

inline Dimension dimension_from_string(std::string_view s) {
    if (s == "time") return Dimension::kTime;
    if (s == "location") return Dimension::kLocation;
    throw Error("unknown dimension: " + std::string(s));
}

enum class ClueKind {
    kKeywords,
    kOcrText,
    kCelebrity,
    kLandmark,
    kEventSummary,
    kInitialGuess,
    kDirectDate,
};

inline const char* to_string(ClueKind k) {
    switch (k) {
        case ClueKind::kKeywords: return "keywords";
        case ClueKind::kOcrText: return "ocr_text";
        case ClueKind::kCelebrity: return "celebrity";
        case ClueKind::kLandmark: return "landmark";
        case ClueKind::kEventSummary: return "event_summary";
        case ClueKind::kInitialGuess: return "initial_guess";
        case ClueKind::kDirectDate: return "direct_date";
    }
    return "unknown";
}

inline ClueKind clue_kind_from_string(std::string_view s) {
    if (s == "keywords") return ClueKind::kKeywords;
    if (s == "ocr_text") return ClueKind::kOcrText;
    if (s == "celebrity") return ClueKind::kCelebrity;
    if (s == "landmark") return ClueKind::kLandmark;
    if (s == "event_summary") return ClueKind::kEventSummary;
    if (s == "initial_guess") return ClueKind::kInitialGuess;
    if (s == "direct_date") return ClueKind::kDirectDate;
    throw Error("unknown clue kind: " + std::string(s));
}

// One typed piece of perceived evidence. Text is always trimmed and
// non-empty; an empty extraction produces no Clue at all.
struct Clue {
    int id = 0;
    ClueKind kind = ClueKind::kKeywords;
    std::string text;
    std::optional<std::string> confidence_note;
};

// One multi-choice answer set (e.g. the 30 country options of a
// multi-choice dataset), with an optional gold label for scoring.
struct ChoiceSet {
    std::vector<std::string> options;
    std::optional<std::string> gold;
};

struct ImageTask {
    std::string id;
    std::string image_ref;
    std::optional<std::string> gold_time;      // "YYYY[-MM[-DD]]"
    std::optional<std::string> gold_location;  // free-form label
    std::map<std::string, ChoiceSet> choices;  // key -> options, e.g. "time", "country"

    void validate() const {
        if (trim(id).empty()) throw DatasetError("task id must be non-empty");
        for (const auto& [key, cs] : choices) {
            if (cs.options.empty())
                throw DatasetError("task " + id + ": choice set '" + key + "' is empty");
            std::set<std::string> seen;
            for (const auto& opt : cs.options) {
                if (!seen.insert(to_lower(trim(opt))).second)
                    throw DatasetError("task " + id + ": duplicate option in choice set '" +
                                       key + "'");
            }
        }
    }
};

// Inclusive year range with optional finer month/day bounds. Absent parts
// are treated as the widest: start month/day default to 01-01 and end
// month/day to 12-31 when comparing.
struct TimeRange {
    int start_year = 0;
    int end_year = 0;
    std::optional<int> start_month, start_day;
    std::optional<int> end_month, end_day;

    bool operator==(const TimeRange&) const = default;
};

inline constexpr const char* kContinents[7] = {
    "Africa", "Antarctica", "Asia", "Europe", "North America", "Oceania", "South America",
};

inline std::optional<std::string> canonical_continent(std::string_view name) {
    std::string folded = fold_bare_word(name);
    if (folded == "australia") folded = "oceania";  // common alias
    for (const char* c : kContinents) {
        if (to_lower(c) == folded) return std::string(c);
    }
    return std::nullopt;
}

// A location standardized into area/city/country/continent slots.
struct LocationValue {
    std::optional<std::string> area;  // sub-city landmark, kept when present
    std::optional<std::string> city;
    std::optional<std::string> country;
    std::optional<std::string> continent;

    bool empty() const { return !area && !city && !country && !continent; }

    // Finest-to-coarsest display form, used when a prompt takes one slot.
    std::string finest() const {
        if (area) return *area;
        if (city) return *city;
        if (country) return *country;
        if (continent) return *continent;
        return {};
    }

    // Canonical hash key: lowercase pipe-joined tuple, so synonyms that
    // standardize identically land in the same vote bucket.
    std::string normalized_key() const {
        auto slot = [](const std::optional<std::string>& v) {
            return v ? to_lower(trim(*v)) : std::string();
        };
        return slot(area) + "|" + slot(city) + "|" + slot(country) + "|" + slot(continent);
    }

    static std::optional<LocationValue> from_normalized_key(std::string_view key) {
        auto parts = split(key, '|');
        if (parts.size() != 4) return std::nullopt;
        LocationValue v;
        if (!parts[0].empty()) v.area = parts[0];
        if (!parts[1].empty()) v.city = parts[1];
        if (!parts[2].empty()) v.country = parts[2];
        if (!parts[3].empty()) v.continent = parts[3];
        return v;
    }
};

// Geocoder output reduced to the fields the pipeline keeps.
struct GeocodePlace {
    std::optional<std::string> area;
    std::optional<std::string> city;
    std::optional<std::string> country;

    bool empty() const { return !area && !city && !country; }
    bool operator==(const GeocodePlace&) const = default;
};

// Where a candidate came from: a hierarchy combination or a kept retrieval.
struct HierarchyProvenance {
    int level = 0;               // 1-based position of the schedule level
    std::vector<int> clue_ids;   // sorted, dense ids of the combination
    bool operator==(const HierarchyProvenance&) const = default;
};

struct RetrievalProvenance {
    int result_index = 0;  // rank of the search result the candidate came from
    bool operator==(const RetrievalProvenance&) const = default;
};

using Provenance = std::variant<HierarchyProvenance, RetrievalProvenance>;

// A normalized time or location hypothesis.
struct Candidate {
    Dimension dimension = Dimension::kTime;
    std::string raw;         // as produced by the reasoner
    std::string normalized;  // canonical vote-board key
    Provenance provenance;
    // Case-preserving standardized value, set for location candidates; the
    // normalized key is lowercased so prompts use this for display.
    std::optional<LocationValue> location;

    std::string display_form() const {
        if (dimension == Dimension::kLocation && location) {
            std::string f = location->finest();
            if (!f.empty()) return f;
        }
        return normalized;
    }
};

struct Prediction {
    Dimension dimension = Dimension::kTime;
    std::string value;  // normalized final answer
    int vote_count = 0;
    bool stopped_early = false;
    bool used_retrieval = false;
};

}  // namespace geotime
