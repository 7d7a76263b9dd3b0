#pragma once

#include <array>
#include <cstdio>
#include <functional>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>

#include "geotime/errors.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

// ---------------------------------------------------------------------------
// Calendar helpers
// ---------------------------------------------------------------------------

inline bool is_leap_year(int y) { return y % 4 == 0 && (y % 100 != 0 || y % 400 == 0); }

inline int days_in_month(int y, int m) {
    static constexpr std::array<int, 13> kDays = {0, 31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (m < 1 || m > 12) return 0;
    if (m == 2 && is_leap_year(y)) return 29;
    return kDays[static_cast<size_t>(m)];
}

inline bool valid_year(int y) { return y >= 1000 && y <= 2999; }

// ---------------------------------------------------------------------------
// Canonical time strings
//
// The canonical grammar is "YYYY", "YYYY-MM", "YYYY-MM-DD", or "YYYY..YYYY"
// with start < end. Everything else is an alias that normalization resolves.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string pad2(int v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%02d", v);
    return buf;
}

// Reads a maximal digit run starting at pos; returns its length.
inline size_t digit_run(const std::string& s, size_t pos) {
    size_t n = 0;
    while (pos + n < s.size() && std::isdigit(static_cast<unsigned char>(s[pos + n]))) ++n;
    return n;
}

inline int to_int(const std::string& s, size_t pos, size_t len) {
    int v = 0;
    for (size_t i = 0; i < len; ++i) v = v * 10 + (s[pos + i] - '0');
    return v;
}

inline bool is_date_sep(char c) { return c == '-' || c == '.' || c == '/'; }

struct TimeMatch {
    std::string canonical;
    size_t begin = 0;
    size_t end = 0;  // one past the last consumed char
};

// Skips spaces and recognizes a range connector ("..", "-", "to", "until",
// "through", an en/em dash) starting at pos. Returns the position after the
// connector, or nullopt.
inline std::optional<size_t> skip_range_sep(const std::string& s, size_t pos) {
    size_t p = pos;
    while (p < s.size() && s[p] == ' ') ++p;
    auto word = [&](const char* w) -> bool {
        size_t n = std::char_traits<char>::length(w);
        if (s.compare(p, n, w) != 0) return false;
        p += n;
        return true;
    };
    bool had = false;
    if (word("..")) {
        had = true;
    } else if (p < s.size() && (s[p] == '-' || s[p] == '~')) {
        ++p;
        had = true;
    } else if (s.compare(p, 3, "\xE2\x80\x93") == 0 || s.compare(p, 3, "\xE2\x80\x94") == 0) {
        p += 3;  // en dash / em dash
        had = true;
    } else if (word("to") || word("until") || word("through")) {
        had = true;
    }
    if (!had) return std::nullopt;
    while (p < s.size() && s[p] == ' ') ++p;
    return p;
}

// Attempts to read a canonical time value whose year starts at pos
// (pos is the start of a 4-digit run). Longest/most specific form wins.
inline std::optional<TimeMatch> match_time_at(const std::string& s, size_t pos) {
    size_t run = digit_run(s, pos);
    if (run != 4) return std::nullopt;
    int year = to_int(s, pos, 4);
    if (!valid_year(year)) return std::nullopt;
    size_t after_year = pos + 4;

    // YYYY<sep>MM[<sep>DD] — the month run must not be another 4-digit year.
    if (after_year < s.size() && is_date_sep(s[after_year])) {
        char sep = s[after_year];
        size_t mpos = after_year + 1;
        size_t mrun = digit_run(s, mpos);
        if (mrun >= 1 && mrun <= 2) {
            int month = to_int(s, mpos, mrun);
            if (month >= 1 && month <= 12) {
                size_t after_month = mpos + mrun;
                if (after_month < s.size() && s[after_month] == sep) {
                    size_t dpos = after_month + 1;
                    size_t drun = digit_run(s, dpos);
                    if (drun >= 1 && drun <= 2) {
                        int day = to_int(s, dpos, drun);
                        if (day >= 1 && day <= days_in_month(year, month))
                            return TimeMatch{std::to_string(year) + "-" + pad2(month) + "-" + pad2(day),
                                             pos, dpos + drun};
                    }
                }
                return TimeMatch{std::to_string(year) + "-" + pad2(month), pos, after_month};
            }
        }
    }

    // YYYY .. YYYY (any recognized connector)
    if (auto next = skip_range_sep(s, after_year)) {
        size_t yrun = digit_run(s, *next);
        if (yrun == 4) {
            int other = to_int(s, *next, 4);
            if (valid_year(other)) {
                int lo = std::min(year, other), hi = std::max(year, other);
                std::string canon = lo == hi ? std::to_string(lo)
                                             : std::to_string(lo) + ".." + std::to_string(hi);
                return TimeMatch{canon, pos, *next + 4};
            }
        }
    }

    return TimeMatch{std::to_string(year), pos, after_year};
}

// Finds the first canonical time value embedded anywhere in free text.
inline std::optional<TimeMatch> scan_time(const std::string& s) {
    for (size_t i = 0; i < s.size();) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) {
            ++i;
            continue;
        }
        size_t run = digit_run(s, i);
        if (run == 4) {
            if (auto m = match_time_at(s, i)) return m;
        }
        i += run;
    }
    return std::nullopt;
}

// Strips whitespace, matching quote layers, and trailing sentence dots, in
// whatever order they are nested.
inline std::string trim_answer(std::string s) {
    s = trim(s);
    bool changed = true;
    while (changed) {
        changed = false;
        if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                              (s.front() == '\'' && s.back() == '\''))) {
            s = trim(s.substr(1, s.size() - 2));
            changed = true;
        }
        while (!s.empty() && (s.back() == '.' || s.back() == ',')) {
            s = trim(s.substr(0, s.size() - 1));
            changed = true;
        }
    }
    return s;
}

}  // namespace detail

inline bool is_canonical_time(const std::string& s) {
    auto m = detail::match_time_at(s, 0);
    return m && m->begin == 0 && m->end == s.size() && m->canonical == s;
}

// Resolves a raw time mention into canonical form. Local parsing covers
// canonical and near-canonical inputs (padding, reversed ranges, "post 2000"
// open ranges); anything else goes through the date-conversion backend and
// its answer is scanned for the first parseable value.
inline std::string normalize_time(
    const std::string& raw,
    const std::function<std::string(const std::string&)>& convert_date,
    int epoch_year = 2021) {
    std::string s = detail::trim_answer(raw);
    if (s.empty()) throw NormalizationFailed("empty time value");

    if (auto m = detail::match_time_at(s, 0); m && m->begin == 0 && m->end == s.size())
        return m->canonical;

    // post/after/since YYYY → open range closed at the dataset epoch.
    {
        std::string low = to_lower(s);
        for (const char* prefix : {"post", "after", "since"}) {
            size_t n = std::char_traits<char>::length(prefix);
            if (low.compare(0, n, prefix) == 0) {
                size_t p = n;
                while (p < low.size() && (low[p] == ' ' || low[p] == '-')) ++p;
                if (detail::digit_run(low, p) == 4 && p + 4 == low.size()) {
                    int y = detail::to_int(low, p, 4);
                    if (valid_year(y)) {
                        int hi = std::max(y, epoch_year);
                        return y == hi ? std::to_string(y)
                                       : std::to_string(y) + ".." + std::to_string(hi);
                    }
                }
            }
        }
    }

    if (!convert_date) throw NormalizationFailed("unparseable time value: " + raw);
    std::string answer = convert_date(s);
    if (auto m = detail::scan_time(answer)) return m->canonical;
    throw NormalizationFailed("no year in normalized answer for: " + raw);
}

// ---------------------------------------------------------------------------
// Time intervals
// ---------------------------------------------------------------------------

namespace detail {

struct DateTriple {
    int y, m, d;
    friend auto operator<=>(const DateTriple&, const DateTriple&) = default;
};

inline DateTriple range_start(const TimeRange& r) {
    return {r.start_year, r.start_month.value_or(1), r.start_day.value_or(1)};
}

inline DateTriple range_end(const TimeRange& r) {
    int m = r.end_month.value_or(12);
    return {r.end_year, m, r.end_day.value_or(days_in_month(r.end_year, m))};
}

inline TimeRange from_triples(DateTriple lo, DateTriple hi) {
    TimeRange r;
    r.start_year = lo.y;
    r.end_year = hi.y;
    if (!(lo.m == 1 && lo.d == 1)) {
        r.start_month = lo.m;
        if (lo.d != 1) r.start_day = lo.d;
    }
    if (!(hi.m == 12 && hi.d == 31)) {
        r.end_month = hi.m;
        if (hi.d != days_in_month(hi.y, hi.m)) r.end_day = hi.d;
    }
    return r;
}

}  // namespace detail

// Parses a canonical time string into the interval it denotes.
inline TimeRange time_interval(const std::string& canonical) {
    if (!is_canonical_time(canonical))
        throw NormalizationFailed("not a canonical time: " + canonical);
    TimeRange r;
    size_t dots = canonical.find("..");
    if (dots != std::string::npos) {
        r.start_year = std::stoi(canonical.substr(0, dots));
        r.end_year = std::stoi(canonical.substr(dots + 2));
        return r;
    }
    r.start_year = r.end_year = std::stoi(canonical.substr(0, 4));
    if (canonical.size() >= 7) {
        int m = std::stoi(canonical.substr(5, 2));
        r.start_month = r.end_month = m;
    }
    if (canonical.size() >= 10) {
        int d = std::stoi(canonical.substr(8, 2));
        r.start_day = r.end_day = d;
    }
    return r;
}

inline std::optional<TimeRange> intersect_time_ranges(const TimeRange& a, const TimeRange& b) {
    auto lo = std::max(detail::range_start(a), detail::range_start(b));
    auto hi = std::min(detail::range_end(a), detail::range_end(b));
    if (lo > hi) return std::nullopt;
    return detail::from_triples(lo, hi);
}

// True iff the candidate date's interval overlaps the range. Pure interval
// arithmetic; no backend involved.
inline bool range_alignment_check(const TimeRange& range, const std::string& canonical_date) {
    return intersect_time_ranges(range, time_interval(canonical_date)).has_value();
}

// Best-effort rendering of a range back into canonical form (used in traces).
inline std::string render_time_range(const TimeRange& r) {
    auto lo = detail::range_start(r), hi = detail::range_end(r);
    if (lo == hi) {
        std::string out = std::to_string(lo.y);
        if (r.start_month) {
            out += "-" + detail::pad2(lo.m);
            if (r.start_day) out += "-" + detail::pad2(lo.d);
        }
        return out;
    }
    if (lo.y == hi.y) {
        if (lo.m == hi.m && lo.d == 1 && hi.d == days_in_month(hi.y, hi.m))
            return std::to_string(lo.y) + "-" + detail::pad2(lo.m);
        return std::to_string(lo.y);
    }
    return std::to_string(lo.y) + ".." + std::to_string(hi.y);
}

// ---------------------------------------------------------------------------
// Country → continent table
// ---------------------------------------------------------------------------

struct CountryInfo {
    std::string name;       // display form
    std::string continent;  // one of the seven canonical names
};

// Fixed lookup keyed by case-folded country name (plus common aliases).
inline const std::map<std::string, CountryInfo>& country_continent_table() {
    static const std::map<std::string, CountryInfo> table = [] {
        std::map<std::string, CountryInfo> t;
        auto put = [&](const char* name, const char* cont,
                       std::initializer_list<const char*> aliases = {}) {
            CountryInfo info{name, cont};
            t[to_lower(name)] = info;
            for (const char* a : aliases) t[to_lower(a)] = info;
        };

        // Africa
        put("Algeria", "Africa");
        put("Angola", "Africa");
        put("Benin", "Africa");
        put("Botswana", "Africa");
        put("Burkina Faso", "Africa");
        put("Burundi", "Africa");
        put("Cabo Verde", "Africa", {"Cape Verde"});
        put("Cameroon", "Africa");
        put("Central African Republic", "Africa");
        put("Chad", "Africa");
        put("Comoros", "Africa");
        put("Democratic Republic of the Congo", "Africa",
            {"DR Congo", "DRC", "Congo-Kinshasa", "Zaire"});
        put("Republic of the Congo", "Africa", {"Congo", "Congo-Brazzaville"});
        put("Djibouti", "Africa");
        put("Egypt", "Africa");
        put("Equatorial Guinea", "Africa");
        put("Eritrea", "Africa");
        put("Eswatini", "Africa", {"Swaziland"});
        put("Ethiopia", "Africa");
        put("Gabon", "Africa");
        put("Gambia", "Africa", {"The Gambia"});
        put("Ghana", "Africa");
        put("Guinea", "Africa");
        put("Guinea-Bissau", "Africa");
        put("Ivory Coast", "Africa", {"Cote d'Ivoire", "C\xC3\xB4te d'Ivoire"});
        put("Kenya", "Africa");
        put("Lesotho", "Africa");
        put("Liberia", "Africa");
        put("Libya", "Africa");
        put("Madagascar", "Africa");
        put("Malawi", "Africa");
        put("Mali", "Africa");
        put("Mauritania", "Africa");
        put("Mauritius", "Africa");
        put("Morocco", "Africa");
        put("Mozambique", "Africa");
        put("Namibia", "Africa");
        put("Niger", "Africa");
        put("Nigeria", "Africa");
        put("Rwanda", "Africa");
        put("Sao Tome and Principe", "Africa");
        put("Senegal", "Africa");
        put("Seychelles", "Africa");
        put("Sierra Leone", "Africa");
        put("Somalia", "Africa");
        put("South Africa", "Africa");
        put("South Sudan", "Africa");
        put("Sudan", "Africa");
        put("Tanzania", "Africa");
        put("Togo", "Africa");
        put("Tunisia", "Africa");
        put("Uganda", "Africa");
        put("Zambia", "Africa");
        put("Zimbabwe", "Africa");

        // Asia
        put("Afghanistan", "Asia");
        put("Armenia", "Asia");
        put("Azerbaijan", "Asia");
        put("Bahrain", "Asia");
        put("Bangladesh", "Asia");
        put("Bhutan", "Asia");
        put("Brunei", "Asia");
        put("Cambodia", "Asia");
        put("China", "Asia", {"People's Republic of China", "PRC", "Mainland China"});
        put("Georgia", "Asia");
        put("Hong Kong", "Asia");
        put("India", "Asia");
        put("Indonesia", "Asia");
        put("Iran", "Asia");
        put("Iraq", "Asia");
        put("Israel", "Asia");
        put("Japan", "Asia");
        put("Jordan", "Asia");
        put("Kazakhstan", "Asia");
        put("Kuwait", "Asia");
        put("Kyrgyzstan", "Asia");
        put("Laos", "Asia");
        put("Lebanon", "Asia");
        put("Macau", "Asia");
        put("Malaysia", "Asia");
        put("Maldives", "Asia");
        put("Mongolia", "Asia");
        put("Myanmar", "Asia", {"Burma"});
        put("Nepal", "Asia");
        put("North Korea", "Asia", {"Democratic People's Republic of Korea", "DPRK"});
        put("Oman", "Asia");
        put("Pakistan", "Asia");
        put("Palestine", "Asia");
        put("Philippines", "Asia", {"The Philippines"});
        put("Qatar", "Asia");
        put("Saudi Arabia", "Asia");
        put("Singapore", "Asia");
        put("South Korea", "Asia", {"Korea", "Republic of Korea"});
        put("Sri Lanka", "Asia");
        put("Syria", "Asia");
        put("Taiwan", "Asia");
        put("Tajikistan", "Asia");
        put("Thailand", "Asia");
        put("Timor-Leste", "Asia", {"East Timor"});
        put("Turkey", "Asia", {"Turkiye", "T\xC3\xBCrkiye"});
        put("Turkmenistan", "Asia");
        put("United Arab Emirates", "Asia", {"UAE"});
        put("Uzbekistan", "Asia");
        put("Vietnam", "Asia", {"Viet Nam"});
        put("Yemen", "Asia");

        // Europe
        put("Albania", "Europe");
        put("Andorra", "Europe");
        put("Austria", "Europe");
        put("Belarus", "Europe");
        put("Belgium", "Europe");
        put("Bosnia and Herzegovina", "Europe", {"Bosnia"});
        put("Bulgaria", "Europe");
        put("Croatia", "Europe");
        put("Cyprus", "Europe");
        put("Czechia", "Europe", {"Czech Republic"});
        put("Denmark", "Europe");
        put("Estonia", "Europe");
        put("Finland", "Europe");
        put("France", "Europe");
        put("Germany", "Europe");
        put("Greece", "Europe");
        put("Hungary", "Europe");
        put("Iceland", "Europe");
        put("Ireland", "Europe");
        put("Italy", "Europe");
        put("Kosovo", "Europe");
        put("Latvia", "Europe");
        put("Liechtenstein", "Europe");
        put("Lithuania", "Europe");
        put("Luxembourg", "Europe");
        put("Malta", "Europe");
        put("Moldova", "Europe");
        put("Monaco", "Europe");
        put("Montenegro", "Europe");
        put("Netherlands", "Europe", {"The Netherlands", "Holland"});
        put("North Macedonia", "Europe", {"Macedonia"});
        put("Norway", "Europe");
        put("Poland", "Europe");
        put("Portugal", "Europe");
        put("Romania", "Europe");
        put("Russia", "Europe", {"Russian Federation"});
        put("San Marino", "Europe");
        put("Serbia", "Europe");
        put("Slovakia", "Europe");
        put("Slovenia", "Europe");
        put("Spain", "Europe");
        put("Sweden", "Europe");
        put("Switzerland", "Europe");
        put("Ukraine", "Europe");
        put("United Kingdom", "Europe",
            {"UK", "Great Britain", "Britain", "England", "Scotland", "Wales",
             "Northern Ireland"});
        put("Vatican City", "Europe", {"Holy See", "Vatican"});

        // North America
        put("Antigua and Barbuda", "North America");
        put("Bahamas", "North America", {"The Bahamas"});
        put("Barbados", "North America");
        put("Belize", "North America");
        put("Canada", "North America");
        put("Costa Rica", "North America");
        put("Cuba", "North America");
        put("Dominica", "North America");
        put("Dominican Republic", "North America");
        put("El Salvador", "North America");
        put("Greenland", "North America");
        put("Grenada", "North America");
        put("Guatemala", "North America");
        put("Haiti", "North America");
        put("Honduras", "North America");
        put("Jamaica", "North America");
        put("Mexico", "North America");
        put("Nicaragua", "North America");
        put("Panama", "North America");
        put("Puerto Rico", "North America");
        put("Saint Kitts and Nevis", "North America");
        put("Saint Lucia", "North America");
        put("Saint Vincent and the Grenadines", "North America");
        put("Trinidad and Tobago", "North America");
        put("United States", "North America",
            {"USA", "US", "U.S.", "U.S.A.", "United States of America", "America",
             "The United States"});

        // South America
        put("Argentina", "South America");
        put("Bolivia", "South America");
        put("Brazil", "South America");
        put("Chile", "South America");
        put("Colombia", "South America");
        put("Ecuador", "South America");
        put("Guyana", "South America");
        put("Paraguay", "South America");
        put("Peru", "South America");
        put("Suriname", "South America");
        put("Uruguay", "South America");
        put("Venezuela", "South America");

        // Oceania
        put("Australia", "Oceania");
        put("Fiji", "Oceania");
        put("Kiribati", "Oceania");
        put("Marshall Islands", "Oceania");
        put("Micronesia", "Oceania");
        put("Nauru", "Oceania");
        put("New Zealand", "Oceania");
        put("Palau", "Oceania");
        put("Papua New Guinea", "Oceania");
        put("Samoa", "Oceania");
        put("Solomon Islands", "Oceania");
        put("Tonga", "Oceania");
        put("Tuvalu", "Oceania");
        put("Vanuatu", "Oceania");

        put("Antarctica", "Antarctica");

        return t;
    }();
    return table;
}

inline const CountryInfo* lookup_country(const std::string& name) {
    const auto& table = country_continent_table();
    auto it = table.find(to_lower(trim(name)));
    return it == table.end() ? nullptr : &it->second;
}

// Table first, prompt fallback second (the caller supplies the prompt hop).
inline std::string infer_continent(
    const std::string& country,
    const std::function<std::string(const std::string&)>& ask_backend = nullptr) {
    std::string c = trim(country);
    if (c.empty()) throw UnknownCountry("empty country name");
    if (const CountryInfo* info = lookup_country(c)) return info->continent;
    if (ask_backend) {
        std::string answer = detail::trim_answer(ask_backend(c));
        for (const char* name : kContinents)
            if (auto canon = canonical_continent(answer); canon && *canon == name) return name;
        // Continent may be buried in a sentence; look for any canonical name.
        std::string low = to_lower(answer);
        for (const char* name : kContinents)
            if (low.find(to_lower(name)) != std::string::npos) return name;
    }
    throw UnknownCountry("no continent for country: " + country);
}

// ---------------------------------------------------------------------------
// Location normalization
// ---------------------------------------------------------------------------

// Non-geocoder assists used when the geocoder yields nothing.
struct LocationAssist {
    // country → continent (wraps the continent prompt); may be null.
    std::function<std::string(const std::string&)> continent_of_country;
    // free text → "is this a valid city/country/continent" verdict; may be null.
    std::function<bool(const std::string&)> validate_location;
};

// Standardizes a raw location mention into slot form. Geocoder first;
// continent names, the country table, and the validity prompt act as
// fallbacks when the geocoder has no answer.
inline LocationValue normalize_location(
    const std::string& raw,
    const std::function<std::optional<GeocodePlace>(const std::string&)>& geocode,
    const LocationAssist& assist = {}) {
    std::string s = detail::trim_answer(raw);
    if (s.empty()) throw NormalizationFailed("empty location value");

    std::optional<GeocodePlace> place;
    if (geocode) place = geocode(s);

    if (place && !place->empty()) {
        LocationValue value;
        value.area = place->area;
        value.city = place->city;
        value.country = place->country;
        if (value.country) {
            if (const CountryInfo* info = lookup_country(*value.country)) {
                value.country = info->name;
                value.continent = info->continent;
            } else if (assist.continent_of_country) {
                try {
                    std::string cont = assist.continent_of_country(*value.country);
                    if (auto canon = canonical_continent(cont)) value.continent = *canon;
                } catch (const UnknownCountry&) {
                    // leave continent unset
                }
            }
        }
        return value;
    }

    // Geocoder had nothing: cheap local resolutions before giving up.
    if (auto canon = canonical_continent(s)) {
        LocationValue value;
        value.continent = *canon;
        return value;
    }
    if (const CountryInfo* info = lookup_country(s)) {
        LocationValue value;
        value.country = info->name;
        value.continent = info->continent;
        return value;
    }
    if (assist.validate_location && assist.validate_location(s)) {
        LocationValue value;
        value.city = s;
        return value;
    }
    throw NormalizationFailed("unresolvable location: " + raw);
}

}  // namespace geotime
