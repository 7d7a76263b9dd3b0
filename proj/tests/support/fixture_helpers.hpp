#pragma once

// Helpers for authoring replay fixtures. Each wrapper fills the same builtin
// template with the same substitutions the engine uses at runtime, so the
// stored request digests line up with the requests the engine will issue.

#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <geotime/geotime.hpp>

namespace fixturekit {

using namespace geotime;

inline const std::string kChatModel = kDefaultChatModel;

inline std::string fill(const std::string& name,
                        const std::map<std::string, std::string>& subs) {
    return PromptCatalog::builtin().fill(name, subs);
}

inline std::string join_lines(const std::vector<std::string>& texts, size_t from = 0) {
    std::string out;
    for (size_t i = from; i < texts.size(); ++i) {
        if (i > from) out += "\n";
        out += texts[i];
    }
    return out;
}

// --- vision ----------------------------------------------------------------

inline void vision_answer(ReplayStore& s, const std::string& image, const std::string& prompt_name,
                          const std::string& answer) {
    s.put_vision(image, fill(prompt_name, {}), answer);
}

inline void location_filter_answer(ReplayStore& s, const std::string& image,
                                   const std::string& loc, const std::string& answer) {
    s.put_vision(image, fill("check_location_confidence", {{"loc", loc}}), answer);
}

inline void date_filter_answer(ReplayStore& s, const std::string& image, const std::string& date,
                               const std::string& answer) {
    s.put_vision(image, fill("check_date_confidence", {{"date", date}}), answer);
}

// --- chat ------------------------------------------------------------------

inline void location_deduction(ReplayStore& s, const std::vector<std::string>& texts,
                               const std::string& answer) {
    s.put_chat(kChatModel,
               fill("get_location_candidate",
                    {{"event", texts.front()}, {"keywords", join_lines(texts, 1)}}),
               answer);
}

inline void time_deduction(ReplayStore& s, const std::vector<std::string>& texts,
                           const std::string& answer) {
    s.put_chat(kChatModel, fill("get_time_candidate", {{"time_clue", join_lines(texts)}}), answer);
}

inline void date_conversion(ReplayStore& s, const std::string& candidate,
                            const std::string& answer) {
    s.put_chat(kChatModel, fill("convert_date_format", {{"date_candidate", candidate}}), answer);
}

inline void query_build(ReplayStore& s, const std::vector<std::string>& evidence,
                        Dimension dimension, const std::string& answer) {
    const char* hint = dimension == Dimension::kTime ? "date" : "location";
    s.put_chat(kChatModel,
               fill("clean_text", {{"contexts", join_lines(evidence)}, {"main_text", hint}}),
               answer);
}

inline void snippet_location_answer(ReplayStore& s, const std::string& snippet,
                                    const std::string& answer) {
    s.put_chat(kChatModel, fill("snippet_location", {{"snippet", snippet}}), answer);
}

inline void snippet_agreement_answer(ReplayStore& s, const std::string& snippet,
                                     const std::string& location_result,
                                     const std::string& answer) {
    s.put_chat(kChatModel,
               fill("snippet_agreement",
                    {{"snippet", snippet}, {"location_result", location_result}}),
               answer);
}

inline void continent_answer(ReplayStore& s, const std::string& country,
                             const std::string& answer) {
    s.put_chat(kChatModel, fill("get_continent", {{"country", country}}), answer);
}

inline void validity_answer(ReplayStore& s, const std::string& loc, const std::string& answer) {
    s.put_chat(kChatModel, fill("check_location_validity", {{"loc", loc}}), answer);
}

inline void choice_answer(ReplayStore& s, const std::string& candidate,
                          const std::vector<std::string>& options, const std::string& answer) {
    std::string joined;
    for (size_t i = 0; i < options.size(); ++i) {
        if (i) joined += "; ";
        joined += options[i];
    }
    s.put_chat(kChatModel, fill("choice_select", {{"candidate", candidate}, {"options", joined}}),
               answer);
}

// --- structured backends ----------------------------------------------------

inline GeocodePlace place(const std::optional<std::string>& area,
                          const std::optional<std::string>& city,
                          const std::optional<std::string>& country) {
    GeocodePlace p;
    p.area = area;
    p.city = city;
    p.country = country;
    return p;
}

inline SearchResult result(int rank, const std::string& title, const std::string& snippet,
                           const std::string& url,
                           const std::optional<std::string>& thumbnail = std::nullopt) {
    SearchResult r;
    r.rank = rank;
    r.title = title;
    r.snippet = snippet;
    r.url = url;
    r.thumbnail_ref = thumbnail;
    return r;
}

}  // namespace fixturekit
