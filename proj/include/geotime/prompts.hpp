#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "geotime/errors.hpp"
#include "geotime/util.hpp"

namespace geotime {

struct PromptTemplate {
    std::string name;
    std::string text;

    std::vector<std::string> placeholders() const {
        std::vector<std::string> out;
        size_t pos = 0;
        while ((pos = text.find('{', pos)) != std::string::npos) {
            size_t end = text.find('}', pos);
            if (end == std::string::npos) break;
            std::string ph = text.substr(pos + 1, end - pos - 1);
            bool word = !ph.empty() &&
                        std::all_of(ph.begin(), ph.end(), [](unsigned char c) {
                            return std::isalnum(c) || c == '_';
                        });
            if (word) out.push_back(ph);
            pos = end + 1;
        }
        return out;
    }
};

// The fixed prompt catalog. Template text is used verbatim; placeholders
// are written {like_this} and must all be supplied when filling.
class PromptCatalog {
public:
    static const PromptCatalog& builtin();

    const PromptTemplate& get(const std::string& name) const {
        auto it = templates_.find(name);
        if (it == templates_.end()) throw ConfigError("unknown prompt template: " + name);
        return it->second;
    }

    bool has(const std::string& name) const { return templates_.count(name) != 0; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(templates_.size());
        for (const auto& [name, _] : templates_) out.push_back(name);
        return out;
    }

    // Substitutes every placeholder; throws on a placeholder without a value
    // or a value without a placeholder, so filled prompts never carry an
    // unresolved "{...}" from the template.
    std::string fill(const std::string& name,
                     const std::map<std::string, std::string>& subs) const {
        const PromptTemplate& tpl = get(name);
        std::set<std::string> needed;
        for (const auto& ph : tpl.placeholders()) needed.insert(ph);
        for (const auto& [key, _] : subs) {
            if (!needed.count(key))
                throw ConfigError("prompt '" + name + "' has no placeholder {" + key + "}");
        }
        std::string out;
        out.reserve(tpl.text.size());
        size_t pos = 0;
        while (pos < tpl.text.size()) {
            size_t open = tpl.text.find('{', pos);
            if (open == std::string::npos) {
                out.append(tpl.text, pos, std::string::npos);
                break;
            }
            size_t close = tpl.text.find('}', open);
            std::string ph = close == std::string::npos
                                 ? std::string()
                                 : tpl.text.substr(open + 1, close - open - 1);
            if (needed.count(ph)) {
                auto it = subs.find(ph);
                if (it == subs.end())
                    throw ConfigError("prompt '" + name + "' missing value for {" + ph + "}");
                out.append(tpl.text, pos, open - pos);
                out.append(it->second);
                pos = close + 1;
            } else {
                out.append(tpl.text, pos, open - pos + 1);
                pos = open + 1;
            }
        }
        return out;
    }

    // Replaces templates from <name>.txt files in a directory, byte-verbatim.
    void load_overrides(const std::filesystem::path& dir) {
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
            std::ifstream in(entry.path(), std::ios::binary);
            if (!in) throw ConfigError("cannot read prompt file: " + entry.path().string());
            std::string text((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
            std::string name = entry.path().stem().string();
            templates_[name] = PromptTemplate{name, text};
        }
    }

    void set(const std::string& name, const std::string& text) {
        templates_[name] = PromptTemplate{name, text};
    }

private:
    std::map<std::string, PromptTemplate> templates_;
};

namespace detail {

inline void add(PromptCatalog& c, const char* name, const char* text) { c.set(name, text); }

inline PromptCatalog make_builtin_catalog() {
    PromptCatalog c;

    // --- vision: perceiver ---------------------------------------------------

    add(c, "keywords",
        "USER: <image>\n"
        "What are the keywords of this image? Answer with the keywords only and separate with commas. \n"
        "Short Answer: ASSISTANT: ");

    add(c, "ocr_text",
        "USER: <image>\n"
        "What are the words shown in this image? \n"
        "Short Answer: ASSISTANT:");

    add(c, "check_celebrity",
        "USER: <image>\n"
        "Are you confident that this person is famous?\n"
        "Answer with yes or no: ASSISTANT: ");

    add(c, "get_celebrity_name",
        "USER: <image>\n"
        "What is the name of this celebrity that you are most confident with? ASSISTANT: ");

    add(c, "if_has_landmark",
        "USER: <image>\n"
        "Are you confident that this point to a specific location such as a city, country or a continent?\n"
        "Answer with yes or no. \n"
        "Short Answer: ASSISTANT: ");

    add(c, "date_candidate",
        "USER: <image>\n"
        "In what date was this image taken? \n"
        "Short Answer: ASSISTANT: ");

    add(c, "initial_guess",
        "USER: <image>\n"
        "What are the 3 most possible cities where this image was most likely taken in? Separate the answers with commas. \n"
        "Short Answer: ASSISTANT:");

    // --- vision: noise filter -----------------------------------------------

    add(c, "check_location_confidence",
        "USER: <image>\n"
        "Are you confident this image was taken in {loc}? \n"
        "Short Answer: ASSISTANT: ");

    add(c, "check_date_confidence",
        "USER: <image>\n"
        "Are you confident this image was taken on {date}? \n"
        "Short Answer: ASSISTANT: ");

    // --- chat: reasoner -------------------------------------------------------

    add(c, "concrete_keywords",
        "\"{event}\"\n"
        "\"{keywords}\"\n"
        "Above texts are describing an same event. Please conclude the event with no more than 5 words. Keep your answer informative, short and concise. \n"
        "Short Answer:");

    // Line two keeps the unmatched quote exactly as listed.
    add(c, "get_location_candidate",
        "\"{event}\"\n"
        "{keywords}\"\n"
        "Do any of the above text contains location information such as city, country or continent? If yes, please answer that city, country or continent. Otherwise, answer No. \n"
        "Short Answer:");

    add(c, "get_time_candidate",
        "\"{time_clue}\"\n"
        "Given above information, please ground a specific year or month or date from it and answer with it only. If you can not find a date, answer No. \n"
        "Short Answer:");

    add(c, "convert_date_format",
        "Convert the date {date_candidate} to yyyy-mm-dd. Answer the corresponding yyyy-mm-dd only. \n"
        "Short Answer:");

    add(c, "check_location_validity",
        "Honestly speaking, do you think \"{loc}\" is a valid city or country or continent? Answer with yes or no only. \n"
        "Short Answer:");

    add(c, "get_continent",
        "What is the continent that {country} is located in? Answer with the continent only and avoid any prompts. \n"
        "Short Answer:");

    add(c, "get_time_range",
        "What is the most possible time range with {name}?\n"
        "Format your answer as \"start-end\" and answer the range only. \n"
        "Short Answer:");

    add(c, "check_date_candidate",
        "\"{time_range}\"\n"
        "\"{date_result}\"\n"
        "Is the time range aligned with the later date? \n"
        "Answer Yes or No only. \n"
        "Short Answer:");

    add(c, "extract_event",
        "Can you conclude this text in at most 3 words and remove non-specific details:\n"
        "\"{event}\"");

    add(c, "clean_text",
        "\"{contexts}\"\n"
        "\"{main_text}\"\n"
        "Given above words and characters, please remove the unrecognizable words and organize the most informative words to a clean text. Please be concise and informative. \n"
        "Short Answer:");

    // --- chat: retrieval snippet handling -------------------------------------

    add(c, "snippet_location",
        "What is the most possible city associated with {snippet}? Answer the location only and avoid any prompts. \n"
        "Short Answer:");

    // The trailing apostrophe is part of the template.
    add(c, "snippet_agreement",
        "\"{snippet}\"\n"
        "\"{location_result}\"\n"
        "Given above text and location, are they pointing to the same location? \n"
        "Answer yes or no: '");

    // --- chat: multi-choice mapping (not part of the original catalog) --------

    add(c, "choice_select",
        "\"{candidate}\"\n"
        "Which one of the following options matches the above answer most closely: {options}? Answer with exactly one option from the list. \n"
        "Short Answer:");

    return c;
}

}  // namespace detail

inline const PromptCatalog& PromptCatalog::builtin() {
    static const PromptCatalog catalog = detail::make_builtin_catalog();
    return catalog;
}

}  // namespace geotime
