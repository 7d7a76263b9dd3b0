#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geotime/backends.hpp"
#include "geotime/errors.hpp"
#include "geotime/normalize.hpp"
#include "geotime/prompts.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

// One reasoner exchange, kept whole for the trace.
struct ReasonerAnswer {
    std::string prompt_name;
    std::string filled_prompt;
    std::string raw_answer;
    // Payload for downstream normalization; absent when the answer is a
    // refusal ("No" modulo case and punctuation).
    std::optional<std::string> parsed;
};

// Chat-backed deduction utilities. Stateless besides its handles; safe to
// share across task workers.
class Reasoner {
public:
    Reasoner(std::shared_ptr<ChatBackend> chat, std::string model_id,
             const PromptCatalog* catalog = &PromptCatalog::builtin(), int max_tokens = 64)
        : chat_(std::move(chat)),
          model_id_(std::move(model_id)),
          catalog_(catalog),
          max_tokens_(max_tokens) {}

    // Fills a catalog template and runs it as a single user message at
    // temperature 0.
    ReasonerAnswer ask(const std::string& prompt_name,
                       const std::map<std::string, std::string>& subs) const {
        ReasonerAnswer out;
        out.prompt_name = prompt_name;
        out.filled_prompt = catalog_->fill(prompt_name, subs);
        ChatRequest req{model_id_, {{"user", out.filled_prompt}}, 0.0, max_tokens_};
        out.raw_answer = trim(chat_->chat_complete(req));
        if (!is_refusal(out.raw_answer) && !out.raw_answer.empty()) out.parsed = out.raw_answer;
        return out;
    }

    // Fuses an event description and auxiliary keywords into a short event
    // phrase (the answer length is a prompt target, not enforced).
    std::string conclude_event(const std::string& event, const std::string& keywords) const {
        if (trim(event).empty() && trim(keywords).empty())
            throw EmptyInput("conclude_event: both inputs empty");
        return ask("concrete_keywords", {{"event", event}, {"keywords", keywords}}).raw_answer;
    }

    // Clue texts go one per line: the first into the {event} slot, the rest
    // into {keywords}, keeping combination order deterministic.
    ReasonerAnswer deduce_location(const std::vector<std::string>& texts) const {
        if (texts.empty()) throw EmptyInput("deduce_location: no clue texts");
        return ask("get_location_candidate",
                   {{"event", texts.front()}, {"keywords", join_rest(texts)}});
    }

    ReasonerAnswer deduce_time(const std::vector<std::string>& texts) const {
        if (texts.empty()) throw EmptyInput("deduce_time: no clue texts");
        return ask("get_time_candidate", {{"time_clue", join_all(texts)}});
    }

    bool validate_location(const std::string& loc) const {
        if (trim(loc).empty()) throw EmptyInput("validate_location: empty input");
        auto verdict = parse_yes_no(ask("check_location_validity", {{"loc", loc}}).raw_answer);
        return verdict.value_or(false);
    }

    // Static table first; the continent prompt only covers the gaps.
    std::string infer_continent(const std::string& country) const {
        return geotime::infer_continent(country, [this](const std::string& c) {
            return ask("get_continent", {{"country", c}}).raw_answer;
        });
    }

    std::optional<TimeRange> celebrity_time_range(const std::string& name) const {
        if (trim(name).empty()) throw EmptyInput("celebrity_time_range: empty name");
        std::string answer = ask("get_time_range", {{"name", name}}).raw_answer;
        return parse_year_range(answer);
    }

    std::string clean_text(const std::string& contexts, const std::string& main_text) const {
        if (trim(main_text).empty()) throw EmptyInput("clean_text: empty main text");
        return ask("clean_text", {{"contexts", contexts}, {"main_text", main_text}}).raw_answer;
    }

    // Turns the evidence for one dimension into a single-line search query.
    std::string build_search_query(const std::vector<std::string>& evidence,
                                   Dimension dimension) const {
        if (evidence.empty()) throw EmptyInput("build_search_query: no evidence");
        std::string contexts = join_all(evidence);
        if (trim(contexts).empty()) throw EmptyInput("build_search_query: blank evidence");
        const char* hint = dimension == Dimension::kTime ? "date" : "location";
        std::string answer = clean_text(contexts, hint);
        return clamp_query(collapse_whitespace(answer));
    }

    // Location extraction from a retrieved snippet.
    ReasonerAnswer snippet_location(const std::string& snippet) const {
        if (trim(snippet).empty()) throw EmptyInput("snippet_location: empty snippet");
        return ask("snippet_location", {{"snippet", snippet}});
    }

    // Does the snippet agree with the location pulled out of it?
    bool snippet_agreement(const std::string& snippet, const std::string& location_result) const {
        auto verdict = parse_yes_no(
            ask("snippet_agreement",
                {{"snippet", snippet}, {"location_result", location_result}})
                .raw_answer);
        return verdict.value_or(false);
    }

    // Date normalization hop shared with normalize_time.
    std::string convert_date(const std::string& date_candidate) const {
        return ask("convert_date_format", {{"date_candidate", date_candidate}}).raw_answer;
    }

    // Maps a free-form final answer onto one of a fixed option list; returns
    // the matched option, none when the answer names nothing in the list.
    std::optional<std::string> select_choice(const std::string& candidate,
                                             const std::vector<std::string>& options) const {
        if (options.empty()) throw EmptyInput("select_choice: no options");
        std::string joined;
        for (size_t i = 0; i < options.size(); ++i) {
            if (i) joined += "; ";
            joined += options[i];
        }
        std::string answer =
            ask("choice_select", {{"candidate", candidate}, {"options", joined}}).raw_answer;
        std::string folded = fold_bare_word(answer);
        for (const auto& opt : options)
            if (fold_bare_word(opt) == folded) return opt;
        std::string low = to_lower(answer);
        for (const auto& opt : options)
            if (low.find(to_lower(opt)) != std::string::npos) return opt;
        return std::nullopt;
    }

    const PromptCatalog& catalog() const { return *catalog_; }
    const std::string& model_id() const { return model_id_; }
    int max_tokens() const { return max_tokens_; }

    // "start-end" year pair anywhere in the text; bare years and open ends
    // ("1990-") do not qualify.
    static std::optional<TimeRange> parse_year_range(const std::string& text) {
        for (size_t i = 0; i < text.size();) {
            if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
                ++i;
                continue;
            }
            size_t run = detail::digit_run(text, i);
            if (run == 4) {
                if (auto m = detail::match_time_at(text, i)) {
                    size_t dots = m->canonical.find("..");
                    if (dots != std::string::npos) {
                        TimeRange r;
                        r.start_year = std::stoi(m->canonical.substr(0, dots));
                        r.end_year = std::stoi(m->canonical.substr(dots + 2));
                        return r;
                    }
                    i = m->end;
                    continue;
                }
            }
            i += run;
        }
        return std::nullopt;
    }

private:
    static std::string join_all(const std::vector<std::string>& texts) {
        std::string out;
        for (size_t i = 0; i < texts.size(); ++i) {
            if (i) out += "\n";
            out += texts[i];
        }
        return out;
    }

    static std::string join_rest(const std::vector<std::string>& texts) {
        std::string out;
        for (size_t i = 1; i < texts.size(); ++i) {
            if (i > 1) out += "\n";
            out += texts[i];
        }
        return out;
    }

    static std::string clamp_query(std::string q) {
        constexpr size_t kMaxLen = 200;
        q = trim(q);
        if (q.size() <= kMaxLen) return q;
        size_t cut = q.rfind(' ', kMaxLen);
        if (cut == std::string::npos || cut == 0) cut = kMaxLen;
        return trim(q.substr(0, cut));
    }

    std::shared_ptr<ChatBackend> chat_;
    std::string model_id_;
    const PromptCatalog* catalog_;
    int max_tokens_;
};

}  // namespace geotime
