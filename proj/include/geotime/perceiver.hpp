#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "geotime/backends.hpp"
#include "geotime/errors.hpp"
#include "geotime/prompts.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

struct PerceiverConfig {
    // Extraction order is fixed; this only switches members on or off.
    bool keywords = true;
    bool ocr_text = true;
    bool celebrity = true;
    bool landmark = true;
    bool initial_guess = false;  // a prior rather than evidence; off by default
    bool direct_date = true;
    // Vacuous generative answers treated as "no content".
    std::vector<std::string> stop_phrases = {"no text", "none", "n/a"};
    // When set, a run where every attempted extractor failed raises instead
    // of returning an empty output.
    bool fail_hard = false;
};

struct PerceiverOutput {
    std::vector<Clue> clues;                    // dense ids, fixed kind order
    std::map<ClueKind, std::string> raw_answers;  // kind → final raw answer
    std::vector<std::string> warnings;          // degraded extractors
};

// Runs the visual prompt catalog against the vision backend and converts raw
// answers into clues. Stateless; safe to share across workers.
class Perceiver {
public:
    Perceiver(std::shared_ptr<VisionBackend> vision, std::shared_ptr<GeocodeBackend> geocode,
              PerceiverConfig config = {},
              const PromptCatalog* catalog = &PromptCatalog::builtin(), int max_tokens = 64)
        : vision_(std::move(vision)),
          geocode_(std::move(geocode)),
          config_(std::move(config)),
          catalog_(catalog),
          max_tokens_(max_tokens) {}

    std::optional<Clue> extract_keywords(const std::string& image_ref) const {
        return text_clue(ClueKind::kKeywords, ask(image_ref, "keywords"));
    }

    std::optional<Clue> extract_ocr_text(const std::string& image_ref) const {
        return text_clue(ClueKind::kOcrText, ask(image_ref, "ocr_text"));
    }

    // Two-step: the name prompt is only issued when the fame check says yes.
    std::optional<Clue> detect_celebrity(const std::string& image_ref) const {
        std::string verdict = ask(image_ref, "check_celebrity");
        if (!parse_yes_no(verdict).value_or(false)) return std::nullopt;
        return text_clue(ClueKind::kCelebrity, ask(image_ref, "get_celebrity_name"));
    }

    // Yes-gated; the payload is the place-like part of the keywords answer,
    // i.e. the comma-separated tokens the geocoder resolves.
    std::optional<Clue> check_landmark(const std::string& image_ref,
                                       const std::string& keywords_text) const {
        std::string verdict = ask(image_ref, "if_has_landmark");
        if (!parse_yes_no(verdict).value_or(false)) return std::nullopt;
        std::string places = place_like_tokens(keywords_text);
        return text_clue(ClueKind::kLandmark, places);
    }

    std::optional<Clue> initial_guess(const std::string& image_ref) const {
        return text_clue(ClueKind::kInitialGuess, ask(image_ref, "initial_guess"));
    }

    std::optional<Clue> direct_date_guess(const std::string& image_ref) const {
        return text_clue(ClueKind::kDirectDate, ask(image_ref, "date_candidate"));
    }

    // Runs every enabled extractor in fixed kind order; a failing extractor
    // degrades to a warning instead of failing the task.
    PerceiverOutput perceive(const std::string& image_ref) const {
        PerceiverOutput out;
        int attempted = 0, failed = 0;
        std::string keywords_text;

        auto attempt = [&](ClueKind kind, auto&& fn) {
            ++attempted;
            try {
                fn();
            } catch (const BackendError& e) {
                ++failed;
                out.warnings.push_back(std::string(to_string(kind)) + ": " + e.what());
            }
        };

        if (config_.keywords)
            attempt(ClueKind::kKeywords, [&] {
                std::string raw = ask(image_ref, "keywords");
                out.raw_answers[ClueKind::kKeywords] = raw;
                if (auto clue = text_clue(ClueKind::kKeywords, raw)) {
                    keywords_text = clue->text;
                    out.clues.push_back(std::move(*clue));
                }
            });
        if (config_.ocr_text)
            attempt(ClueKind::kOcrText, [&] {
                std::string raw = ask(image_ref, "ocr_text");
                out.raw_answers[ClueKind::kOcrText] = raw;
                if (auto clue = text_clue(ClueKind::kOcrText, raw))
                    out.clues.push_back(std::move(*clue));
            });
        if (config_.celebrity)
            attempt(ClueKind::kCelebrity, [&] {
                std::string verdict = ask(image_ref, "check_celebrity");
                out.raw_answers[ClueKind::kCelebrity] = verdict;
                if (!parse_yes_no(verdict).value_or(false)) return;
                std::string name = ask(image_ref, "get_celebrity_name");
                out.raw_answers[ClueKind::kCelebrity] = name;
                if (auto clue = text_clue(ClueKind::kCelebrity, name))
                    out.clues.push_back(std::move(*clue));
            });
        if (config_.landmark)
            attempt(ClueKind::kLandmark, [&] {
                std::string verdict = ask(image_ref, "if_has_landmark");
                out.raw_answers[ClueKind::kLandmark] = verdict;
                if (!parse_yes_no(verdict).value_or(false)) return;
                if (auto clue = text_clue(ClueKind::kLandmark, place_like_tokens(keywords_text)))
                    out.clues.push_back(std::move(*clue));
            });
        if (config_.initial_guess)
            attempt(ClueKind::kInitialGuess, [&] {
                std::string raw = ask(image_ref, "initial_guess");
                out.raw_answers[ClueKind::kInitialGuess] = raw;
                if (auto clue = text_clue(ClueKind::kInitialGuess, raw))
                    out.clues.push_back(std::move(*clue));
            });
        if (config_.direct_date)
            attempt(ClueKind::kDirectDate, [&] {
                std::string raw = ask(image_ref, "date_candidate");
                out.raw_answers[ClueKind::kDirectDate] = raw;
                if (auto clue = text_clue(ClueKind::kDirectDate, raw))
                    out.clues.push_back(std::move(*clue));
            });

        for (size_t i = 0; i < out.clues.size(); ++i) out.clues[i].id = static_cast<int>(i);

        if (config_.fail_hard && attempted > 0 && failed == attempted) {
            std::string detail;
            for (const auto& w : out.warnings) detail += (detail.empty() ? "" : "; ") + w;
            throw TaskFailed("all extractors failed: " + detail);
        }
        return out;
    }

    const PerceiverConfig& config() const { return config_; }

private:
    std::string ask(const std::string& image_ref, const std::string& prompt_name) const {
        VisionRequest req{image_ref, catalog_->fill(prompt_name, {}), max_tokens_};
        return trim(vision_->vision_qa(req));
    }

    bool is_stop_phrase(const std::string& text) const {
        std::string folded = fold_bare_word(text);
        for (const auto& phrase : config_.stop_phrases)
            if (folded == fold_bare_word(phrase)) return true;
        return false;
    }

    std::optional<Clue> text_clue(ClueKind kind, const std::string& raw) const {
        std::string text = trim(raw);
        if (text.empty() || is_stop_phrase(text)) return std::nullopt;
        Clue clue;
        clue.id = -1;  // assigned densely after all extractors finish
        clue.kind = kind;
        clue.text = text;
        return clue;
    }

    // Comma-separated keyword tokens that the geocoder resolves.
    std::string place_like_tokens(const std::string& keywords_text) const {
        if (!geocode_ || trim(keywords_text).empty()) return {};
        std::string kept;
        std::set<std::string> seen;
        for (const auto& part : split(keywords_text, ',')) {
            std::string token = trim(part);
            if (token.empty() || !seen.insert(to_lower(token)).second) continue;
            std::optional<GeocodePlace> place;
            try {
                place = geocode_->geocode(GeocodeRequest{token});
            } catch (const GeocodeUnavailable&) {
                continue;  // treat an unavailable geocoder as a miss here
            }
            if (place && !place->empty()) {
                if (!kept.empty()) kept += ", ";
                kept += token;
            }
        }
        return kept;
    }

    std::shared_ptr<VisionBackend> vision_;
    std::shared_ptr<GeocodeBackend> geocode_;
    PerceiverConfig config_;
    const PromptCatalog* catalog_;
    int max_tokens_;
};

}  // namespace geotime
