#pragma once

#include <memory>
#include <optional>
#include <string>

#include "geotime/backends.hpp"
#include "geotime/errors.hpp"
#include "geotime/prompts.hpp"
#include "geotime/types.hpp"
#include "geotime/util.hpp"

namespace geotime {

struct FilterVerdict {
    Candidate candidate;
    std::string raw_answer;  // empty when no backend call happened
    bool accepted = false;
    bool bypass = false;  // true when filtering was skipped, not answered
    std::optional<std::string> warning;
};

struct NoiseFilterConfig {
    bool enabled = true;           // "w/o Filtering" ablation turns this off
    bool filter_retrieval = true;  // also vet retrieval-derived candidates
    bool fail_open = false;        // accept on backend failure instead of rejecting
};

// Asks the vision backend whether a candidate is plausible for the image
// before the candidate may vote.
class NoiseFilter {
public:
    NoiseFilter(std::shared_ptr<VisionBackend> vision, NoiseFilterConfig config = {},
                const PromptCatalog* catalog = &PromptCatalog::builtin(), int max_tokens = 64)
        : vision_(std::move(vision)),
          config_(config),
          catalog_(catalog),
          max_tokens_(max_tokens) {}

    // The location prompt gets the finest available component; the time
    // prompt gets the candidate at its own granularity.
    FilterVerdict verify_candidate(const std::string& image_ref, const Candidate& cand) const {
        FilterVerdict v;
        v.candidate = cand;
        std::string prompt =
            cand.dimension == Dimension::kLocation
                ? catalog_->fill("check_location_confidence", {{"loc", cand.display_form()}})
                : catalog_->fill("check_date_confidence", {{"date", cand.display_form()}});
        try {
            v.raw_answer = trim(vision_->vision_qa(VisionRequest{image_ref, prompt, max_tokens_}));
            v.accepted = parse_yes_no(v.raw_answer).value_or(false);
        } catch (const BackendError& e) {
            v.warning = std::string("filter backend failure: ") + e.what();
            if (config_.fail_open) {
                v.accepted = true;
                v.bypass = true;  // accepted without an actual verdict
            } else {
                v.accepted = false;  // fail closed
            }
        }
        return v;
    }

    // Honors the ablation switches; a bypassed verdict makes no backend call.
    FilterVerdict filter_or_bypass(const std::string& image_ref, const Candidate& cand,
                                   bool from_retrieval = false) const {
        if (!config_.enabled || (from_retrieval && !config_.filter_retrieval)) {
            FilterVerdict v;
            v.candidate = cand;
            v.accepted = true;
            v.bypass = true;
            return v;
        }
        return verify_candidate(image_ref, cand);
    }

    const NoiseFilterConfig& config() const { return config_; }

private:
    std::shared_ptr<VisionBackend> vision_;
    NoiseFilterConfig config_;
    const PromptCatalog* catalog_;
    int max_tokens_;
};

}  // namespace geotime
