#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "geotime/backends.hpp"
#include "geotime/combiner.hpp"
#include "geotime/errors.hpp"
#include "geotime/noise_filter.hpp"
#include "geotime/reasoner.hpp"
#include "geotime/types.hpp"

namespace geotime {

enum class RetrievalMode { kImageImage, kImageText };

inline const char* to_string(RetrievalMode m) {
    return m == RetrievalMode::kImageImage ? "image_image" : "image_text";
}

inline RetrievalMode retrieval_mode_from_string(const std::string& s) {
    std::string t = to_lower(trim(s));
    if (t == "image_image" || t == "i-i" || t == "ii") return RetrievalMode::kImageImage;
    if (t == "image_text" || t == "i-t" || t == "it") return RetrievalMode::kImageText;
    throw ConfigError("unknown retrieval mode: " + s);
}

// The extraction chain for one kept search result.
struct SnippetRecord {
    int result_index = 0;
    std::string extract_answer;
    bool refusal = false;
    std::optional<bool> agreement;             // location chain only
    std::optional<std::string> candidate_key;  // normalized (pre-coarsening)
    std::optional<std::string> vote_key;
    std::optional<FilterVerdict> verdict;
    std::optional<std::string> error;
    bool voted = false;
    bool early_stop = false;
};

struct RetrievalRecord {
    Dimension dimension = Dimension::kTime;
    std::string query;
    RetrievalMode mode = RetrievalMode::kImageImage;
    std::vector<SearchResult> results;
    std::vector<double> scores;  // parallel to results, in [0,100]
    std::vector<int> kept;       // indices with score strictly above RT
    std::vector<SnippetRecord> snippets;
    std::optional<std::string> error;
    bool triggered = false;  // search actually attempted
};

struct RetrieverConfig {
    double retrieval_threshold = 90.0;  // strict ">" comparison
    RetrievalMode mode = RetrievalMode::kImageImage;
    int top_k = 5;
    bool no_retrieval = false;  // "w/o Retrieval" ablation
};

// Searches, scores results against the image, and keeps strict RT exceeders.
inline RetrievalRecord retrieve_and_filter(const std::string& image_ref, const std::string& query,
                                           double rt, RetrievalMode mode, int top_k,
                                           SearchBackend& search, EmbeddingBackend& embedding) {
    if (trim(query).empty()) throw EmptyQuery("empty retrieval query");
    if (rt < 0 || rt > 100) throw ConfigError("retrieval threshold out of [0,100]");

    RetrievalRecord record;
    record.query = query;
    record.mode = mode;
    record.triggered = true;

    try {
        record.results = search.web_search(SearchRequest{query, top_k});
    } catch (const BackendError& e) {
        record.error = std::string("search failed: ") + e.what();
        return record;
    }
    if (record.results.empty()) return record;

    std::optional<EmbeddingVector> image_vec;
    try {
        image_vec = embedding.embed(EmbedRequest{EmbedModality::kImage, image_ref});
    } catch (const BackendError& e) {
        record.error = std::string("image embedding failed: ") + e.what();
    }

    record.scores.resize(record.results.size(), 0.0);
    for (size_t i = 0; i < record.results.size(); ++i) {
        if (!image_vec) break;  // every result scores 0
        const SearchResult& r = record.results[i];
        try {
            EmbeddingVector other;
            if (mode == RetrievalMode::kImageImage && r.thumbnail_ref) {
                other = embedding.embed(EmbedRequest{EmbedModality::kImage, *r.thumbnail_ref});
            } else {
                // image_text mode, or thumbnail-less result falling back to text
                other = embedding.embed(
                    EmbedRequest{EmbedModality::kText, r.title + "\n" + r.snippet});
            }
            record.scores[i] = similarity_score(*image_vec, other);
        } catch (const Error&) {
            record.scores[i] = 0.0;  // per-result failure scores 0
        }
    }
    for (size_t i = 0; i < record.scores.size(); ++i)
        if (record.scores[i] > rt) record.kept.push_back(static_cast<int>(i));
    return record;
}

// Runs the dimension-appropriate extraction prompt over each kept snippet;
// location extractions must also pass the snippet-agreement check.
inline std::vector<Candidate> candidates_from_snippets(RetrievalRecord& record,
                                                       Dimension dimension,
                                                       const Reasoner& reasoner,
                                                       const CandidateFactory& factory) {
    std::vector<Candidate> out;
    for (int index : record.kept) {
        const SearchResult& r = record.results.at(static_cast<size_t>(index));
        std::string snippet = trim(r.snippet).empty() ? r.title : r.snippet;
        SnippetRecord rec;
        rec.result_index = index;
        try {
            std::optional<std::string> payload;
            if (dimension == Dimension::kTime) {
                ReasonerAnswer answer = reasoner.deduce_time({snippet});
                rec.extract_answer = answer.raw_answer;
                payload = answer.parsed;
            } else {
                ReasonerAnswer answer = reasoner.snippet_location(snippet);
                rec.extract_answer = answer.raw_answer;
                payload = answer.parsed;
                if (payload) {
                    bool agree = reasoner.snippet_agreement(snippet, *payload);
                    rec.agreement = agree;
                    if (!agree) payload.reset();
                }
            }
            if (!payload) {
                // Either the extraction refused outright, or the agreement
                // check vetoed it (agreement present and false).
                rec.refusal = !rec.agreement.has_value();
                record.snippets.push_back(std::move(rec));
                continue;
            }
            Candidate cand = factory.make(dimension, *payload, RetrievalProvenance{index});
            rec.candidate_key = cand.normalized;
            record.snippets.push_back(std::move(rec));
            out.push_back(std::move(cand));
        } catch (const NormalizationFailed& e) {
            rec.error = e.what();
            record.snippets.push_back(std::move(rec));
        } catch (const BackendError& e) {
            rec.error = e.what();
            record.snippets.push_back(std::move(rec));
        }
    }
    return out;
}

// Fallback pass for one dimension: fires only when the hierarchy left the
// board short of HT, unless retrieval is ablated away. Accepted candidates
// vote exactly like hierarchy candidates, early stop included.
inline std::optional<RetrievalRecord> maybe_retrieve(
    const std::string& image_ref, const std::vector<Clue>& clues, Dimension dimension,
    VoteBoard& board, const RetrieverConfig& config, const Reasoner& reasoner,
    const NoiseFilter& filter, const CandidateFactory& factory, SearchBackend* search,
    EmbeddingBackend* embedding, bool coarsen_time_to_year = false) {
    if (config.no_retrieval || board.threshold_reached()) return std::nullopt;

    RetrievalRecord record;
    record.dimension = dimension;
    record.mode = config.mode;

    if (!search || !embedding) {
        record.error = "retrieval backends not configured";
        return record;
    }

    std::vector<std::string> evidence;
    evidence.reserve(clues.size());
    for (const auto& clue : clues) evidence.push_back(clue.text);
    std::string query;
    try {
        query = reasoner.build_search_query(evidence, dimension);
    } catch (const EmptyInput& e) {
        record.error = e.what();
        return record;
    } catch (const BackendError& e) {
        record.error = e.what();
        return record;
    }

    record = retrieve_and_filter(image_ref, query, config.retrieval_threshold, config.mode,
                                 config.top_k, *search, *embedding);
    record.dimension = dimension;

    auto candidates = candidates_from_snippets(record, dimension, reasoner, factory);
    for (auto& cand : candidates) {
        // Find this candidate's snippet record to annotate the vote.
        SnippetRecord* srec = nullptr;
        const auto* prov = std::get_if<RetrievalProvenance>(&cand.provenance);
        for (auto& s : record.snippets)
            if (prov && s.result_index == prov->result_index && s.candidate_key == cand.normalized)
                srec = &s;
        FilterVerdict verdict = filter.filter_or_bypass(image_ref, cand, /*from_retrieval=*/true);
        if (srec) srec->verdict = verdict;
        if (!verdict.accepted) continue;
        Candidate voted = cand;
        if (dimension == Dimension::kTime && coarsen_time_to_year)
            voted.normalized = coarsen_time_key(voted.normalized);
        if (srec) {
            srec->vote_key = voted.normalized;
            srec->voted = true;
        }
        bool stop = board.record_vote(voted);
        if (stop) {
            if (srec) srec->early_stop = true;
            break;
        }
    }
    return record;
}

}  // namespace geotime
