#pragma once

// The bundled demo fixture: three tasks whose backend exchanges are fully
// scripted so the whole pipeline runs offline and byte-deterministically.
//
//   fig1   — protest photo; OCR + landmark clues, location early-stops at the
//            hash threshold, time falls back to retrieval.
//   milano — archive photo; celebrity clue, both dimensions need retrieval,
//            plus two multichoice questions.
//   blank  — featureless photo; every extractor comes back empty, so both
//            predictions are none.
//
// The scripted answers cover every combination the engine can ask for across
// the configurations exercised by the tests: HT in {1, 5, 10}, RT in
// {0, 90, 100}, both retrieval modes, and the hierarchy/filter/retrieval
// ablations. Keep this header in sync with fixtures/fig1/ via fixture_gen.

#include "fixture_helpers.hpp"

namespace fixturekit {

// --- task constants ----------------------------------------------------------

inline const std::string kFig1Image = "images/fig1.jpg";
inline const std::string kFig1GoldTime = "2020-06-01";
inline const std::string kFig1GoldLocation = "Times Square, New York, NY 10036, United States";

inline const std::string kFig1Keywords = "protest, crowd, Times Square, signs";
inline const std::string kFig1Ocr = "Justice for George Floyd";
inline const std::string kFig1Landmark = "Times Square";
inline const std::string kFig1Date = "2020";

inline const std::string kFig1TimeQuery = "Justice for George Floyd Times Square protest date";
inline const std::string kFig1LocationQuery = "Times Square New York protest location";

inline const std::string kFig1Title0 = "George Floyd protests in New York City - Wikipedia";
inline const std::string kFig1Snippet0 =
    "Protests over the murder of George Floyd began in New York City on May 28, 2020 and "
    "continued into June.";
inline const std::string kFig1Thumb0 = "https://example.org/thumb0.jpg";
inline const std::string kFig1Title1 = "Times Square - Wikipedia";
inline const std::string kFig1Snippet1 =
    "Times Square is a major commercial intersection in Midtown Manhattan.";
inline const std::string kFig1Thumb1 = "https://example.org/thumb1.jpg";

inline const std::string kMilanoImage = "images/milano.jpg";
inline const std::string kMilanoGoldTime = "1950";
inline const std::string kMilanoGoldLocation = "Milan, Italy";

inline const std::string kMilanoKeywords = "cathedral, plaza, pigeons";
inline const std::string kMilanoCelebrity = "Sophia Loren";

inline const std::string kMilanoLocationQuery = "Milan cathedral plaza location";
inline const std::string kMilanoTimeQuery = "Sophia Loren Milan photo date";

inline const std::string kMilanoLocTitle = "Piazza del Duomo, Milan - Wikipedia";
inline const std::string kMilanoLocSnippet =
    "The Piazza del Duomo is the main piazza of Milan, Italy.";
inline const std::string kMilanoLocThumb = "https://example.org/thumb-duomo.jpg";
inline const std::string kMilanoTimeTitle = "Sophia Loren in Milan, 1950s";
inline const std::string kMilanoTimeSnippet = "Archive photo dated around 1950.";

inline const std::string kBlankImage = "images/blank.jpg";
inline const std::string kBlankGoldTime = "2000";
inline const std::string kBlankGoldLocation = "Paris, France";

// --- expected outcomes (default config: HT=5, RT=90, image_image) ------------

inline const std::string kFig1LocationKey = "|new york|united states|north america";
inline const std::string kFig1TimeValue = "2020..2021";
inline constexpr int kFig1LocationVotes = 5;
inline constexpr int kFig1TimeVotes = 4;
inline constexpr int kFig1LocationEvaluated = 7;  // early stop on the 7th combination
inline constexpr int kFig1CombinationsTotal = 11; // C(4,1)+C(4,2)+1

inline const std::string kMilanoLocationKey = "|milan|italy|europe";
inline const std::string kMilanoTimeValue = "1950";
inline constexpr int kMilanoLocationVotes = 3;  // 2 from the hierarchy + 1 retrieved
inline constexpr int kMilanoTimeVotes = 3;

// --- store builders -----------------------------------------------------------

inline void add_fig1(ReplayStore& s) {
    // Perception.
    vision_answer(s, kFig1Image, "keywords", kFig1Keywords);
    vision_answer(s, kFig1Image, "ocr_text", kFig1Ocr);
    vision_answer(s, kFig1Image, "check_celebrity", "No");
    vision_answer(s, kFig1Image, "if_has_landmark", "Yes");
    vision_answer(s, kFig1Image, "date_candidate", kFig1Date);

    // Landmark gazetteer probing over the keyword tokens.
    s.put_geocode("protest", std::nullopt);
    s.put_geocode("crowd", std::nullopt);
    s.put_geocode("signs", std::nullopt);
    s.put_geocode("Times Square", place("Times Square", "New York", "United States"));

    const std::string& c0 = kFig1Keywords;
    const std::string& c1 = kFig1Ocr;
    const std::string& c2 = kFig1Landmark;
    const std::string& c3 = kFig1Date;

    // Location deductions for every combination up to HT=10 (no early stop).
    location_deduction(s, {c0}, "New York");
    location_deduction(s, {c1}, "No");
    location_deduction(s, {c2}, "New York");
    location_deduction(s, {c3}, "No");
    location_deduction(s, {c0, c1}, "New York");
    location_deduction(s, {c0, c2}, "New York");
    location_deduction(s, {c0, c3}, "New York");
    location_deduction(s, {c1, c2}, "New York");
    location_deduction(s, {c1, c3}, "No");
    location_deduction(s, {c2, c3}, "New York");
    location_deduction(s, {c0, c1, c2, c3}, "New York");

    // Time deductions.
    time_deduction(s, {c0}, "No");
    time_deduction(s, {c1}, "2020-2021");
    time_deduction(s, {c2}, "No");
    time_deduction(s, {c3}, "2020");
    time_deduction(s, {c0, c1}, "2020-2021");
    time_deduction(s, {c0, c2}, "No");
    time_deduction(s, {c0, c3}, "2020");
    time_deduction(s, {c1, c2}, "2020-2021");
    time_deduction(s, {c1, c3}, "2020");
    time_deduction(s, {c2, c3}, "No");
    time_deduction(s, {c0, c1, c2, c3}, "2020-2021");

    // Location standardization.
    s.put_geocode("New York", place(std::nullopt, "New York", "United States"));
    s.put_geocode("New York City", place(std::nullopt, "New York", "United States"));

    // Confidence checks.
    location_filter_answer(s, kFig1Image, "New York", "Yes");
    date_filter_answer(s, kFig1Image, "2020..2021", "Yes");
    date_filter_answer(s, kFig1Image, "2020", "Yes");
    date_filter_answer(s, kFig1Image, "2020-05-28", "Yes");

    // Retrieval: queries and shared result list.
    const std::vector<std::string> evidence = {c0, c1, c2, c3};
    query_build(s, evidence, Dimension::kTime, kFig1TimeQuery);
    query_build(s, evidence, Dimension::kLocation, kFig1LocationQuery);
    const std::vector<SearchResult> results = {
        result(0, kFig1Title0, kFig1Snippet0, "https://example.org/nyc-protests", kFig1Thumb0),
        result(1, kFig1Title1, kFig1Snippet1, "https://example.org/times-square", kFig1Thumb1),
    };
    s.put_search(kFig1TimeQuery, 5, results);
    s.put_search(kFig1LocationQuery, 5, results);

    // Similarity geometry: image embedding is e0, so the cosine against it is
    // the first component of each candidate vector.
    s.put_embed(EmbedModality::kImage, kFig1Image, {1.0, 0.0, 0.0});
    s.put_embed(EmbedModality::kImage, kFig1Thumb0, {0.95, 0.3122498999199199, 0.0});  // 95
    s.put_embed(EmbedModality::kImage, kFig1Thumb1, {0.5, 0.8660254037844386, 0.0});   // 50
    s.put_embed(EmbedModality::kText, kFig1Title0 + "\n" + kFig1Snippet0,
                {0.92, 0.3919183588453085, 0.0});  // score 92
    s.put_embed(EmbedModality::kText, kFig1Title1 + "\n" + kFig1Snippet1,
                {0.91, 0.4146082561, 0.0});  // score 91

    // Snippet readings.
    time_deduction(s, {kFig1Snippet0}, "May 28, 2020");
    date_conversion(s, "May 28, 2020", "2020-05-28");
    time_deduction(s, {kFig1Snippet1}, "No");
    snippet_location_answer(s, kFig1Snippet0, "New York City");
    snippet_agreement_answer(s, kFig1Snippet0, "New York City", "Yes");

    // Gold-label standardization for scoring.
    s.put_geocode(kFig1GoldLocation, place("Times Square", "New York", "United States"));
}

inline void add_milano(ReplayStore& s) {
    // Perception: celebrity path on, landmark probe finds nothing.
    vision_answer(s, kMilanoImage, "keywords", kMilanoKeywords);
    vision_answer(s, kMilanoImage, "ocr_text", "none");
    vision_answer(s, kMilanoImage, "check_celebrity", "Yes");
    vision_answer(s, kMilanoImage, "get_celebrity_name", kMilanoCelebrity);
    vision_answer(s, kMilanoImage, "if_has_landmark", "Yes");
    vision_answer(s, kMilanoImage, "date_candidate", "n/a");
    s.put_geocode("cathedral", std::nullopt);
    s.put_geocode("plaza", std::nullopt);
    s.put_geocode("pigeons", std::nullopt);

    const std::string& c0 = kMilanoKeywords;
    const std::string& c1 = kMilanoCelebrity;

    location_deduction(s, {c0}, "Milan");
    location_deduction(s, {c1}, "Italy");
    location_deduction(s, {c0, c1}, "Milan, Italy");
    time_deduction(s, {c0}, "No");
    time_deduction(s, {c1}, "1950s");
    time_deduction(s, {c0, c1}, "1950");
    date_conversion(s, "1950s", "1950");

    s.put_geocode("Milan", place(std::nullopt, "Milan", "Italy"));
    s.put_geocode("Italy", place(std::nullopt, std::nullopt, "Italy"));
    s.put_geocode(kMilanoGoldLocation, place(std::nullopt, "Milan", "Italy"));

    location_filter_answer(s, kMilanoImage, "Milan", "Yes");
    location_filter_answer(s, kMilanoImage, "Italy", "Yes");
    date_filter_answer(s, kMilanoImage, "1950", "Yes");

    // Retrieval, both dimensions.
    const std::vector<std::string> evidence = {c0, c1};
    query_build(s, evidence, Dimension::kLocation, kMilanoLocationQuery);
    query_build(s, evidence, Dimension::kTime, kMilanoTimeQuery);
    s.put_search(kMilanoLocationQuery, 5,
                 {result(0, kMilanoLocTitle, kMilanoLocSnippet, "https://example.org/duomo",
                         kMilanoLocThumb)});
    // The time hit carries no thumbnail, exercising the image-mode text fallback.
    s.put_search(kMilanoTimeQuery, 5,
                 {result(0, kMilanoTimeTitle, kMilanoTimeSnippet, "https://example.org/loren")});

    // Image embedding is e1 here, so the cosine is the second component.
    s.put_embed(EmbedModality::kImage, kMilanoImage, {0.0, 1.0, 0.0});
    s.put_embed(EmbedModality::kImage, kMilanoLocThumb, {0.3675595189897821, 0.93, 0.0});  // 93
    s.put_embed(EmbedModality::kText, kMilanoLocTitle + "\n" + kMilanoLocSnippet,
                {0.3411744421846396, 0.94, 0.0});  // score 94
    s.put_embed(EmbedModality::kText, kMilanoTimeTitle + "\n" + kMilanoTimeSnippet,
                {0.2431049156228644, 0.97, 0.0});  // score 97

    snippet_location_answer(s, kMilanoLocSnippet, "Milan");
    snippet_agreement_answer(s, kMilanoLocSnippet, "Milan", "Yes");
    time_deduction(s, {kMilanoTimeSnippet}, "1950");

    // Multichoice selections.
    choice_answer(s, "italy", {"Italy", "France", "Spain"}, "Italy");
    choice_answer(s, "1950", {"1900-1949", "1950-1999", "2000-2021"}, "1950-1999");
}

inline void add_blank(ReplayStore& s) {
    vision_answer(s, kBlankImage, "keywords", "none");
    vision_answer(s, kBlankImage, "ocr_text", "no text");
    vision_answer(s, kBlankImage, "check_celebrity", "No");
    vision_answer(s, kBlankImage, "if_has_landmark", "No");
    vision_answer(s, kBlankImage, "date_candidate", "n/a");
    s.put_geocode(kBlankGoldLocation, place(std::nullopt, "Paris", "France"));
}

inline std::shared_ptr<ReplayStore> build_demo_store() {
    auto store = std::make_shared<ReplayStore>();
    add_fig1(*store);
    add_milano(*store);
    add_blank(*store);
    return store;
}

// --- dataset -------------------------------------------------------------------

inline std::string demo_dataset_jsonl() {
    nlohmann::json fig1 = {{"image_path", kFig1Image},
                           {"gold_time", kFig1GoldTime},
                           {"gold_location", kFig1GoldLocation}};
    nlohmann::json milano = {
        {"image_path", kMilanoImage},
        {"gold_time", kMilanoGoldTime},
        {"gold_location", kMilanoGoldLocation},
        {"choices",
         {{"country",
           {{"options", nlohmann::json::array({"Italy", "France", "Spain"})},
            {"gold", "Italy"}}},
          {"time_period",
           {{"options", nlohmann::json::array({"1900-1949", "1950-1999", "2000-2021"})},
            {"gold", "1950-1999"}}}}}};
    nlohmann::json blank = {{"image_path", kBlankImage},
                            {"gold_time", kBlankGoldTime},
                            {"gold_location", kBlankGoldLocation}};
    return fig1.dump() + "\n" + milano.dump() + "\n" + blank.dump() + "\n";
}

inline std::vector<ImageTask> demo_tasks() {
    std::vector<ImageTask> tasks;
    std::istringstream in(demo_dataset_jsonl());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        tasks.push_back(task_from_dataset_json(nlohmann::json::parse(line), line_no));
    }
    return tasks;
}

inline PipelineConfig demo_config() {
    PipelineConfig config;  // defaults: HT=5, RT=90, singles,pairs,all, image_image
    return config;
}

}  // namespace fixturekit
