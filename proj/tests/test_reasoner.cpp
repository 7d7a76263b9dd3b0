#include <catch2/catch_amalgamated.hpp>

#include <memory>

#include <geotime/reasoner.hpp>
#include <geotime/replay.hpp>

#include "support/fixture_helpers.hpp"

using namespace geotime;

namespace {

struct Rig {
    std::shared_ptr<ReplayStore> store = std::make_shared<ReplayStore>();
    std::shared_ptr<CallLog> log = std::make_shared<CallLog>();
    Backends backends;

    Rig() { backends = make_replay_backends(store, log); }

    Reasoner reasoner() const { return Reasoner(backends.chat, fixturekit::kChatModel); }

    void script(const std::string& prompt_name,
                const std::map<std::string, std::string>& subs, const std::string& answer) {
        store->put_chat(fixturekit::kChatModel, fixturekit::fill(prompt_name, subs), answer);
    }
};

}  // namespace

TEST_CASE("ask fills the template, runs at temperature zero, and parses refusals") {
    Rig rig;
    rig.script("check_location_validity", {{"loc", "Milan"}}, "Yes, it is.");
    ReasonerAnswer a = rig.reasoner().ask("check_location_validity", {{"loc", "Milan"}});
    CHECK(a.prompt_name == "check_location_validity");
    CHECK(a.filled_prompt.find("\"Milan\"") != std::string::npos);
    CHECK(a.raw_answer == "Yes, it is.");
    REQUIRE(a.parsed.has_value());
    CHECK(*a.parsed == "Yes, it is.");

    // The canonical request pins temperature 0 and the model id.
    auto entries = rig.log->entries();
    REQUIRE(entries.size() == 1);
    CHECK(entries[0]["temperature"] == 0.0);
    CHECK(entries[0]["model"] == fixturekit::kChatModel);
    CHECK(entries[0]["max_tokens"] == 64);

    // "No" modulo case and punctuation is a refusal: no parsed payload.
    rig.script("check_location_validity", {{"loc", "Atlantis"}}, " No. ");
    ReasonerAnswer refusal = rig.reasoner().ask("check_location_validity", {{"loc", "Atlantis"}});
    CHECK(refusal.raw_answer == "No.");
    CHECK_FALSE(refusal.parsed.has_value());

    // "No" as a prefix of a real answer is not a refusal.
    rig.script("check_location_validity", {{"loc", "Normandy"}}, "Normandy is a region");
    CHECK(rig.reasoner().ask("check_location_validity", {{"loc", "Normandy"}}).parsed.has_value());
}

TEST_CASE("location deduction splits clue texts into event and keyword slots") {
    Rig rig;
    fixturekit::location_deduction(*rig.store, {"protest", "Times Square", "signs"}, "New York");
    ReasonerAnswer a =
        rig.reasoner().deduce_location({"protest", "Times Square", "signs"});
    REQUIRE(a.parsed.has_value());
    CHECK(*a.parsed == "New York");
    // First text lands in the quoted {event} line, the rest joined by newline.
    CHECK(a.filled_prompt.find("\"protest\"\n") != std::string::npos);
    CHECK(a.filled_prompt.find("Times Square\nsigns\"") != std::string::npos);

    // A single clue leaves the keyword slot empty rather than repeating.
    fixturekit::location_deduction(*rig.store, {"Eiffel Tower"}, "Paris");
    ReasonerAnswer solo = rig.reasoner().deduce_location({"Eiffel Tower"});
    REQUIRE(solo.parsed.has_value());
    CHECK(*solo.parsed == "Paris");

    CHECK_THROWS_AS(rig.reasoner().deduce_location({}), EmptyInput);
}

TEST_CASE("time deduction joins all clue texts into the single clue slot") {
    Rig rig;
    fixturekit::time_deduction(*rig.store, {"Justice for George Floyd", "2020"}, "2020");
    ReasonerAnswer a = rig.reasoner().deduce_time({"Justice for George Floyd", "2020"});
    REQUIRE(a.parsed.has_value());
    CHECK(*a.parsed == "2020");
    CHECK(a.filled_prompt.find("\"Justice for George Floyd\n2020\"") != std::string::npos);

    fixturekit::time_deduction(*rig.store, {"a plain crowd"}, "No");
    CHECK_FALSE(rig.reasoner().deduce_time({"a plain crowd"}).parsed.has_value());
    CHECK_THROWS_AS(rig.reasoner().deduce_time({}), EmptyInput);
}

TEST_CASE("validity, agreement, and continent helpers parse yes/no strictly") {
    Rig rig;
    fixturekit::validity_answer(*rig.store, "Milan", "yes");
    fixturekit::validity_answer(*rig.store, "Narnia", "Definitely not");
    Reasoner r = rig.reasoner();
    CHECK(r.validate_location("Milan"));
    CHECK_FALSE(r.validate_location("Narnia"));  // non-yes prefix → false
    CHECK_THROWS_AS(r.validate_location("  "), EmptyInput);

    fixturekit::snippet_agreement_answer(*rig.store, "May 28 protests in NYC", "New York",
                                         "Yes");
    fixturekit::snippet_agreement_answer(*rig.store, "Lisbon tram photo", "New York", "no way");
    CHECK(r.snippet_agreement("May 28 protests in NYC", "New York"));
    CHECK_FALSE(r.snippet_agreement("Lisbon tram photo", "New York"));

    // Table countries never reach the chat backend.
    auto continent_prompts = [&] {
        return rig.log->count_if([](const json& e) {
            return e.value("kind", "") == "chat" &&
                   e["messages"][0][1].get<std::string>().rfind("What is the continent that",
                                                                0) == 0;
        });
    };
    CHECK(r.infer_continent("Italy") == "Europe");
    CHECK(continent_prompts() == 0);
    // Gaps fall back to the prompt.
    fixturekit::continent_answer(*rig.store, "Wakanda", "Africa");
    CHECK(r.infer_continent("Wakanda") == "Africa");
    CHECK(continent_prompts() == 1);
}

TEST_CASE("snippet location extraction goes through its template") {
    Rig rig;
    fixturekit::snippet_location_answer(*rig.store, "Protests filled Times Square on May 28",
                                        "New York City");
    ReasonerAnswer a =
        rig.reasoner().snippet_location("Protests filled Times Square on May 28");
    REQUIRE(a.parsed.has_value());
    CHECK(*a.parsed == "New York City");
    CHECK_THROWS_AS(rig.reasoner().snippet_location(""), EmptyInput);
}

TEST_CASE("date conversion and event conclusion pass raw answers through") {
    Rig rig;
    fixturekit::date_conversion(*rig.store, "May 28, 2020", "2020-05-28");
    CHECK(rig.reasoner().convert_date("May 28, 2020") == "2020-05-28");

    rig.script("concrete_keywords", {{"event", "march"}, {"keywords", "crowd, signs"}},
               "protest march");
    CHECK(rig.reasoner().conclude_event("march", "crowd, signs") == "protest march");
    CHECK_THROWS_AS(rig.reasoner().conclude_event(" ", ""), EmptyInput);
}

TEST_CASE("celebrity time ranges parse start-end year pairs") {
    Rig rig;
    rig.script("get_time_range", {{"name", "Sophia Loren"}},
               "Her peak activity was 1950-1965 or so.");
    Reasoner r = rig.reasoner();
    auto range = r.celebrity_time_range("Sophia Loren");
    REQUIRE(range.has_value());
    CHECK(range->start_year == 1950);
    CHECK(range->end_year == 1965);

    rig.script("get_time_range", {{"name", "Unknown Person"}}, "Probably around 1990.");
    CHECK_FALSE(r.celebrity_time_range("Unknown Person").has_value());
    CHECK_THROWS_AS(r.celebrity_time_range(""), EmptyInput);

    // The static parser on its own.
    auto parsed = Reasoner::parse_year_range("active 1914 to 1918 in Europe");
    REQUIRE(parsed.has_value());
    CHECK(parsed->start_year == 1914);
    CHECK(parsed->end_year == 1918);
    CHECK_FALSE(Reasoner::parse_year_range("born 1950").has_value());
    CHECK_FALSE(Reasoner::parse_year_range("1990-").has_value());
    CHECK_FALSE(Reasoner::parse_year_range("no digits at all").has_value());
}

TEST_CASE("search query building cleans evidence and clamps length") {
    Rig rig;
    fixturekit::query_build(*rig.store, {"Justice for George Floyd", "Times Square"},
                            Dimension::kTime, "  George Floyd   Times Square protest date ");
    std::string q = rig.reasoner().build_search_query(
        {"Justice for George Floyd", "Times Square"}, Dimension::kTime);
    // Whitespace collapsed, ends trimmed.
    CHECK(q == "George Floyd Times Square protest date");

    // The location variant only changes the hint word.
    fixturekit::query_build(*rig.store, {"Duomo", "plaza"}, Dimension::kLocation,
                            "Milan cathedral plaza location");
    CHECK(rig.reasoner().build_search_query({"Duomo", "plaza"}, Dimension::kLocation) ==
          "Milan cathedral plaza location");

    // Overlong answers are clamped at a word boundary under 200 chars.
    std::string longword(60, 'x');
    std::string long_answer = longword + " " + longword + " " + longword + " " + longword;
    fixturekit::query_build(*rig.store, {"many words"}, Dimension::kTime, long_answer);
    std::string clamped =
        rig.reasoner().build_search_query({"many words"}, Dimension::kTime);
    CHECK(clamped.size() <= 200);
    CHECK(clamped == longword + " " + longword + " " + longword);

    CHECK_THROWS_AS(rig.reasoner().build_search_query({}, Dimension::kTime), EmptyInput);
    CHECK_THROWS_AS(rig.reasoner().build_search_query({"  "}, Dimension::kTime), EmptyInput);
}

TEST_CASE("choice selection matches the answer back onto the option list") {
    Rig rig;
    Reasoner r = rig.reasoner();
    std::vector<std::string> options = {"1900-1949", "1950-1999", "2000-2021"};

    // Exact option echo (with punctuation noise) matches by folded equality.
    fixturekit::choice_answer(*rig.store, "1950", options, " '1950-1999'. ");
    auto hit = r.select_choice("1950", options);
    REQUIRE(hit.has_value());
    CHECK(*hit == "1950-1999");

    // An answer containing the option matches by substring.
    fixturekit::choice_answer(*rig.store, "circa 1950", options,
                              "The best match is 1950-1999 given the candidate.");
    auto sub = r.select_choice("circa 1950", options);
    REQUIRE(sub.has_value());
    CHECK(*sub == "1950-1999");

    // Nothing in the list → nullopt, never a guess.
    fixturekit::choice_answer(*rig.store, "unknown", options, "I cannot tell.");
    CHECK_FALSE(r.select_choice("unknown", options).has_value());

    CHECK_THROWS_AS(r.select_choice("x", {}), EmptyInput);

    // The prompt lists the options joined by semicolons.
    auto entries = rig.log->entries();
    REQUIRE_FALSE(entries.empty());
    CHECK(entries[0]["messages"][0][1].get<std::string>().find(
              "1900-1949; 1950-1999; 2000-2021") != std::string::npos);
}
