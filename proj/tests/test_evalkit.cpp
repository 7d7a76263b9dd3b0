#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <random>

#include <geotime/evalkit.hpp>

using namespace geotime;

namespace {

constexpr const char* kSlots[4] = {"continent", "country", "city", "area"};
// Mixed case on purpose: slot matching must fold case.
constexpr const char* kGoldValues[3] = {"Alpha", "beta", "GAMMA"};
constexpr const char* kPredValues[3] = {"ALPHA", "Beta", "gamma"};

// Decodes a base-4 code into a component set: digit 0 = slot absent,
// digit k = k-th alphabet value.
ComponentSet decode(int code, const char* const values[3]) {
    ComponentSet set;
    set.dimension = Dimension::kLocation;
    for (int slot = 0; slot < 4; ++slot) {
        int digit = (code >> (2 * slot)) & 3;
        if (digit > 0) set.components.push_back({kSlots[slot], values[digit - 1]});
    }
    return set;
}

std::string fold(const std::string& s) { return to_lower(trim(s)); }

// Brute-force oracle: component sets as plain collections of
// (slot, folded value) pairs, intersected by pairwise equality.
size_t oracle_intersection(const ComponentSet& a, const ComponentSet& b) {
    size_t n = 0;
    for (const auto& ca : a.components)
        for (const auto& cb : b.components)
            if (ca.slot == cb.slot && fold(ca.value) == fold(cb.value)) ++n;
    return n;
}

double oracle_f1(const ComponentSet& gt, const ComponentSet& pred) {
    size_t denom = gt.size() + pred.size();
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(oracle_intersection(gt, pred)) /
           static_cast<double>(denom);
}

double oracle_f1_beta(const ComponentSet& gt, const ComponentSet& pred) {
    double ratio = static_cast<double>(pred.size()) / static_cast<double>(gt.size());
    return std::exp(-std::max(ratio - 1.0, 0.0)) * oracle_f1(gt, pred);
}

ComponentSet time_set(std::initializer_list<Component> comps) {
    ComponentSet set;
    set.dimension = Dimension::kTime;
    set.components = comps;
    return set;
}

}  // namespace

TEST_CASE("example F1 matches the brute-force oracle over the full slot grid") {
    auto start = std::chrono::steady_clock::now();
    size_t cases = 0;
    for (int g = 0; g < 256; ++g) {
        ComponentSet gt = decode(g, kGoldValues);
        for (int p = 0; p < 256; ++p) {
            ComponentSet pred = decode(p, kPredValues);
            ++cases;
            REQUIRE(component_intersection(gt, pred) == oracle_intersection(gt, pred));
            REQUIRE_THAT(example_f1(gt, pred),
                         Catch::Matchers::WithinAbs(oracle_f1(gt, pred), 1e-12));
            if (gt.size() == 0) {
                REQUIRE_THROWS_AS(example_f1_beta(gt, pred), BadGoldLabel);
            } else {
                REQUIRE_THAT(example_f1_beta(gt, pred),
                             Catch::Matchers::WithinAbs(oracle_f1_beta(gt, pred), 1e-12));
            }
        }
    }
    auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(cases == 65536);
    CHECK(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count() < 5);
}

TEST_CASE("worked formula checks for granularity mismatches") {
    ComponentSet ymd = to_component_set("2020-06-01", Dimension::kTime);
    ComponentSet y = to_component_set("2020", Dimension::kTime);
    REQUIRE(ymd.size() == 3);
    REQUIRE(y.size() == 1);

    // Coarse prediction: right year, nothing else.
    CHECK(example_f1(ymd, y) == 0.5);
    CHECK(example_f1_beta(ymd, y) == 0.5);  // |Pred| < |GT|: no penalty

    // Over-specified prediction: penalized by e^{-(3/1 - 1)}.
    CHECK(example_f1(y, ymd) == 0.5);
    CHECK_THAT(example_f1_beta(y, ymd),
               Catch::Matchers::WithinAbs(0.5 * std::exp(-2.0), 1e-12));
}

TEST_CASE("equal-size prediction sets are never brevity-penalized") {
    std::mt19937 rng(20210607);
    std::uniform_int_distribution<int> slot_count(1, 4);
    std::uniform_int_distribution<int> value_pick(0, 2);
    for (int iter = 0; iter < 500; ++iter) {
        int n = slot_count(rng);
        ComponentSet gt, pred;
        gt.dimension = pred.dimension = Dimension::kLocation;
        for (int i = 0; i < n; ++i) {
            gt.components.push_back({kSlots[i], kGoldValues[value_pick(rng)]});
            pred.components.push_back({kSlots[i], kPredValues[value_pick(rng)]});
        }
        REQUIRE(example_f1_beta(gt, pred) == example_f1(gt, pred));
    }
}

TEST_CASE("time components intersect hierarchically") {
    ComponentSet gold = to_component_set("2020-06-01", Dimension::kTime);

    // Wrong year blocks everything below it.
    CHECK(component_intersection(gold, to_component_set("2019-06-01", Dimension::kTime)) == 0);
    // Wrong month blocks the day even when the day digits agree.
    CHECK(component_intersection(gold, to_component_set("2020-07-01", Dimension::kTime)) == 1);
    CHECK(component_intersection(gold, to_component_set("2020-06-15", Dimension::kTime)) == 2);
    CHECK(component_intersection(gold, to_component_set("2020-06-01", Dimension::kTime)) == 3);
    // A day with no month never matches.
    CHECK(component_intersection(gold, time_set({{"year", "2020"}, {"day", "01"}})) == 1);
}

TEST_CASE("year ranges match by containment in the intersection") {
    ComponentSet year = to_component_set("2020", Dimension::kTime);
    ComponentSet range = to_component_set("2020..2021", Dimension::kTime);
    ComponentSet other_range = to_component_set("2019..2021", Dimension::kTime);
    REQUIRE(range.size() == 1);  // a range occupies the year slot

    CHECK(component_intersection(year, range) == 1);   // 2020 ∈ [2020, 2021]
    CHECK(component_intersection(range, year) == 1);   // symmetric
    CHECK(component_intersection(year, to_component_set("2021..2022", Dimension::kTime)) == 0);
    CHECK(component_intersection(range, range) == 1);  // identical ranges
    CHECK(component_intersection(range, other_range) == 0);  // distinct ranges differ

    // Containment is an intersection rule only; standardized exact accuracy
    // wants slot-for-slot equality.
    CHECK(exact_accuracy("2020", "2020..2021", Dimension::kTime, true) == 0);
    CHECK(exact_accuracy("2020..2021", "2020..2021", Dimension::kTime, true) == 1);
}

TEST_CASE("labels decompose into component sets") {
    ComponentSet t = to_component_set(" \"2020-06-01.\" ", Dimension::kTime);
    REQUIRE(t.size() == 3);
    CHECK(*t.value_of("year") == "2020");
    CHECK(*t.value_of("month") == "06");
    CHECK(*t.value_of("day") == "01");
    CHECK(to_component_set("2020", Dimension::kTime).size() == 1);
    CHECK(to_component_set("2020-06", Dimension::kTime).size() == 2);
    CHECK_THROWS_AS(to_component_set("1950s", Dimension::kTime), BadGoldLabel);
    CHECK_THROWS_AS(to_component_set("", Dimension::kTime), BadGoldLabel);

    ComponentSet key = to_component_set("|milan|italy|europe", Dimension::kLocation);
    REQUIRE(key.size() == 3);
    CHECK(*key.value_of("city") == "milan");
    CHECK(key.value_of("area") == nullptr);
    CHECK(to_component_set("|||", Dimension::kLocation).size() == 0);

    LocationStandardizer std_fn = [](const std::string&) {
        LocationValue v;
        v.city = "Milano";
        v.country = "Italy";
        v.continent = "Europe";
        return v;
    };
    ComponentSet via = to_component_set("Milano", Dimension::kLocation, std_fn);
    CHECK(via.size() == 3);
    CHECK(*via.value_of("city") == "Milano");
    CHECK_THROWS_AS(to_component_set("Milano", Dimension::kLocation), BadGoldLabel);
}

TEST_CASE("both-empty component sets score zero F1") {
    ComponentSet a, b;
    a.dimension = b.dimension = Dimension::kLocation;
    CHECK(example_f1(a, b) == 0.0);
    ComponentSet t1, t2;
    t1.dimension = t2.dimension = Dimension::kTime;
    CHECK(example_f1(t1, t2) == 0.0);
    CHECK_THROWS_AS(component_intersection(a, t1), DimensionMismatch);
}

TEST_CASE("raw accuracy is folded string equality; standardized compares sets") {
    CHECK(exact_accuracy("Milan, Italy", "milan, italy", Dimension::kLocation, false) == 1);
    CHECK(exact_accuracy("Milan, Italy", "milan, italy.", Dimension::kLocation, false) == 0);
    CHECK(exact_accuracy("2020", " 2020 ", Dimension::kTime, false) == 1);
    CHECK_THROWS_AS(exact_accuracy("  ", "2020", Dimension::kTime, false), BadGoldLabel);

    LocationStandardizer std_fn = [](const std::string&) {
        LocationValue v;
        v.city = "Milan";
        v.country = "Italy";
        v.continent = "Europe";
        return v;
    };
    CHECK(exact_accuracy("Milano, Italia", "|milan|italy|europe", Dimension::kLocation, true,
                         std_fn) == 1);
    // Unstandardizable prediction scores 0 instead of erroring the run.
    CHECK(exact_accuracy("2020", "garbled", Dimension::kTime, true) == 0);
    // Size mismatch: prediction missing a slot the gold has.
    CHECK(exact_accuracy("Milano, Italia", "||italy|europe", Dimension::kLocation, true,
                         std_fn) == 0);
}

TEST_CASE("standardized accuracy is invariant under geocoder-collapsible noise") {
    // One fixed fake geocoder that collapses county, postal code, and region
    // noise the way a real one does.
    LocationStandardizer std_fn = [](const std::string& raw) {
        LocationValue v;
        if (raw.find("Brooklyn") != std::string::npos) {
            v.city = "Brooklyn";
            v.country = "United States";
            v.continent = "North America";
        } else if (raw.find("Paris") != std::string::npos) {
            v.city = "Paris";
            v.country = "France";
            v.continent = "Europe";
        } else {
            throw NormalizationFailed("unknown: " + raw);
        }
        return v;
    };
    const std::string pred = "|brooklyn|united states|north america";
    const std::string variants[] = {
        "Brooklyn, New York, United States",
        "Brooklyn, Kings County, New York, United States",
        "Brooklyn, New York 11201, United States",
    };
    for (const auto& gold : variants) {
        CHECK(exact_accuracy(gold, pred, Dimension::kLocation, true, std_fn) == 1);
        // Raw mode sees the noise and misses.
        CHECK(exact_accuracy(gold, pred, Dimension::kLocation, false) == 0);
    }
    CHECK(exact_accuracy("Paris, Metropolitan France", "|paris|france|europe",
                         Dimension::kLocation, true, std_fn) == 1);
    CHECK(exact_accuracy("Paris, France", "|paris|france|europe", Dimension::kLocation, true,
                         std_fn) == 1);
}

TEST_CASE("multichoice metrics reproduce the four-task worked example") {
    std::vector<std::string> golds = {"France", "France", "Italy", "Italy"};
    std::vector<std::string> preds = {"France", "Italy", "Italy", "Italy"};
    auto m = multichoice_metrics(golds, preds, {"France", "Italy"});
    CHECK(m.n == 4);
    CHECK_THAT(m.accuracy_pct, Catch::Matchers::WithinAbs(75.0, 1e-9));
    CHECK_THAT(m.macro_precision, Catch::Matchers::WithinAbs(5.0 / 6.0, 1e-9));
    CHECK_THAT(m.macro_f1, Catch::Matchers::WithinAbs(11.0 / 15.0, 1e-9));
}

TEST_CASE("multichoice edge rules") {
    // Out-of-set prediction: wrong for accuracy, invisible to class precision.
    auto m = multichoice_metrics({"France"}, {"Spain"}, {"France", "Italy"});
    CHECK(m.accuracy_pct == 0.0);
    CHECK(m.macro_precision == 0.0);  // no predictions landed in either class
    CHECK(m.macro_f1 == 0.0);

    // Perfect single-class prediction still averages over all classes.
    auto one = multichoice_metrics({"Italy"}, {"Italy"}, {"France", "Italy", "Spain"});
    CHECK_THAT(one.accuracy_pct, Catch::Matchers::WithinAbs(100.0, 1e-9));
    CHECK_THAT(one.macro_precision, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-9));
    CHECK_THAT(one.macro_f1, Catch::Matchers::WithinAbs(1.0 / 3.0, 1e-9));

    // Labels compare after trimming.
    auto trimmed = multichoice_metrics({"France "}, {" France"}, {"France"});
    CHECK_THAT(trimmed.accuracy_pct, Catch::Matchers::WithinAbs(100.0, 1e-9));

    CHECK_THROWS_AS(multichoice_metrics({}, {}, {"A"}), EmptyInput);
    CHECK_THROWS_AS(multichoice_metrics({"A"}, {}, {"A"}), LengthMismatch);
    CHECK_THROWS_AS(multichoice_metrics({"A"}, {"A"}, {}), EmptyInput);
}

TEST_CASE("dimension scoring folds missing or broken predictions to zero") {
    DimensionScore none = score_dimension("2020", std::nullopt, Dimension::kTime, nullptr);
    CHECK(none.acc == 0.0);
    CHECK(none.std_acc == 0.0);
    CHECK(none.f1 == 0.0);
    CHECK(none.f1_beta == 0.0);

    Prediction p;
    p.dimension = Dimension::kTime;
    p.value = "2020";
    DimensionScore hit = score_dimension("2020", p, Dimension::kTime, nullptr);
    CHECK(hit.acc == 1.0);
    CHECK(hit.std_acc == 1.0);
    CHECK(hit.f1 == 1.0);
    CHECK(hit.f1_beta == 1.0);

    // Unstandardizable prediction: F1 metrics degrade to 0 instead of throwing.
    Prediction bad;
    bad.dimension = Dimension::kLocation;
    bad.value = "not a key";
    DimensionScore zeroed =
        score_dimension("|milan|italy|europe", bad, Dimension::kLocation, nullptr);
    CHECK(zeroed.acc == 0.0);
    CHECK(zeroed.std_acc == 0.0);
    CHECK(zeroed.f1 == 0.0);
    CHECK(zeroed.f1_beta == 0.0);
}

TEST_CASE("run scoring aggregates, counts flags, and skips bad golds") {
    std::vector<ImageTask> tasks(3);
    tasks[0].id = "a";
    tasks[0].image_ref = "a.jpg";
    tasks[0].gold_time = "2020";
    tasks[0].choices["country"] = ChoiceSet{{"France", "Italy"}, "France"};
    tasks[1].id = "b";
    tasks[1].image_ref = "b.jpg";
    tasks[1].gold_time = "not a year";  // unparseable gold → skipped
    tasks[2].id = "c";
    tasks[2].image_ref = "c.jpg";
    tasks[2].gold_time = "1999";

    std::map<std::string, TaskPredictions> preds;
    Prediction t;
    t.dimension = Dimension::kTime;
    t.value = "2020";
    t.stopped_early = true;
    t.used_retrieval = true;
    preds["a"].time = t;
    preds["a"].choice_answers["country"] = "France";
    Prediction t2 = t;
    t2.stopped_early = false;
    t2.used_retrieval = false;
    preds["b"].time = t2;  // forces the bad gold to actually be parsed
    Prediction t3 = t2;
    t3.value = "1998";
    preds["c"].time = t3;

    ScoreReport report = score_run(tasks, preds, nullptr);
    CHECK(report.skipped == 1);
    CHECK(report.early_stops == 1);
    CHECK(report.retrievals == 1);
    CHECK(report.time.scored == 2);
    CHECK_THAT(report.time.acc_pct, Catch::Matchers::WithinAbs(50.0, 1e-9));
    CHECK_THAT(report.time.f1, Catch::Matchers::WithinAbs(0.5, 1e-12));
    CHECK(report.location.scored == 0);
    REQUIRE(report.tasks.size() == 3);
    CHECK(report.tasks[1].error.has_value());
    REQUIRE(report.multichoice.count("country") == 1);
    CHECK(report.multichoice.at("country").n == 1);
    CHECK_THAT(report.multichoice.at("country").accuracy_pct,
               Catch::Matchers::WithinAbs(100.0, 1e-9));

    // Stable serialization surfaces.
    std::string csv = report.to_csv();
    CHECK(csv.rfind("dimension,n,acc_pct,x_f1,x_f1_beta,std_acc_pct\n", 0) == 0);
    CHECK(csv.find("time,2,") != std::string::npos);
    CHECK(csv.find("choice:country,1,") != std::string::npos);
    nlohmann::json j = report.to_json();
    CHECK(j["aggregate"]["time"]["scored"] == 2);
    CHECK(j["skipped"] == 1);
    CHECK(j["tasks"].size() == 3);
}
