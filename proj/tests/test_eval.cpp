#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "eadf/error.hpp"
#include "eadf/eval.hpp"
#include "eadf/stream.hpp"
#include "test_util.hpp"

using namespace eadf;
using eadf::testing::slurp;
using eadf::testing::TempDir;

namespace {

const std::vector<Algorithm> kAll{Algorithm::EADF, Algorithm::POCS, Algorithm::ULP, Algorithm::Fixed};

StreamConfig perfect_experts(std::int64_t length, std::uint64_t seed) {
    StreamConfig cfg;
    for (int i = 0; i < 3; ++i) cfg.experts.push_back(ExpertProfile{"e" + std::to_string(i), AccuracySchedule(1.0), 0.0, {}});
    cfg.length = length;
    cfg.positive_rate = 0.2;
    cfg.seed = seed;
    return cfg;
}

std::string uci_path() { return std::string(EADF_SOURCE_DIR) + "/data/ionosphere.data"; }

}  // namespace

TEST_CASE("avg_sq_error examples") {
    CHECK(avg_sq_error(std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
    CHECK(avg_sq_error(std::vector<double>{1, 1, 1, 1}, 1.0) == 1.0);
    CHECK(avg_sq_error(std::vector<double>{4, 0}, 2.0) == 1.0);
    CHECK_THROWS_AS(avg_sq_error(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(avg_sq_error(std::vector<double>{1.0}, 0.5), ValidationError);
}

TEST_CASE("convergence index") {
    std::vector<double> e(30, 0.0);
    e[0] = 1.0;
    e[3] = 0.5;
    e[4] = 0.02;  // above 1% of the peak
    CHECK(convergence_index(e) == std::optional<std::size_t>(5));
    CHECK_FALSE(convergence_index(std::vector<double>(20, 0.0)).has_value());
    CHECK_FALSE(convergence_index(std::vector<double>{1.0, 0.0, 0.0}).has_value());
    // An error of exactly 1% of the peak does not count as settled.
    std::vector<double> edge(12, 0.01);
    edge[0] = 1.0;
    CHECK_FALSE(convergence_index(edge).has_value());
}

TEST_CASE("perfect experts raise the first alarm at the first positive step") {
    const auto events = generate_stream(perfect_experts(200, 4));
    std::int64_t first_positive = -1;
    for (const auto& ev : events) {
        if (ev.truth->is_positive()) {
            first_positive = ev.step;
            break;
        }
    }
    REQUIRE(first_positive >= 0);
    for (const auto& m : run_comparison(events, kAll, FusionConfig{})) {
        REQUIRE(m.first_alarm_step.has_value());
        CHECK(*m.first_alarm_step == first_positive);
    }
}

TEST_CASE("Fixed weights do worse than EADF when an expert flips") {
    auto cfg = perfect_experts(600, 8);
    cfg.experts[0].flip_episodes = {{100, 400}};
    cfg.experts[1].confidence_noise = 0.1;
    const auto metrics = run_comparison(generate_stream(cfg), {Algorithm::EADF, Algorithm::Fixed}, FusionConfig{});
    CHECK(metrics[1].avg_sq_error > metrics[0].avg_sq_error);
}

TEST_CASE("series shapes and weight bookkeeping") {
    const auto events = generate_stream(perfect_experts(50, 2));
    const auto metrics = run_comparison(events, kAll, FusionConfig{});
    REQUIRE(metrics.size() == 4);
    for (const auto& m : metrics) {
        CHECK(m.error_series.size() == 50);
        CHECK(m.weights_series.size() == 50);
    }
    for (const auto& w : metrics[3].weights_series) CHECK(w == init_weights(3));
}

TEST_CASE("events without truth contribute no error and no feedback") {
    auto events = generate_stream(perfect_experts(20, 3));
    for (auto& ev : events) ev.truth.reset();
    const auto metrics = run_comparison(events, {Algorithm::EADF}, FusionConfig{});
    CHECK(metrics[0].avg_sq_error == 0.0);
    CHECK(metrics[0].weights_series.back() == init_weights(3));
    CHECK_FALSE(metrics[0].first_alarm_step.has_value());
}

TEST_CASE("run_comparison rejects empty or ragged streams") {
    CHECK_THROWS_AS(run_comparison({}, kAll, FusionConfig{}), ValidationError);
    auto events = generate_stream(perfect_experts(5, 1));
    events[3].decisions = DecisionVector({0.1, 0.2});
    CHECK_THROWS_AS(run_comparison(events, kAll, FusionConfig{}), DimensionError);
}

TEST_CASE("property: weights freeze after the training prefix") {
    const auto events = generate_stream(reference_drift_config());
    const std::int64_t k = 300;
    for (Algorithm alg : {Algorithm::EADF, Algorithm::POCS, Algorithm::ULP}) {
        const auto m = run_comparison(events, {alg}, FusionConfig{}, FeedbackPolicy::train_then_freeze(k)).front();
        for (std::size_t n = static_cast<std::size_t>(k); n < m.weights_series.size(); ++n) {
            CHECK(m.weights_series[n] == m.weights_series[static_cast<std::size_t>(k) - 1]);
        }
        CHECK(m.weights_series[static_cast<std::size_t>(k) - 1] != init_weights(5));
    }
}

TEST_CASE("property: run_comparison is deterministic") {
    const auto events = generate_stream(regime_switch_config());
    const auto a = report_to_json(run_comparison(events, kAll, FusionConfig{})).dump();
    const auto b = report_to_json(run_comparison(events, kAll, FusionConfig{})).dump();
    CHECK(a == b);
}

TEST_CASE("reports") {
    TempDir dir;
    const auto metrics = run_comparison(generate_stream(perfect_experts(40, 6)), kAll, FusionConfig{});

    SUBCASE("JSON round trip is exact") {
        emit_report(metrics, dir / "r.json", ReportFormat::JSON);
        const auto back = report_from_json(nlohmann::json::parse(slurp(dir / "r.json")));
        REQUIRE(back.size() == metrics.size());
        for (std::size_t k = 0; k < back.size(); ++k) {
            CHECK(back[k].algorithm == metrics[k].algorithm);
            CHECK(back[k].avg_sq_error == metrics[k].avg_sq_error);
            CHECK(back[k].first_alarm_step == metrics[k].first_alarm_step);
            CHECK(back[k].convergence_step == metrics[k].convergence_step);
            CHECK(back[k].error_series == metrics[k].error_series);
            CHECK(back[k].weights_series == metrics[k].weights_series);
        }
    }
    SUBCASE("CSV has a fixed header and one row per algorithm") {
        emit_report(metrics, dir / "r.csv", ReportFormat::CSV);
        const std::string text = slurp(dir / "r.csv");
        CHECK(text.rfind("algorithm,avg_sq_error,first_alarm_step,convergence_step\n", 0) == 0);
        CHECK(std::count(text.begin(), text.end(), '\n') == 5);
        CHECK(text.find("\nfixed,") != std::string::npos);
    }
    SUBCASE("empty metrics give a header-only CSV") {
        CHECK(report_to_csv({}) == "algorithm,avg_sq_error,first_alarm_step,convergence_step\n");
    }
    SUBCASE("unwritable path") {
        CHECK_THROWS_AS(emit_report(metrics, dir / "missing" / "r.json", ReportFormat::JSON), ValidationError);
    }
    SUBCASE("malformed report") {
        CHECK_THROWS_AS(report_from_json(nlohmann::json{{"algorithms", {{{"algorithm", "eadf"}}}}}), ValidationError);
    }
}

TEST_CASE("ionosphere parsing") {
    const UciDataset d = load_uci(uci_path());
    CHECK(d.features.size() == 351);
    CHECK(d.features[0].size() == 34);
    CHECK(d.labels[0] == OracleLabel::positive());
    CHECK(d.labels[1] == OracleLabel::negative());

    std::string row = "1";
    for (int k = 1; k < 34; ++k) row += ",0.5";
    CHECK_THROWS_AS(parse_uci(row + ",g\n"), ValidationError);  // one row instead of 351
    try {
        parse_uci(row + ",g\n" + row + ",x\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("ionosphere protocol") {
    const UciDataset d = load_uci(uci_path());
    SUBCASE("identical sub-classifiers fuse to the same accuracy") {
        UciOptions opt;
        opt.sub_classifiers = {ClassifierKind::KNN, ClassifierKind::KNN, ClassifierKind::KNN};
        for (Algorithm alg : {Algorithm::EADF, Algorithm::POCS}) {
            opt.fusion = alg;
            const UciResult r = run_uci(d, opt);
            for (const auto& c : r.classifiers) {
                CHECK(r.fused.test_accuracy == c.test_accuracy);
                CHECK(r.fused.train_accuracy == c.train_accuracy);
            }
        }
    }
    SUBCASE("default protocol") {
        const UciResult r = run_uci(d);
        REQUIRE(r.classifiers.size() == 3);
        CHECK(r.classifiers[0].name == "knn");
        CHECK(r.weights.size() == 3);
        double best = 0.0;
        for (const auto& c : r.classifiers) best = std::max(best, c.test_accuracy);
        CHECK(r.fused.test_accuracy >= best - 0.02);
        const auto j = uci_result_to_json(r);
        CHECK(j["sub_classifiers"].size() == 3);
    }
    SUBCASE("invalid options") {
        UciOptions opt;
        opt.fusion = Algorithm::ULP;
        CHECK_THROWS_AS(run_uci(d, opt), ValidationError);
        opt.fusion = Algorithm::EADF;
        opt.sub_classifiers.clear();
        CHECK_THROWS_AS(run_uci(d, opt), ValidationError);
    }
}
