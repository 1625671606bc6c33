#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tracerag/eval.hpp"
#include "tracerag/util.hpp"

#include <random>

using namespace tracerag;
using eval::ConfusionCounts;

TEST_CASE("confusion on perfect and all-positive predictors") {
    std::map<std::string, bool> truth{{"a", true}, {"b", true}, {"c", false}, {"d", false}};
    CHECK(eval::confusion(truth, truth) == ConfusionCounts{2, 0, 0, 2});

    std::map<std::string, bool> all_positive{{"a", true}, {"b", true}, {"c", true}, {"d", true}};
    CHECK(eval::confusion(all_positive, truth) == ConfusionCounts{2, 2, 0, 0});
}

TEST_CASE("confusion equals a hand-looped oracle on random cases") {
    std::mt19937 rng(99);
    for (int round = 0; round < 20; ++round) {
        std::map<std::string, bool> pred;
        std::map<std::string, bool> truth;
        for (int i = 0; i < 50; ++i) {
            std::string id = "app" + std::to_string(i);
            pred[id] = rng() % 2 == 0;
            truth[id] = rng() % 2 == 0;
        }
        long tp = 0, fp = 0, fn = 0, tn = 0;
        for (const auto& [id, p] : pred) {
            bool t = truth[id];
            if (p && t) tp++;
            if (p && !t) fp++;
            if (!p && t) fn++;
            if (!p && !t) tn++;
        }
        ConfusionCounts got = eval::confusion(pred, truth);
        CHECK(got == ConfusionCounts{tp, fp, fn, tn});
    }
}

TEST_CASE("confusion rejects mismatched key sets") {
    std::map<std::string, bool> pred{{"a", true}};
    std::map<std::string, bool> truth{{"b", true}};
    CHECK_THROWS_AS(eval::confusion(pred, truth), eval::KeyMismatch);
    std::map<std::string, bool> extra{{"a", true}, {"b", false}};
    CHECK_THROWS_AS(eval::confusion(pred, extra), eval::KeyMismatch);
}

TEST_CASE("binary metrics reproduce the 70/10/0/20 oracle exactly at 4 places") {
    auto m = eval::binary_metrics({70, 10, 0, 20});
    REQUIRE(m.accuracy);
    REQUIRE(m.precision);
    REQUIRE(m.recall);
    REQUIRE(m.f1);
    CHECK(util::round4(*m.accuracy) == doctest::Approx(0.9000).epsilon(1e-12));
    CHECK(util::round4(*m.precision) == doctest::Approx(0.8750).epsilon(1e-12));
    CHECK(util::round4(*m.recall) == doctest::Approx(1.0000).epsilon(1e-12));
    CHECK(util::round4(*m.f1) == doctest::Approx(0.9333).epsilon(1e-12));
}

TEST_CASE("degenerate counts surface undefined, never silent zero") {
    auto perfect = eval::binary_metrics({1, 0, 0, 1});
    CHECK(*perfect.accuracy == doctest::Approx(1.0));
    CHECK(*perfect.precision == doctest::Approx(1.0));
    CHECK(*perfect.recall == doctest::Approx(1.0));
    CHECK(*perfect.f1 == doctest::Approx(1.0));

    auto all_negative = eval::binary_metrics({0, 0, 0, 10});
    CHECK(*all_negative.accuracy == doctest::Approx(1.0));
    CHECK(!all_negative.precision.has_value());
    CHECK(!all_negative.recall.has_value());
    CHECK(!all_negative.f1.has_value());

    CHECK_THROWS_AS(eval::binary_metrics({0, 0, 0, 0}), eval::EmptyCounts);
}

TEST_CASE("micro metrics pool counts before dividing") {
    auto single = eval::micro_metrics({ConfusionCounts{3, 1, 2, 4}});
    auto binary = eval::binary_metrics({3, 1, 2, 4});
    CHECK(*single.precision == doctest::Approx(*binary.precision));
    CHECK(*single.recall == doctest::Approx(*binary.recall));
    CHECK(*single.f1 == doctest::Approx(*binary.f1));

    auto two = eval::micro_metrics({ConfusionCounts{1, 1, 0, 0}, ConfusionCounts{1, 0, 1, 0}});
    CHECK(*two.precision == doctest::Approx(2.0 / 3.0));
    CHECK(*two.recall == doctest::Approx(2.0 / 3.0));
    CHECK(*two.f1 == doctest::Approx(2.0 / 3.0));

    // pooled-loop oracle over random categories
    std::mt19937 rng(1);
    for (int round = 0; round < 20; ++round) {
        std::vector<ConfusionCounts> cats;
        long tp = 0, fp = 0, fn = 0;
        for (int c = 0; c < 3; ++c) {
            ConfusionCounts cc{static_cast<std::int64_t>(rng() % 20),
                               static_cast<std::int64_t>(rng() % 20),
                               static_cast<std::int64_t>(rng() % 20),
                               static_cast<std::int64_t>(rng() % 20)};
            tp += cc.tp;
            fp += cc.fp;
            fn += cc.fn;
            cats.push_back(cc);
        }
        auto micro = eval::micro_metrics(cats);
        if (tp + fp > 0) {
            CHECK(*micro.precision == doctest::Approx(double(tp) / double(tp + fp)));
        }
        if (tp + fn > 0) {
            CHECK(*micro.recall == doctest::Approx(double(tp) / double(tp + fn)));
        }
    }
    CHECK_THROWS_AS(eval::micro_metrics({}), eval::EmptyCounts);
}

TEST_CASE("behavior accuracy paper values") {
    CHECK(util::round4(eval::behavior_accuracy(176, 210)) == doctest::Approx(0.8381).epsilon(1e-12));
    CHECK(eval::behavior_accuracy(70, 70) == doctest::Approx(1.0));
    CHECK(util::round4(eval::behavior_accuracy(53, 70)) == doctest::Approx(0.7571).epsilon(1e-12));
    CHECK_THROWS_AS(eval::behavior_accuracy(1, 0), eval::ZeroTotal);
    CHECK_THROWS(eval::behavior_accuracy(11, 10));
}

TEST_CASE("f1 lies between precision and recall when defined") {
    std::mt19937 rng(5);
    for (int i = 0; i < 200; ++i) {
        ConfusionCounts c{static_cast<std::int64_t>(rng() % 30 + 1),
                          static_cast<std::int64_t>(rng() % 30),
                          static_cast<std::int64_t>(rng() % 30),
                          static_cast<std::int64_t>(rng() % 30)};
        auto m = eval::binary_metrics(c);
        if (m.precision && m.recall && m.f1) {
            double lo = std::min(*m.precision, *m.recall);
            double hi = std::max(*m.precision, *m.recall);
            CHECK(*m.f1 >= lo - 1e-12);
            CHECK(*m.f1 <= hi + 1e-12);
        }
    }
}
