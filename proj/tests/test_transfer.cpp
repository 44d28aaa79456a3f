#include <doctest.h>

#include <cmath>
#include <sstream>

#include "test_util.hpp"
#include "traffic/transfer.hpp"

using namespace traffic;

namespace {

FeatureSet parse(const std::string& text) {
    std::istringstream in(text);
    return read_features(in);
}

double full_batch_loss(const HeadParameters& head, const FeatureSet& set) {
    double loss = 0.0;
    for (const auto& r : set.rows) loss -= std::log(predict_head(head, r.values)[r.label]);
    return loss / static_cast<double>(set.rows.size());
}

}  // namespace

TEST_SUITE("transfer") {

TEST_CASE("feature file parsing") {
    const auto set = load_features(testutil::fixtures() / "features3.csv");
    CHECK(set.feature_dim == 4);
    REQUIRE(set.rows.size() == 3);
    CHECK(set.rows[0].image_id == "img_a");
    CHECK(set.rows[1].label == 3);
    CHECK(set.rows[2].label == 4);
    CHECK(set.rows[1].values[1] == -1.0);

    CHECK_THROWS_AS(parse(""), std::invalid_argument);
    CHECK_THROWS_AS(parse("feature_dim=0,format_version=1\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("feature_dim=2,format_version=9\n"), std::invalid_argument);
    try {
        parse("feature_dim=4,format_version=1\na,Low,1,2,3,4\nb,Low,1,2,3\n");
        FAIL("expected width error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse("feature_dim=1,format_version=1\na,Low,nan\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse("feature_dim=1,format_version=1\na,Busy,1\n"), std::invalid_argument);
}

TEST_CASE("feature file round trip") {
    const auto set = synthetic_features({2, 2, 2, 2, 2}, 3, 1.0, 4);
    std::ostringstream out;
    write_features(out, set);
    const auto back = parse(out.str());
    REQUIRE(back.rows.size() == set.rows.size());
    for (std::size_t i = 0; i < set.rows.size(); ++i) {
        CHECK(back.rows[i].label == set.rows[i].label);
        CHECK(back.rows[i].values == set.rows[i].values);
    }
}

TEST_CASE("predict_head") {
    HeadParameters zero{Tensor({5, 3}), Tensor({5})};
    const auto p = predict_head(zero, {1.0, -2.0, 3.0});
    for (double v : p) CHECK(v == doctest::Approx(0.2));
    CHECK_THROWS_AS(predict_head(zero, {1.0, 2.0}), std::invalid_argument);
    HeadParameters h{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, {0, 0})};
    const auto q = predict_head(h, {2.0, 0.0});
    CHECK(q[0] + q[1] == doctest::Approx(1.0));
    CHECK(q[0] == doctest::Approx(std::exp(2.0) / (std::exp(2.0) + 1.0)));
}

TEST_CASE("separable features train to 100%") {
    const auto set = synthetic_features({30, 30}, 6, 4.0, 2);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 8;
    const auto r = train_head(set, cfg, 2);
    CHECK(evaluate_head(r.head, set).accuracy == 1.0);
    CHECK_FALSE(r.run.diverged);
    for (const auto& row : set.rows) {
        const auto p = predict_head(r.head, row.values);
        CHECK((p[row.label] > 0.5));
    }
}

TEST_CASE("zero learning rate leaves the initial head") {
    const auto set = synthetic_features({10, 10}, 4, 2.0, 3);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    cfg.seed = 9;
    const auto a = train_head(set, cfg, 2);
    cfg.epochs = 1;
    const auto b = train_head(set, cfg, 2);
    CHECK(a.head.weights == b.head.weights);
    CHECK(a.head.bias == b.head.bias);
}

TEST_CASE("class weighting is neutral on balanced features") {
    const auto set = synthetic_features({8, 8, 8, 8, 8}, 5, 2.0, 11);
    TrainConfig cfg;
    cfg.epochs = 4;
    const auto plain = train_head(set, cfg);
    cfg.class_weighting = true;
    const auto weighted = train_head(set, cfg);
    CHECK(plain.head.weights == weighted.head.weights);
    CHECK(plain.head.bias == weighted.head.bias);
}

TEST_CASE("missing class is rejected") {
    const auto set = synthetic_features({5, 5, 0, 5, 5}, 3, 2.0, 1);
    CHECK_THROWS_AS(train_head(set, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("full-batch steps never raise the loss at a small rate") {
    const auto set = synthetic_features({12, 9, 7, 5, 3}, 6, 1.0, 5);
    TrainConfig cfg;
    cfg.batch_size = set.rows.size();
    cfg.momentum = 0.0;
    cfg.learning_rate = 0.05;
    cfg.epochs = 1;
    cfg.seed = 3;
    // Each call restarts from the same init, so k epochs = k full-batch steps.
    double prev = INFINITY;
    for (std::size_t steps = 1; steps <= 15; ++steps) {
        cfg.epochs = steps;
        const double loss = full_batch_loss(train_head(set, cfg).head, set);
        CHECK(loss <= prev + 1e-12);
        prev = loss;
    }
}

TEST_CASE("head training is deterministic per seed") {
    const auto set = synthetic_features({6, 6, 6, 6, 6}, 4, 2.0, 8);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.seed = 21;
    CHECK(train_head(set, cfg).head.weights == train_head(set, cfg).head.weights);
}

}  // TEST_SUITE
