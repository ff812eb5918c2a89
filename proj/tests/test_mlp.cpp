#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nids/mlp.hpp"
#include "nids/rng.hpp"
#include "test_helpers.hpp"

using namespace nids;

namespace {

Matrix random_batch(std::size_t rows, std::size_t cols, Rng& rng) {
    Matrix m(rows, cols);
    for (auto& v : m.data) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("init_model shapes, determinism and the one-class degenerate") {
    auto classes = testutil::make_classes(12);
    MlpModel m = init_model(20, {96, 32}, classes, 5);
    REQUIRE(m.layers.size() == 3);
    CHECK(m.layers[0].in == 20);
    CHECK(m.layers[0].out == 96);
    CHECK(m.layers[1].in == 96);
    CHECK(m.layers[1].out == 32);
    CHECK(m.layers[2].in == 32);
    CHECK(m.layers[2].out == 12);
    for (const auto& l : m.layers)
        for (double b : l.biases) CHECK(b == 0.0);

    MlpModel m2 = init_model(20, {96, 32}, classes, 5);
    for (std::size_t l = 0; l < m.layers.size(); ++l)
        CHECK(m.layers[l].weights == m2.layers[l].weights);

    MlpModel one = init_model(4, {8}, testutil::make_classes(1), 3);
    Rng rng(1);
    Matrix x = random_batch(5, 4, rng);
    Matrix p = forward(one, x, ForwardMode::Infer);
    for (double v : p.data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("forward rows are probability distributions") {
    Rng rng(9);
    auto classes = testutil::make_classes(7);
    MlpModel m = init_model(6, {16}, classes, 2);
    Matrix x = random_batch(33, 6, rng);
    Matrix p = forward(m, x, ForwardMode::Infer);
    for (std::size_t r = 0; r < p.rows; ++r) {
        double sum = 0.0;
        for (double v : p.row(r)) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("all-zero parameters give the uniform distribution") {
    auto classes = testutil::make_classes(5);
    MlpModel m = init_model(3, {4}, classes, 1);
    for (auto& l : m.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    Rng rng(2);
    Matrix x = random_batch(4, 3, rng);
    Matrix p = forward(m, x, ForwardMode::Infer);
    for (double v : p.data) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
    // and predict ties toward class id 0
    CHECK(predict(m, x.row(0)).first == 0);
}

TEST_CASE("zero dropout makes train and infer forward identical") {
    Rng rng(4);
    auto classes = testutil::make_classes(3);
    MlpModel m = init_model(5, {9, 7}, classes, 11, /*dropout_rate=*/0.0);
    Matrix x = random_batch(17, 5, rng);
    Matrix a = forward(m, x, ForwardMode::Train);
    Matrix b = forward(m, x, ForwardMode::Infer);
    CHECK(a.data == b.data);
}

TEST_CASE("loss hits the frozen values") {
    Matrix perfect(2, 3);
    perfect.at(0, 1) = 1.0;
    perfect.at(1, 2) = 1.0;
    CHECK(loss(perfect, {1, 2}) == doctest::Approx(0.0));

    Matrix uniform(3, 4, 0.25);
    CHECK(loss(uniform, {0, 3, 2}) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(loss(uniform, {1, 1, 1}) == doctest::Approx(1.386294361119891).epsilon(1e-9));

    Matrix zero_on_truth(1, 2);
    zero_on_truth.at(0, 0) = 1.0;  // probability 0 on the true class 1
    CHECK(loss(zero_on_truth, {1}) == doctest::Approx(-std::log(1e-12)).epsilon(1e-12));
}

namespace {

// decision-boundary oracle: a run of the perceptron algorithm converging to
// zero mistakes proves the sample is linearly separable
bool perceptron_separable(const Matrix& x, const std::vector<int>& y, int max_epochs = 200) {
    std::vector<double> w(x.cols + 1, 0.0);
    for (int e = 0; e < max_epochs; ++e) {
        int mistakes = 0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            double s = w[x.cols];
            for (std::size_t j = 0; j < x.cols; ++j) s += w[j] * x.at(i, j);
            int pred = s >= 0 ? 1 : 0;
            if (pred != y[i]) {
                ++mistakes;
                double dir = y[i] == 1 ? 1.0 : -1.0;
                for (std::size_t j = 0; j < x.cols; ++j) w[j] += dir * x.at(i, j);
                w[x.cols] += dir;
            }
        }
        if (mistakes == 0) return true;
    }
    return false;
}

}  // namespace

TEST_CASE("training fits linearly separable data") {
    Rng rng(77);
    Matrix x(240, 2);
    std::vector<int> y(240);
    for (std::size_t i = 0; i < 240; ++i) {
        int cls = i % 2;
        x.at(i, 0) = rng.normal() + (cls == 0 ? -4.0 : 4.0);
        x.at(i, 1) = rng.normal();
        y[i] = cls;
    }
    REQUIRE(perceptron_separable(x, y));  // oracle confirms separability

    MlpModel m = init_model(2, {16}, testutil::make_classes(2), 13, 0.0);
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 32;
    cfg.shuffle_seed = 4;
    TrainingOutcome out = train(m, x, y, cfg);
    CHECK(out.loss_curve.size() == 20);

    std::size_t correct = 0;
    auto preds = predict_batch(out.final_model, x);
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == y[i]) ++correct;
    CHECK(static_cast<double>(correct) / 240.0 >= 0.99);
    CHECK(out.loss_curve.back() < out.loss_curve.front());
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Rng rng(21);
    Matrix x = random_batch(64, 3, rng);
    std::vector<int> y(64);
    for (auto& v : y) v = static_cast<int>(rng.index(2));
    MlpModel m = init_model(3, {5}, testutil::make_classes(2), 2, 0.0);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 4;
    cfg.shuffle_seed = 9;
    TrainingOutcome out = train(m, x, y, cfg);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        CHECK(out.final_model.layers[l].weights == m.layers[l].weights);
        CHECK(out.final_model.layers[l].biases == m.layers[l].biases);
    }
    for (double v : out.loss_curve)
        CHECK(v == doctest::Approx(out.loss_curve.front()).epsilon(1e-12));
}

TEST_CASE("training is bitwise deterministic under fixed seeds") {
    Rng rng(31);
    Matrix x = random_batch(100, 4, rng);
    std::vector<int> y(100);
    for (auto& v : y) v = static_cast<int>(rng.index(3));
    MlpModel m = init_model(4, {12, 6}, testutil::make_classes(3), 8, 0.2);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 16;
    cfg.shuffle_seed = 77;
    TrainingOutcome a = train(m, x, y, cfg);
    TrainingOutcome b = train(m, x, y, cfg);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        CHECK(a.final_model.layers[l].weights == b.final_model.layers[l].weights);
        CHECK(a.final_model.layers[l].biases == b.final_model.layers[l].biases);
    }
    CHECK(a.loss_curve == b.loss_curve);
}

TEST_CASE("labels outside the class map are rejected") {
    Matrix x(2, 2);
    MlpModel m = init_model(2, {3}, testutil::make_classes(2), 1);
    CHECK_THROWS(train(m, x, {0, 5}, {}));
}

TEST_CASE("divergence aborts with an explicit error") {
    Rng rng(3);
    Matrix x(32, 2);
    for (auto& v : x.data) v = rng.normal() * 1e130;  // overflow territory
    std::vector<int> y(32);
    for (std::size_t i = 0; i < 32; ++i) y[i] = static_cast<int>(i % 2);
    MlpModel m = init_model(2, {4}, testutil::make_classes(2), 6, 0.0);
    TrainConfig cfg;
    cfg.learning_rate = 1e18;
    cfg.epochs = 12;
    CHECK_THROWS_AS(train(m, x, y, cfg), TrainingDiverged);
}

TEST_CASE("predict batch agrees with per-record predict") {
    Rng rng(12);
    auto classes = testutil::make_classes(4);
    MlpModel m = init_model(5, {8}, classes, 10);
    Matrix x = random_batch(20, 5, rng);
    auto batched = predict_batch(m, x);
    for (std::size_t i = 0; i < x.rows; ++i)
        CHECK(batched[i] == predict(m, x.row(i)).first);
    auto [cls, probs] = predict(m, x.row(0));
    CHECK(probs.size() == 4);
    CHECK(cls == static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin()));
}

TEST_CASE("extend_classes grows the output layer without touching old logits") {
    Rng rng(18);
    auto classes = testutil::make_classes(3);
    MlpModel m = init_model(6, {10}, classes, 40);

    // zero labels: identity
    MlpModel same = extend_classes(m, {});
    CHECK(same.layers.back().weights == m.layers.back().weights);
    CHECK(same.output_classes.size() == 3);

    ClassLabel novel;
    novel.name = "novel-1";
    novel.kind = LabelKind::Attack;
    MlpModel bigger = extend_classes(m, {novel});
    CHECK(bigger.layers.back().out == 4);
    CHECK(bigger.output_classes.size() == 4);
    CHECK(bigger.output_classes[3].id == 3);

    // old sub-matrix copied bitwise
    const auto& old_w = m.layers.back().weights;
    const auto& new_w = bigger.layers.back().weights;
    for (std::size_t i = 0; i < m.layers.back().in; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(new_w[i * 4 + j] == old_w[i * 3 + j]);

    // pre-softmax logits of old classes are bitwise unchanged on probes
    Matrix x = random_batch(64, 6, rng);
    Matrix before = logits(m, x);
    Matrix after = logits(bigger, x);
    for (std::size_t r = 0; r < x.rows; ++r) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(after.at(r, c) == before.at(r, c));
        CHECK(after.at(r, 3) == 0.0);  // fresh unit is identically zero
    }

    CHECK_THROWS(extend_classes(bigger, {novel}));  // duplicate
}

TEST_CASE("gradient_check stays under 1e-4 and matches the softmax closed form") {
    Rng rng(52);
    auto classes = testutil::make_classes(5);
    MlpModel m = init_model(7, {12, 9}, classes, 66, 0.2);  // dropout disabled inside
    Matrix x = random_batch(6, 7, rng);
    std::vector<int> y{0, 1, 2, 3, 4, 1};
    CHECK(gradient_check(m, x, y, 150, 1) < 1e-4);

    // single identity layer reduces to softmax regression with known gradient
    MlpModel reg;
    reg.dropout_rate = 0.0;
    reg.output_classes = testutil::make_classes(3);
    MlpLayer layer;
    layer.in = 4;
    layer.out = 3;
    layer.activation = Activation::Identity;
    layer.weights.resize(12);
    for (auto& w : layer.weights) w = rng.normal() * 0.3;
    layer.biases.assign(3, 0.0);
    reg.layers.push_back(layer);

    Matrix xb = random_batch(5, 4, rng);
    std::vector<int> yb{0, 2, 1, 0, 2};
    // closed form: dW = x^T (p - onehot) / n
    Matrix p = forward(reg, xb, ForwardMode::Infer);
    std::vector<double> closed(12, 0.0);
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 3; ++c) {
            double diff = p.at(r, c) - (static_cast<int>(c) == yb[r] ? 1.0 : 0.0);
            for (std::size_t i = 0; i < 4; ++i) closed[i * 3 + c] += xb.at(r, i) * diff / 5.0;
        }
    }
    // numeric differentiation of the loss wrt each weight
    const double h = 1e-6;
    for (std::size_t w = 0; w < 12; ++w) {
        MlpModel plus = reg, minus = reg;
        plus.layers[0].weights[w] += h;
        minus.layers[0].weights[w] -= h;
        double up = loss(forward(plus, xb, ForwardMode::Infer), yb);
        double down = loss(forward(minus, xb, ForwardMode::Infer), yb);
        double numeric = (up - down) / (2 * h);
        CHECK(numeric == doctest::Approx(closed[w]).epsilon(1e-4));
    }
    CHECK(gradient_check(reg, xb, yb, 200, 2) < 1e-8);
}

TEST_CASE("gradient_check passes when the loss is already at the floor") {
    MlpModel m = init_model(2, {3}, testutil::make_classes(2), 4, 0.0);
    // saturate: huge bias on class 0
    m.layers.back().biases[0] = 60.0;
    Matrix x(3, 2);
    x.data = {1, 0, 0, 1, 1, 1};
    std::vector<int> y{0, 0, 0};
    CHECK(gradient_check(m, x, y, 100, 3) < 1e-4);
}

TEST_CASE("serialization round trip preserves predictions bit-exactly") {
    Rng rng(71);
    auto classes = testutil::make_classes(6);
    MlpModel m = init_model(9, {24, 10}, classes, 123);
    MlpModel back = mlp_from_json(mlp_to_json(m));
    Matrix x = random_batch(30, 9, rng);
    Matrix a = forward(m, x, ForwardMode::Infer);
    Matrix b = forward(back, x, ForwardMode::Infer);
    CHECK(a.data == b.data);
    CHECK(back.output_classes.size() == 6);
}
