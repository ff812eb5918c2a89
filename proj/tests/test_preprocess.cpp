#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nids/preprocess.hpp"
#include "nids/rng.hpp"
#include "test_helpers.hpp"

using namespace nids;
using testutil::make_dataset;

TEST_CASE("fit_standard uses population std") {
    Dataset d = make_dataset({{1}, {2}, {3}}, {0, 0, 1}, 2);
    StandardScaler p = fit_standard(d);
    CHECK(p.means[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(p.stds[0] == doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-12));

    CHECK(apply_standard(p, {2.0})[0] == doctest::Approx(0.0));
    CHECK(apply_standard(p, {3.0})[0] == doctest::Approx(1.224744871391589).epsilon(1e-12));
}

TEST_CASE("fit_standard degenerate cases") {
    Dataset constant = make_dataset({{5}, {5}, {5}}, {0, 0, 0}, 1);
    StandardScaler p = fit_standard(constant);
    CHECK(p.means[0] == 5.0);
    CHECK(p.stds[0] == 0.0);
    CHECK(apply_standard(p, {123.0})[0] == 0.0);  // sigma 0 maps to 0

    Dataset single = make_dataset({{7, -3}}, {0}, 1);
    StandardScaler q = fit_standard(single);
    CHECK(q.means == std::vector<double>{7, -3});
    CHECK(q.stds == std::vector<double>{0, 0});

    CHECK_THROWS(apply_standard(p, {1.0, 2.0}));  // dimension mismatch
}

TEST_CASE("standardized training set has mean 0 and variance 1") {
    Rng rng(31);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 400; ++i) {
        rows.push_back({rng.normal() * 12 + 3, rng.uniform() * 1e6, rng.normal()});
        labels.push_back(0);
    }
    Dataset d = make_dataset(rows, labels, 1);
    StandardScaler p = fit_standard(d);
    std::vector<double> mean(3, 0.0), var(3, 0.0);
    for (const auto& r : d.records) {
        auto z = apply_standard(p, r.features);
        for (int j = 0; j < 3; ++j) mean[j] += z[j];
    }
    for (auto& m : mean) m /= static_cast<double>(d.records.size());
    for (const auto& r : d.records) {
        auto z = apply_standard(p, r.features);
        for (int j = 0; j < 3; ++j) var[j] += (z[j] - mean[j]) * (z[j] - mean[j]);
    }
    for (auto& v : var) v /= static_cast<double>(d.records.size());
    for (int j = 0; j < 3; ++j) {
        CHECK(std::abs(mean[j]) < 1e-9);
        CHECK(std::abs(var[j] - 1.0) < 1e-9);
    }
}

TEST_CASE("minmax maps the training extremes to exactly 0 and 1, unclamped outside") {
    Dataset d = make_dataset({{2}, {4}, {6}}, {0, 0, 0}, 1);
    MinMaxScaler p = fit_minmax(d);
    CHECK(p.mins[0] == 2.0);
    CHECK(p.maxs[0] == 6.0);
    CHECK(apply_minmax(p, {4.0})[0] == doctest::Approx(0.5));
    CHECK(apply_minmax(p, {2.0})[0] == 0.0);
    CHECK(apply_minmax(p, {6.0})[0] == 1.0);

    Dataset e = make_dataset({{0}, {10}}, {0, 0}, 1);
    MinMaxScaler q = fit_minmax(e);
    CHECK(apply_minmax(q, {20.0})[0] == doctest::Approx(2.0).epsilon(1e-12));  // not clamped

    Dataset c = make_dataset({{7}}, {0}, 1);
    MinMaxScaler r = fit_minmax(c);
    CHECK(r.mins[0] == 7.0);
    CHECK(r.maxs[0] == 7.0);
    CHECK(apply_minmax(r, {99.0})[0] == 0.0);  // degenerate range maps to 0
}

TEST_CASE("minmax over the training set stays in [0,1]") {
    Rng rng(8);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 300; ++i) {
        rows.push_back({rng.normal() * 40, rng.uniform() - 5});
        labels.push_back(0);
    }
    Dataset d = make_dataset(rows, labels, 1);
    MinMaxScaler p = fit_minmax(d);
    for (const auto& r : d.records) {
        auto z = apply_minmax(p, r.features);
        for (double v : z) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("smote_interpolate midpoint and identity") {
    CHECK(smote_interpolate({0, 0}, {1, 0}, 0.5) == std::vector<double>{0.5, 0});
    CHECK(smote_interpolate({3, 4}, {9, -2}, 0.0) == std::vector<double>{3, 4});
    CHECK(smote_interpolate({3, 4}, {9, -2}, 1.0) == std::vector<double>{9, -2});
}

namespace {

// brute-force check: every synthetic point lies on a closed segment between
// two same-class originals
bool on_some_segment(const std::vector<double>& s,
                     const std::vector<std::vector<double>>& originals) {
    for (std::size_t a = 0; a < originals.size(); ++a) {
        for (std::size_t b = 0; b < originals.size(); ++b) {
            if (a == b) continue;
            const auto& pa = originals[a];
            const auto& pb = originals[b];
            // find lambda from the first differing coordinate, then verify all
            double lambda = -1.0;
            bool consistent = true;
            for (std::size_t j = 0; j < s.size(); ++j) {
                double den = pb[j] - pa[j];
                if (std::abs(den) > 1e-12) {
                    double l = (s[j] - pa[j]) / den;
                    if (lambda < 0.0)
                        lambda = l;
                    else if (std::abs(l - lambda) > 1e-6)
                        consistent = false;
                } else if (std::abs(s[j] - pa[j]) > 1e-9) {
                    consistent = false;
                }
            }
            if (consistent && lambda >= -1e-9 && lambda <= 1.0 + 1e-9) return true;
        }
    }
    return false;
}

}  // namespace

TEST_CASE("borderline_smote equalizes counts and synthesizes on segments") {
    Rng rng(21);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    // majority benign cluster at origin, minority attack cluster nearby so
    // boundary points exist
    for (int i = 0; i < 120; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        labels.push_back(0);
    }
    for (int i = 0; i < 25; ++i) {
        rows.push_back({rng.normal() + 2.5, rng.normal()});
        labels.push_back(1);
    }
    Dataset d = make_dataset(rows, labels, 2);
    SmoteConfig cfg;
    cfg.seed = 5;
    std::vector<std::string> warnings;
    Dataset out = borderline_smote(d, cfg, &warnings);

    auto counts = out.class_counts();
    CHECK(counts[0] == 120);
    CHECK(counts[1] == 120);

    // originals all retained, in order, at the front
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(out.records[i].features == d.records[i].features);
        CHECK(out.records[i].label == d.records[i].label);
    }

    std::vector<std::vector<double>> minority_originals;
    for (const auto& r : d.records)
        if (r.label == 1) minority_originals.push_back(r.features);
    for (std::size_t i = d.records.size(); i < out.records.size(); ++i) {
        CHECK(out.records[i].label == 1);
        CHECK(on_some_segment(out.records[i].features, minority_originals));
    }

    // deterministic
    Dataset out2 = borderline_smote(d, cfg, nullptr);
    REQUIRE(out2.records.size() == out.records.size());
    for (std::size_t i = 0; i < out.records.size(); ++i)
        CHECK(out2.records[i].features == out.records[i].features);
}

TEST_CASE("borderline_smote skips classes below k+1 with a warning") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) { rows.push_back({double(i), 0}); labels.push_back(0); }
    for (int i = 0; i < 3; ++i) { rows.push_back({double(i), 9}); labels.push_back(1); }
    Dataset d = make_dataset(rows, labels, 2);
    SmoteConfig cfg;  // k_minority 5 > 3 members
    std::vector<std::string> warnings;
    Dataset out = borderline_smote(d, cfg, &warnings);
    CHECK(out.class_counts()[1] == 3);  // skipped, not inflated
    CHECK(!warnings.empty());
}

TEST_CASE("borderline_smote falls back to all points when no danger points exist") {
    Rng rng(3);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 60; ++i) { rows.push_back({rng.normal(), 0}); labels.push_back(0); }
    // minority far away: m-NN of each minority point are all same-class -> safe
    for (int i = 0; i < 12; ++i) { rows.push_back({rng.normal() + 100, 0}); labels.push_back(1); }
    Dataset d = make_dataset(rows, labels, 2);
    SmoteConfig cfg;
    cfg.seed = 2;
    std::vector<std::string> warnings;
    Dataset out = borderline_smote(d, cfg, &warnings);
    CHECK(out.class_counts()[1] == 60);
    bool fallback_warned = false;
    for (const auto& w : warnings)
        if (w.find("danger") != std::string::npos) fallback_warned = true;
    CHECK(fallback_warned);
}

TEST_CASE("scaler JSON round trip is exact") {
    Rng rng(14);
    Dataset d = make_dataset({{rng.normal(), rng.normal() * 1e9},
                              {rng.normal(), rng.normal() * 1e9},
                              {rng.normal(), rng.normal() * 1e9}},
                             {0, 0, 0}, 1);
    StandardScaler s = fit_standard(d);
    MinMaxScaler m = fit_minmax(d);
    StandardScaler s2 = standard_scaler_from_json(scaler_to_json(s));
    MinMaxScaler m2 = minmax_scaler_from_json(scaler_to_json(m));
    CHECK(s2.means == s.means);
    CHECK(s2.stds == s.stds);
    CHECK(m2.mins == m.mins);
    CHECK(m2.maxs == m.maxs);
}
