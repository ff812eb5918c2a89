#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "nids/csv.hpp"
#include "nids/dataset.hpp"
#include "nids/rng.hpp"
#include "test_helpers.hpp"

using namespace nids;
using testutil::as_multiset;
using testutil::make_classes;
using testutil::make_dataset;

TEST_CASE("load_csv intersects columns across files") {
    testutil::TempDir tmp("csv_intersect");
    testutil::write_file(tmp.path() / "a.csv",
                         "A,B,Label\n1,2,Benign\n3,4,attack-x\n");
    testutil::write_file(tmp.path() / "b.csv",
                         "A,B,C,Label\n5,6,7,Benign\n");
    Dataset d = load_csv({tmp.path() / "a.csv", tmp.path() / "b.csv"});
    CHECK(d.schema.feature_names == std::vector<std::string>{"A", "B"});
    CHECK(d.records.size() == 3);
    // rows preserved in file order
    CHECK(d.records[0].features == std::vector<double>{1, 2});
    CHECK(d.records[2].features == std::vector<double>{5, 6});
    // benign forced to id 0 even though ids are assigned first-seen
    CHECK(d.classes[0].name == "Benign");
    CHECK(d.classes[0].kind == LabelKind::Benign);
    CHECK(d.find_class("attack-x")->id == 1);
}

TEST_CASE("load_csv benign appearing late still lands on id 0") {
    testutil::TempDir tmp("csv_benign_late");
    testutil::write_file(tmp.path() / "a.csv",
                         "A,Label\n1,attack-x\n2,attack-y\n3,Benign\n");
    Dataset d = load_csv({tmp.path() / "a.csv"});
    CHECK(d.classes[0].name == "Benign");
    CHECK(d.find_class("attack-x")->id == 1);
    CHECK(d.find_class("attack-y")->id == 2);
    CHECK(d.records[0].label == 1);
    CHECK(d.records[2].label == 0);
}

TEST_CASE("load_csv with zero data rows yields empty dataset with schema") {
    testutil::TempDir tmp("csv_empty");
    testutil::write_file(tmp.path() / "a.csv", "A,B,Label\n");
    Dataset d = load_csv({tmp.path() / "a.csv"});
    CHECK(d.records.empty());
    CHECK(d.schema.feature_count() == 2);
}

TEST_CASE("load_csv missing label column is a schema error") {
    testutil::TempDir tmp("csv_nolabel");
    testutil::write_file(tmp.path() / "a.csv", "A,B\n1,2\n");
    CHECK_THROWS(load_csv({tmp.path() / "a.csv"}));
}

TEST_CASE("repeated header row survives load and clean drops it") {
    testutil::TempDir tmp("csv_header_mid");
    testutil::write_file(tmp.path() / "a.csv",
                         "A,B,Label\n1,2,Benign\nA,B,Label\n3,4,attack-x\n");
    Dataset d = load_csv({tmp.path() / "a.csv"});
    CHECK(d.records.size() == 3);
    CHECK(d.records[1].defect);
    // the embedded header must not leak a phantom class
    CHECK(d.classes.size() == 2);
    Dataset c = clean(d);
    CHECK(c.records.size() == 2);
    for (const auto& r : c.records) CHECK_FALSE(r.defect);
}

TEST_CASE("clean drops duplicates, non-finite rows and is idempotent") {
    Dataset d = make_dataset({{1, 2}, {1, 2}, {3, 4}, {5, 6}},
                             {0, 0, 1, 1}, 2);
    d.records[3].features[0] = std::numeric_limits<double>::infinity();
    Dataset c = clean(d);
    REQUIRE(c.records.size() == 2);
    CHECK(c.records[0].features == std::vector<double>{1, 2});
    CHECK(c.records[1].features == std::vector<double>{3, 4});

    Dataset cc = clean(c);
    CHECK(as_multiset(cc) == as_multiset(c));
    CHECK(cc.records.size() == c.records.size());
}

TEST_CASE("clean keeps same features under different labels") {
    Dataset d = make_dataset({{1, 2}, {1, 2}}, {0, 1}, 2);
    CHECK(clean(d).records.size() == 2);
}

TEST_CASE("clean of an already clean dataset preserves order") {
    Dataset d = make_dataset({{9, 1}, {3, 7}, {5, 5}}, {0, 1, 0}, 2);
    Dataset c = clean(d);
    REQUIRE(c.records.size() == 3);
    CHECK(c.records[0].features[0] == 9);
    CHECK(c.records[1].features[0] == 3);
    CHECK(c.records[2].features[0] == 5);
}

TEST_CASE("balance_benign subsamples benign to the largest attack count") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 200; ++i) { rows.push_back({double(i), 0}); labels.push_back(0); }
    for (int i = 0; i < 100; ++i) { rows.push_back({double(i), 1}); labels.push_back(1); }
    for (int i = 0; i < 150; ++i) { rows.push_back({double(i), 2}); labels.push_back(2); }
    Dataset d = make_dataset(rows, labels, 3);

    Dataset b = balance_benign(d, 7);
    auto counts = b.class_counts();
    CHECK(counts[0] == 150);
    CHECK(counts[1] == 100);
    CHECK(counts[2] == 150);

    // deterministic under the seed
    Dataset b2 = balance_benign(d, 7);
    CHECK(as_multiset(b) == as_multiset(b2));
    for (std::size_t i = 0; i < b.records.size(); ++i)
        CHECK(b.records[i].features == b2.records[i].features);

    // no-op branch
    Dataset small = make_dataset({{0, 0}, {1, 1}, {2, 2}}, {0, 1, 1}, 2);
    Dataset nb = balance_benign(small, 3);
    CHECK(as_multiset(nb) == as_multiset(small));
}

TEST_CASE("split hits exact sizes for round counts") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) { rows.push_back({double(i)}); labels.push_back(1); }
    Dataset d = make_dataset(rows, labels, 2);
    SplitSpec spec;
    spec.seed = 11;
    SplitResult r = split(d, spec);
    CHECK(r.train.records.size() == 50);
    CHECK(r.test.records.size() == 30);
    CHECK(r.val.records.size() == 20);
}

TEST_CASE("split is stratified per class") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int c = 0; c < 2; ++c)
        for (int i = 0; i < 10; ++i) { rows.push_back({double(i), double(c)}); labels.push_back(c); }
    Dataset d = make_dataset(rows, labels, 2);
    SplitSpec spec;
    spec.seed = 5;
    SplitResult r = split(d, spec);
    for (int c = 0; c < 2; ++c) {
        CHECK(r.train.count_of(c) == 5);
        CHECK(r.test.count_of(c) == 3);
        CHECK(r.val.count_of(c) == 2);
    }
}

TEST_CASE("split sends tiny classes to train with a warning") {
    Dataset d = make_dataset({{1}}, {1}, 2);
    SplitSpec spec;
    std::vector<std::string> warnings;
    SplitResult r = split(d, spec, &warnings);
    CHECK(r.train.records.size() == 1);
    CHECK(r.test.records.empty());
    CHECK(r.val.records.empty());
    CHECK(!warnings.empty());
}

TEST_CASE("split partitions: disjoint with multiset union equal to input") {
    Rng rng(99);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 257; ++i) {
        rows.push_back({rng.uniform(), rng.uniform()});
        labels.push_back(static_cast<int>(rng.index(3)));
    }
    Dataset d = make_dataset(rows, labels, 3);
    SplitSpec spec;
    spec.seed = 123;
    SplitResult r = split(d, spec);

    auto all = as_multiset(r.train);
    for (auto& x : as_multiset(r.test)) all.push_back(x);
    for (auto& x : as_multiset(r.val)) all.push_back(x);
    std::sort(all.begin(), all.end());
    CHECK(all == as_multiset(d));

    // per-class sizes within +/-1 of the fractional share
    for (const auto& cls : d.classes) {
        double n = static_cast<double>(d.count_of(cls.id));
        CHECK(std::abs(static_cast<double>(r.train.count_of(cls.id)) - 0.5 * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(r.test.count_of(cls.id)) - 0.3 * n) <= 1.0);
        CHECK(std::abs(static_cast<double>(r.val.count_of(cls.id)) - 0.2 * n) <= 1.0);
    }
}

TEST_CASE("holdout_class removes the class and re-densifies ids") {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 5; ++i) { rows.push_back({double(c), double(i)}); labels.push_back(c); }
    Dataset d = make_dataset(rows, labels, 4);

    HoldoutResult h = holdout_class(d, "attack-2");
    CHECK(h.remaining.classes.size() == 3);
    CHECK(h.held.records.size() == 5);
    CHECK(h.held.classes.size() == 1);
    CHECK(h.id_map[2] == -1);
    CHECK(h.id_map[3] == 2);  // shifted down
    CHECK(h.remaining.find_class("attack-3")->id == 2);

    // round trip as multisets (held rows keep their features)
    auto rem = as_multiset(h.remaining);
    std::size_t total = h.remaining.records.size() + h.held.records.size();
    CHECK(total == d.records.size());
    std::multiset<std::vector<double>> feats_in, feats_out;
    for (const auto& r : d.records) feats_in.insert(r.features);
    for (const auto& r : h.remaining.records) feats_out.insert(r.features);
    for (const auto& r : h.held.records) feats_out.insert(r.features);
    CHECK(feats_in == feats_out);
}

TEST_CASE("holdout_class rejects benign and unknown classes") {
    Dataset d = make_dataset({{1}, {2}}, {0, 1}, 2);
    CHECK_THROWS(holdout_class(d, "Benign"));
    CHECK_THROWS(holdout_class(d, "no-such-class"));
    // a class present in the map but with zero rows is unknown too
    Dataset e = make_dataset({{1}}, {0}, 3);
    CHECK_THROWS(holdout_class(e, "attack-2"));
}

TEST_CASE("synth_generate is deterministic and separable") {
    SynthSpec spec;
    spec.n_classes = 2;
    spec.dims = 4;
    spec.per_class_count = 300;
    spec.informative_dims = {0, 1};
    spec.class_spreads = {1.0, 1.0};
    spec.class_centers = {{0, 0, 0, 0}, {10, 10, 0, 0}};  // 10 spreads apart per axis
    spec.seed = 77;

    Dataset a = synth_generate(spec);
    Dataset b = synth_generate(spec);
    REQUIRE(a.records.size() == 600);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].features == b.records[i].features);
        CHECK(a.records[i].label == b.records[i].label);
    }

    // nearest-centroid oracle on a fresh draw classifies almost perfectly
    SynthSpec fresh = spec;
    fresh.seed = 78;
    Dataset probe = synth_generate(fresh);
    std::size_t correct = 0;
    for (const auto& r : probe.records) {
        double d0 = 0, d1 = 0;
        for (std::size_t j = 0; j < spec.dims; ++j) {
            double c0 = spec.class_centers[0][j], c1 = spec.class_centers[1][j];
            bool informative = j < 2;
            if (!informative) { c0 = 0; c1 = 0; }
            d0 += (r.features[j] - c0) * (r.features[j] - c0);
            d1 += (r.features[j] - c1) * (r.features[j] - c1);
        }
        int pred = d0 <= d1 ? 0 : 1;
        if (pred == r.label) ++correct;
    }
    CHECK(static_cast<double>(correct) / probe.records.size() >= 0.99);
}

TEST_CASE("synth_generate with zero rows per class is empty") {
    SynthSpec spec;
    spec.n_classes = 2;
    spec.dims = 2;
    spec.per_class_count = 0;
    spec.informative_dims = {0};
    spec.class_spreads = {1.0, 1.0};
    spec.class_centers = {{0, 0}, {5, 0}};
    spec.seed = 1;
    CHECK(synth_generate(spec).records.empty());
}

TEST_CASE("csv save/load round trip preserves records and class ids") {
    testutil::TempDir tmp("csv_roundtrip");
    Rng rng(4);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 50; ++i) {
        rows.push_back({rng.normal() * 1e8, rng.normal() * 1e-7, rng.uniform()});
        labels.push_back(static_cast<int>(rng.index(3)));
    }
    Dataset d = make_dataset(rows, labels, 3);
    save_csv(d, tmp.path() / "d.csv");
    save_dataset_manifest(d, tmp.path() / "d.manifest.json", 4);
    Dataset back = load_csv_with_manifest(tmp.path() / "d.csv", tmp.path() / "d.manifest.json");
    REQUIRE(back.records.size() == d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        CHECK(back.records[i].features == d.records[i].features);  // exact, %.17g round trip
        CHECK(back.records[i].label == d.records[i].label);
    }
    CHECK(dataset_content_hash(back) == dataset_content_hash(d));
}

TEST_CASE("non-numeric cell is retained as a defect row, never coerced") {
    testutil::TempDir tmp("csv_defect");
    testutil::write_file(tmp.path() / "a.csv",
                         "A,B,Label\n1,hello,Benign\n2,3,Benign\n");
    Dataset d = load_csv({tmp.path() / "a.csv"});
    REQUIRE(d.records.size() == 2);
    CHECK(d.records[0].defect);
    CHECK_FALSE(d.records[1].defect);
    CHECK(clean(d).records.size() == 1);
}

TEST_CASE("infinity strings parse as inf rows and are cleaned") {
    testutil::TempDir tmp("csv_inf");
    testutil::write_file(tmp.path() / "a.csv",
                         "A,Label\nInfinity,Benign\n4,Benign\nNaN,Benign\n");
    Dataset d = load_csv({tmp.path() / "a.csv"});
    REQUIRE(d.records.size() == 3);
    CHECK_FALSE(d.records[0].defect);  // parsed, value is +inf
    CHECK(std::isinf(d.records[0].features[0]));
    CHECK(clean(d).records.size() == 1);
}
