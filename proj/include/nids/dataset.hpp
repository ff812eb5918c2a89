#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nids/matrix.hpp"

namespace nids {

enum class LabelKind { Benign, Attack };

struct ClassLabel {
    std::string name;
    int id = 0;
    LabelKind kind = LabelKind::Attack;

    bool operator==(const ClassLabel& o) const {
        return name == o.name && id == o.id && kind == o.kind;
    }
};

struct FeatureSchema {
    std::vector<std::string> feature_names;
    std::string label_column = "Label";

    std::size_t feature_count() const { return feature_names.size(); }
    std::uint64_t hash() const;
    void validate() const;  // unique names, label column not among them
};

// One flow observation. label -1 means unlabeled. defect marks rows whose raw
// cells failed numeric parsing; such rows survive loading and are dropped by
// clean(), never silently coerced.
struct FlowRecord {
    std::vector<double> features;
    int label = -1;
    bool defect = false;
};

struct Dataset {
    FeatureSchema schema;
    std::vector<ClassLabel> classes;  // index == class id
    std::vector<FlowRecord> records;

    std::vector<std::size_t> class_counts() const;
    std::size_t count_of(int class_id) const;
    int benign_id() const;  // -1 when no benign class
    const ClassLabel* find_class(const std::string& name) const;
    bool empty() const { return records.empty(); }
    void validate() const;
};

struct SplitSpec {
    double train_fraction = 0.5;
    double test_fraction = 0.3;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    void validate() const;
};

struct SynthSpec {
    std::size_t n_classes = 0;
    std::size_t dims = 0;
    std::size_t per_class_count = 0;
    std::vector<std::vector<double>> class_centers;   // one per class, length dims
    std::vector<double> class_spreads;                // one per class, > 0
    std::vector<std::size_t> informative_dims;        // subset of [0,dims)
    std::uint64_t seed = 0;
    void validate() const;
};

struct SplitResult {
    Dataset train;
    Dataset test;
    Dataset val;
};

struct HoldoutResult {
    Dataset remaining;
    Dataset held;                 // single-class dataset, held label at id 0
    std::vector<int> id_map;      // old id -> new id in remaining; -1 for the held id
    ClassLabel held_label;        // as it appeared in the input
};

// Drops defect rows, rows with non-finite features and exact duplicate rows
// (features + label). Relative order is preserved; idempotent.
Dataset clean(const Dataset& d);

// Subsamples the benign class (uniform, without replacement) down to the
// largest attack class count. No-op when benign is already at or below it.
Dataset balance_benign(const Dataset& d, std::uint64_t seed);

// Stratified split; per-class partition sizes are within +/-1 of
// fraction*count. Classes with fewer than 3 rows go wholly to train with a
// warning.
SplitResult split(const Dataset& d, const SplitSpec& spec,
                  std::vector<std::string>* warnings = nullptr);

// Removes one attack class; remaining class ids are re-densified with the
// mapping recorded in the result.
HoldoutResult holdout_class(const Dataset& d, const std::string& label_name);

// Gaussian mixture generator: informative dims are drawn around the class
// center with the class spread, all other dims are standard noise shared
// across classes.
Dataset synth_generate(const SynthSpec& spec);

// Projects every record onto the given feature indices (schema follows).
Dataset select_features(const Dataset& d, const std::vector<std::size_t>& indices);

// Feature matrix + label vector view of a dataset.
Matrix to_matrix(const Dataset& d);
std::vector<int> to_labels(const Dataset& d);

// Order-insensitive content hash over records (features + label).
std::uint64_t dataset_content_hash(const Dataset& d);

}  // namespace nids
