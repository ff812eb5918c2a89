#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nids/dataset.hpp"

namespace nids {

// flat tree storage; a node is a leaf iff left < 0
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<std::int64_t> counts;    // class distribution of the node's samples
    double impurity_decrease = 0.0;      // weighted Gini gain of the chosen split
    double sample_fraction = 0.0;        // node samples / tree sample size

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // root at index 0

    int predict(std::span<const double> x) const;  // leaf argmax, ties to lowest id
    std::size_t depth() const;
};

struct TreeParams {
    std::size_t max_depth = 0;              // 0 = unlimited
    std::size_t min_samples_split = 2;
    std::size_t max_features_per_split = 0; // 0 = all features
    std::uint64_t seed = 0;
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 0;
    std::size_t min_samples_split = 2;
    std::size_t max_features_per_split = 0; // 0 = ceil(sqrt(d))
    std::uint64_t seed = 0;
};

struct ForestModel {
    std::vector<Tree> trees;
    std::size_t feature_count = 0;
    std::vector<ClassLabel> class_map;
    std::vector<std::uint64_t> bootstrap_seeds;
    std::size_t max_features_per_split = 0;
};

struct ImportanceReport {
    std::vector<double> scores;        // MDI per feature, normalized to sum 1
    std::vector<std::size_t> ranking;  // feature indices, descending score
};

// Gini impurity 1 - sum(p_i^2); throws on an all-zero count vector.
double gini(const std::vector<std::int64_t>& counts);

// G_parent - P_left*G_left - P_right*G_right; children must partition the parent.
double impurity_decrease(const std::vector<std::int64_t>& parent,
                         const std::vector<std::int64_t>& left,
                         const std::vector<std::int64_t>& right);

Tree fit_tree(const Dataset& data, const TreeParams& params);
ForestModel fit_forest(const Dataset& data, const ForestParams& params);
int predict_forest(const ForestModel& f, std::span<const double> x);

ImportanceReport mdi_importances(const ForestModel& f,
                                 std::vector<std::string>* warnings = nullptr);
std::vector<std::size_t> select_top_k(const ImportanceReport& r, std::size_t k);

std::string forest_to_json(const ForestModel& f);
ForestModel forest_from_json(const std::string& text);

}  // namespace nids
