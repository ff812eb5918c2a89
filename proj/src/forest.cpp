#include "nids/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nids/rng.hpp"

namespace nids {

double gini(const std::vector<std::int64_t>& counts) {
    std::int64_t total = 0;
    for (std::int64_t c : counts) {
        if (c < 0) throw std::invalid_argument("gini: negative count");
        total += c;
    }
    if (total == 0) throw std::invalid_argument("gini: empty count vector");
    double sum_sq = 0.0;
    for (std::int64_t c : counts) {
        double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

double impurity_decrease(const std::vector<std::int64_t>& parent,
                         const std::vector<std::int64_t>& left,
                         const std::vector<std::int64_t>& right) {
    if (parent.size() != left.size() || parent.size() != right.size())
        throw std::invalid_argument("impurity_decrease: count vector sizes differ");
    std::int64_t n_left = 0, n_right = 0, n_parent = 0;
    for (std::size_t i = 0; i < parent.size(); ++i) {
        if (left[i] + right[i] != parent[i])
            throw std::invalid_argument("impurity_decrease: children do not partition parent");
        n_left += left[i];
        n_right += right[i];
        n_parent += parent[i];
    }
    if (n_left == 0 || n_right == 0)
        throw std::invalid_argument("impurity_decrease: empty child");
    double p_left = static_cast<double>(n_left) / static_cast<double>(n_parent);
    double p_right = static_cast<double>(n_right) / static_cast<double>(n_parent);
    return gini(parent) - p_left * gini(left) - p_right * gini(right);
}

int Tree::predict(std::span<const double> x) const {
    int idx = 0;
    while (!nodes[idx].is_leaf()) {
        const TreeNode& n = nodes[idx];
        idx = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    const auto& counts = nodes[idx].counts;
    int best = 0;
    for (std::size_t c = 1; c < counts.size(); ++c)
        if (counts[c] > counts[best]) best = static_cast<int>(c);
    return best;
}

std::size_t Tree::depth() const {
    std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
    std::size_t deepest = 0;
    while (!stack.empty()) {
        auto [idx, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes[idx].is_leaf()) {
            stack.push_back({nodes[idx].left, d + 1});
            stack.push_back({nodes[idx].right, d + 1});
        }
    }
    return deepest;
}

namespace {

struct Builder {
    const Dataset& data;
    const std::vector<std::size_t>& sample;  // row indices (bootstrap or identity)
    std::size_t n_classes;
    std::size_t n_features;
    TreeParams params;
    std::size_t max_features;
    Rng rng;
    Tree tree;

    Builder(const Dataset& d, const std::vector<std::size_t>& s, const TreeParams& p)
        : data(d),
          sample(s),
          n_classes(d.classes.size()),
          n_features(d.schema.feature_count()),
          params(p),
          max_features(p.max_features_per_split == 0
                           ? n_features
                           : std::min(p.max_features_per_split, n_features)),
          rng(p.seed) {}

    std::vector<std::int64_t> count_labels(const std::vector<std::size_t>& rows) const {
        std::vector<std::int64_t> counts(n_classes, 0);
        for (std::size_t r : rows) ++counts[static_cast<std::size_t>(data.records[r].label)];
        return counts;
    }

    // best (gain, threshold) for one feature over midpoints of consecutive
    // distinct sorted values; gain must be strictly positive
    bool best_split_for_feature(const std::vector<std::size_t>& rows,
                                const std::vector<std::int64_t>& parent_counts,
                                std::size_t feature, double& best_gain,
                                double& best_threshold) const {
        std::vector<std::pair<double, int>> vals;
        vals.reserve(rows.size());
        for (std::size_t r : rows)
            vals.emplace_back(data.records[r].features[feature], data.records[r].label);
        std::sort(vals.begin(), vals.end());

        std::int64_t total = static_cast<std::int64_t>(vals.size());
        double g_parent = gini(parent_counts);

        std::vector<std::int64_t> left(n_classes, 0);
        std::int64_t n_left = 0;
        bool found = false;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            ++left[static_cast<std::size_t>(vals[i].second)];
            ++n_left;
            if (vals[i].first == vals[i + 1].first) continue;
            double threshold = vals[i].first + 0.5 * (vals[i + 1].first - vals[i].first);
            // gini of both children from running counts
            double sl = 0.0, sr = 0.0;
            std::int64_t n_right = total - n_left;
            for (std::size_t c = 0; c < n_classes; ++c) {
                double pl = static_cast<double>(left[c]) / static_cast<double>(n_left);
                double pr = static_cast<double>(parent_counts[c] - left[c]) /
                            static_cast<double>(n_right);
                sl += pl * pl;
                sr += pr * pr;
            }
            double gain = g_parent -
                          (static_cast<double>(n_left) / static_cast<double>(total)) * (1.0 - sl) -
                          (static_cast<double>(n_right) / static_cast<double>(total)) * (1.0 - sr);
            if (gain > best_gain) {
                best_gain = gain;
                best_threshold = threshold;
                found = true;
            }
        }
        return found;
    }

    int build(std::vector<std::size_t>& rows, std::size_t depth) {
        auto counts = count_labels(rows);
        int node_idx = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes[node_idx].counts = counts;
        tree.nodes[node_idx].sample_fraction =
            static_cast<double>(rows.size()) / static_cast<double>(sample.size());

        bool pure = false;
        for (std::size_t c = 0; c < n_classes; ++c)
            if (counts[c] == static_cast<std::int64_t>(rows.size())) pure = true;
        bool depth_capped = params.max_depth != 0 && depth >= params.max_depth;
        if (pure || depth_capped || rows.size() < params.min_samples_split) return node_idx;

        // candidate features: random subset, scanned in ascending index order
        // so exact gain ties resolve to the lowest feature index
        std::vector<std::size_t> feats;
        if (max_features >= n_features) {
            feats.resize(n_features);
            std::iota(feats.begin(), feats.end(), 0);
        } else {
            feats = rng.sample_without_replacement(n_features, max_features);
            std::sort(feats.begin(), feats.end());
        }

        double best_gain = 0.0;
        double best_threshold = 0.0;
        int best_feature = -1;
        for (std::size_t f : feats) {
            double gain = best_gain;
            double threshold = 0.0;
            if (best_split_for_feature(rows, counts, f, gain, threshold) && gain > best_gain) {
                best_gain = gain;
                best_threshold = threshold;
                best_feature = static_cast<int>(f);
            }
        }
        if (best_feature < 0 || best_gain <= 0.0) return node_idx;  // no useful split

        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            if (data.records[r].features[static_cast<std::size_t>(best_feature)] <= best_threshold)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        tree.nodes[node_idx].feature = best_feature;
        tree.nodes[node_idx].threshold = best_threshold;
        tree.nodes[node_idx].impurity_decrease = best_gain;
        int left = build(left_rows, depth + 1);
        tree.nodes[node_idx].left = left;
        int right = build(right_rows, depth + 1);
        tree.nodes[node_idx].right = right;
        return node_idx;
    }
};

}  // namespace

Tree fit_tree(const Dataset& data, const TreeParams& params) {
    if (data.records.empty()) throw std::invalid_argument("fit_tree: empty dataset");
    std::vector<std::size_t> rows(data.records.size());
    std::iota(rows.begin(), rows.end(), 0);
    Builder b(data, rows, params);
    std::vector<std::size_t> all = rows;
    b.build(all, 0);
    return std::move(b.tree);
}

ForestModel fit_forest(const Dataset& data, const ForestParams& params) {
    if (data.records.empty()) throw std::invalid_argument("fit_forest: empty dataset");
    std::size_t d = data.schema.feature_count();
    std::size_t max_features =
        params.max_features_per_split == 0
            ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
            : params.max_features_per_split;

    ForestModel model;
    model.feature_count = d;
    model.class_map = data.classes;
    model.max_features_per_split = max_features;
    model.trees.resize(params.n_trees);
    model.bootstrap_seeds.resize(params.n_trees);

    for (std::size_t t = 0; t < params.n_trees; ++t) {
        std::uint64_t tree_seed = derive_seed(params.seed, 0x666f72657374ULL + t);
        model.bootstrap_seeds[t] = tree_seed;
        Rng boot(tree_seed);
        std::vector<std::size_t> sample(data.records.size());
        for (auto& s : sample) s = boot.index(data.records.size());

        TreeParams tp;
        tp.max_depth = params.max_depth;
        tp.min_samples_split = params.min_samples_split;
        tp.max_features_per_split = max_features;
        tp.seed = derive_seed(tree_seed, 0x67726f77ULL);

        Builder b(data, sample, tp);
        std::vector<std::size_t> rows = sample;
        b.build(rows, 0);
        model.trees[t] = std::move(b.tree);
    }
    return model;
}

int predict_forest(const ForestModel& f, std::span<const double> x) {
    if (x.size() != f.feature_count)
        throw std::invalid_argument("predict_forest: dimension mismatch");
    std::vector<int> votes(f.class_map.size(), 0);
    for (const auto& t : f.trees) ++votes[static_cast<std::size_t>(t.predict(x))];
    int best = 0;
    for (std::size_t c = 1; c < votes.size(); ++c)
        if (votes[c] > votes[best]) best = static_cast<int>(c);
    return best;
}

ImportanceReport mdi_importances(const ForestModel& f, std::vector<std::string>* warnings) {
    ImportanceReport rep;
    rep.scores.assign(f.feature_count, 0.0);
    for (const auto& t : f.trees)
        for (const auto& n : t.nodes)
            if (!n.is_leaf())
                rep.scores[static_cast<std::size_t>(n.feature)] +=
                    n.sample_fraction * n.impurity_decrease;
    if (!f.trees.empty())
        for (auto& s : rep.scores) s /= static_cast<double>(f.trees.size());

    double total = std::accumulate(rep.scores.begin(), rep.scores.end(), 0.0);
    if (total > 0.0) {
        for (auto& s : rep.scores) s /= total;
    } else if (warnings) {
        warnings->push_back("mdi: forest contains no splits; importances are all zero");
    }

    rep.ranking.resize(f.feature_count);
    std::iota(rep.ranking.begin(), rep.ranking.end(), 0);
    std::stable_sort(rep.ranking.begin(), rep.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return rep.scores[a] > rep.scores[b]; });
    return rep;
}

std::vector<std::size_t> select_top_k(const ImportanceReport& r, std::size_t k) {
    if (k > r.ranking.size())
        throw std::invalid_argument("select_top_k: k exceeds feature count");
    return {r.ranking.begin(), r.ranking.begin() + static_cast<std::ptrdiff_t>(k)};
}

namespace {

nlohmann::json node_to_json(const TreeNode& n) {
    nlohmann::json j;
    j["counts"] = n.counts;
    j["sample_fraction"] = n.sample_fraction;
    if (!n.is_leaf()) {
        j["feature"] = n.feature;
        j["threshold"] = n.threshold;
        j["left"] = n.left;
        j["right"] = n.right;
        j["impurity_decrease"] = n.impurity_decrease;
    }
    return j;
}

TreeNode node_from_json(const nlohmann::json& j) {
    TreeNode n;
    n.counts = j.at("counts").get<std::vector<std::int64_t>>();
    n.sample_fraction = j.at("sample_fraction").get<double>();
    if (j.contains("feature")) {
        n.feature = j.at("feature").get<int>();
        n.threshold = j.at("threshold").get<double>();
        n.left = j.at("left").get<int>();
        n.right = j.at("right").get<int>();
        n.impurity_decrease = j.at("impurity_decrease").get<double>();
    }
    return n;
}

}  // namespace

std::string forest_to_json(const ForestModel& f) {
    nlohmann::json j;
    j["feature_count"] = f.feature_count;
    j["max_features_per_split"] = f.max_features_per_split;
    j["bootstrap_seeds"] = f.bootstrap_seeds;
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : f.class_map)
        classes.push_back({{"name", c.name},
                           {"id", c.id},
                           {"kind", c.kind == LabelKind::Benign ? "benign" : "attack"}});
    j["classes"] = classes;
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : f.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) nodes.push_back(node_to_json(n));
        trees.push_back(std::move(nodes));
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

ForestModel forest_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    ForestModel f;
    f.feature_count = j.at("feature_count").get<std::size_t>();
    f.max_features_per_split = j.at("max_features_per_split").get<std::size_t>();
    f.bootstrap_seeds = j.at("bootstrap_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& e : j.at("classes")) {
        ClassLabel c;
        c.name = e.at("name").get<std::string>();
        c.id = e.at("id").get<int>();
        c.kind = e.at("kind") == "benign" ? LabelKind::Benign : LabelKind::Attack;
        f.class_map.push_back(std::move(c));
    }
    for (const auto& tj : j.at("trees")) {
        Tree t;
        for (const auto& nj : tj) t.nodes.push_back(node_from_json(nj));
        f.trees.push_back(std::move(t));
    }
    return f;
}

}  // namespace nids
