#include "nids/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nids/rng.hpp"

namespace nids {

namespace {

void check_width(std::size_t params, std::size_t x, const char* what) {
    if (params != x)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch (" +
                                    std::to_string(params) + " vs " + std::to_string(x) + ")");
}

}  // namespace

void SmoteConfig::validate() const {
    if (k_minority < 1) throw std::invalid_argument("smote: k_minority must be >= 1");
    if (m_danger < 2) throw std::invalid_argument("smote: m_danger must be >= 2");
}

StandardScaler StandardScaler::select(const std::vector<std::size_t>& indices) const {
    StandardScaler out;
    out.schema_hash = schema_hash;
    for (std::size_t j : indices) {
        out.means.push_back(means.at(j));
        out.stds.push_back(stds.at(j));
    }
    return out;
}

MinMaxScaler MinMaxScaler::select(const std::vector<std::size_t>& indices) const {
    MinMaxScaler out;
    out.schema_hash = schema_hash;
    for (std::size_t j : indices) {
        out.mins.push_back(mins.at(j));
        out.maxs.push_back(maxs.at(j));
    }
    return out;
}

StandardScaler fit_standard(const Dataset& train) {
    if (train.records.empty()) throw std::invalid_argument("fit_standard: empty dataset");
    std::size_t d = train.schema.feature_count();
    std::size_t n = train.records.size();
    StandardScaler p;
    p.schema_hash = train.schema.hash();
    p.means.assign(d, 0.0);
    p.stds.assign(d, 0.0);
    for (const auto& r : train.records)
        for (std::size_t j = 0; j < d; ++j) p.means[j] += r.features[j];
    for (std::size_t j = 0; j < d; ++j) p.means[j] /= static_cast<double>(n);
    for (const auto& r : train.records)
        for (std::size_t j = 0; j < d; ++j) {
            double dev = r.features[j] - p.means[j];
            p.stds[j] += dev * dev;
        }
    for (std::size_t j = 0; j < d; ++j)
        p.stds[j] = std::sqrt(p.stds[j] / static_cast<double>(n));  // population convention
    return p;
}

std::vector<double> apply_standard(const StandardScaler& p, const std::vector<double>& x) {
    check_width(p.means.size(), x.size(), "apply_standard");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
        out[j] = p.stds[j] == 0.0 ? 0.0 : (x[j] - p.means[j]) / p.stds[j];
    return out;
}

Matrix apply_standard(const StandardScaler& p, const Matrix& x) {
    check_width(p.means.size(), x.cols, "apply_standard");
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j)
            out.at(i, j) = p.stds[j] == 0.0 ? 0.0 : (x.at(i, j) - p.means[j]) / p.stds[j];
    return out;
}

MinMaxScaler fit_minmax(const Dataset& train) {
    if (train.records.empty()) throw std::invalid_argument("fit_minmax: empty dataset");
    std::size_t d = train.schema.feature_count();
    MinMaxScaler p;
    p.schema_hash = train.schema.hash();
    p.mins.assign(d, std::numeric_limits<double>::infinity());
    p.maxs.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& r : train.records)
        for (std::size_t j = 0; j < d; ++j) {
            p.mins[j] = std::min(p.mins[j], r.features[j]);
            p.maxs[j] = std::max(p.maxs[j], r.features[j]);
        }
    return p;
}

std::vector<double> apply_minmax(const MinMaxScaler& p, const std::vector<double>& x) {
    check_width(p.mins.size(), x.size(), "apply_minmax");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        double range = p.maxs[j] - p.mins[j];
        out[j] = range == 0.0 ? 0.0 : (x[j] - p.mins[j]) / range;
    }
    return out;
}

Matrix apply_minmax(const MinMaxScaler& p, const Matrix& x) {
    check_width(p.mins.size(), x.cols, "apply_minmax");
    Matrix out(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) {
            double range = p.maxs[j] - p.mins[j];
            out.at(i, j) = range == 0.0 ? 0.0 : (x.at(i, j) - p.mins[j]) / range;
        }
    return out;
}

std::vector<double> smote_interpolate(const std::vector<double>& x,
                                      const std::vector<double>& neighbor, double lambda) {
    if (x.size() != neighbor.size())
        throw std::invalid_argument("smote_interpolate: dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] + lambda * (neighbor[j] - x[j]);
    return out;
}

namespace {

// indices of the k nearest candidates to records[self] (self excluded), ties
// resolved by index for determinism
std::vector<std::size_t> nearest(const std::vector<FlowRecord>& records,
                                 const std::vector<std::size_t>& candidates, std::size_t self,
                                 std::size_t k) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(candidates.size());
    for (std::size_t c : candidates) {
        if (c == self) continue;
        dist.emplace_back(squared_distance(records[c].features, records[self].features), c);
    }
    std::size_t take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(dist[i].second);
    return out;
}

}  // namespace

Dataset borderline_smote(const Dataset& train, const SmoteConfig& cfg,
                         std::vector<std::string>* warnings) {
    cfg.validate();
    if (train.classes.size() < 2)
        throw std::invalid_argument("smote: need at least two classes");

    auto counts = train.class_counts();
    std::size_t majority = *std::max_element(counts.begin(), counts.end());

    std::vector<std::size_t> all_rows;
    all_rows.reserve(train.records.size());
    for (std::size_t i = 0; i < train.records.size(); ++i) all_rows.push_back(i);

    Dataset out = train;
    Rng rng(derive_seed(cfg.seed, 0x736d6f7465ULL));

    for (const auto& cls : train.classes) {
        std::size_t have = counts[cls.id];
        if (have == 0 || have >= majority) continue;
        if (have < cfg.k_minority + 1) {
            if (warnings)
                warnings->push_back("smote: class '" + cls.name + "' has only " +
                                    std::to_string(have) + " rows; skipped");
            continue;
        }
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < train.records.size(); ++i)
            if (train.records[i].label == cls.id) members.push_back(i);

        // DANGER points: at least half but not all of the m nearest overall
        // neighbors belong to other classes
        std::vector<std::size_t> danger;
        for (std::size_t m : members) {
            auto nn = nearest(train.records, all_rows, m, cfg.m_danger);
            std::size_t other = 0;
            for (std::size_t idx : nn)
                if (train.records[idx].label != cls.id) ++other;
            if (2 * other >= nn.size() && other < nn.size()) danger.push_back(m);
        }
        if (danger.empty()) {
            if (warnings)
                warnings->push_back("smote: class '" + cls.name +
                                    "' has no danger points; sampling from all members");
            danger = members;
        }

        // same-class neighbor lists for the generating points
        std::vector<std::vector<std::size_t>> same_class_nn(danger.size());
        for (std::size_t i = 0; i < danger.size(); ++i)
            same_class_nn[i] = nearest(train.records, members, danger[i], cfg.k_minority);

        std::size_t need = majority - have;
        for (std::size_t s = 0; s < need; ++s) {
            std::size_t b = s % danger.size();
            const auto& nn = same_class_nn[b];
            const auto& base = train.records[danger[b]];
            const auto& pick = train.records[nn[rng.index(nn.size())]];
            double lambda = rng.uniform();
            FlowRecord synth;
            synth.label = cls.id;
            synth.features = smote_interpolate(base.features, pick.features, lambda);
            out.records.push_back(std::move(synth));
        }
    }
    return out;
}

std::string scaler_to_json(const StandardScaler& p) {
    nlohmann::json j{{"type", "standard"},
                     {"means", p.means},
                     {"stds", p.stds},
                     {"schema_hash", p.schema_hash}};
    return j.dump();
}

std::string scaler_to_json(const MinMaxScaler& p) {
    nlohmann::json j{{"type", "minmax"},
                     {"mins", p.mins},
                     {"maxs", p.maxs},
                     {"schema_hash", p.schema_hash}};
    return j.dump();
}

StandardScaler standard_scaler_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.at("type") != "standard") throw std::invalid_argument("scaler: not a standard scaler");
    StandardScaler p;
    p.means = j.at("means").get<std::vector<double>>();
    p.stds = j.at("stds").get<std::vector<double>>();
    p.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    return p;
}

MinMaxScaler minmax_scaler_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.at("type") != "minmax") throw std::invalid_argument("scaler: not a minmax scaler");
    MinMaxScaler p;
    p.mins = j.at("mins").get<std::vector<double>>();
    p.maxs = j.at("maxs").get<std::vector<double>>();
    p.schema_hash = j.at("schema_hash").get<std::uint64_t>();
    return p;
}

}  // namespace nids
