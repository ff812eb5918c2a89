#include "nids/lof.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "nids/rng.hpp"

namespace nids {

namespace {

// indices within distance of the k-th nearest, i.e. the k-neighborhood with
// distance ties included
struct Neighborhood {
    std::vector<std::size_t> members;
    double k_distance = 0.0;
};

Neighborhood k_neighborhood(const Matrix& refs, std::span<const double> x, std::size_t k,
                            std::ptrdiff_t exclude = -1) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(refs.rows);
    for (std::size_t i = 0; i < refs.rows; ++i) {
        if (exclude >= 0 && i == static_cast<std::size_t>(exclude)) continue;
        dist.emplace_back(squared_distance(refs.row(i), x), i);
    }
    std::sort(dist.begin(), dist.end());
    Neighborhood nb;
    double kth = dist[k - 1].first;
    nb.k_distance = std::sqrt(kth);
    for (const auto& [d2, idx] : dist) {
        if (d2 > kth) break;
        nb.members.push_back(idx);
    }
    return nb;
}

std::uint64_t row_key(std::span<const double> row) {
    std::uint64_t h = 14695981039346656037ULL;
    for (double v : row) {
        double canon = v == 0.0 ? 0.0 : v;
        auto* p = reinterpret_cast<const unsigned char*>(&canon);
        for (std::size_t b = 0; b < sizeof(canon); ++b) {
            h ^= p[b];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

}  // namespace

LofModel LofModel::fit(const Matrix& normal_train, const LofConfig& cfg,
                       std::vector<std::string>* warnings) {
    if (cfg.k < 1) throw std::invalid_argument("lof: k must be >= 1");
    for (double v : normal_train.data)
        if (!std::isfinite(v)) throw std::invalid_argument("lof: non-finite training value");

    // exact duplicates would drive k-distances to zero and lrd to infinity
    Matrix dedup;
    dedup.cols = normal_train.cols;
    {
        std::unordered_multimap<std::uint64_t, std::size_t> seen;
        for (std::size_t i = 0; i < normal_train.rows; ++i) {
            auto row = normal_train.row(i);
            std::uint64_t h = row_key(row);
            auto [lo, hi] = seen.equal_range(h);
            bool dup = false;
            for (auto it = lo; it != hi; ++it) {
                auto kept = dedup.row(it->second);
                if (std::equal(kept.begin(), kept.end(), row.begin(), row.end())) {
                    dup = true;
                    break;
                }
            }
            if (dup) continue;
            seen.emplace(h, dedup.rows);
            dedup.push_row(row);
        }
        if (warnings && dedup.rows < normal_train.rows)
            warnings->push_back("lof: dropped " +
                                std::to_string(normal_train.rows - dedup.rows) +
                                " duplicate reference points");
    }

    if (cfg.reference_cap > 0 && dedup.rows > cfg.reference_cap) {
        if (warnings)
            warnings->push_back("lof: reference set capped at " +
                                std::to_string(cfg.reference_cap) + " of " +
                                std::to_string(dedup.rows) + " points");
        Rng rng(derive_seed(cfg.seed, 0x6c6f66636170ULL));
        auto keep = rng.sample_without_replacement(dedup.rows, cfg.reference_cap);
        std::sort(keep.begin(), keep.end());
        Matrix capped;
        capped.cols = dedup.cols;
        for (std::size_t i : keep) capped.push_row(dedup.row(i));
        dedup = std::move(capped);
    }

    if (dedup.rows < cfg.k + 1)
        throw std::invalid_argument("lof: need at least k+1 distinct points (k=" +
                                    std::to_string(cfg.k) + ", have " +
                                    std::to_string(dedup.rows) + ")");

    LofModel m;
    m.refs_ = std::move(dedup);
    m.k_ = cfg.k;

    std::size_t n = m.refs_.rows;
    std::vector<Neighborhood> hoods(n);
    m.k_distance_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        hoods[i] = k_neighborhood(m.refs_, m.refs_.row(i), m.k_, static_cast<std::ptrdiff_t>(i));
        m.k_distance_[i] = hoods[i].k_distance;
    }
    m.lrd_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum_reach = 0.0;
        for (std::size_t o : hoods[i].members) {
            double d = std::sqrt(squared_distance(m.refs_.row(i), m.refs_.row(o)));
            sum_reach += std::max(m.k_distance_[o], d);
        }
        m.lrd_[i] = static_cast<double>(hoods[i].members.size()) / sum_reach;
    }
    return m;
}

double LofModel::score(std::span<const double> x) const {
    if (x.size() != refs_.cols) throw std::invalid_argument("lof: dimension mismatch");
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument("lof: non-finite query value");

    Neighborhood nb = k_neighborhood(refs_, x, k_);
    double sum_reach = 0.0;
    double sum_lrd = 0.0;
    for (std::size_t o : nb.members) {
        double d = std::sqrt(squared_distance(refs_.row(o), x));
        sum_reach += std::max(k_distance_[o], d);
        sum_lrd += lrd_[o];
    }
    double lrd_x = static_cast<double>(nb.members.size()) / sum_reach;
    return sum_lrd / (lrd_x * static_cast<double>(nb.members.size()));
}

double LofModel::calibrate_threshold(const Matrix& validation_normals, double target_fpr) {
    if (validation_normals.rows == 0)
        throw std::invalid_argument("lof: empty calibration set");
    if (!(target_fpr >= 0.0 && target_fpr < 1.0))
        throw std::invalid_argument("lof: target_fpr must lie in [0,1)");
    std::vector<double> scores(validation_normals.rows);
    for (std::size_t i = 0; i < validation_normals.rows; ++i)
        scores[i] = score(validation_normals.row(i));
    std::sort(scores.begin(), scores.end());
    double q = 1.0 - target_fpr;
    double h = q * static_cast<double>(scores.size() - 1);
    std::size_t lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, scores.size() - 1);
    double frac = h - std::floor(h);
    double theta = scores[lo] + frac * (scores[hi] - scores[lo]);
    threshold_ = theta;
    return theta;
}

LofVerdict LofModel::predict(std::span<const double> x) const {
    if (!threshold_) throw std::logic_error("lof: threshold not calibrated");
    LofVerdict v;
    v.score = score(x);
    v.is_anomaly = v.score > *threshold_;
    return v;
}

std::string LofModel::to_json() const {
    nlohmann::json j;
    j["k"] = k_;
    j["dimension"] = refs_.cols;
    j["reference_rows"] = refs_.rows;
    j["references"] = refs_.data;
    j["k_distances"] = k_distance_;
    j["lrds"] = lrd_;
    if (threshold_) j["threshold"] = *threshold_;
    return j.dump();
}

LofModel LofModel::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    LofModel m;
    m.k_ = j.at("k").get<std::size_t>();
    m.refs_.cols = j.at("dimension").get<std::size_t>();
    m.refs_.rows = j.at("reference_rows").get<std::size_t>();
    m.refs_.data = j.at("references").get<std::vector<double>>();
    if (m.refs_.data.size() != m.refs_.rows * m.refs_.cols)
        throw std::invalid_argument("lof: corrupt serialized reference matrix");
    m.k_distance_ = j.at("k_distances").get<std::vector<double>>();
    m.lrd_ = j.at("lrds").get<std::vector<double>>();
    if (j.contains("threshold")) m.threshold_ = j.at("threshold").get<double>();
    return m;
}

}  // namespace nids
