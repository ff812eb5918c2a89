#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nids/matrix.hpp"

namespace nids {

struct LofVerdict {
    double score = 0.0;
    bool is_anomaly = false;  // score > threshold, strictly
};

struct LofConfig {
    std::size_t k = 20;
    std::size_t reference_cap = 50000;  // uniform subsample beyond this
    std::uint64_t seed = 0;
};

// Local Outlier Factor novelty detector fitted on normal traffic only.
// Queries are scored against the reference set; the query point is never
// added to it. Neighbor sets include all points tied at the k-th distance.
class LofModel {
public:
    static LofModel fit(const Matrix& normal_train, const LofConfig& cfg,
                        std::vector<std::string>* warnings = nullptr);

    double score(std::span<const double> x) const;

    // theta = empirical (1 - target_fpr) quantile (linear interpolation) of
    // scores over held-out normals
    double calibrate_threshold(const Matrix& validation_normals, double target_fpr);

    LofVerdict predict(std::span<const double> x) const;  // throws until calibrated

    std::size_t k() const { return k_; }
    std::size_t reference_count() const { return refs_.rows; }
    std::size_t dimension() const { return refs_.cols; }
    std::optional<double> threshold() const { return threshold_; }
    void set_threshold(double theta) { threshold_ = theta; }
    const std::vector<double>& k_distances() const { return k_distance_; }
    const std::vector<double>& lrds() const { return lrd_; }

    std::string to_json() const;
    static LofModel from_json(const std::string& text);

private:
    Matrix refs_;
    std::size_t k_ = 0;
    std::vector<double> k_distance_;  // per reference point
    std::vector<double> lrd_;         // per reference point
    std::optional<double> threshold_;
};

}  // namespace nids
