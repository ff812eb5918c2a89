#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nids/dataset.hpp"

namespace nids {

// z-scaling with population standard deviation; constant features map to 0
struct StandardScaler {
    std::vector<double> means;
    std::vector<double> stds;
    std::uint64_t schema_hash = 0;

    StandardScaler select(const std::vector<std::size_t>& indices) const;
};

// range scaling onto [0,1] over the training extremes; values outside the
// training range are intentionally not clamped so novel traffic keeps its
// out-of-range signal
struct MinMaxScaler {
    std::vector<double> mins;
    std::vector<double> maxs;
    std::uint64_t schema_hash = 0;

    MinMaxScaler select(const std::vector<std::size_t>& indices) const;
};

struct SmoteConfig {
    std::size_t k_minority = 5;   // same-class neighbors used for interpolation
    std::size_t m_danger = 10;    // all-class neighbors used for the borderline test
    std::uint64_t seed = 0;
    void validate() const;
};

StandardScaler fit_standard(const Dataset& train);
std::vector<double> apply_standard(const StandardScaler& p, const std::vector<double>& x);
Matrix apply_standard(const StandardScaler& p, const Matrix& x);

MinMaxScaler fit_minmax(const Dataset& train);
std::vector<double> apply_minmax(const MinMaxScaler& p, const std::vector<double>& x);
Matrix apply_minmax(const MinMaxScaler& p, const Matrix& x);

// x + lambda * (neighbor - x)
std::vector<double> smote_interpolate(const std::vector<double>& x,
                                      const std::vector<double>& neighbor, double lambda);

// Borderline-SMOTE (variant 1): raises every class to the majority count by
// interpolating DANGER points toward same-class neighbors. Originals are
// always retained.
Dataset borderline_smote(const Dataset& train, const SmoteConfig& cfg,
                         std::vector<std::string>* warnings = nullptr);

std::string scaler_to_json(const StandardScaler& p);
std::string scaler_to_json(const MinMaxScaler& p);
StandardScaler standard_scaler_from_json(const std::string& text);
MinMaxScaler minmax_scaler_from_json(const std::string& text);

}  // namespace nids
