#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nids/dataset.hpp"

namespace nids {

// prediction sentinel for rows flagged by the anomaly detector
constexpr int kAnomalyPrediction = -1;

struct EvalReport {
    std::vector<ClassLabel> classes;
    // rows = true class, cols = predicted class plus a trailing anomaly
    // column; row sums equal per-class support
    std::vector<std::vector<std::int64_t>> confusion;
    std::map<std::string, double> per_class_recall;  // classes with support only
    double accuracy = 0.0;
    double precision = 0.0;  // support-weighted
    double recall = 0.0;     // support-weighted
    double f1 = 0.0;         // support-weighted
    std::optional<double> detection_rate;    // absent without attack support
    std::optional<double> false_alarm_rate;  // absent without benign support
};

// Builds the confusion matrix and every derived rate. Predictions are class
// ids or kAnomalyPrediction; an anomaly flag counts as "flagged" for the
// benign/attack dichotomy but never as a correct class prediction.
EvalReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                           const std::vector<ClassLabel>& classes);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);

}  // namespace nids
