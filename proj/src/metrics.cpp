#include "nids/metrics.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nids {

EvalReport compute_metrics(const std::vector<int>& predictions, const std::vector<int>& labels,
                           const std::vector<ClassLabel>& classes) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("metrics: prediction/label count mismatch");
    if (predictions.empty()) throw std::invalid_argument("metrics: empty input");

    std::size_t c = classes.size();
    EvalReport rep;
    rep.classes = classes;
    rep.confusion.assign(c, std::vector<std::int64_t>(c + 1, 0));

    int benign = -1;
    for (const auto& cls : classes)
        if (cls.kind == LabelKind::Benign) benign = cls.id;

    std::int64_t correct = 0;
    std::int64_t benign_rows = 0, benign_flagged = 0;
    std::int64_t attack_rows = 0, attack_flagged = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        int truth = labels[i];
        int pred = predictions[i];
        if (truth < 0 || static_cast<std::size_t>(truth) >= c)
            throw std::invalid_argument("metrics: label outside class map");
        if (pred != kAnomalyPrediction && (pred < 0 || static_cast<std::size_t>(pred) >= c))
            throw std::invalid_argument("metrics: prediction outside class map");
        std::size_t col = pred == kAnomalyPrediction ? c : static_cast<std::size_t>(pred);
        ++rep.confusion[static_cast<std::size_t>(truth)][col];
        if (pred == truth) ++correct;

        bool flagged = pred == kAnomalyPrediction || pred != benign;
        if (truth == benign) {
            ++benign_rows;
            if (flagged) ++benign_flagged;
        } else {
            ++attack_rows;
            if (flagged) ++attack_flagged;
        }
    }

    rep.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    if (attack_rows > 0)
        rep.detection_rate = static_cast<double>(attack_flagged) / static_cast<double>(attack_rows);
    if (benign_rows > 0)
        rep.false_alarm_rate =
            static_cast<double>(benign_flagged) / static_cast<double>(benign_rows);

    // support-weighted precision / recall / f1 over classes with support
    std::vector<std::int64_t> col_sums(c + 1, 0);
    for (std::size_t t = 0; t < c; ++t)
        for (std::size_t p = 0; p <= c; ++p) col_sums[p] += rep.confusion[t][p];

    double wp = 0.0, wr = 0.0, wf = 0.0;
    std::int64_t total_support = 0;
    for (std::size_t t = 0; t < c; ++t) {
        std::int64_t support = 0;
        for (std::size_t p = 0; p <= c; ++p) support += rep.confusion[t][p];
        if (support == 0) continue;
        double tp = static_cast<double>(rep.confusion[t][t]);
        double class_recall = tp / static_cast<double>(support);
        double class_precision = col_sums[t] > 0 ? tp / static_cast<double>(col_sums[t]) : 0.0;
        double class_f1 = class_precision + class_recall > 0.0
                              ? 2.0 * class_precision * class_recall /
                                    (class_precision + class_recall)
                              : 0.0;
        rep.per_class_recall[classes[t].name] = class_recall;
        wp += class_precision * static_cast<double>(support);
        wr += class_recall * static_cast<double>(support);
        wf += class_f1 * static_cast<double>(support);
        total_support += support;
    }
    if (total_support > 0) {
        rep.precision = wp / static_cast<double>(total_support);
        rep.recall = wr / static_cast<double>(total_support);
        rep.f1 = wf / static_cast<double>(total_support);
    }
    return rep;
}

std::string report_to_json(const EvalReport& r) {
    nlohmann::json j;
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : r.classes)
        classes.push_back({{"name", c.name},
                           {"id", c.id},
                           {"kind", c.kind == LabelKind::Benign ? "benign" : "attack"}});
    j["classes"] = std::move(classes);
    j["confusion"] = r.confusion;
    j["per_class_recall"] = r.per_class_recall;
    j["accuracy"] = r.accuracy;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["detection_rate"] = r.detection_rate ? nlohmann::json(*r.detection_rate)
                                           : nlohmann::json(nullptr);
    j["false_alarm_rate"] = r.false_alarm_rate ? nlohmann::json(*r.false_alarm_rate)
                                               : nlohmann::json(nullptr);
    return j.dump();
}

EvalReport report_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    EvalReport r;
    for (const auto& e : j.at("classes")) {
        ClassLabel c;
        c.name = e.at("name").get<std::string>();
        c.id = e.at("id").get<int>();
        c.kind = e.at("kind") == "benign" ? LabelKind::Benign : LabelKind::Attack;
        r.classes.push_back(std::move(c));
    }
    r.confusion = j.at("confusion").get<std::vector<std::vector<std::int64_t>>>();
    r.per_class_recall = j.at("per_class_recall").get<std::map<std::string, double>>();
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    if (!j.at("detection_rate").is_null())
        r.detection_rate = j.at("detection_rate").get<double>();
    if (!j.at("false_alarm_rate").is_null())
        r.false_alarm_rate = j.at("false_alarm_rate").get<double>();
    return r;
}

}  // namespace nids
