#include "nids/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace nids {

FileEventSink::FileEventSink(const std::filesystem::path& path)
    : out_(path, std::ios::trunc) {
    if (!out_) throw std::runtime_error("events: cannot open " + path.string());
}

void FileEventSink::emit(const Event& e) {
    nlohmann::json j{{"ts", e.ts},
                     {"kind", e.kind},
                     {"class", e.class_name},
                     {"score", e.score},
                     {"version", e.version}};
    out_ << j.dump() << '\n';
    out_.flush();
}

std::vector<double> Pipeline::select(const FlowRecord& raw) const {
    std::vector<double> out;
    out.reserve(selected_features.size());
    for (std::size_t j : selected_features) {
        if (j >= raw.features.size())
            throw std::invalid_argument("pipeline: record narrower than selected features");
        out.push_back(raw.features[j]);
    }
    return out;
}

std::string Pipeline::to_json() const {
    nlohmann::json j;
    j["selected_features"] = selected_features;
    j["standard"] = nlohmann::json::parse(scaler_to_json(standard));
    j["minmax"] = nlohmann::json::parse(scaler_to_json(minmax));
    j["selected_schema"] = {{"features", selected_schema.feature_names},
                            {"label_column", selected_schema.label_column}};
    return j.dump();
}

Pipeline Pipeline::from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    Pipeline p;
    p.selected_features = j.at("selected_features").get<std::vector<std::size_t>>();
    p.standard = standard_scaler_from_json(j.at("standard").dump());
    p.minmax = minmax_scaler_from_json(j.at("minmax").dump());
    p.selected_schema.feature_names =
        j.at("selected_schema").at("features").get<std::vector<std::string>>();
    p.selected_schema.label_column =
        j.at("selected_schema").at("label_column").get<std::string>();
    return p;
}

bool gate_accepts(const EvalReport& old_report, const EvalReport& new_report, double x_pct,
                  GateConfig::Mode mode, std::string* why) {
    double allowance = x_pct / 100.0;
    if (mode == GateConfig::Mode::Aggregate) {
        double drop = old_report.recall - new_report.recall;
        if (drop > allowance) {
            if (why)
                *why = "aggregate recall dropped " + std::to_string(drop * 100.0) + " points";
            return false;
        }
        if (why) *why = "aggregate recall within allowance";
        return true;
    }

    double worst_drop = -std::numeric_limits<double>::infinity();
    std::string worst_class;
    for (const auto& [name, old_recall] : old_report.per_class_recall) {
        auto it = new_report.per_class_recall.find(name);
        if (it == new_report.per_class_recall.end())
            throw std::invalid_argument("gate: class '" + name + "' missing from new report");
        double drop = old_recall - it->second;
        if (drop > worst_drop) {
            worst_drop = drop;
            worst_class = name;
        }
    }
    if (worst_drop > allowance) {
        if (why)
            *why = "recall of class '" + worst_class + "' dropped " +
                   std::to_string(worst_drop * 100.0) + " points (allowed " +
                   std::to_string(x_pct) + ")";
        return false;
    }
    if (why) {
        *why = worst_drop <= 0.0
                   ? "no old-class recall regression"
                   : "worst drop " + std::to_string(worst_drop * 100.0) + " points on class '" +
                         worst_class + "' within allowance";
    }
    return true;
}

Engine::Engine(Init init)
    : lof_(std::move(init.lof)),
      memory_(std::move(init.memory)),
      pipeline_(std::move(init.pipeline)),
      gate_(init.gate),
      incremental_train_(init.incremental_train),
      eval_holdout_fraction_(init.eval_holdout_fraction),
      baseline_report_(std::move(init.baseline_report)),
      seed_(init.seed) {
    init.classifier.validate();
    if (!lof_.threshold()) throw std::invalid_argument("engine: LOF threshold not calibrated");
    classifier_ = std::make_shared<const MlpModel>(std::move(init.classifier));
    archive_.emplace_back(version_, classifier_);
}

std::shared_ptr<const MlpModel> Engine::classifier_snapshot() const {
    std::lock_guard<std::mutex> lock(*model_mutex_);
    return classifier_;
}

std::shared_ptr<const MlpModel> Engine::archived_model(int version) const {
    std::lock_guard<std::mutex> lock(*model_mutex_);
    for (const auto& [v, m] : archive_)
        if (v == version) return m;
    return nullptr;
}

void Engine::publish(std::shared_ptr<const MlpModel> model) {
    std::lock_guard<std::mutex> lock(*model_mutex_);
    classifier_ = std::move(model);
    ++version_;
    archive_.emplace_back(version_, classifier_);
}

void Engine::emit(const std::string& kind, const std::string& class_name, double score) {
    if (sink_ == nullptr) return;
    Event e;
    e.ts = processed_;
    e.kind = kind;
    e.class_name = class_name;
    e.score = score;
    e.version = version_;
    sink_->emit(e);
}

int Engine::classify_selected(std::span<const double> selected_raw) const {
    auto model = classifier_snapshot();
    auto scaled = apply_standard(pipeline_.standard,
                                 std::vector<double>(selected_raw.begin(), selected_raw.end()));
    return predict(*model, scaled).first;
}

Decision Engine::process(const FlowRecord& raw) { return process_impl(raw, false); }

Decision Engine::process_forcing_anomaly(const FlowRecord& raw) {
    return process_impl(raw, true);
}

Decision Engine::process_impl(const FlowRecord& raw, bool force_anomaly) {
    ++processed_;
    FlowRecord selected;
    selected.features = pipeline_.select(raw);
    selected.label = raw.label;

    auto model = classifier_snapshot();
    auto scaled = apply_standard(pipeline_.standard, selected.features);
    auto [pred, probs] = predict(*model, scaled);
    bool is_attack = model->output_classes[static_cast<std::size_t>(pred)].kind ==
                     LabelKind::Attack;

    Decision d;
    if (is_attack && !force_anomaly) {
        d.kind = Decision::Kind::KnownAttack;
        d.label = pred;
        d.probs = std::move(probs);
        emit("alarm", model->output_classes[static_cast<std::size_t>(pred)].name, d.probs[pred]);
        return d;  // known attacks are alarmed, never stored
    }

    auto scaled_mm = apply_minmax(pipeline_.minmax, selected.features);
    LofVerdict verdict = lof_.predict(scaled_mm);
    d.lof_score = verdict.score;
    if (!verdict.is_anomaly && !force_anomaly) {
        d.kind = Decision::Kind::Normal;
        memory_.store_normal(selected);
        return d;
    }

    d.kind = Decision::Kind::AnomalySuspected;
    d.buffer_count = memory_.store_anomaly(selected, verdict.score);
    emit("warning", "", verdict.score);
    if (d.buffer_count >= gate_.retrain_trigger) update_pending_ = true;
    return d;
}

EvalReport Engine::evaluate(const MlpModel& classifier, const LofModel& lof,
                            const Pipeline& pipeline, const Dataset& test_selected_raw) {
    if (test_selected_raw.records.empty())
        throw std::invalid_argument("evaluate: empty test set");

    Matrix x = to_matrix(test_selected_raw);
    Matrix x_std = apply_standard(pipeline.standard, x);
    std::vector<int> preds = predict_batch(classifier, x_std);

    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool is_attack =
            classifier.output_classes[static_cast<std::size_t>(preds[i])].kind ==
            LabelKind::Attack;
        if (is_attack) continue;
        auto mm = apply_minmax(pipeline.minmax,
                               std::vector<double>(x.row(i).begin(), x.row(i).end()));
        if (lof.predict(mm).is_anomaly) preds[i] = kAnomalyPrediction;
    }
    return compute_metrics(preds, to_labels(test_selected_raw), classifier.output_classes);
}

EvalReport Engine::evaluate_current() const {
    auto model = classifier_snapshot();
    return evaluate(*model, lof_, pipeline_, memory_.frozen_test_set());
}

UpdateOutcome Engine::run_incremental_update() {
    if (memory_.anomaly_count() < gate_.retrain_trigger)
        throw std::logic_error("engine: anomaly buffer below the retrain trigger");
    update_pending_ = false;

    ClassLabel new_label;
    new_label.kind = LabelKind::Attack;
    // logical timestamp keeps scripted runs reproducible
    new_label.name =
        "novel-" + std::to_string(processed_) + "-" + std::to_string(++novel_counter_);

    UpdateOutcome outcome;
    outcome.new_class_name = new_label.name;
    outcome.old_report = baseline_report_;

    auto live = classifier_snapshot();
    auto batch = memory_.draw_incremental_batch(new_label, eval_holdout_fraction_);
    int new_id = batch.train.classes.back().id;

    MlpModel candidate = extend_classes(*live, {batch.train.classes.back()});
    try {
        Matrix x = apply_standard(pipeline_.standard, to_matrix(batch.train));
        TrainConfig cfg = incremental_train_;
        cfg.shuffle_seed = derive_seed(seed_, 0x696e6372ULL + novel_counter_);
        TrainingOutcome trained = train(candidate, x, to_labels(batch.train), cfg);
        candidate = std::move(trained.final_model);
    } catch (const TrainingDiverged& e) {
        outcome.accepted = false;
        outcome.reason = std::string("training diverged: ") + e.what();
        outcome.new_report = baseline_report_;
        outcome.version_after = version_;
        memory_.discard_anomalies();
        emit("update_rejected", new_label.name, 0.0);
        return outcome;
    }

    // frozen test augmented with the held-aside anomaly slice as the new class
    Dataset augmented = memory_.frozen_test_set();
    augmented.classes.push_back(batch.train.classes.back());
    for (const auto& r : batch.eval_heldaside) {
        FlowRecord copy = r;
        copy.label = new_id;
        augmented.records.push_back(std::move(copy));
    }
    outcome.train_batch = batch.train;
    outcome.augmented_test = augmented;

    outcome.new_report = evaluate(candidate, lof_, pipeline_, augmented);
    auto it = outcome.new_report.per_class_recall.find(new_label.name);
    outcome.new_class_recall = it == outcome.new_report.per_class_recall.end() ? 0.0 : it->second;

    std::string why;
    bool accept = gate_accepts(outcome.old_report, outcome.new_report,
                               gate_.max_recall_drop_pct, gate_.mode, &why);
    outcome.reason = why;
    outcome.accepted = accept;
    if (accept) {
        memory_.drain_anomalies_into_reservoir(batch.train.classes.back());
        publish(std::make_shared<const MlpModel>(std::move(candidate)));
        baseline_report_ = outcome.new_report;
        emit("update_accepted", new_label.name, outcome.new_class_recall);
    } else {
        memory_.discard_anomalies();
        emit("update_rejected", new_label.name, outcome.new_class_recall);
    }
    outcome.version_after = version_;
    return outcome;
}

namespace {

nlohmann::json gate_to_json(const GateConfig& g) {
    return {{"max_recall_drop_pct", g.max_recall_drop_pct},
            {"retrain_trigger", g.retrain_trigger},
            {"mode", g.mode == GateConfig::Mode::PerClass ? "per_class" : "aggregate"}};
}

GateConfig gate_from_json(const nlohmann::json& j) {
    GateConfig g;
    g.max_recall_drop_pct = j.at("max_recall_drop_pct").get<double>();
    g.retrain_trigger = j.at("retrain_trigger").get<std::size_t>();
    g.mode = j.at("mode") == "aggregate" ? GateConfig::Mode::Aggregate
                                         : GateConfig::Mode::PerClass;
    return g;
}

nlohmann::json train_cfg_to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
            {"epochs", c.epochs},               {"adam_beta1", c.adam_beta1},
            {"adam_beta2", c.adam_beta2},       {"adam_eps", c.adam_eps},
            {"shuffle_seed", c.shuffle_seed}};
}

TrainConfig train_cfg_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    return c;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("engine: cannot write " + p.string());
    out << text << '\n';
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw std::runtime_error("engine: cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void Engine::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    auto model = classifier_snapshot();
    write_file(dir / "classifier.json", mlp_to_json(*model));
    write_file(dir / "lof.json", lof_.to_json());
    write_file(dir / "pipeline.json", pipeline_.to_json());
    memory_.save(dir / "memory");

    nlohmann::json j;
    j["gate"] = gate_to_json(gate_);
    j["incremental_train"] = train_cfg_to_json(incremental_train_);
    j["eval_holdout_fraction"] = eval_holdout_fraction_;
    j["baseline_report"] = nlohmann::json::parse(report_to_json(baseline_report_));
    j["seed"] = seed_;
    j["version"] = version_;
    j["processed"] = processed_;
    j["novel_counter"] = novel_counter_;
    write_file(dir / "engine.json", j.dump(2));
}

Engine Engine::load(const std::filesystem::path& dir) {
    nlohmann::json j = nlohmann::json::parse(read_file(dir / "engine.json"));
    Init init{mlp_from_json(read_file(dir / "classifier.json")),
              LofModel::from_json(read_file(dir / "lof.json")),
              MemoryStore::load(dir / "memory"),
              Pipeline::from_json(read_file(dir / "pipeline.json")),
              gate_from_json(j.at("gate")),
              train_cfg_from_json(j.at("incremental_train")),
              j.at("eval_holdout_fraction").get<double>(),
              report_from_json(j.at("baseline_report").dump()),
              j.at("seed").get<std::uint64_t>()};
    Engine engine(std::move(init));
    engine.version_ = j.at("version").get<int>();
    engine.processed_ = j.at("processed").get<std::uint64_t>();
    engine.novel_counter_ = j.at("novel_counter").get<std::size_t>();
    engine.archive_.clear();
    engine.archive_.emplace_back(engine.version_, engine.classifier_);
    return engine;
}

}  // namespace nids
