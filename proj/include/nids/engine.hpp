#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "nids/dataset.hpp"
#include "nids/lof.hpp"
#include "nids/memory_store.hpp"
#include "nids/metrics.hpp"
#include "nids/mlp.hpp"
#include "nids/preprocess.hpp"

namespace nids {

struct Decision {
    enum class Kind { KnownAttack, Normal, AnomalySuspected };
    Kind kind = Kind::Normal;
    int label = -1;                // KnownAttack: attack class id
    std::vector<double> probs;     // KnownAttack: classifier distribution
    double lof_score = 0.0;        // Normal / AnomalySuspected
    std::size_t buffer_count = 0;  // AnomalySuspected: anomaly buffer size after storing
};

struct GateConfig {
    enum class Mode { PerClass, Aggregate };
    double max_recall_drop_pct = 2.0;  // X
    std::size_t retrain_trigger = 500; // M
    Mode mode = Mode::PerClass;
};

struct UpdateOutcome {
    bool accepted = false;
    EvalReport old_report;
    EvalReport new_report;
    double new_class_recall = 0.0;
    std::string new_class_name;
    std::string reason;
    int version_after = 0;
    Dataset train_batch;     // what the candidate trained on
    Dataset augmented_test;  // frozen test plus held-aside novel rows
};

struct Event {
    std::uint64_t ts = 0;  // logical clock: records processed so far
    std::string kind;      // alarm | warning | update_accepted | update_rejected
    std::string class_name;
    double score = 0.0;
    int version = 0;
};

class EventSink {
public:
    virtual ~EventSink() = default;
    virtual void emit(const Event& e) = 0;
};

// newline-delimited JSON event stream
class FileEventSink : public EventSink {
public:
    explicit FileEventSink(const std::filesystem::path& path);
    void emit(const Event& e) override;

private:
    std::ofstream out_;
};

class CollectingEventSink : public EventSink {
public:
    void emit(const Event& e) override { events.push_back(e); }
    std::vector<Event> events;
};

// frozen preprocessing applied ahead of both models
struct Pipeline {
    std::vector<std::size_t> selected_features;  // indices into the full schema
    StandardScaler standard;                     // selected width, feeds the classifier
    MinMaxScaler minmax;                         // selected width, feeds the detector
    FeatureSchema selected_schema;

    std::vector<double> select(const FlowRecord& raw) const;
    std::string to_json() const;
    static Pipeline from_json(const std::string& text);
};

// Accept iff no old class's recall drops more than x_pct points (per-class
// mode) or aggregate recall does (aggregate mode). why, when given, names the
// worst-dropping class.
bool gate_accepts(const EvalReport& old_report, const EvalReport& new_report, double x_pct,
                  GateConfig::Mode mode = GateConfig::Mode::PerClass,
                  std::string* why = nullptr);

// Orchestrates the decision loop: classify, anomaly-check, store, trigger
// incremental learning, gate and atomically swap the serving model.
// Inference may run from many threads against the published snapshot; all
// mutations happen on a single control path.
class Engine {
public:
    struct Init {
        MlpModel classifier;
        LofModel lof;
        MemoryStore memory;
        Pipeline pipeline;
        GateConfig gate;
        TrainConfig incremental_train;
        double eval_holdout_fraction = 0.3;
        EvalReport baseline_report;
        std::uint64_t seed = 0;
    };

    explicit Engine(Init init);

    // full decision path over a raw (unselected, unscaled) record
    Decision process(const FlowRecord& raw);
    // false-alarm experiment hook: records the real LOF score but stores the
    // record as an anomaly regardless of classifier and detector verdicts
    Decision process_forcing_anomaly(const FlowRecord& raw);

    bool update_pending() const { return update_pending_; }
    UpdateOutcome run_incremental_update();

    // read-only classification of one already-selected raw record
    int classify_selected(std::span<const double> selected_raw) const;

    // decision pipeline over a selected-raw dataset, no memory writes
    static EvalReport evaluate(const MlpModel& classifier, const LofModel& lof,
                               const Pipeline& pipeline, const Dataset& test_selected_raw);
    EvalReport evaluate_current() const;

    std::shared_ptr<const MlpModel> classifier_snapshot() const;
    std::shared_ptr<const MlpModel> archived_model(int version) const;
    int version() const { return version_; }
    const EvalReport& baseline_report() const { return baseline_report_; }
    const LofModel& lof() const { return lof_; }
    const Pipeline& pipeline() const { return pipeline_; }
    MemoryStore& memory() { return memory_; }
    const MemoryStore& memory() const { return memory_; }
    const GateConfig& gate_config() const { return gate_; }
    std::uint64_t records_processed() const { return processed_; }
    void set_event_sink(EventSink* sink) { sink_ = sink; }

    void save(const std::filesystem::path& dir) const;
    static Engine load(const std::filesystem::path& dir);

private:
    Decision process_impl(const FlowRecord& raw, bool force_anomaly);
    void publish(std::shared_ptr<const MlpModel> model);
    void emit(const std::string& kind, const std::string& class_name, double score);

    // held by pointer so the engine stays movable
    std::unique_ptr<std::mutex> model_mutex_ = std::make_unique<std::mutex>();
    std::shared_ptr<const MlpModel> classifier_;
    std::vector<std::pair<int, std::shared_ptr<const MlpModel>>> archive_;

    LofModel lof_;
    MemoryStore memory_;
    Pipeline pipeline_;
    GateConfig gate_;
    TrainConfig incremental_train_;
    double eval_holdout_fraction_ = 0.3;
    EvalReport baseline_report_;
    std::uint64_t seed_ = 0;

    int version_ = 1;
    std::uint64_t processed_ = 0;
    std::size_t novel_counter_ = 0;
    bool update_pending_ = false;
    EventSink* sink_ = nullptr;
};

}  // namespace nids
