#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nids/dataset.hpp"
#include "nids/rng.hpp"

namespace nids {

struct MemoryConfig {
    std::size_t reservoir_capacity = 10000;  // per attack class
    std::size_t ring_capacity = 10000;       // normal pool
    std::uint64_t seed = 0;
    FeatureSchema schema;                    // feature space of stored records
    ClassLabel benign;                       // label attached to normal-pool rows
};

struct StoredAnomaly {
    FlowRecord record;
    double lof_score = 0.0;
    std::uint64_t arrival = 0;
};

// Rehearsal storage: per-attack-class reservoirs, a FIFO ring of recent
// normal traffic, the accumulation buffer of LOF-flagged records and the
// frozen evaluation snapshot. Single-writer; the engine serializes mutations.
class MemoryStore {
public:
    explicit MemoryStore(MemoryConfig cfg);

    void register_class(const ClassLabel& label);
    const std::vector<ClassLabel>& known_classes() const { return classes_; }

    // frozen test snapshot
    void snapshot_test_set(const Dataset& d, std::vector<std::string>* warnings = nullptr);
    bool has_snapshot() const { return frozen_.has_value(); }
    const Dataset& frozen_test_set() const;
    std::uint64_t frozen_test_hash() const;
    void reset_snapshot();

    // per-class reservoir sampling; every record ever offered has equal
    // retention probability
    void store_attack_samples(const ClassLabel& label, const std::vector<FlowRecord>& records);
    std::size_t reservoir_size(int class_id) const;
    std::uint64_t reservoir_seen(int class_id) const;
    const std::vector<FlowRecord>& reservoir_contents(int class_id) const;

    // FIFO normal pool
    void store_normal(const FlowRecord& r);
    std::size_t ring_size() const;
    std::vector<FlowRecord> ring_contents() const;  // oldest first

    // anomaly accumulation
    std::size_t store_anomaly(const FlowRecord& r, double lof_score);
    std::size_t anomaly_count() const { return anomalies_.size(); }
    const std::vector<StoredAnomaly>& anomalies() const { return anomalies_; }

    struct IncrementalBatch {
        Dataset train;                          // mixed rehearsal batch
        std::vector<FlowRecord> eval_heldaside; // anomalies withheld from training
    };

    // Builds the incremental-training mix: anomalies labeled as the new
    // class, plus per old class min(target, available) rehearsal rows where
    // target is the training anomaly count. eval_holdout_fraction of the
    // anomaly buffer is withheld for candidate evaluation.
    IncrementalBatch draw_incremental_batch(const ClassLabel& new_label,
                                            double eval_holdout_fraction = 0.0);

    // accepted update: buffer becomes the new class's reservoir
    void drain_anomalies_into_reservoir(const ClassLabel& new_label);
    // rejected update: buffer is discarded
    void discard_anomalies();

    void save(const std::filesystem::path& dir) const;
    static MemoryStore load(const std::filesystem::path& dir);

    const MemoryConfig& config() const { return cfg_; }

private:
    struct Reservoir {
        std::vector<FlowRecord> samples;
        std::uint64_t seen = 0;
    };

    MemoryConfig cfg_;
    Rng rng_;
    std::vector<ClassLabel> classes_;
    std::map<int, Reservoir> reservoirs_;
    std::vector<FlowRecord> ring_;
    std::size_t ring_next_ = 0;  // overwrite cursor once full
    std::vector<StoredAnomaly> anomalies_;
    std::uint64_t anomaly_arrivals_ = 0;
    std::optional<Dataset> frozen_;
};

}  // namespace nids
