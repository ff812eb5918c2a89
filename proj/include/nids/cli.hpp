#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace nids::cli {

// exit code 2
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exit code 3
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// exit code 4
struct ExpectationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// flat INI-style configuration; every key has a printable default
struct RunConfig {
    // paths
    std::string data_dir = "data";
    std::string state_dir = "state";
    std::vector<std::string> csv_paths;  // empty -> data_dir/synth.csv
    std::string label_column = "Label";
    std::string benign_label = "Benign";
    std::string schema_policy = "intersect";  // intersect | strict

    std::uint64_t seed = 42;

    // split
    double train_fraction = 0.5;
    double test_fraction = 0.3;
    double val_fraction = 0.2;

    // oversampling
    std::size_t smote_k = 5;
    std::size_t smote_m = 10;

    // feature selection
    std::size_t feature_k = 20;
    std::size_t forest_trees = 100;
    std::size_t forest_max_depth = 0;          // 0 = unlimited
    std::size_t forest_min_samples_split = 2;
    std::size_t forest_max_features = 0;       // 0 = ceil(sqrt(d))

    // anomaly detector
    std::size_t lof_k = 20;
    std::size_t lof_reference_cap = 50000;
    double target_fpr = 0.05;

    // incremental learning gate
    double gate_x = 2.0;
    std::string gate_mode = "per_class";  // per_class | aggregate
    std::size_t trigger_m = 500;
    double eval_holdout_fraction = 0.3;

    // internal memory
    std::size_t reservoir_r = 10000;
    std::size_t ring_n = 10000;

    // attack classifier
    std::vector<std::size_t> hidden_widths = {96, 32};
    double dropout = 0.2;
    double init_lr = 0.001;
    std::size_t init_batch = 1024;
    std::size_t init_epochs = 50;
    double incr_lr = 0.001;
    std::size_t incr_batch = 1024;
    std::size_t incr_epochs = 50;

    // scenarios
    std::string holdout_class;  // empty = none

    // synthetic data generator
    std::size_t synth_classes = 5;
    std::size_t synth_dims = 16;
    std::size_t synth_informative = 8;
    std::size_t synth_per_class = 1500;
    double synth_spread = 1.0;
    double synth_attack_distance = 24.0;
    double synth_novel_distance = 12.0;  // 0 = place every attack on the positive axes

    void validate() const;
};

RunConfig load_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text);
void print_defaults(std::ostream& out);

// Subcommand bodies. Each writes <name>.json and <name>.txt reports plus a
// timing sidecar, prints the report path on stdout (or the JSON itself with
// json_only) and throws the typed errors above on failure.
void cmd_synth(const RunConfig& cfg, bool json_only = false);
void cmd_prepare(const RunConfig& cfg, bool json_only = false);
void cmd_train(const RunConfig& cfg, bool json_only = false);
void cmd_scenario_holdout(const RunConfig& cfg, bool json_only = false);
void cmd_scenario_false_alarm(const RunConfig& cfg, bool json_only = false);
void cmd_compare_offline(const RunConfig& cfg, bool json_only = false);
void cmd_report(const RunConfig& cfg, const std::string& name, bool json_only = false);

}  // namespace nids::cli
