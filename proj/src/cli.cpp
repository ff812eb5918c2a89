#include "nids/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nids/csv.hpp"
#include "nids/engine.hpp"
#include "nids/forest.hpp"
#include "nids/lof.hpp"
#include "nids/metrics.hpp"
#include "nids/mlp.hpp"
#include "nids/preprocess.hpp"
#include "nids/rng.hpp"

namespace nids::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// seed stream tags
enum : std::uint64_t {
    kSeedSynth = 1,
    kSeedSplit = 2,
    kSeedSmoteTrain = 3,
    kSeedSmoteVal = 4,
    kSeedForest = 5,
    kSeedMlpInit = 6,
    kSeedMlpShuffle = 7,
    kSeedLof = 8,
    kSeedMemory = 9,
    kSeedBalance = 10,
    kSeedStream = 11,
    kSeedForce = 12,
    kSeedOffline = 13,
};

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t comma = s.find(',', start);
        std::string item = comma == std::string::npos ? s.substr(start)
                                                      : s.substr(start, comma - start);
        item = trim(item);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        std::uint64_t out = std::stoull(trim(v), &pos);
        if (pos != trim(v).size()) throw std::invalid_argument("trailing characters");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double out = std::stod(trim(v), &pos);
        if (pos != trim(v).size()) throw std::invalid_argument("trailing characters");
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for '" + key + "': " + v);
    }
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
    if (!out) throw DataError("write failed for " + p.string());
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw DataError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
    return buf;
}

std::string render_eval_report(const json& r, const std::string& indent) {
    std::ostringstream os;
    os << indent << "accuracy " << pct(r.at("accuracy").get<double>()) << "  precision "
       << pct(r.at("precision").get<double>()) << "  recall " << pct(r.at("recall").get<double>())
       << "  f1 " << pct(r.at("f1").get<double>()) << '\n';
    if (!r.at("detection_rate").is_null())
        os << indent << "detection rate " << pct(r.at("detection_rate").get<double>()) << '\n';
    if (!r.at("false_alarm_rate").is_null())
        os << indent << "false alarm rate " << pct(r.at("false_alarm_rate").get<double>())
           << '\n';
    os << indent << "per-class recall:\n";
    for (const auto& [name, v] : r.at("per_class_recall").items())
        os << indent << "  " << name << "  " << pct(v.get<double>()) << '\n';
    return os.str();
}

// report files live in the state dir (data dir for synth/prepare)
void emit_report(const fs::path& dir, const std::string& name, const json& body,
                 const std::string& txt, double wall_s, bool json_only) {
    fs::create_directories(dir);
    fs::path jpath = dir / (name + ".json");
    write_text(jpath, body.dump(2) + "\n");
    write_text(dir / (name + ".txt"), txt);
    // wall time is machine noise: keep it out of the canonical outputs
    json timing{{"command", name}, {"wall_time_s", wall_s}};
    write_text(dir / (name + ".timings.json"), timing.dump(2) + "\n");
    if (json_only)
        std::cout << body.dump() << '\n';
    else
        std::cout << jpath.string() << '\n';
}

json classes_json(const std::vector<ClassLabel>& classes) {
    json arr = json::array();
    for (const auto& c : classes)
        arr.push_back({{"name", c.name},
                       {"id", c.id},
                       {"kind", c.kind == LabelKind::Benign ? "benign" : "attack"}});
    return arr;
}

json counts_json(const Dataset& d) {
    json c = json::object();
    auto counts = d.class_counts();
    for (const auto& cls : d.classes) c[cls.name] = counts[cls.id];
    return c;
}

struct PreparedArtifacts {
    Dataset train, test, val;  // full feature width; train/val post-SMOTE
    std::vector<std::size_t> selected;
    StandardScaler standard_full;
    MinMaxScaler minmax_full;
};

fs::path synth_csv(const RunConfig& c) { return fs::path(c.data_dir) / "synth.csv"; }

PreparedArtifacts load_prepared(const RunConfig& c) {
    fs::path dir(c.data_dir);
    if (!fs::exists(dir / "prepare.json"))
        throw DataError("missing prepared artifacts under " + dir.string() +
                        " (run prepare first)");
    PreparedArtifacts a;
    a.train = load_csv_with_manifest(dir / "train.csv", dir / "train.manifest.json");
    a.test = load_csv_with_manifest(dir / "test.csv", dir / "test.manifest.json");
    a.val = load_csv_with_manifest(dir / "val.csv", dir / "val.manifest.json");
    json p = json::parse(read_text(dir / "prepare.json"));
    a.selected = p.at("selected_features").at("indices").get<std::vector<std::size_t>>();
    a.standard_full = standard_scaler_from_json(p.at("standard_scaler").dump());
    a.minmax_full = minmax_scaler_from_json(p.at("minmax_scaler").dump());
    return a;
}

Matrix rows_of_class(const Dataset& d, int class_id) {
    Matrix m;
    m.cols = d.schema.feature_count();
    for (const auto& r : d.records)
        if (r.label == class_id) m.push_row(r.features);
    return m;
}

TrainConfig initial_train_config(const RunConfig& c) {
    TrainConfig t;
    t.learning_rate = c.init_lr;
    t.batch_size = c.init_batch;
    t.epochs = c.init_epochs;
    t.shuffle_seed = derive_seed(c.seed, kSeedMlpShuffle);
    return t;
}

TrainConfig incremental_train_config(const RunConfig& c) {
    TrainConfig t;
    t.learning_rate = c.incr_lr;
    t.batch_size = c.incr_batch;
    t.epochs = c.incr_epochs;
    return t;  // shuffle seed derived per update by the engine
}

GateConfig gate_config(const RunConfig& c) {
    GateConfig g;
    g.max_recall_drop_pct = c.gate_x;
    g.retrain_trigger = c.trigger_m;
    g.mode = c.gate_mode == "aggregate" ? GateConfig::Mode::Aggregate
                                        : GateConfig::Mode::PerClass;
    return g;
}

}  // namespace

void RunConfig::validate() const {
    if (schema_policy != "intersect" && schema_policy != "strict")
        throw ConfigError("config: schema_policy must be intersect or strict");
    if (gate_mode != "per_class" && gate_mode != "aggregate")
        throw ConfigError("config: gate_mode must be per_class or aggregate");
    if (!(train_fraction > 0 && train_fraction < 1) || !(test_fraction > 0 && test_fraction < 1) ||
        !(val_fraction > 0 && val_fraction < 1) ||
        std::abs(train_fraction + test_fraction + val_fraction - 1.0) > 1e-9)
        throw ConfigError("config: split fractions must lie in (0,1) and sum to 1");
    if (!(target_fpr > 0.0 && target_fpr < 1.0))
        throw ConfigError("config: target_fpr must lie in (0,1)");
    if (gate_x < 0) throw ConfigError("config: gate_x must be >= 0");
    if (trigger_m < 1) throw ConfigError("config: trigger_m must be >= 1");
    if (!(eval_holdout_fraction >= 0.0 && eval_holdout_fraction < 1.0))
        throw ConfigError("config: eval_holdout_fraction must lie in [0,1)");
    if (smote_k < 1 || smote_m < 2)
        throw ConfigError("config: smote_k must be >= 1 and smote_m >= 2");
    if (feature_k < 1) throw ConfigError("config: feature_k must be >= 1");
    if (lof_k < 1) throw ConfigError("config: lof_k must be >= 1");
    if (reservoir_r < 1 || ring_n < 1)
        throw ConfigError("config: memory capacities must be >= 1");
    if (hidden_widths.empty()) throw ConfigError("config: hidden_widths must be non-empty");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("config: dropout must lie in [0,1)");
    if (synth_classes < 2 || synth_dims == 0 || synth_informative == 0 ||
        synth_informative > synth_dims)
        throw ConfigError("config: bad synth geometry");
    if (!(synth_spread > 0.0)) throw ConfigError("config: synth_spread must be positive");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));

        if (key == "data_dir") c.data_dir = value;
        else if (key == "state_dir") c.state_dir = value;
        else if (key == "csv_paths") c.csv_paths = split_list(value);
        else if (key == "label_column") c.label_column = value;
        else if (key == "benign_label") c.benign_label = value;
        else if (key == "schema_policy") c.schema_policy = value;
        else if (key == "seed") c.seed = parse_u64(key, value);
        else if (key == "train_fraction") c.train_fraction = parse_f64(key, value);
        else if (key == "test_fraction") c.test_fraction = parse_f64(key, value);
        else if (key == "val_fraction") c.val_fraction = parse_f64(key, value);
        else if (key == "smote_k") c.smote_k = parse_u64(key, value);
        else if (key == "smote_m") c.smote_m = parse_u64(key, value);
        else if (key == "feature_k") c.feature_k = parse_u64(key, value);
        else if (key == "forest_trees") c.forest_trees = parse_u64(key, value);
        else if (key == "forest_max_depth") c.forest_max_depth = parse_u64(key, value);
        else if (key == "forest_min_samples_split")
            c.forest_min_samples_split = parse_u64(key, value);
        else if (key == "forest_max_features") c.forest_max_features = parse_u64(key, value);
        else if (key == "lof_k") c.lof_k = parse_u64(key, value);
        else if (key == "lof_reference_cap") c.lof_reference_cap = parse_u64(key, value);
        else if (key == "target_fpr") c.target_fpr = parse_f64(key, value);
        else if (key == "gate_x") c.gate_x = parse_f64(key, value);
        else if (key == "gate_mode") c.gate_mode = value;
        else if (key == "trigger_m") c.trigger_m = parse_u64(key, value);
        else if (key == "eval_holdout_fraction")
            c.eval_holdout_fraction = parse_f64(key, value);
        else if (key == "reservoir_r") c.reservoir_r = parse_u64(key, value);
        else if (key == "ring_n") c.ring_n = parse_u64(key, value);
        else if (key == "hidden_widths") {
            c.hidden_widths.clear();
            for (const auto& w : split_list(value))
                c.hidden_widths.push_back(parse_u64(key, w));
        } else if (key == "dropout") c.dropout = parse_f64(key, value);
        else if (key == "init_lr") c.init_lr = parse_f64(key, value);
        else if (key == "init_batch") c.init_batch = parse_u64(key, value);
        else if (key == "init_epochs") c.init_epochs = parse_u64(key, value);
        else if (key == "incr_lr") c.incr_lr = parse_f64(key, value);
        else if (key == "incr_batch") c.incr_batch = parse_u64(key, value);
        else if (key == "incr_epochs") c.incr_epochs = parse_u64(key, value);
        else if (key == "holdout_class") c.holdout_class = value;
        else if (key == "synth_classes") c.synth_classes = parse_u64(key, value);
        else if (key == "synth_dims") c.synth_dims = parse_u64(key, value);
        else if (key == "synth_informative") c.synth_informative = parse_u64(key, value);
        else if (key == "synth_per_class") c.synth_per_class = parse_u64(key, value);
        else if (key == "synth_spread") c.synth_spread = parse_f64(key, value);
        else if (key == "synth_attack_distance")
            c.synth_attack_distance = parse_f64(key, value);
        else if (key == "synth_novel_distance")
            c.synth_novel_distance = parse_f64(key, value);
        else
            throw ConfigError("config: unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return parse_config_text(text);
}

void print_defaults(std::ostream& out) {
    RunConfig c;
    auto list = [](const auto& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            std::ostringstream os;
            os << v[i];
            s += os.str();
        }
        return s;
    };
    out << "# paths\n";
    out << "data_dir = " << c.data_dir << "\n";
    out << "state_dir = " << c.state_dir << "\n";
    out << "csv_paths = " << list(c.csv_paths) << "\n";
    out << "label_column = " << c.label_column << "\n";
    out << "benign_label = " << c.benign_label << "\n";
    out << "schema_policy = " << c.schema_policy << "\n";
    out << "seed = " << c.seed << "\n";
    out << "# split\n";
    out << "train_fraction = " << c.train_fraction << "\n";
    out << "test_fraction = " << c.test_fraction << "\n";
    out << "val_fraction = " << c.val_fraction << "\n";
    out << "# oversampling\n";
    out << "smote_k = " << c.smote_k << "\n";
    out << "smote_m = " << c.smote_m << "\n";
    out << "# feature selection\n";
    out << "feature_k = " << c.feature_k << "\n";
    out << "forest_trees = " << c.forest_trees << "\n";
    out << "forest_max_depth = " << c.forest_max_depth << "\n";
    out << "forest_min_samples_split = " << c.forest_min_samples_split << "\n";
    out << "forest_max_features = " << c.forest_max_features << "\n";
    out << "# anomaly detector\n";
    out << "lof_k = " << c.lof_k << "\n";
    out << "lof_reference_cap = " << c.lof_reference_cap << "\n";
    out << "target_fpr = " << c.target_fpr << "\n";
    out << "# incremental learning\n";
    out << "gate_x = " << c.gate_x << "\n";
    out << "gate_mode = " << c.gate_mode << "\n";
    out << "trigger_m = " << c.trigger_m << "\n";
    out << "eval_holdout_fraction = " << c.eval_holdout_fraction << "\n";
    out << "reservoir_r = " << c.reservoir_r << "\n";
    out << "ring_n = " << c.ring_n << "\n";
    out << "# attack classifier\n";
    out << "hidden_widths = " << list(c.hidden_widths) << "\n";
    out << "dropout = " << c.dropout << "\n";
    out << "init_lr = " << c.init_lr << "\n";
    out << "init_batch = " << c.init_batch << "\n";
    out << "init_epochs = " << c.init_epochs << "\n";
    out << "incr_lr = " << c.incr_lr << "\n";
    out << "incr_batch = " << c.incr_batch << "\n";
    out << "incr_epochs = " << c.incr_epochs << "\n";
    out << "# scenarios\n";
    out << "holdout_class = " << c.holdout_class << "\n";
    out << "# synthetic data\n";
    out << "synth_classes = " << c.synth_classes << "\n";
    out << "synth_dims = " << c.synth_dims << "\n";
    out << "synth_informative = " << c.synth_informative << "\n";
    out << "synth_per_class = " << c.synth_per_class << "\n";
    out << "synth_spread = " << c.synth_spread << "\n";
    out << "synth_attack_distance = " << c.synth_attack_distance << "\n";
    out << "synth_novel_distance = " << c.synth_novel_distance << "\n";
}

void cmd_synth(const RunConfig& cfg, bool json_only) {
    double t0 = now_s();
    SynthSpec spec;
    spec.n_classes = cfg.synth_classes;
    spec.dims = cfg.synth_dims;
    spec.per_class_count = cfg.synth_per_class;
    spec.seed = derive_seed(cfg.seed, kSeedSynth);
    for (std::size_t j = 0; j < cfg.synth_informative; ++j) spec.informative_dims.push_back(j);
    spec.class_spreads.assign(cfg.synth_classes, cfg.synth_spread);
    spec.class_centers.assign(cfg.synth_classes, std::vector<double>(cfg.synth_dims, 0.0));
    // benign sits at the origin; attacks go out along the informative axes;
    // the last class points the other way so it reads as "novel" traffic on
    // the benign side of every decision boundary
    for (std::size_t c = 1; c < cfg.synth_classes; ++c) {
        bool novel = cfg.synth_novel_distance > 0.0 && c == cfg.synth_classes - 1;
        if (novel) {
            spec.class_centers[c][spec.informative_dims[0]] =
                -cfg.synth_novel_distance * cfg.synth_spread;
        } else {
            std::size_t axis = (c - 1) % cfg.synth_informative;
            double tier = static_cast<double>((c - 1) / cfg.synth_informative) + 1.0;
            spec.class_centers[c][spec.informative_dims[axis]] =
                cfg.synth_attack_distance * cfg.synth_spread * tier;
        }
    }

    Dataset d = synth_generate(spec);
    fs::create_directories(cfg.data_dir);
    save_csv(d, synth_csv(cfg));
    save_dataset_manifest(d, fs::path(cfg.data_dir) / "synth.manifest.json", spec.seed);

    json body;
    body["command"] = "synth";
    body["csv"] = synth_csv(cfg).string();
    body["rows"] = d.records.size();
    body["classes"] = classes_json(d.classes);
    body["counts"] = counts_json(d);
    std::ostringstream txt;
    txt << "synthetic dataset\n  rows " << d.records.size() << "\n  file "
        << synth_csv(cfg).string() << "\n  per-class counts:\n";
    for (const auto& [name, v] : body["counts"].items())
        txt << "    " << name << "  " << v.get<std::size_t>() << "\n";
    emit_report(cfg.data_dir, "synth_report", body, txt.str(), now_s() - t0, json_only);
}

void cmd_prepare(const RunConfig& cfg, bool json_only) {
    double t0 = now_s();
    std::vector<fs::path> paths;
    if (cfg.csv_paths.empty()) {
        if (!fs::exists(synth_csv(cfg)))
            throw DataError("no csv_paths configured and " + synth_csv(cfg).string() +
                            " does not exist");
        paths.push_back(synth_csv(cfg));
    } else {
        for (const auto& p : cfg.csv_paths) paths.emplace_back(p);
    }

    CsvOptions opts;
    opts.label_column = cfg.label_column;
    opts.benign_name = cfg.benign_label;
    opts.policy =
        cfg.schema_policy == "strict" ? SchemaPolicy::Strict : SchemaPolicy::Intersect;

    Dataset raw;
    try {
        raw = load_csv(paths, opts);
    } catch (const std::exception& e) {
        throw DataError(std::string("load: ") + e.what());
    }
    Dataset cleaned = clean(raw);
    if (cleaned.records.empty()) throw DataError("dataset is empty after cleaning");
    if (cleaned.benign_id() < 0)
        throw DataError("dataset has no '" + cfg.benign_label + "' class");

    Dataset balanced = balance_benign(cleaned, derive_seed(cfg.seed, kSeedBalance));

    SplitSpec split_spec;
    split_spec.train_fraction = cfg.train_fraction;
    split_spec.test_fraction = cfg.test_fraction;
    split_spec.val_fraction = cfg.val_fraction;
    split_spec.seed = derive_seed(cfg.seed, kSeedSplit);
    std::vector<std::string> warnings;
    SplitResult parts = split(balanced, split_spec, &warnings);

    json counts_pre_smote{{"train", counts_json(parts.train)},
                          {"test", counts_json(parts.test)},
                          {"val", counts_json(parts.val)}};

    SmoteConfig smote_cfg;
    smote_cfg.k_minority = cfg.smote_k;
    smote_cfg.m_danger = cfg.smote_m;
    smote_cfg.seed = derive_seed(cfg.seed, kSeedSmoteTrain);
    Dataset train = borderline_smote(parts.train, smote_cfg, &warnings);
    smote_cfg.seed = derive_seed(cfg.seed, kSeedSmoteVal);
    Dataset val = borderline_smote(parts.val, smote_cfg, &warnings);

    ForestParams fp;
    fp.n_trees = cfg.forest_trees;
    fp.max_depth = cfg.forest_max_depth;
    fp.min_samples_split = cfg.forest_min_samples_split;
    fp.max_features_per_split = cfg.forest_max_features;
    fp.seed = derive_seed(cfg.seed, kSeedForest);
    ForestModel forest = fit_forest(train, fp);
    ImportanceReport importances = mdi_importances(forest, &warnings);
    if (cfg.feature_k > train.schema.feature_count())
        throw ConfigError("feature_k=" + std::to_string(cfg.feature_k) + " exceeds the " +
                          std::to_string(train.schema.feature_count()) + " available features");
    std::vector<std::size_t> selected = select_top_k(importances, cfg.feature_k);

    StandardScaler standard = fit_standard(train);
    MinMaxScaler minmax = fit_minmax(train);

    fs::path dir(cfg.data_dir);
    fs::create_directories(dir);
    save_csv(train, dir / "train.csv");
    save_dataset_manifest(train, dir / "train.manifest.json", cfg.seed);
    save_csv(parts.test, dir / "test.csv");
    save_dataset_manifest(parts.test, dir / "test.manifest.json", cfg.seed);
    save_csv(val, dir / "val.csv");
    save_dataset_manifest(val, dir / "val.manifest.json", cfg.seed);

    json prep;
    prep["schema"] = {{"features", train.schema.feature_names},
                      {"label_column", train.schema.label_column}};
    json sel_names = json::array();
    for (std::size_t j : selected) sel_names.push_back(train.schema.feature_names[j]);
    prep["selected_features"] = {{"indices", selected}, {"names", sel_names}};
    prep["importance_scores"] = importances.scores;
    prep["importance_ranking"] = importances.ranking;
    prep["standard_scaler"] = json::parse(scaler_to_json(standard));
    prep["minmax_scaler"] = json::parse(scaler_to_json(minmax));
    prep["seed"] = cfg.seed;
    write_text(dir / "prepare.json", prep.dump(2) + "\n");

    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

    json body;
    body["command"] = "prepare";
    body["rows"] = {{"raw", raw.records.size()},
                    {"clean", cleaned.records.size()},
                    {"balanced", balanced.records.size()}};
    body["counts_pre_smote"] = counts_pre_smote;
    body["counts_post_smote"] = {{"train", counts_json(train)}, {"val", counts_json(val)}};
    body["selected_features"] = prep["selected_features"];
    body["warnings"] = warnings;

    std::ostringstream txt;
    txt << "prepared dataset pipeline\n";
    txt << "  raw rows " << raw.records.size() << ", clean " << cleaned.records.size()
        << ", balanced " << balanced.records.size() << "\n";
    txt << "  selected " << selected.size() << " features:";
    for (const auto& n : sel_names) txt << ' ' << n.get<std::string>();
    txt << "\n  post-SMOTE train counts:\n";
    for (const auto& [name, v] : body["counts_post_smote"]["train"].items())
        txt << "    " << name << "  " << v.get<std::size_t>() << "\n";
    emit_report(cfg.data_dir, "prepare_report", body, txt.str(), now_s() - t0, json_only);
}

namespace {

struct TrainedParts {
    Dataset train_sel, test_sel, val_sel;  // selected feature space
    Dataset held_full;                     // held-out class rows, full width
    bool has_holdout = false;
    Pipeline pipeline;
};

TrainedParts assemble_training_inputs(const RunConfig& cfg, const PreparedArtifacts& prep) {
    TrainedParts parts;
    Dataset train = prep.train, test = prep.test, val = prep.val;

    if (!cfg.holdout_class.empty()) {
        HoldoutResult ht = holdout_class(train, cfg.holdout_class);
        HoldoutResult he = holdout_class(test, cfg.holdout_class);
        HoldoutResult hv = holdout_class(val, cfg.holdout_class);
        train = std::move(ht.remaining);
        test = std::move(he.remaining);
        val = std::move(hv.remaining);
        parts.held_full = std::move(ht.held);
        for (auto& r : he.held.records) parts.held_full.records.push_back(std::move(r));
        for (auto& r : hv.held.records) parts.held_full.records.push_back(std::move(r));
        parts.has_holdout = true;
    }

    parts.pipeline.selected_features = prep.selected;
    parts.pipeline.standard = prep.standard_full.select(prep.selected);
    parts.pipeline.minmax = prep.minmax_full.select(prep.selected);
    parts.pipeline.selected_schema.label_column = train.schema.label_column;
    for (std::size_t j : prep.selected)
        parts.pipeline.selected_schema.feature_names.push_back(train.schema.feature_names[j]);

    parts.train_sel = select_features(train, prep.selected);
    parts.test_sel = select_features(test, prep.selected);
    parts.val_sel = select_features(val, prep.selected);
    return parts;
}

}  // namespace

void cmd_train(const RunConfig& cfg, bool json_only) {
    double t0 = now_s();
    PreparedArtifacts prep = load_prepared(cfg);
    TrainedParts parts;
    try {
        parts = assemble_training_inputs(cfg, prep);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }
    Dataset& train_sel = parts.train_sel;

    if (train_sel.benign_id() != 0) throw DataError("train split lost its benign class");

    MlpModel model = init_model(train_sel.schema.feature_count(), cfg.hidden_widths,
                                train_sel.classes, derive_seed(cfg.seed, kSeedMlpInit),
                                cfg.dropout);
    Matrix x_std = apply_standard(parts.pipeline.standard, to_matrix(train_sel));
    TrainingOutcome trained = train(model, x_std, to_labels(train_sel),
                                    initial_train_config(cfg));
    model = std::move(trained.final_model);

    // detector: fit on training normals, calibrate on validation normals
    std::vector<std::string> warnings;
    Matrix normal_train = apply_minmax(parts.pipeline.minmax, rows_of_class(train_sel, 0));
    LofConfig lof_cfg;
    lof_cfg.k = cfg.lof_k;
    lof_cfg.reference_cap = cfg.lof_reference_cap;
    lof_cfg.seed = derive_seed(cfg.seed, kSeedLof);
    LofModel lof;
    try {
        lof = LofModel::fit(normal_train, lof_cfg, &warnings);
    } catch (const std::invalid_argument& e) {
        throw DataError(std::string("lof: ") + e.what());
    }
    Matrix normal_val = apply_minmax(parts.pipeline.minmax, rows_of_class(parts.val_sel, 0));
    double theta = lof.calibrate_threshold(normal_val, cfg.target_fpr);

    // internal memory: reservoirs from the post-SMOTE training mix, the
    // normal ring from training normals, frozen test snapshot
    MemoryConfig mem_cfg;
    mem_cfg.reservoir_capacity = cfg.reservoir_r;
    mem_cfg.ring_capacity = cfg.ring_n;
    mem_cfg.seed = derive_seed(cfg.seed, kSeedMemory);
    mem_cfg.schema = train_sel.schema;
    mem_cfg.benign = train_sel.classes[0];
    MemoryStore memory(mem_cfg);
    for (const auto& cls : train_sel.classes) {
        if (cls.kind != LabelKind::Attack) continue;
        std::vector<FlowRecord> rows;
        for (const auto& r : train_sel.records)
            if (r.label == cls.id) rows.push_back(r);
        memory.store_attack_samples(cls, rows);
    }
    for (const auto& r : train_sel.records)
        if (r.label == 0) memory.store_normal(r);
    memory.snapshot_test_set(parts.test_sel, &warnings);

    EvalReport baseline = Engine::evaluate(model, lof, parts.pipeline, parts.test_sel);

    Engine::Init init{std::move(model),
                      std::move(lof),
                      std::move(memory),
                      parts.pipeline,
                      gate_config(cfg),
                      incremental_train_config(cfg),
                      cfg.eval_holdout_fraction,
                      baseline,
                      cfg.seed};
    Engine engine(std::move(init));
    fs::create_directories(cfg.state_dir);
    engine.save(cfg.state_dir);

    if (parts.has_holdout) {
        save_csv(parts.held_full, fs::path(cfg.state_dir) / "held.csv");
        save_dataset_manifest(parts.held_full, fs::path(cfg.state_dir) / "held.manifest.json",
                              cfg.seed);
    }

    // diagnostic rates for the detector, reported not asserted
    auto lof_rate_on = [&](const Dataset& d, bool attacks_only) {
        std::size_t n = 0, flagged = 0;
        for (const auto& r : d.records) {
            bool attack = r.label > 0;
            if (attacks_only != attack) continue;
            ++n;
            auto mm = apply_minmax(engine.pipeline().minmax, r.features);
            if (engine.lof().predict(mm).is_anomaly) ++flagged;
        }
        return std::pair<std::size_t, double>(
            n, n == 0 ? 0.0 : static_cast<double>(flagged) / static_cast<double>(n));
    };
    auto [n_attack_train, rate_attack_train] = lof_rate_on(train_sel, true);
    auto [n_attack_val, rate_attack_val] = lof_rate_on(parts.val_sel, true);
    auto [n_norm_val, achieved_val_fpr] = lof_rate_on(parts.val_sel, false);

    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

    json body;
    body["command"] = "train";
    body["state_dir"] = cfg.state_dir;
    body["classes"] = classes_json(train_sel.classes);
    body["holdout_class"] = cfg.holdout_class;
    body["baseline_report"] = json::parse(report_to_json(baseline));
    body["loss_curve"] = trained.loss_curve;
    body["lof"] = {{"k", cfg.lof_k},
                   {"threshold", theta},
                   {"reference_points", engine.lof().reference_count()},
                   {"attack_detection_rate_train", rate_attack_train},
                   {"attack_rows_train", n_attack_train},
                   {"attack_detection_rate_val", rate_attack_val},
                   {"attack_rows_val", n_attack_val},
                   {"achieved_val_fpr", achieved_val_fpr},
                   {"target_fpr", cfg.target_fpr}};
    body["warnings"] = warnings;

    std::ostringstream txt;
    txt << "initial training\n";
    txt << "  classes " << train_sel.classes.size();
    if (parts.has_holdout) txt << " (held out: " << cfg.holdout_class << ")";
    txt << "\n  final training loss "
        << (trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back()) << "\n";
    txt << "  lof threshold " << theta << ", achieved val fpr " << pct(achieved_val_fpr)
        << " (target " << pct(cfg.target_fpr) << ")\n";
    txt << "  lof attack detection: train " << pct(rate_attack_train) << ", val "
        << pct(rate_attack_val) << "\n";
    txt << "baseline evaluation on frozen test set\n"
        << render_eval_report(body["baseline_report"], "  ");
    emit_report(cfg.state_dir, "train_report", body, txt.str(), now_s() - t0, json_only);
}

namespace {

json outcome_json(const UpdateOutcome& outcome) {
    return json{{"accepted", outcome.accepted},
                {"reason", outcome.reason},
                {"new_class_name", outcome.new_class_name},
                {"new_class_recall", outcome.new_class_recall},
                {"version_after", outcome.version_after},
                {"old_report", json::parse(report_to_json(outcome.old_report))},
                {"new_report", json::parse(report_to_json(outcome.new_report))}};
}

json recall_delta_points(const EvalReport& old_r, const EvalReport& new_r) {
    json deltas = json::object();
    for (const auto& [name, old_recall] : old_r.per_class_recall) {
        auto it = new_r.per_class_recall.find(name);
        if (it != new_r.per_class_recall.end())
            deltas[name] = (it->second - old_recall) * 100.0;
    }
    return deltas;
}

}  // namespace

void cmd_scenario_holdout(const RunConfig& cfg, bool json_only) {
    double t0 = now_s();
    if (cfg.holdout_class.empty())
        throw ConfigError("scenario-holdout requires holdout_class in the config");
    fs::path state(cfg.state_dir);
    if (!fs::exists(state / "held.csv"))
        throw DataError("no held.csv under " + state.string() + " (run train first)");

    Engine engine = Engine::load(state);
    FileEventSink sink(state / "events.ndjson");
    engine.set_event_sink(&sink);

    Dataset held = load_csv_with_manifest(state / "held.csv", state / "held.manifest.json");
    std::vector<std::size_t> order(held.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng stream_rng(derive_seed(cfg.seed, kSeedStream));
    stream_rng.shuffle(order);

    std::size_t known_attack = 0, normal = 0, anomaly = 0, streamed = 0;
    bool updated = false;
    UpdateOutcome outcome;
    std::size_t resume_at = order.size();
    for (std::size_t i = 0; i < order.size(); ++i) {
        Decision d = engine.process(held.records[order[i]]);
        ++streamed;
        switch (d.kind) {
            case Decision::Kind::KnownAttack: ++known_attack; break;
            case Decision::Kind::Normal: ++normal; break;
            case Decision::Kind::AnomalySuspected: ++anomaly; break;
        }
        if (engine.update_pending()) {
            outcome = engine.run_incremental_update();
            updated = true;
            resume_at = i + 1;
            break;
        }
    }

    // replay the remainder against the (possibly) updated model
    std::size_t post_rows = 0, post_new_class = 0;
    int new_id = static_cast<int>(outcome.old_report.classes.size());
    if (updated && outcome.accepted) {
        for (std::size_t i = resume_at; i < order.size(); ++i) {
            Decision d = engine.process(held.records[order[i]]);
            ++post_rows;
            if (d.kind == Decision::Kind::KnownAttack && d.label == new_id) ++post_new_class;
        }
    }

    if (updated) {
        engine.save(state);
        if (outcome.accepted) {
            save_csv(outcome.augmented_test, state / "augmented_test.csv");
            save_dataset_manifest(outcome.augmented_test, state / "augmented_test.manifest.json",
                                  cfg.seed);
            Dataset new_rows;
            new_rows.schema = outcome.train_batch.schema;
            new_rows.classes = outcome.train_batch.classes;
            for (const auto& r : outcome.train_batch.records)
                if (r.label == new_id) new_rows.records.push_back(r);
            save_csv(new_rows, state / "new_class_train.csv");
            save_dataset_manifest(new_rows, state / "new_class_train.manifest.json", cfg.seed);
        }
    }

    std::size_t benign_routed = normal + anomaly;
    json body;
    body["command"] = "scenario-holdout";
    body["held_class"] = cfg.holdout_class;
    body["held_rows"] = held.records.size();
    body["rows_streamed_pre_update"] = streamed;
    body["classifier_benign_fraction"] =
        streamed == 0 ? 0.0 : static_cast<double>(benign_routed) / static_cast<double>(streamed);
    body["lof_anomaly_rate_on_benign_routed"] =
        benign_routed == 0 ? 0.0
                           : static_cast<double>(anomaly) / static_cast<double>(benign_routed);
    body["update_triggered"] = updated;
    if (updated) {
        body["update"] = outcome_json(outcome);
        body["recall_delta_points"] =
            recall_delta_points(outcome.old_report, outcome.new_report);
        body["post_update_rows"] = post_rows;
        body["post_update_new_class_rate"] =
            post_rows == 0 ? 0.0
                           : static_cast<double>(post_new_class) / static_cast<double>(post_rows);
    }

    std::ostringstream txt;
    txt << "holdout scenario: " << cfg.holdout_class << "\n";
    txt << "  streamed " << streamed << " of " << held.records.size() << " held rows\n";
    txt << "  classifier routed " << pct(body["classifier_benign_fraction"].get<double>())
        << " to the benign path\n";
    txt << "  detector flagged " << pct(body["lof_anomaly_rate_on_benign_routed"].get<double>())
        << " of benign-routed rows\n";
    if (updated) {
        txt << "  incremental update: " << (outcome.accepted ? "ACCEPTED" : "REJECTED") << " ("
            << outcome.reason << ")\n";
        txt << "  new class " << outcome.new_class_name << " recall "
            << pct(outcome.new_class_recall) << "\n";
        txt << "  recall delta points by class:\n";
        for (const auto& [name, v] : body["recall_delta_points"].items()) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%+.2f", v.get<double>());
            txt << "    " << name << "  " << buf << "\n";
        }
        if (outcome.accepted)
            txt << "  post-update: " << pct(body["post_update_new_class_rate"].get<double>())
                << " of remaining rows classified as the new class\n";
        txt << "evaluation after update\n" << render_eval_report(body["update"]["new_report"], "  ");
    }
    emit_report(cfg.state_dir, "scenario_holdout", body, txt.str(), now_s() - t0, json_only);

    if (!updated)
        throw ExpectationError(
            "holdout scenario never reached the retrain trigger; lower trigger_m or stream more rows");
    if (!outcome.accepted)
        throw ExpectationError("holdout scenario update was rejected: " + outcome.reason);
}

void cmd_scenario_false_alarm(const RunConfig& cfg, bool json_only) {
    double t0 = now_s();
    fs::path state(cfg.state_dir);
    Engine engine = Engine::load(state);
    FileEventSink sink(state / "events_false_alarm.ndjson");
    engine.set_event_sink(&sink);

    // benign rows from the training split masquerade as a new attack class
    Dataset train = load_csv_with_manifest(fs::path(cfg.data_dir) / "train.csv",
                                           fs::path(cfg.data_dir) / "train.manifest.json");
    std::vector<std::size_t> benign_rows;
    for (std::size_t i = 0; i < train.records.size(); ++i)
        if (train.records[i].label == train.benign_id()) benign_rows.push_back(i);
    if (benign_rows.size() < cfg.trigger_m)
        throw DataError("not enough benign rows to force " + std::to_string(cfg.trigger_m) +
                        " anomalies");
    Rng rng(derive_seed(cfg.seed, kSeedForce));
    auto picks = rng.sample_without_replacement(benign_rows.size(), cfg.trigger_m);

    // live predictions before the attempt, for the bitwise liveness check
    Matrix frozen_std = apply_standard(engine.pipeline().standard,
                                       to_matrix(engine.memory().frozen_test_set()));
    Matrix before = forward(*engine.classifier_snapshot(), frozen_std, ForwardMode::Infer);

    for (std::size_t p : picks)
        engine.process_forcing_anomaly(train.records[benign_rows[p]]);
    UpdateOutcome outcome = engine.run_incremental_update();

    Matrix after = forward(*engine.classifier_snapshot(), frozen_std, ForwardMode::Infer);
    bool unchanged = outcome.accepted ? false : before.data == after.data;

    json body;
    body["command"] = "scenario-false-alarm";
    body["benign_rows_forced"] = cfg.trigger_m;
    body["update"] = outcome_json(outcome);
    body["recall_delta_points"] = recall_delta_points(outcome.old_report, outcome.new_report);
    body["live_predictions_unchanged"] = unchanged;

    std::ostringstream txt;
    txt << "false-alarm scenario\n";
    txt << "  forced " << cfg.trigger_m << " benign rows through the anomaly path\n";
    txt << "  incremental update: " << (outcome.accepted ? "ACCEPTED" : "REJECTED") << "\n";
    txt << "  gate evidence: " << outcome.reason << "\n";
    txt << "  live predictions unchanged: " << (unchanged ? "yes" : "no") << "\n";
    txt << "  recall delta points by class (candidate vs baseline):\n";
    for (const auto& [name, v] : body["recall_delta_points"].items()) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%+.2f", v.get<double>());
        txt << "    " << name << "  " << buf << "\n";
    }
    emit_report(cfg.state_dir, "scenario_false_alarm", body, txt.str(), now_s() - t0,
                json_only);

    if (outcome.accepted)
        throw ExpectationError("false-alarm scenario expected a gate rejection but the update "
                               "was accepted");
    if (!unchanged)
        throw ExpectationError("live model changed after a rejected update");
}

void cmd_compare_offline(const RunConfig& cfg, bool json_only) {
    double t0 = now_s();
    fs::path state(cfg.state_dir);
    if (!fs::exists(state / "augmented_test.csv"))
        throw DataError("no augmented test set under " + state.string() +
                        " (run scenario-holdout to acceptance first)");

    Engine engine = Engine::load(state);
    Dataset augmented = load_csv_with_manifest(state / "augmented_test.csv",
                                               state / "augmented_test.manifest.json");
    Dataset new_rows = load_csv_with_manifest(state / "new_class_train.csv",
                                              state / "new_class_train.manifest.json");

    // offline baseline: retrain a forest from scratch on old train + new class
    PreparedArtifacts prep = load_prepared(cfg);
    TrainedParts parts = assemble_training_inputs(cfg, prep);
    Dataset offline_train = parts.train_sel;
    offline_train.classes = new_rows.classes;  // includes the accepted new class
    for (const auto& r : new_rows.records)
        if (r.label >= 0) offline_train.records.push_back(r);

    ForestParams fp;
    fp.n_trees = cfg.forest_trees;
    fp.max_depth = cfg.forest_max_depth;
    fp.min_samples_split = cfg.forest_min_samples_split;
    fp.max_features_per_split = cfg.forest_max_features;
    fp.seed = derive_seed(cfg.seed, kSeedOffline);
    ForestModel forest = fit_forest(offline_train, fp);

    // classifier-only comparison on the identical augmented test rows
    auto model = engine.classifier_snapshot();
    Matrix x = to_matrix(augmented);
    Matrix x_std = apply_standard(engine.pipeline().standard, x);
    std::vector<int> mlp_preds = predict_batch(*model, x_std);
    std::vector<int> rf_preds(augmented.records.size());
    for (std::size_t i = 0; i < augmented.records.size(); ++i)
        rf_preds[i] = predict_forest(forest, x.row(i));

    std::vector<int> labels = to_labels(augmented);
    EvalReport mlp_report = compute_metrics(mlp_preds, labels, model->output_classes);
    EvalReport rf_report = compute_metrics(rf_preds, labels, model->output_classes);

    json body;
    body["command"] = "compare-offline";
    body["test_rows"] = augmented.records.size();
    body["test_content_hash"] = dataset_content_hash(augmented);
    body["incremental_mlp"] = json::parse(report_to_json(mlp_report));
    body["offline_forest"] = json::parse(report_to_json(rf_report));

    auto table_row = [](const char* name, const EvalReport& r) {
        std::ostringstream os;
        os << "  " << name << "  accuracy " << pct(r.accuracy) << "  precision "
           << pct(r.precision) << "  recall " << pct(r.recall) << "  f1 " << pct(r.f1) << "\n";
        return os.str();
    };
    std::ostringstream txt;
    txt << "incremental vs offline retraining on the augmented test set\n";
    txt << "  rows " << augmented.records.size() << " (content hash "
        << body["test_content_hash"].get<std::uint64_t>() << ")\n";
    txt << table_row("incremental mlp ", mlp_report);
    txt << table_row("offline forest  ", rf_report);
    emit_report(cfg.state_dir, "compare_offline", body, txt.str(), now_s() - t0, json_only);
}

void cmd_report(const RunConfig& cfg, const std::string& name, bool json_only) {
    static const std::map<std::string, std::string> known = {
        {"synth", "synth_report"},
        {"prepare", "prepare_report"},
        {"train", "train_report"},
        {"scenario-holdout", "scenario_holdout"},
        {"scenario-false-alarm", "scenario_false_alarm"},
        {"compare-offline", "compare_offline"},
    };
    auto it = known.find(name);
    std::string file = it == known.end() ? name : it->second;
    for (const fs::path dir : {fs::path(cfg.state_dir), fs::path(cfg.data_dir)}) {
        fs::path jpath = dir / (file + ".json");
        if (!fs::exists(jpath)) continue;
        if (json_only) {
            std::cout << json::parse(read_text(jpath)).dump() << '\n';
        } else {
            fs::path tpath = dir / (file + ".txt");
            if (fs::exists(tpath))
                std::cout << read_text(tpath);
            else
                std::cout << json::parse(read_text(jpath)).dump(2) << '\n';
        }
        return;
    }
    throw DataError("no report named '" + name + "' under " + cfg.state_dir + " or " +
                    cfg.data_dir);
}

}  // namespace nids::cli
