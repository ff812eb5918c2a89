#include "nids/memory_store.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "nids/csv.hpp"

namespace nids {

MemoryStore::MemoryStore(MemoryConfig cfg)
    : cfg_(std::move(cfg)), rng_(derive_seed(cfg_.seed, 0x6d656d6f7279ULL)) {
    if (cfg_.reservoir_capacity == 0 || cfg_.ring_capacity == 0)
        throw std::invalid_argument("memory: capacities must be positive");
    register_class(cfg_.benign);
}

void MemoryStore::register_class(const ClassLabel& label) {
    for (const auto& c : classes_)
        if (c.id == label.id || c.name == label.name)
            throw std::invalid_argument("memory: class '" + label.name + "' already registered");
    classes_.push_back(label);
}

void MemoryStore::snapshot_test_set(const Dataset& d, std::vector<std::string>* warnings) {
    if (frozen_)
        throw std::logic_error("memory: test set already snapshotted; reset first");
    if (d.records.empty() && warnings)
        warnings->push_back("memory: snapshotting an empty test set");
    frozen_ = d;  // deep copy
}

const Dataset& MemoryStore::frozen_test_set() const {
    if (!frozen_) throw std::logic_error("memory: no test snapshot");
    return *frozen_;
}

std::uint64_t MemoryStore::frozen_test_hash() const {
    return dataset_content_hash(frozen_test_set());
}

void MemoryStore::reset_snapshot() { frozen_.reset(); }

void MemoryStore::store_attack_samples(const ClassLabel& label,
                                       const std::vector<FlowRecord>& records) {
    if (label.kind != LabelKind::Attack)
        throw std::invalid_argument("memory: reservoirs hold attack classes only");
    bool known = false;
    for (const auto& c : classes_)
        if (c.id == label.id && c.name == label.name) known = true;
    if (!known) register_class(label);

    Reservoir& res = reservoirs_[label.id];
    for (const auto& r : records) {
        ++res.seen;
        if (res.samples.size() < cfg_.reservoir_capacity) {
            res.samples.push_back(r);
        } else {
            // algorithm R: replace a uniformly random slot with probability R/seen
            std::uint64_t j = rng_.next_u64() % res.seen;
            if (j < cfg_.reservoir_capacity) res.samples[static_cast<std::size_t>(j)] = r;
        }
    }
}

std::size_t MemoryStore::reservoir_size(int class_id) const {
    auto it = reservoirs_.find(class_id);
    return it == reservoirs_.end() ? 0 : it->second.samples.size();
}

std::uint64_t MemoryStore::reservoir_seen(int class_id) const {
    auto it = reservoirs_.find(class_id);
    return it == reservoirs_.end() ? 0 : it->second.seen;
}

const std::vector<FlowRecord>& MemoryStore::reservoir_contents(int class_id) const {
    auto it = reservoirs_.find(class_id);
    if (it == reservoirs_.end()) throw std::invalid_argument("memory: no reservoir for class");
    return it->second.samples;
}

void MemoryStore::store_normal(const FlowRecord& r) {
    if (ring_.size() < cfg_.ring_capacity) {
        ring_.push_back(r);
    } else {
        ring_[ring_next_] = r;  // overwrite the oldest entry
        ring_next_ = (ring_next_ + 1) % cfg_.ring_capacity;
    }
}

std::size_t MemoryStore::ring_size() const { return ring_.size(); }

std::vector<FlowRecord> MemoryStore::ring_contents() const {
    std::vector<FlowRecord> out;
    out.reserve(ring_.size());
    if (ring_.size() < cfg_.ring_capacity) {
        out = ring_;
    } else {
        for (std::size_t i = 0; i < ring_.size(); ++i)
            out.push_back(ring_[(ring_next_ + i) % ring_.size()]);
    }
    return out;
}

std::size_t MemoryStore::store_anomaly(const FlowRecord& r, double lof_score) {
    StoredAnomaly a;
    a.record = r;
    a.lof_score = lof_score;
    a.arrival = anomaly_arrivals_++;
    anomalies_.push_back(std::move(a));
    return anomalies_.size();
}

MemoryStore::IncrementalBatch MemoryStore::draw_incremental_batch(const ClassLabel& new_label,
                                                                  double eval_holdout_fraction) {
    if (anomalies_.empty()) throw std::logic_error("memory: anomaly buffer is empty");
    if (ring_.empty()) throw std::logic_error("memory: normal pool is empty");
    bool any_reservoir = false;
    for (const auto& [id, res] : reservoirs_)
        if (!res.samples.empty()) any_reservoir = true;
    if (!any_reservoir) throw std::logic_error("memory: no attack reservoir populated");
    if (!(eval_holdout_fraction >= 0.0 && eval_holdout_fraction < 1.0))
        throw std::invalid_argument("memory: eval_holdout_fraction must lie in [0,1)");

    IncrementalBatch batch;
    batch.train.schema = cfg_.schema;
    batch.train.classes = classes_;
    ClassLabel added = new_label;
    added.id = static_cast<int>(classes_.size());
    batch.train.classes.push_back(added);

    // withhold a slice of the buffer for candidate evaluation
    std::size_t n_eval = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(anomalies_.size()) * eval_holdout_fraction,
                         static_cast<double>(anomalies_.size() - 1)));
    std::vector<std::size_t> order(anomalies_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng_.shuffle(order);
    std::vector<bool> held(anomalies_.size(), false);
    for (std::size_t i = 0; i < n_eval; ++i) held[order[i]] = true;

    std::size_t n_train_anoms = anomalies_.size() - n_eval;
    for (std::size_t i = 0; i < anomalies_.size(); ++i) {
        FlowRecord r = anomalies_[i].record;
        r.label = added.id;
        if (held[i])
            batch.eval_heldaside.push_back(std::move(r));
        else
            batch.train.records.push_back(std::move(r));
    }

    // per old class: min(target, available) rehearsal rows, target = new-class rows
    std::size_t target = n_train_anoms;
    auto draw_from = [&](const std::vector<FlowRecord>& pool, int label_id) {
        if (pool.empty()) return;
        if (pool.size() <= target) {
            for (const auto& r : pool) {
                FlowRecord copy = r;
                copy.label = label_id;
                batch.train.records.push_back(std::move(copy));
            }
        } else {
            auto picks = rng_.sample_without_replacement(pool.size(), target);
            std::sort(picks.begin(), picks.end());
            for (std::size_t p : picks) {
                FlowRecord copy = pool[p];
                copy.label = label_id;
                batch.train.records.push_back(std::move(copy));
            }
        }
    };
    for (const auto& [id, res] : reservoirs_) draw_from(res.samples, id);
    draw_from(ring_contents(), cfg_.benign.id);
    return batch;
}

void MemoryStore::drain_anomalies_into_reservoir(const ClassLabel& new_label) {
    std::vector<FlowRecord> records;
    records.reserve(anomalies_.size());
    for (auto& a : anomalies_) records.push_back(std::move(a.record));
    anomalies_.clear();
    store_attack_samples(new_label, records);
}

void MemoryStore::discard_anomalies() { anomalies_.clear(); }

namespace {

nlohmann::json record_to_json(const FlowRecord& r) {
    return {{"features", r.features}, {"label", r.label}};
}

FlowRecord record_from_json(const nlohmann::json& j) {
    FlowRecord r;
    r.features = j.at("features").get<std::vector<double>>();
    r.label = j.at("label").get<int>();
    return r;
}

}  // namespace

void MemoryStore::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);

    nlohmann::json manifest;
    manifest["reservoir_capacity"] = cfg_.reservoir_capacity;
    manifest["ring_capacity"] = cfg_.ring_capacity;
    manifest["seed"] = cfg_.seed;
    manifest["rng_state"] = rng_.save_state();
    manifest["schema"] = {{"features", cfg_.schema.feature_names},
                          {"label_column", cfg_.schema.label_column}};
    manifest["benign"] = {{"name", cfg_.benign.name}, {"id", cfg_.benign.id}};
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : classes_)
        classes.push_back({{"name", c.name},
                           {"id", c.id},
                           {"kind", c.kind == LabelKind::Benign ? "benign" : "attack"}});
    manifest["classes"] = std::move(classes);

    std::vector<int> reservoir_ids;
    for (const auto& [id, res] : reservoirs_) {
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : res.samples) rows.push_back(record_to_json(r));
        nlohmann::json rj{{"class_id", id}, {"seen", res.seen}, {"rows", std::move(rows)}};
        std::ofstream out(dir / ("reservoir_" + std::to_string(id) + ".json"));
        out << rj.dump() << '\n';
        reservoir_ids.push_back(id);
    }
    manifest["reservoir_ids"] = reservoir_ids;

    {
        nlohmann::json ring;
        ring["next"] = ring_next_;
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& r : ring_) rows.push_back(record_to_json(r));
        ring["rows"] = std::move(rows);
        std::ofstream out(dir / "normal_ring.json");
        out << ring.dump() << '\n';
    }
    {
        nlohmann::json anoms = nlohmann::json::array();
        for (const auto& a : anomalies_) {
            nlohmann::json e = record_to_json(a.record);
            e["lof_score"] = a.lof_score;
            e["arrival"] = a.arrival;
            anoms.push_back(std::move(e));
        }
        nlohmann::json wrap{{"arrivals", anomaly_arrivals_}, {"rows", std::move(anoms)}};
        std::ofstream out(dir / "anomaly_buffer.json");
        out << wrap.dump() << '\n';
    }
    manifest["has_frozen_test"] = frozen_.has_value();
    if (frozen_) {
        save_csv(*frozen_, dir / "frozen_test.csv");
        save_dataset_manifest(*frozen_, dir / "frozen_test.manifest.json", cfg_.seed);
    }
    std::ofstream out(dir / "memory.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("memory: cannot write manifest under " + dir.string());
}

MemoryStore MemoryStore::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "memory.json");
    if (!in) throw std::runtime_error("memory: cannot open manifest under " + dir.string());
    nlohmann::json manifest = nlohmann::json::parse(in);

    MemoryConfig cfg;
    cfg.reservoir_capacity = manifest.at("reservoir_capacity").get<std::size_t>();
    cfg.ring_capacity = manifest.at("ring_capacity").get<std::size_t>();
    cfg.seed = manifest.at("seed").get<std::uint64_t>();
    cfg.schema.feature_names =
        manifest.at("schema").at("features").get<std::vector<std::string>>();
    cfg.schema.label_column = manifest.at("schema").at("label_column").get<std::string>();

    std::vector<ClassLabel> classes;
    for (const auto& e : manifest.at("classes")) {
        ClassLabel c;
        c.name = e.at("name").get<std::string>();
        c.id = e.at("id").get<int>();
        c.kind = e.at("kind") == "benign" ? LabelKind::Benign : LabelKind::Attack;
        classes.push_back(std::move(c));
    }
    for (const auto& c : classes)
        if (c.kind == LabelKind::Benign) cfg.benign = c;

    MemoryStore store(cfg);
    store.rng_.restore_state(manifest.at("rng_state").get<std::string>());
    for (const auto& c : classes)
        if (c.kind != LabelKind::Benign) store.register_class(c);

    for (int id : manifest.at("reservoir_ids").get<std::vector<int>>()) {
        std::ifstream rin(dir / ("reservoir_" + std::to_string(id) + ".json"));
        nlohmann::json rj = nlohmann::json::parse(rin);
        Reservoir res;
        res.seen = rj.at("seen").get<std::uint64_t>();
        for (const auto& e : rj.at("rows")) res.samples.push_back(record_from_json(e));
        store.reservoirs_[id] = std::move(res);
    }
    {
        std::ifstream rin(dir / "normal_ring.json");
        nlohmann::json rj = nlohmann::json::parse(rin);
        store.ring_next_ = rj.at("next").get<std::size_t>();
        for (const auto& e : rj.at("rows")) store.ring_.push_back(record_from_json(e));
    }
    {
        std::ifstream ain(dir / "anomaly_buffer.json");
        nlohmann::json aj = nlohmann::json::parse(ain);
        store.anomaly_arrivals_ = aj.at("arrivals").get<std::uint64_t>();
        for (const auto& e : aj.at("rows")) {
            StoredAnomaly a;
            a.record = record_from_json(e);
            a.lof_score = e.at("lof_score").get<double>();
            a.arrival = e.at("arrival").get<std::uint64_t>();
            store.anomalies_.push_back(std::move(a));
        }
    }
    if (manifest.at("has_frozen_test").get<bool>()) {
        store.frozen_ = load_csv_with_manifest(dir / "frozen_test.csv",
                                               dir / "frozen_test.manifest.json");
    }
    return store;
}

}  // namespace nids
