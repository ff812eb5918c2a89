#include "nids/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "nids/rng.hpp"

namespace nids {

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;

std::uint64_t record_hash(const FlowRecord& r) {
    std::uint64_t h = kFnvOffset;
    for (double v : r.features) {
        double canon = v == 0.0 ? 0.0 : v;  // fold -0.0 into +0.0
        h = fnv1a(h, &canon, sizeof(canon));
    }
    h = fnv1a(h, &r.label, sizeof(r.label));
    return h;
}

bool records_equal(const FlowRecord& a, const FlowRecord& b) {
    return a.label == b.label && a.features == b.features;
}

}  // namespace

std::uint64_t FeatureSchema::hash() const {
    std::uint64_t h = kFnvOffset;
    for (const auto& n : feature_names) {
        h = fnv1a(h, n.data(), n.size());
        h = fnv1a(h, "\x1f", 1);
    }
    h = fnv1a(h, label_column.data(), label_column.size());
    return h;
}

void FeatureSchema::validate() const {
    std::set<std::string> seen;
    for (const auto& n : feature_names) {
        if (!seen.insert(n).second)
            throw std::invalid_argument("schema: duplicate feature name '" + n + "'");
    }
    if (seen.count(label_column))
        throw std::invalid_argument("schema: label column '" + label_column + "' is also a feature");
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(classes.size(), 0);
    for (const auto& r : records) {
        if (r.label >= 0 && static_cast<std::size_t>(r.label) < counts.size()) ++counts[r.label];
    }
    return counts;
}

std::size_t Dataset::count_of(int class_id) const {
    std::size_t c = 0;
    for (const auto& r : records)
        if (r.label == class_id) ++c;
    return c;
}

int Dataset::benign_id() const {
    for (const auto& c : classes)
        if (c.kind == LabelKind::Benign) return c.id;
    return -1;
}

const ClassLabel* Dataset::find_class(const std::string& name) const {
    for (const auto& c : classes)
        if (c.name == name) return &c;
    return nullptr;
}

void Dataset::validate() const {
    schema.validate();
    int benign_count = 0;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i].id != static_cast<int>(i))
            throw std::invalid_argument("dataset: class ids are not dense");
        if (classes[i].kind == LabelKind::Benign) ++benign_count;
    }
    if (benign_count > 1) throw std::invalid_argument("dataset: multiple benign classes");
    for (const auto& r : records) {
        if (r.features.size() != schema.feature_count())
            throw std::invalid_argument("dataset: record width does not match schema");
        if (r.label >= static_cast<int>(classes.size()))
            throw std::invalid_argument("dataset: record label outside class map");
    }
}

void SplitSpec::validate() const {
    auto in_open = [](double f) { return f > 0.0 && f < 1.0; };
    if (!in_open(train_fraction) || !in_open(test_fraction) || !in_open(val_fraction))
        throw std::invalid_argument("split: fractions must lie in (0,1)");
    if (std::abs(train_fraction + test_fraction + val_fraction - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
}

void SynthSpec::validate() const {
    if (n_classes == 0 || dims == 0)
        throw std::invalid_argument("synth: n_classes and dims must be positive");
    if (class_centers.size() != n_classes || class_spreads.size() != n_classes)
        throw std::invalid_argument("synth: one center and spread per class required");
    for (const auto& c : class_centers)
        if (c.size() != dims) throw std::invalid_argument("synth: center length != dims");
    for (double s : class_spreads)
        if (!(s > 0.0)) throw std::invalid_argument("synth: spreads must be positive");
    for (std::size_t d : informative_dims)
        if (d >= dims) throw std::invalid_argument("synth: informative dim out of range");
    for (std::size_t i = 0; i < n_classes; ++i)
        for (std::size_t j = i + 1; j < n_classes; ++j)
            if (class_centers[i] == class_centers[j])
                throw std::invalid_argument("synth: class centers must be distinct");
}

Dataset clean(const Dataset& d) {
    Dataset out;
    out.schema = d.schema;
    out.classes = d.classes;
    out.records.reserve(d.records.size());
    std::unordered_multimap<std::uint64_t, std::size_t> seen;  // hash -> index in out.records
    for (const auto& r : d.records) {
        if (r.defect) continue;
        bool finite = true;
        for (double v : r.features) {
            if (!std::isfinite(v)) {
                finite = false;
                break;
            }
        }
        if (!finite) continue;
        std::uint64_t h = record_hash(r);
        auto [lo, hi] = seen.equal_range(h);
        bool dup = false;
        for (auto it = lo; it != hi; ++it) {
            if (records_equal(out.records[it->second], r)) {
                dup = true;
                break;
            }
        }
        if (dup) continue;
        seen.emplace(h, out.records.size());
        out.records.push_back(r);
    }
    return out;
}

Dataset balance_benign(const Dataset& d, std::uint64_t seed) {
    int benign = d.benign_id();
    if (benign < 0) throw std::invalid_argument("balance: dataset has no benign class");
    auto counts = d.class_counts();
    std::size_t largest_attack = 0;
    bool has_attack = false;
    for (const auto& c : d.classes) {
        if (c.kind == LabelKind::Attack && counts[c.id] > 0) {
            has_attack = true;
            largest_attack = std::max(largest_attack, counts[c.id]);
        }
    }
    if (!has_attack) throw std::invalid_argument("balance: dataset has no attack rows");
    if (counts[benign] <= largest_attack) return d;  // no-op branch

    std::vector<std::size_t> benign_rows;
    for (std::size_t i = 0; i < d.records.size(); ++i)
        if (d.records[i].label == benign) benign_rows.push_back(i);

    Rng rng(derive_seed(seed, 0x62616c616e636531ULL));
    auto pick = rng.sample_without_replacement(benign_rows.size(), largest_attack);
    std::vector<bool> keep_benign(d.records.size(), false);
    for (std::size_t p : pick) keep_benign[benign_rows[p]] = true;

    Dataset out;
    out.schema = d.schema;
    out.classes = d.classes;
    out.records.reserve(d.records.size() - (counts[benign] - largest_attack));
    for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (d.records[i].label == benign && !keep_benign[i]) continue;
        out.records.push_back(d.records[i]);
    }
    return out;
}

SplitResult split(const Dataset& d, const SplitSpec& spec, std::vector<std::string>* warnings) {
    spec.validate();
    SplitResult res;
    for (Dataset* part : {&res.train, &res.test, &res.val}) {
        part->schema = d.schema;
        part->classes = d.classes;
    }
    // 0 = train, 1 = test, 2 = val
    std::vector<int> assignment(d.records.size(), 0);

    for (const auto& cls : d.classes) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < d.records.size(); ++i)
            if (d.records[i].label == cls.id) rows.push_back(i);
        if (rows.empty()) continue;
        if (rows.size() < 3) {
            if (warnings)
                warnings->push_back("split: class '" + cls.name + "' has " +
                                    std::to_string(rows.size()) +
                                    " rows; all assigned to train");
            for (std::size_t i : rows) assignment[i] = 0;
            continue;
        }
        // largest-remainder apportionment keeps every part within +/-1 of its share
        const double fracs[3] = {spec.train_fraction, spec.test_fraction, spec.val_fraction};
        std::size_t n = rows.size();
        std::size_t sizes[3];
        double rem[3];
        std::size_t assigned = 0;
        for (int p = 0; p < 3; ++p) {
            double share = fracs[p] * static_cast<double>(n);
            sizes[p] = static_cast<std::size_t>(std::floor(share));
            rem[p] = share - std::floor(share);
            assigned += sizes[p];
        }
        while (assigned < n) {
            int best = 0;
            for (int p = 1; p < 3; ++p)
                if (rem[p] > rem[best]) best = p;
            ++sizes[best];
            rem[best] = -1.0;
            ++assigned;
        }
        Rng rng(derive_seed(spec.seed, 0x73706c6974ULL + static_cast<std::uint64_t>(cls.id)));
        rng.shuffle(rows);
        std::size_t cursor = 0;
        for (int p = 0; p < 3; ++p)
            for (std::size_t k = 0; k < sizes[p]; ++k) assignment[rows[cursor++]] = p;
    }

    for (std::size_t i = 0; i < d.records.size(); ++i) {
        if (d.records[i].label < 0) continue;  // unlabeled rows are not split
        Dataset* part = assignment[i] == 0 ? &res.train : assignment[i] == 1 ? &res.test : &res.val;
        part->records.push_back(d.records[i]);
    }
    return res;
}

HoldoutResult holdout_class(const Dataset& d, const std::string& label_name) {
    const ClassLabel* cls = d.find_class(label_name);
    if (cls == nullptr || d.count_of(cls->id) == 0)
        throw std::invalid_argument("holdout: unknown class '" + label_name + "'");
    if (cls->kind == LabelKind::Benign)
        throw std::invalid_argument("holdout: cannot hold out the benign class");

    HoldoutResult res;
    res.held_label = *cls;
    res.id_map.assign(d.classes.size(), -1);
    int next = 0;
    for (const auto& c : d.classes) {
        if (c.id == cls->id) continue;
        res.id_map[c.id] = next;
        ClassLabel remapped = c;
        remapped.id = next;
        res.remaining.classes.push_back(remapped);
        ++next;
    }
    res.remaining.schema = d.schema;
    res.held.schema = d.schema;
    ClassLabel held_as_zero = *cls;
    held_as_zero.id = 0;
    res.held.classes.push_back(held_as_zero);

    for (const auto& r : d.records) {
        if (r.label == cls->id) {
            FlowRecord h = r;
            h.label = 0;
            res.held.records.push_back(std::move(h));
        } else {
            FlowRecord m = r;
            if (m.label >= 0) m.label = res.id_map[m.label];
            res.remaining.records.push_back(std::move(m));
        }
    }
    return res;
}

Dataset synth_generate(const SynthSpec& spec) {
    spec.validate();
    Dataset out;
    out.schema.label_column = "Label";
    out.schema.feature_names.reserve(spec.dims);
    for (std::size_t j = 0; j < spec.dims; ++j)
        out.schema.feature_names.push_back("f" + std::to_string(j));

    std::vector<bool> informative(spec.dims, false);
    for (std::size_t j : spec.informative_dims) informative[j] = true;

    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        ClassLabel label;
        label.id = static_cast<int>(c);
        if (c == 0) {
            label.name = "Benign";
            label.kind = LabelKind::Benign;
        } else {
            label.name = "synth-attack-" + std::to_string(c);
            label.kind = LabelKind::Attack;
        }
        out.classes.push_back(label);
    }

    for (std::size_t c = 0; c < spec.n_classes; ++c) {
        Rng rng(derive_seed(spec.seed, 0x73796e7468ULL + c));
        for (std::size_t i = 0; i < spec.per_class_count; ++i) {
            FlowRecord r;
            r.label = static_cast<int>(c);
            r.features.resize(spec.dims);
            for (std::size_t j = 0; j < spec.dims; ++j) {
                double z = rng.normal();
                r.features[j] = informative[j]
                                    ? spec.class_centers[c][j] + spec.class_spreads[c] * z
                                    : z;
            }
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

Dataset select_features(const Dataset& d, const std::vector<std::size_t>& indices) {
    for (std::size_t j : indices)
        if (j >= d.schema.feature_count())
            throw std::invalid_argument("select_features: index out of range");
    Dataset out;
    out.schema.label_column = d.schema.label_column;
    for (std::size_t j : indices) out.schema.feature_names.push_back(d.schema.feature_names[j]);
    out.classes = d.classes;
    out.records.reserve(d.records.size());
    for (const auto& r : d.records) {
        FlowRecord s;
        s.label = r.label;
        s.defect = r.defect;
        s.features.reserve(indices.size());
        for (std::size_t j : indices) s.features.push_back(r.features[j]);
        out.records.push_back(std::move(s));
    }
    return out;
}

Matrix to_matrix(const Dataset& d) {
    Matrix m(d.records.size(), d.schema.feature_count());
    for (std::size_t i = 0; i < d.records.size(); ++i)
        std::copy(d.records[i].features.begin(), d.records[i].features.end(),
                  m.data.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
    return m;
}

std::vector<int> to_labels(const Dataset& d) {
    std::vector<int> y(d.records.size());
    for (std::size_t i = 0; i < d.records.size(); ++i) y[i] = d.records[i].label;
    return y;
}

std::uint64_t dataset_content_hash(const Dataset& d) {
    std::uint64_t acc = 0;
    for (const auto& r : d.records) acc += record_hash(r);  // order-insensitive sum
    return acc;
}

}  // namespace nids
