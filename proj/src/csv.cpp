#include "nids/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace nids {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

bool parse_double(const std::string& cell, double& out) {
    std::string t = trim(cell);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

nlohmann::json classes_to_json(const std::vector<ClassLabel>& classes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : classes) {
        arr.push_back({{"name", c.name},
                       {"id", c.id},
                       {"kind", c.kind == LabelKind::Benign ? "benign" : "attack"}});
    }
    return arr;
}

std::vector<ClassLabel> classes_from_json(const nlohmann::json& arr) {
    std::vector<ClassLabel> classes;
    for (const auto& e : arr) {
        ClassLabel c;
        c.name = e.at("name").get<std::string>();
        c.id = e.at("id").get<int>();
        c.kind = e.at("kind").get<std::string>() == "benign" ? LabelKind::Benign
                                                             : LabelKind::Attack;
        classes.push_back(std::move(c));
    }
    return classes;
}

}  // namespace

Dataset load_csv(const std::vector<std::filesystem::path>& paths, const CsvOptions& opts) {
    if (paths.empty()) throw std::invalid_argument("load_csv: no input files");

    struct FileHead {
        std::vector<std::string> columns;
        std::filesystem::path path;
    };
    std::vector<FileHead> heads;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) throw std::runtime_error("load_csv: cannot open " + p.string());
        std::string header;
        if (!std::getline(in, header))
            throw std::runtime_error("load_csv: empty file " + p.string());
        FileHead h;
        h.path = p;
        for (auto& c : split_line(header)) h.columns.push_back(trim(c));
        bool has_label = std::find(h.columns.begin(), h.columns.end(), opts.label_column) !=
                         h.columns.end();
        if (!has_label)
            throw std::runtime_error("load_csv: " + p.string() + " has no '" +
                                     opts.label_column + "' column");
        heads.push_back(std::move(h));
    }

    // resolve the shared feature set
    std::vector<std::string> features;
    if (opts.policy == SchemaPolicy::Strict) {
        for (std::size_t i = 1; i < heads.size(); ++i)
            if (heads[i].columns != heads[0].columns)
                throw std::runtime_error("load_csv: headers differ under strict policy (" +
                                         heads[i].path.string() + ")");
        for (const auto& c : heads[0].columns)
            if (c != opts.label_column) features.push_back(c);
    } else {
        for (const auto& c : heads[0].columns) {
            if (c == opts.label_column) continue;
            bool everywhere = true;
            for (std::size_t i = 1; i < heads.size(); ++i) {
                const auto& cols = heads[i].columns;
                if (std::find(cols.begin(), cols.end(), c) == cols.end()) {
                    everywhere = false;
                    break;
                }
            }
            if (everywhere) features.push_back(c);
        }
    }

    Dataset out;
    out.schema.feature_names = features;
    out.schema.label_column = opts.label_column;
    out.schema.validate();

    std::map<std::string, int> label_ids;
    auto intern_label = [&](const std::string& name) -> int {
        auto it = label_ids.find(name);
        if (it != label_ids.end()) return it->second;
        ClassLabel c;
        c.name = name;
        if (name == opts.benign_name) {
            // benign is pinned to id 0: shift existing classes up
            c.id = 0;
            c.kind = LabelKind::Benign;
            for (auto& [n, id] : label_ids) ++id;
            for (auto& cls : out.classes) ++cls.id;
            out.classes.insert(out.classes.begin(), c);
            for (auto& r : out.records)
                if (r.label >= 0) ++r.label;
        } else {
            c.id = static_cast<int>(out.classes.size());
            c.kind = LabelKind::Attack;
            out.classes.push_back(c);
        }
        label_ids[name] = c.id;
        return c.id;
    };

    for (const auto& h : heads) {
        std::ifstream in(h.path);
        std::string line;
        std::getline(in, line);  // header
        // per-file column positions for the shared features + label
        std::vector<std::size_t> feat_pos;
        for (const auto& f : features) {
            auto it = std::find(h.columns.begin(), h.columns.end(), f);
            feat_pos.push_back(static_cast<std::size_t>(it - h.columns.begin()));
        }
        std::size_t label_pos = static_cast<std::size_t>(
            std::find(h.columns.begin(), h.columns.end(), opts.label_column) -
            h.columns.begin());

        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (trim(line).empty()) continue;
            auto cells = split_line(line);
            FlowRecord r;
            r.features.assign(features.size(), 0.0);
            if (cells.size() != h.columns.size()) {
                r.defect = true;  // ragged row, clean() drops it
            } else {
                for (std::size_t j = 0; j < feat_pos.size(); ++j) {
                    double v = 0.0;
                    if (!parse_double(cells[feat_pos[j]], v)) {
                        r.defect = true;
                        break;
                    }
                    r.features[j] = v;
                }
            }
            if (!r.defect) {
                // defect rows (e.g. embedded header lines) never reach the
                // class map; their label cell is not meaningful
                r.label = intern_label(trim(cells[label_pos]));
            }
            out.records.push_back(std::move(r));
        }
    }
    return out;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_csv: cannot write " + path.string());
    for (const auto& f : d.schema.feature_names) out << f << ',';
    out << d.schema.label_column << '\n';
    for (const auto& r : d.records) {
        for (double v : r.features) out << format_double(v) << ',';
        if (r.label >= 0 && static_cast<std::size_t>(r.label) < d.classes.size())
            out << d.classes[r.label].name;
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_csv: write failed for " + path.string());
}

void save_dataset_manifest(const Dataset& d, const std::filesystem::path& path,
                           std::uint64_t seed) {
    nlohmann::json j;
    j["schema"] = {{"features", d.schema.feature_names},
                   {"label_column", d.schema.label_column},
                   {"hash", d.schema.hash()}};
    j["classes"] = classes_to_json(d.classes);
    nlohmann::json counts = nlohmann::json::object();
    auto cc = d.class_counts();
    for (const auto& c : d.classes) counts[c.name] = cc[c.id];
    j["counts"] = counts;
    j["records"] = d.records.size();
    j["seed"] = seed;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("manifest: cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Dataset load_csv_with_manifest(const std::filesystem::path& csv_path,
                               const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("manifest: cannot open " + manifest_path.string());
    nlohmann::json j = nlohmann::json::parse(in);

    CsvOptions opts;
    opts.label_column = j.at("schema").at("label_column").get<std::string>();
    opts.policy = SchemaPolicy::Strict;
    auto classes = classes_from_json(j.at("classes"));
    for (const auto& c : classes)
        if (c.kind == LabelKind::Benign) opts.benign_name = c.name;

    Dataset d = load_csv({csv_path}, opts);
    // adopt the manifest's class map; remap loaded first-seen ids onto it
    std::vector<int> remap(d.classes.size(), -1);
    for (const auto& loaded : d.classes) {
        bool found = false;
        for (const auto& c : classes) {
            if (c.name == loaded.name) {
                remap[loaded.id] = c.id;
                found = true;
                break;
            }
        }
        if (!found)
            throw std::runtime_error("manifest: class '" + loaded.name +
                                     "' in CSV missing from manifest");
    }
    for (auto& r : d.records)
        if (r.label >= 0) r.label = remap[r.label];
    d.classes = classes;
    return d;
}

}  // namespace nids
