#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nids/dataset.hpp"

namespace testutil {

inline std::vector<nids::ClassLabel> make_classes(std::size_t n) {
    std::vector<nids::ClassLabel> classes;
    for (std::size_t i = 0; i < n; ++i) {
        nids::ClassLabel c;
        c.id = static_cast<int>(i);
        if (i == 0) {
            c.name = "Benign";
            c.kind = nids::LabelKind::Benign;
        } else {
            c.name = "attack-" + std::to_string(i);
            c.kind = nids::LabelKind::Attack;
        }
        classes.push_back(std::move(c));
    }
    return classes;
}

inline nids::Dataset make_dataset(const std::vector<std::vector<double>>& rows,
                                  const std::vector<int>& labels, std::size_t n_classes) {
    nids::Dataset d;
    std::size_t width = rows.empty() ? 0 : rows[0].size();
    for (std::size_t j = 0; j < width; ++j)
        d.schema.feature_names.push_back("f" + std::to_string(j));
    d.classes = make_classes(n_classes);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        nids::FlowRecord r;
        r.features = rows[i];
        r.label = labels[i];
        d.records.push_back(std::move(r));
    }
    return d;
}

// records as (features..., label) multisets for order-insensitive comparison
inline std::vector<std::vector<double>> as_multiset(const nids::Dataset& d) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : d.records) {
        auto row = r.features;
        row.push_back(static_cast<double>(r.label));
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("nids_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace testutil
