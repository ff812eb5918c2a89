#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nids/dataset.hpp"

namespace nids {

enum class SchemaPolicy { Strict, Intersect };

struct CsvOptions {
    std::string label_column = "Label";
    std::string benign_name = "Benign";
    SchemaPolicy policy = SchemaPolicy::Intersect;
};

// Reads one or more CICFlowMeter-style CSVs (header row, comma separated,
// label column by name, every other column numeric). Rows whose feature cells
// fail numeric parsing are kept as defect rows for clean() to drop. Benign is
// forced to class id 0; attack ids follow first appearance.
Dataset load_csv(const std::vector<std::filesystem::path>& paths, const CsvOptions& opts = {});

// Writes the same dialect back: header row, features then the label column.
void save_csv(const Dataset& d, const std::filesystem::path& path);

// Sidecar manifest with schema, class map, per-class counts and the seed that
// produced the file.
void save_dataset_manifest(const Dataset& d, const std::filesystem::path& path,
                           std::uint64_t seed);

// Reloads a dataset written by save_csv, trusting the manifest's class map so
// ids survive the round trip.
Dataset load_csv_with_manifest(const std::filesystem::path& csv_path,
                               const std::filesystem::path& manifest_path);

}  // namespace nids
