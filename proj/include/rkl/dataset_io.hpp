#pragma once

// Dataset files: CSV with one row per group and J columns, no header,
// plus an optional sidecar JSON next to it (same stem, .json extension).

#include "rkl/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace rkl {

struct DatasetMeta {
    std::size_t n_groups = 0;
    std::size_t n_reps = 0;
    std::optional<double> sigma2_true;
    std::optional<std::vector<double>> mu_true;
    /// Free-form description of how mu was generated, when not stored explicitly.
    std::optional<nlohmann::json> mu_spec;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const DatasetMeta&, const DatasetMeta&) = default;
};

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset_csv(const std::filesystem::path& path);

nlohmann::json to_json(const DatasetMeta& meta);
DatasetMeta dataset_meta_from_json(const nlohmann::json& j);

void write_dataset_meta(const std::filesystem::path& path, const DatasetMeta& meta);
DatasetMeta read_dataset_meta(const std::filesystem::path& path);

} // namespace rkl
