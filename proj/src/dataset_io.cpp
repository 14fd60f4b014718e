#include "rkl/dataset_io.hpp"

#include "rkl/error.hpp"
#include "rkl/text.hpp"

#include <fstream>
#include <sstream>
#include <string>

namespace rkl {

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path)
{
    auto p = csv_path;
    p.replace_extension(".json");
    return p;
}

namespace {

std::ofstream open_for_writing(const std::filesystem::path& path)
{
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    return out;
}

} // namespace

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data)
{
    std::ofstream out = open_for_writing(path);
    for (std::size_t n = 0; n < data.n_groups(); ++n) {
        auto row = data.row(n);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j > 0) {
                out << ',';
            }
            out << format_real(row[j]);
        }
        out << '\n';
    }
    if (!out) {
        throw IoError("write failed for '" + path.string() + "'");
    }
}

Dataset read_dataset_csv(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open dataset '" + path.string() + "'");
    }
    std::vector<double> values;
    std::size_t n_reps = 0;
    std::size_t n_groups = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split(line, ',');
        if (n_reps == 0) {
            n_reps = fields.size();
        } else if (fields.size() != n_reps) {
            throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": expected " +
                          std::to_string(n_reps) + " columns, got " + std::to_string(fields.size()));
        }
        for (auto f : fields) {
            try {
                values.push_back(parse_real(f));
            } catch (const InvalidArgument& e) {
                throw IoError("'" + path.string() + "' line " + std::to_string(line_no) + ": " +
                              e.what());
            }
        }
        ++n_groups;
    }
    if (n_groups == 0) {
        throw IoError("dataset '" + path.string() + "' is empty");
    }
    try {
        return Dataset(n_groups, n_reps, std::move(values));
    } catch (const InvalidArgument& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

nlohmann::json to_json(const DatasetMeta& meta)
{
    nlohmann::json j;
    j["N"] = meta.n_groups;
    j["J"] = meta.n_reps;
    if (meta.sigma2_true) {
        j["sigma2_true"] = *meta.sigma2_true;
    }
    if (meta.mu_true) {
        j["mu_true"] = *meta.mu_true;
    }
    if (meta.mu_spec) {
        j["mu_spec"] = *meta.mu_spec;
    }
    if (meta.seed) {
        j["seed"] = *meta.seed;
    }
    return j;
}

DatasetMeta dataset_meta_from_json(const nlohmann::json& j)
{
    DatasetMeta meta;
    meta.n_groups = j.at("N").get<std::size_t>();
    meta.n_reps = j.at("J").get<std::size_t>();
    if (j.contains("sigma2_true")) {
        meta.sigma2_true = j["sigma2_true"].get<double>();
    }
    if (j.contains("mu_true")) {
        meta.mu_true = j["mu_true"].get<std::vector<double>>();
    }
    if (j.contains("mu_spec")) {
        meta.mu_spec = j["mu_spec"];
    }
    if (j.contains("seed")) {
        meta.seed = j["seed"].get<std::uint64_t>();
    }
    return meta;
}

void write_dataset_meta(const std::filesystem::path& path, const DatasetMeta& meta)
{
    std::ofstream out = open_for_writing(path);
    out << to_json(meta).dump(2) << '\n';
}

DatasetMeta read_dataset_meta(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open metadata '" + path.string() + "'");
    }
    try {
        return dataset_meta_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path.string() + "': " + e.what());
    }
}

} // namespace rkl
