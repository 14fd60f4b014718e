#pragma once

// Run configuration: one JSON file with sections problem, prior/priors,
// estimators, integration, experiment, output and verify. Unknown keys are
// rejected. Individual keys can be overridden with "section.key=value".

#include "rkl/estimators.hpp"
#include "rkl/experiments.hpp"
#include "rkl/priors.hpp"
#include "rkl/verify.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rkl {

struct ProblemConfig {
    std::size_t N = 10;
    std::size_t J = 2;
    double sigma2_true = 1.0;
    /// Fixed means cycled over groups; empty with mu_from_prior set.
    std::vector<double> mu_spec{0.0};
    /// mu_spec given as the string "prior".
    bool mu_from_prior = false;
    std::uint64_t seed = 1;
};

struct OutputConfig {
    std::filesystem::path dir = "results";
    std::vector<std::string> formats{"csv", "json", "svg"};
    std::string run_name = "run";
    bool record_runtime = false;
};

struct Config {
    ProblemConfig problem;
    std::vector<Prior> priors{PowerPrior{1.0}};
    std::vector<std::string> estimators{"rkl", "mle", "map", "minekl", "postex", "baseline"};
    EstimateOptions integration;
    ExperimentSpec experiment;
    OutputConfig output;
    VerifyOptions verify;
    /// The document the config was parsed from, after overrides.
    nlohmann::json source;
};

/// Sets a dotted key ("experiment.replicates=5"); the value is read as JSON
/// when it parses, else as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Validates and converts; InvalidArgument names the offending key.
Config parse_config(const nlohmann::json& doc);
Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
/// Defaults only, with overrides applied.
Config default_config(const std::vector<std::string>& overrides = {});

/// Means for cmd_simulate: fixed list or a draw from the first prior proper in mu.
MuGenerator problem_mu_generator(const Config& cfg);

} // namespace rkl
