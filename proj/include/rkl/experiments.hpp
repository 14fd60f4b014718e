#pragma once

// Experiment runner: consistency, prior sweep, invariance and tail-mass
// studies over a grid of N and seeded replicates.
//
// Every (N, replicate) dataset is simulated from its own substream of the
// master seed, so tables do not depend on thread count or scheduling.

#include "rkl/estimators.hpp"
#include "rkl/model.hpp"
#include "rkl/priors.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rkl {

enum class ExperimentKind { consistency, prior_sweep, invariance, tail_mass };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

/// How data-generating means are chosen.
///  automatic: from the prior's mu generator when the prior is proper in mu,
///             else the fixed vector;
///  prior:     always from the prior (error for priors improper in mu);
///  fixed:     always the fixed vector.
enum class MuMode { automatic, prior, fixed };

std::string to_string(MuMode m);
MuMode mu_mode_from_string(const std::string& s);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::consistency;
    std::vector<std::size_t> N_grid{100, 1000, 10000};
    std::size_t J = 2;
    double true_sigma2 = 1.0;
    MuMode mu_mode = MuMode::automatic;
    /// Fixed means, cycled over groups.
    std::vector<double> mu_fixed{0.0};
    std::vector<Prior> priors{PowerPrior{1.0}};
    std::vector<std::string> estimators{"rkl", "mle", "map", "minekl", "postex", "baseline"};
    std::size_t replicates = 20;
    std::uint64_t master_seed = 1;
    EstimateOptions estimate;
    std::size_t threads = 1;
    /// Tail-mass cutoff; when unset, min(sigma_t * sqrt((J - 1) / J), (2 pi)^(-1/2)) / 2
    /// with sigma_t the true sigma, i.e. half the smaller of the limit of s
    /// and (2 pi)^(-1/2).
    std::optional<double> alpha;
    /// Invariance: transforms to compare.
    std::vector<Transform> transforms{Transform::sqrt, Transform::log, Transform::reciprocal};
    /// Invariance: evaluate on this dataset instead of simulating.
    std::optional<Dataset> dataset;
    /// Wall-clock timings make tables non-reproducible; off by default.
    bool record_runtime = false;

    /// Throws InvalidArgument with a description of the first problem.
    void validate() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);

/// Means and seed used to simulate cell (N, replicate) for prior `prior_index`.
Dataset experiment_dataset(const ExperimentSpec& spec, std::size_t N, std::size_t replicate,
                           std::size_t prior_index);

/// Cell status: "ok" or the snake_case name of the error raised.
std::string status_of(const std::exception& e);

struct ResultRow {
    std::size_t N = 0;
    std::size_t replicate = 0;
    std::string prior_label;
    std::string estimator;
    std::optional<double> sigma2_hat;
    std::optional<double> rel_error;
    std::string status = "ok";
    std::optional<double> runtime_ms;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultTable {
    std::vector<ResultRow> rows;
    friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

struct InvarianceRow {
    std::size_t N = 0;
    std::size_t replicate = 0;
    std::string prior_label;
    std::string transform;
    std::string estimator;
    /// T applied to the estimate computed in sigma^2.
    std::optional<double> direct;
    /// Estimate computed in the transformed coordinate.
    std::optional<double> transformed;
    std::optional<double> rel_diff;
    std::string status = "ok";

    friend bool operator==(const InvarianceRow&, const InvarianceRow&) = default;
};

struct InvarianceTable {
    std::vector<InvarianceRow> rows;
};

struct TailMassRow {
    std::size_t N = 0;
    std::size_t replicate = 0;
    std::string prior_label;
    double alpha = 0.0;
    double s = 0.0;
    /// log10 of the normalised sigma < alpha contribution to E[1/sigma^2 | x].
    std::optional<double> log10_fraction;
    std::string status = "ok";

    friend bool operator==(const TailMassRow&, const TailMassRow&) = default;
};

struct TailMassTable {
    std::vector<TailMassRow> rows;
};

struct TailMassVerdict {
    std::string prior_label;
    std::size_t replicates = 0;
    /// Replicates whose fraction strictly decreases along the N grid.
    std::size_t decreasing = 0;
    /// Largest log10 fraction at the last N.
    double max_log10_at_last = 0.0;
};

std::vector<TailMassVerdict> tail_mass_verdicts(const TailMassTable& table);

/// Median over replicates per (N, prior, estimator), ok cells only.
struct SummaryRow {
    std::size_t N = 0;
    std::string prior_label;
    std::string estimator;
    std::size_t ok = 0;
    std::size_t failed = 0;
    std::optional<double> median_sigma2;
    std::optional<double> median_abs_error;
};

std::vector<SummaryRow> summarize(const ResultTable& table, double true_sigma2);

/// Prior sweep: per (N, estimator), median over replicates of the spread
/// (max - min) of sigma2_hat across priors.
struct SpreadRow {
    std::size_t N = 0;
    std::string estimator;
    std::size_t replicates = 0;
    std::optional<double> median_spread;
    std::optional<double> max_spread;
};

std::vector<SpreadRow> prior_spread(const ResultTable& table);

ResultTable run_consistency(const ExperimentSpec& spec);
/// Every prior sees the same dataset per (N, replicate).
ResultTable run_prior_sweep(const ExperimentSpec& spec);
InvarianceTable run_invariance(const ExperimentSpec& spec);
TailMassTable run_tail_mass(const ExperimentSpec& spec);

double median(std::vector<double> values);

} // namespace rkl
