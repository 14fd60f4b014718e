#pragma once

// Neyman-Scott observation model: N groups of J replicates,
// x_nj ~ Normal(mu_n, sigma^2) independently, with shared sigma^2.

#include "rkl/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace rkl {

/// Dense row-major N x J observation matrix; one row per group.
class Dataset {
public:
    /// Throws InvalidArgument if J < 2, N < 1, the value count is not N*J,
    /// or any value is not finite.
    Dataset(std::size_t n_groups, std::size_t n_reps, std::vector<double> values);

    std::size_t n_groups() const noexcept { return n_groups_; }
    std::size_t n_reps() const noexcept { return n_reps_; }
    std::size_t size() const noexcept { return values_.size(); }

    double operator()(std::size_t n, std::size_t j) const { return values_[n * n_reps_ + j]; }
    std::span<const double> row(std::size_t n) const
    {
        return {values_.data() + n * n_reps_, n_reps_};
    }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::size_t n_groups_;
    std::size_t n_reps_;
    std::vector<double> values_;
};

struct SuffStats {
    std::size_t n_groups = 0;
    std::size_t n_reps = 0;
    /// Pooled within-group variance, divided by N*J.
    double s2 = 0.0;
    /// Group means m_n.
    std::vector<double> means;

    /// N*J*s^2, the within-group sum of squares.
    double within_ss() const noexcept
    {
        return static_cast<double>(n_groups * n_reps) * s2;
    }
};

/// A point (sigma^2, mu_1..mu_N) of parameter space.
struct ParamPoint {
    /// Throws InvalidArgument unless sigma2 is finite and positive.
    ParamPoint(double sigma2, std::vector<double> mu);

    double sigma2;
    std::vector<double> mu;
};

SuffStats suff_stats(const Dataset& data);

/// Sum over all observations of the Gaussian log density.
double log_likelihood(const Dataset& data, const ParamPoint& theta);

/// Same quantity through (s^2, m): -(NJ/2) log(2 pi sigma^2)
/// - (NJ s^2 + J |m - mu|^2) / (2 sigma^2).
double log_likelihood(const SuffStats& stats, const ParamPoint& theta);

/// Draws group means for N groups given the engine.
using MuGenerator = std::function<std::vector<double>(std::size_t n_groups, Engine& engine)>;

/// Draws x_nj = mu_n + sigma * z_nj. Group means come from substream {0} of
/// `seed` when generated, noise from substream {1}, so a dataset with the
/// same seed but different means shares its noise.
Dataset simulate(const ParamPoint& truth, std::size_t n_reps, std::uint64_t seed);
Dataset simulate(double sigma2, const MuGenerator& mu_gen, std::size_t n_groups,
                 std::size_t n_reps, std::uint64_t seed);

} // namespace rkl
