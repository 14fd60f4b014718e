#include "rkl/model.hpp"

#include "rkl/error.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <numbers>
#include <string>

namespace rkl {

Dataset::Dataset(std::size_t n_groups, std::size_t n_reps, std::vector<double> values)
    : n_groups_(n_groups), n_reps_(n_reps), values_(std::move(values))
{
    if (n_groups_ < 1) {
        throw InvalidArgument("dataset needs at least one group");
    }
    if (n_reps_ < 2) {
        throw InvalidArgument("dataset needs J >= 2 replicates per group, got " +
                              std::to_string(n_reps_));
    }
    if (values_.size() != n_groups_ * n_reps_) {
        throw InvalidArgument("dataset has " + std::to_string(values_.size()) +
                              " values, expected N*J = " + std::to_string(n_groups_ * n_reps_));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("dataset contains a non-finite value");
        }
    }
}

ParamPoint::ParamPoint(double sigma2_, std::vector<double> mu_) : sigma2(sigma2_), mu(std::move(mu_))
{
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        throw InvalidArgument("sigma2 must be finite and positive");
    }
}

SuffStats suff_stats(const Dataset& data)
{
    SuffStats out;
    out.n_groups = data.n_groups();
    out.n_reps = data.n_reps();
    out.means.resize(data.n_groups());
    const double J = static_cast<double>(data.n_reps());
    double ss = 0.0;
    for (std::size_t n = 0; n < data.n_groups(); ++n) {
        auto row = data.row(n);
        double sum = 0.0;
        for (double v : row) {
            sum += v;
        }
        const double mean = sum / J;
        double dev = 0.0;
        for (double v : row) {
            dev += (v - mean) * (v - mean);
        }
        out.means[n] = mean;
        ss += dev;
    }
    out.s2 = ss / static_cast<double>(data.size());
    return out;
}

double log_likelihood(const Dataset& data, const ParamPoint& theta)
{
    if (theta.mu.size() != data.n_groups()) {
        throw InvalidArgument("mu has " + std::to_string(theta.mu.size()) +
                              " entries, dataset has " + std::to_string(data.n_groups()) +
                              " groups");
    }
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * theta.sigma2);
    double total = 0.0;
    for (std::size_t n = 0; n < data.n_groups(); ++n) {
        for (double v : data.row(n)) {
            const double r = v - theta.mu[n];
            total += log_norm - r * r / (2.0 * theta.sigma2);
        }
    }
    return total;
}

double log_likelihood(const SuffStats& stats, const ParamPoint& theta)
{
    if (theta.mu.size() != stats.n_groups) {
        throw InvalidArgument("mu has " + std::to_string(theta.mu.size()) +
                              " entries, statistics have " + std::to_string(stats.n_groups) +
                              " groups");
    }
    const double NJ = static_cast<double>(stats.n_groups * stats.n_reps);
    const double J = static_cast<double>(stats.n_reps);
    double between = 0.0;
    for (std::size_t n = 0; n < stats.n_groups; ++n) {
        const double d = stats.means[n] - theta.mu[n];
        between += d * d;
    }
    return -0.5 * NJ * std::log(2.0 * std::numbers::pi * theta.sigma2) -
           (stats.within_ss() + J * between) / (2.0 * theta.sigma2);
}

namespace {

Dataset draw_noise(const ParamPoint& truth, std::size_t n_reps, std::uint64_t seed)
{
    if (n_reps < 2) {
        throw InvalidArgument("simulate needs J >= 2");
    }
    if (truth.mu.empty()) {
        throw InvalidArgument("simulate needs at least one group");
    }
    Engine engine = substream(seed, {1});
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const double sd = std::sqrt(truth.sigma2);
    std::vector<double> values(truth.mu.size() * n_reps);
    for (std::size_t n = 0; n < truth.mu.size(); ++n) {
        for (std::size_t j = 0; j < n_reps; ++j) {
            values[n * n_reps + j] = truth.mu[n] + sd * normal(engine);
        }
    }
    return Dataset(truth.mu.size(), n_reps, std::move(values));
}

} // namespace

Dataset simulate(const ParamPoint& truth, std::size_t n_reps, std::uint64_t seed)
{
    return draw_noise(truth, n_reps, seed);
}

Dataset simulate(double sigma2, const MuGenerator& mu_gen, std::size_t n_groups,
                 std::size_t n_reps, std::uint64_t seed)
{
    if (n_groups < 1) {
        throw InvalidArgument("simulate needs at least one group");
    }
    Engine engine = substream(seed, {0});
    std::vector<double> mu = mu_gen(n_groups, engine);
    if (mu.size() != n_groups) {
        throw InvalidArgument("mu generator returned the wrong number of means");
    }
    return draw_noise(ParamPoint(sigma2, std::move(mu)), n_reps, seed);
}

} // namespace rkl
