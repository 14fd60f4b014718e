#pragma once

// Built-in property suites run by `rkl verify`.

#include "rkl/model.hpp"
#include "rkl/priors.hpp"
#include "rkl/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rkl {

struct VerifyOptions {
    std::uint64_t seed = 20240611;
    /// Randomised instances for the reference-distribution equivalence.
    std::size_t instances = 50;
    std::size_t pinsker_pairs = 100;
    std::size_t importance_samples = 100000;
    std::size_t threads = 1;
    /// Test mode: multiplies closed-form results by (1 + perturb).
    double perturb = 0.0;
};

struct PropertyResult {
    std::string name;
    bool pass = false;
    std::size_t cases = 0;
    /// Largest observed deviation, in the units of `threshold`.
    double max_deviation = 0.0;
    double threshold = 0.0;
    std::string detail;
};

struct VerifyReport {
    std::vector<PropertyResult> properties;
    bool all_pass() const;
};

/// Random dataset with N in [1, max_groups], J in [2, 5] and sigma^2 drawn
/// from [sigma2_lo, sigma2_hi].
Dataset random_dataset(Engine& eng, std::size_t max_groups = 30, double sigma2_lo = 0.3, double sigma2_hi = 5.0);
/// Random prior from either family that is valid for (N, J).
Prior random_prior(Engine& eng, std::size_t n_groups, std::size_t n_reps);

PropertyResult verify_reference_equivalence(const VerifyOptions& opts);
PropertyResult verify_integration_agreement(const VerifyOptions& opts);
PropertyResult verify_pinsker(const VerifyOptions& opts);
PropertyResult verify_invariance(const VerifyOptions& opts);

VerifyReport run_verify(const VerifyOptions& opts);

} // namespace rkl
