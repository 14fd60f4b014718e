#pragma once

// Estimators recomputed after a change of variance coordinate eta = T(sigma^2).

#include "rkl/estimators.hpp"
#include "rkl/posterior.hpp"

#include <string>

namespace rkl {

struct Reparameterization {
    Transform transform = Transform::identity;

    std::string name() const { return to_string(transform); }
    double forward(double sigma2) const { return transform_forward(transform, sigma2); }
    double inverse(double eta) const { return transform_inverse(transform, eta); }
};

struct TransformedEstimate {
    /// Estimate in the transformed coordinate.
    double eta_hat = 0.0;
    /// Posterior risk at eta_hat.
    double risk = 0.0;
    std::size_t evaluations = 0;
};

/// Minimises E[D_KL(f_eta' || f_eta) | x] over eta' in the transformed
/// coordinate: the posterior of eta carries its Jacobian and the risk is
/// integrated and searched in eta units.
TransformedEstimate rkl_transformed(const SigmaMarginal& post, Transform t, const EstimateOptions& opts = {});

/// E[T(sigma^2) | x]
double postex_transformed(const SigmaMarginal& post, Transform t, const EstimateOptions& opts = {});

} // namespace rkl
