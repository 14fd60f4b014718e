#pragma once

// Point estimators for the Neyman-Scott problem.

#include "rkl/model.hpp"
#include "rkl/posterior.hpp"
#include "rkl/priors.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace rkl {

struct Estimate {
    double sigma2_hat = 0.0;
    std::vector<double> mu_hat;
    std::string estimator_name;
    /// Integration route ("closed_form", "quadrature", "importance", "none").
    std::string method = "none";
    /// Tolerance achieved or requested for the route taken.
    double tolerance = 0.0;
    /// Posterior risk at the returned point, when a risk was minimised.
    std::optional<double> risk;
};

struct EstimateOptions {
    Method method = Method::automatic;
    double tolerance = 1e-10;
    std::size_t max_intervals = 4000;
    std::size_t samples = 100000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    /// Brent tolerance in log sigma^2 for numeric minimisation.
    double optimizer_tol = 1e-8;

    FunctionalRequest request(const Functional& phi) const;
};

enum class LossKind {
    /// L(theta, theta') = D_KL(f_theta' || f_theta)
    reverse_kl,
    /// L(theta, theta') = D_KL(f_theta || f_theta')
    forward_kl
};

std::string to_string(LossKind k);

/// sigma2_hat = 1 / E[1/sigma^2 | x], mu_hat_n = sigma2_hat * E[mu_n / sigma^2 | x].
Estimate rkl_estimate(const Dataset& data, const Prior& prior, const EstimateOptions& opts = {});

/// Posterior risk E[L(theta, theta') | x] reduced to its separable pieces.
///
/// The posterior is represented by a weighted point set in sigma^2 together
/// with the conditional moments of mu, from a quadrature rule or an
/// importance sample.
class PosteriorRisk {
public:
    PosteriorRisk(const SigmaMarginal& post, LossKind loss, const EstimateOptions& opts);

    LossKind loss() const noexcept { return loss_; }
    std::size_t n_groups() const noexcept { return n_; }

    /// reverse_kl: the sigma component, (NJ/2) E[v / sigma^2 - 1 - log(v / sigma^2)].
    /// forward_kl: the full risk at (v, mu_prime) with mu_prime = E[mu | x].
    double sigma_risk(double v) const;
    /// reverse_kl only: (J/2) E[(mu_prime - mu_n)^2 / sigma^2].
    double mu_risk(std::size_t n, double mu_prime) const;
    /// Full risk at an arbitrary point, evaluated directly from the loss.
    double total_risk(const ParamPoint& theta_prime) const;

    /// Minimiser of mu_risk (reverse_kl) or the posterior mean (forward_kl).
    double mu_argmin(std::size_t n) const;
    /// Range of sigma^2 carrying posterior mass.
    double sigma2_lo() const noexcept { return lo_; }
    double sigma2_hi() const noexcept { return hi_; }
    const std::string& method() const noexcept { return method_; }

private:
    LossKind loss_;
    std::size_t n_ = 0;
    double J_ = 0.0;
    std::vector<double> s2_;
    std::vector<double> w_;
    // Quadrature route: conditional moments of mu are recomputed from post_.
    std::optional<SigmaMarginal> post_;
    // Importance route: draws of mu, row-major.
    std::vector<double> mu_draws_;
    // Aggregates E[1/s2], E[log s2], E[mu/s2], E[mu^2/s2], E[mu], E[s2].
    double e_inv_ = 0.0;
    double e_log_ = 0.0;
    double e_s2_ = 0.0;
    std::vector<double> e_mu_inv_;
    std::vector<double> e_mu2_inv_;
    std::vector<double> e_mu_;
    // forward_kl: E[|mu - E mu|^2 | sigma_i] per node.
    std::vector<double> spread_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    std::string method_;
};

/// Minimises the posterior risk of `loss` numerically, one coordinate at a time.
Estimate bayes_estimate_generic(const Dataset& data, const Prior& prior, LossKind loss,
                                const EstimateOptions& opts = {});

/// Forward-KL Bayes estimator; closed form for the conjugate families.
/// sigma2_hat = E[sigma^2 | x] + (1/N) sum_n Var[mu_n | x], mu_hat = E[mu | x].
Estimate minekl_estimate(const Dataset& data, const Prior& prior, const EstimateOptions& opts = {});

Estimate mle_estimate(const Dataset& data);

/// Coordinate in which a MAP estimate of the variance is taken.
enum class Transform { identity, sqrt, log, reciprocal };

std::string to_string(Transform t);
Transform transform_from_string(const std::string& s);
/// eta = T(sigma^2) and back.
double transform_forward(Transform t, double sigma2);
double transform_inverse(Transform t, double eta);
/// log |d sigma^2 / d eta| as a function of sigma^2.
double transform_log_jacobian(Transform t, double sigma2);

/// Posterior mode in the (eta, mu) parameterisation, eta = T(sigma^2),
/// returned as sigma2_hat = T^{-1}(eta_hat). The identity transform is the
/// d(sigma^2) d(mu) convention.
Estimate map_estimate(const Dataset& data, const Prior& prior, Transform t = Transform::identity,
                      const EstimateOptions& opts = {});

enum class PostExFunctional { sigma2, sigma };

/// sigma2_hat = E[sigma^2 | x] or E[sigma | x]^2; mu_hat = E[mu | x].
Estimate postex_estimate(const Dataset& data, const Prior& prior,
                         PostExFunctional functional = PostExFunctional::sigma2,
                         const EstimateOptions& opts = {});

/// J s^2 / (J - 1).
Estimate corrected_baseline(const Dataset& data);

/// Estimators addressable by name from configs and experiment tables:
/// rkl, rkl_generic, rkl_reference, minekl, minekl_generic, mle, map,
/// postex, postex_sigma, baseline.
const std::vector<std::string>& estimator_names();
Estimate run_estimator(const std::string& name, const Dataset& data, const Prior& prior,
                       const EstimateOptions& opts = {});

} // namespace rkl
