#pragma once

#include "rkl/model.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace rkl {

/// Density proportional to sigma^(-k) with respect to d(sigma), mu uniform on R^N.
struct PowerPrior {
    double k = 1.0;
};

/// sigma^(-k) d(sigma) times a Gaussian on mu with mean mu0 and covariance
/// tau2 * C(rho), or sigma^2 * tau2 * C(rho) when scale_by_sigma is set.
/// C(rho) is the AR(1) correlation matrix rho^|i-j|.
struct GaussHierPrior {
    double k = 1.0;
    double mu0 = 0.0;
    double tau2 = 1.0;
    double rho = 0.0;
    bool scale_by_sigma = false;
};

using Prior = std::variant<PowerPrior, GaussHierPrior>;

struct PriorValidity {
    bool valid = false;
    std::string reason;
    std::optional<std::size_t> min_N_for_finiteness;
};

std::string label(const Prior& prior);

/// Unnormalised log density at theta w.r.t. d(sigma) d(mu).
double log_prior_density(const Prior& prior, const ParamPoint& theta);

/// Power-law exponent e of the large-sigma tail of the posterior marginal of
/// sigma (density ~ sigma^(-e)); the marginal r(x) is finite iff e > 1 and
/// E[sigma^p | x] is finite iff e - p > 1.
///
/// Power prior: the improper uniform mu integral contributes sigma^N, so
/// e = N(J-1) + k. Hierarchical prior (either scaling): mu is integrated
/// against a proper density and the likelihood decays as sigma^(-NJ), so
/// e = NJ + k.
double sigma_tail_exponent(const Prior& prior, std::size_t n_groups, std::size_t n_reps);

/// Checks that r(x) is finite. For the implemented families this depends
/// only on (N, J) once s^2 > 0, so the verdict is data independent.
PriorValidity validate_prior(const Prior& prior, std::size_t n_groups, std::size_t n_reps);

/// Generator of mu given sigma^2, present only when the prior is proper in mu.
std::optional<MuGenerator> mu_generator(const Prior& prior, double sigma2);

/// Parses "family=power,k=1" or "family=gauss-hier,k=1,mu0=0,tau2=1,rho=0.5,scale_by_sigma=true".
Prior parse_prior(std::string_view spec);
Prior prior_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Prior& prior);

} // namespace rkl
