#pragma once

// Posterior functionals E[phi(sigma^2, mu) | x] for the Neyman-Scott model.
//
// The mu block is always integrated out analytically, leaving a density over
// sigma alone (SigmaMarginal). Functionals are then computed by one of three
// interchangeable routes: gamma-function moment identities (closed form),
// adaptive log-domain quadrature over t = log(sigma), or self-normalised
// importance sampling.

#include "rkl/model.hpp"
#include "rkl/priors.hpp"
#include "rkl/quadrature.hpp"
#include "rkl/tridiag.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rkl {

enum class Method { automatic, closed_form, quadrature, importance };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

enum class FunctionalKind { inv_sigma2, sigma2, sigma, log_sigma2, mu_over_sigma2, mu, mu_sq_over_sigma2 };

struct Functional {
    FunctionalKind kind = FunctionalKind::inv_sigma2;
    /// Group index for the mu-dependent kinds.
    std::size_t group = 0;

    static Functional inv_sigma2() { return {FunctionalKind::inv_sigma2, 0}; }
    static Functional sigma2() { return {FunctionalKind::sigma2, 0}; }
    static Functional sigma() { return {FunctionalKind::sigma, 0}; }
    static Functional log_sigma2() { return {FunctionalKind::log_sigma2, 0}; }
    static Functional mu_over_sigma2(std::size_t n) { return {FunctionalKind::mu_over_sigma2, n}; }
    static Functional mu(std::size_t n) { return {FunctionalKind::mu, n}; }
    static Functional mu_sq_over_sigma2(std::size_t n) { return {FunctionalKind::mu_sq_over_sigma2, n}; }

    std::string name() const;
    /// phi evaluated at a parameter point.
    double operator()(double sigma2, std::span<const double> mu) const;
};

struct FunctionalRequest {
    Functional phi;
    Method method = Method::automatic;
    /// Relative tolerance of the quadrature route.
    double tolerance = 1e-10;
    /// Cap on adaptive subdivisions of the quadrature route.
    std::size_t max_intervals = 4000;
    /// Importance route only.
    std::size_t sample_count = 100000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    /// When false, divergence is detected only numerically by the quadrature route.
    bool analytic_divergence_check = true;
};

struct ExpectationResult {
    double value = 0.0;
    Method method = Method::closed_form;
    /// Quadrature: estimated relative error; importance: unused.
    double rel_error = 0.0;
    /// Importance: Monte Carlo standard error of the self-normalised estimate.
    double std_error = 0.0;
    std::size_t evaluations = 0;
    double ess = 0.0;
    bool ess_warning = false;
};

/// Unnormalised posterior density of sigma (w.r.t. d(sigma)) with mu
/// integrated out, together with the conditional posterior of mu given sigma.
class SigmaMarginal {
public:
    /// Throws InvalidPrior if the prior is not valid for (N, J) and
    /// DegenerateData if the posterior is improper at sigma -> 0.
    SigmaMarginal(const SuffStats& stats, const Prior& prior);
    SigmaMarginal(const Dataset& data, const Prior& prior);

    const SuffStats& stats() const noexcept { return stats_; }
    const Prior& prior() const noexcept { return prior_; }
    std::size_t n_groups() const noexcept { return stats_.n_groups; }
    std::size_t n_reps() const noexcept { return stats_.n_reps; }

    /// log density at sigma = exp(log_sigma), including every constant, so
    /// that its integral over sigma is the marginal r(x).
    double log_density(double log_sigma) const;

    /// Density proportional to sigma^(-shape) exp(-scale / (2 sigma^2))
    /// (power prior, scaled hierarchical prior).
    bool conjugate() const noexcept { return kind_ != Kind::unscaled; }
    double conj_shape() const noexcept { return shape_; }
    double conj_scale() const noexcept { return scale_; }

    /// Large-sigma decay exponent of the density.
    double tail_exponent() const noexcept { return tail_; }

    /// True when E[mu | sigma, x] does not depend on sigma and
    /// Var[mu_n | sigma, x] = sigma^2 * unit_var[n].
    bool mu_sigma_free() const noexcept { return kind_ != Kind::unscaled; }

    /// Conditional posterior of mu given sigma^2: means and marginal variances.
    void conditional_mu(double sigma2, std::span<double> mean, std::span<double> var) const;
    double conditional_mu_mean(double sigma2, std::size_t n) const;

    /// Draws mu | sigma^2 from iid standard normals z.
    void sample_mu(double sigma2, std::span<const double> z, std::span<double> out) const;

    /// Starting point (in log sigma) for mode searches.
    double log_sigma_guess() const noexcept { return guess_; }

    /// log r(x) in closed form for the conjugate families.
    std::optional<double> closed_form_log_marginal() const;

private:
    enum class Kind { uniform, scaled, unscaled };

    SuffStats stats_;
    Prior prior_;
    Kind kind_;
    double k_ = 0.0;
    double shape_ = 0.0;
    double scale_ = 0.0;
    double tail_ = 0.0;
    double log_const_ = 0.0;
    double guess_ = 0.0;
    // sigma-free conditional moments (uniform and scaled).
    std::vector<double> mean_;
    std::vector<double> unit_var_;
    std::optional<TridiagLdl> scaled_ldl_;
    // Unscaled hierarchical prior: prior precision P, P*mu0*1 and d = m - mu0.
    SymTridiag prior_prec_;
    std::vector<double> prior_shift_;
    std::vector<double> dev_;
    std::vector<double> prior_prec_dev_;
    double log_det_prior_prec_ = 0.0;

    TridiagLdl unscaled_factor(double sigma2) const;
};

/// The sigma marginal with its log-normaliser log r(x).
SigmaMarginal sigma_marginal(const Dataset& data, const Prior& prior);

/// Throws MomentDivergent if E[|phi|] is infinite under this posterior.
void check_moment_finite(const SigmaMarginal& post, const Functional& phi);

/// Closed-form expectation; MethodUnavailable for the unscaled hierarchical prior.
double closed_form_expectation(const SigmaMarginal& post, const Functional& phi);

ExpectationResult expectation(const SigmaMarginal& post, const FunctionalRequest& req);
ExpectationResult expectation(const Dataset& data, const Prior& prior, const FunctionalRequest& req);

/// log r(x) by quadrature; MomentDivergent if the integral does not converge.
quad::LogIntegral log_marginal_quadrature(const SigmaMarginal& post, const quad::Options& opts = {});

/// E[phi_n | x] for every group n at once (kinds mu, mu_over_sigma2, mu_sq_over_sigma2).
std::vector<double> group_expectations(const SigmaMarginal& post, FunctionalKind kind,
                                       const FunctionalRequest& req);

/// Normalised quadrature rule over the posterior of sigma: sum of weights is
/// one and sum_i w_i g(sigma2_i) approximates E[g(sigma^2) | x] for smooth g
/// growing no faster than sigma^p for p in `powers`.
struct PosteriorRule {
    std::vector<double> sigma2;
    std::vector<double> weights;
    std::size_t evaluations = 0;
    std::size_t intervals = 0;
};

PosteriorRule posterior_rule(const SigmaMarginal& post, std::span<const double> powers,
                             const quad::Options& opts = {});

/// Integral of sigma^p * post over sigma < alpha divided by the integral over
/// all sigma, in log form.
double log_lower_tail_fraction(const SigmaMarginal& post, double alpha, double power,
                               const quad::Options& opts = {});

// Importance sampling -------------------------------------------------------

struct WeightedSample {
    std::size_t n_groups = 0;
    std::vector<double> sigma2;
    /// Row-major count x N.
    std::vector<double> mu;
    /// Self-normalised weights, summing to one.
    std::vector<double> weights;
    double ess = 0.0;
    bool ess_warning = false;

    std::size_t size() const noexcept { return sigma2.size(); }
    std::span<const double> mu_row(std::size_t i) const
    {
        return {mu.data() + i * n_groups, n_groups};
    }
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// sigma^2 from a scaled-inverse-chi-square proposal matching the conjugate
/// marginal (exact for the conjugate families), mu from its Gaussian
/// conditional. Draws are split into fixed chunks with their own substreams,
/// so results do not depend on `threads`.
WeightedSample importance_sample(const SigmaMarginal& post, std::size_t count, std::uint64_t seed,
                                 std::size_t threads = 1);
WeightedSample importance_sample(const Dataset& data, const Prior& prior, std::size_t count,
                                 std::uint64_t seed, std::size_t threads = 1);

/// Effective sample size below this fraction of the count raises ess_warning.
inline constexpr double kEssWarningFraction = 0.1;

McEstimate weighted_mean(const WeightedSample& sample,
                         const std::function<double(double, std::span<const double>)>& phi);

} // namespace rkl
