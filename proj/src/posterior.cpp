#include "rkl/posterior.hpp"

#include "rkl/compensated_sum.hpp"
#include "rkl/error.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/digamma.hpp>

namespace rkl {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct Integrand {
    /// Power p in sigma^p that sets the tail behaviour.
    double power = 0.0;
    /// Remaining bounded factor; empty means 1.
    std::function<double(double)> factor;
};

// Power of sigma governing integrability of |phi| at large sigma.
double required_power(const SigmaMarginal& post, FunctionalKind kind)
{
    const bool free = post.mu_sigma_free();
    switch (kind) {
    case FunctionalKind::inv_sigma2:
        return -2.0;
    case FunctionalKind::sigma2:
        return 2.0;
    case FunctionalKind::sigma:
        return 1.0;
    case FunctionalKind::log_sigma2:
        return 0.0;
    case FunctionalKind::mu_over_sigma2:
        return free ? -1.0 : -2.0;
    case FunctionalKind::mu:
        return free ? 1.0 : 0.0;
    case FunctionalKind::mu_sq_over_sigma2:
        return free ? 0.0 : -2.0;
    }
    return 0.0;
}

bool is_group_kind(FunctionalKind kind)
{
    return kind == FunctionalKind::mu_over_sigma2 || kind == FunctionalKind::mu ||
           kind == FunctionalKind::mu_sq_over_sigma2;
}

void check_group(const SigmaMarginal& post, const Functional& phi)
{
    if (is_group_kind(phi.kind) && phi.group >= post.n_groups()) {
        throw InvalidArgument("functional " + phi.name() + " refers to a group outside 0.." +
                              std::to_string(post.n_groups() - 1));
    }
}

// E[sigma^p] for density sigma^(-a) exp(-S / (2 sigma^2)).
double conj_power_moment(double shape, double scale, double p)
{
    const double h = 0.5 * (shape - 1.0);
    return std::exp(0.5 * p * std::log(0.5 * scale) + std::lgamma(h - 0.5 * p) - std::lgamma(h));
}

Integrand integrand_for(const SigmaMarginal& post, const Functional& phi)
{
    const std::size_t n = phi.group;
    const SigmaMarginal* p = &post;
    switch (phi.kind) {
    case FunctionalKind::inv_sigma2:
        return {-2.0, {}};
    case FunctionalKind::sigma2:
        return {2.0, {}};
    case FunctionalKind::sigma:
        return {1.0, {}};
    case FunctionalKind::log_sigma2:
        return {0.0, [](double t) { return 2.0 * t; }};
    case FunctionalKind::mu_over_sigma2:
        return {-2.0, [p, n](double t) { return p->conditional_mu_mean(std::exp(2.0 * t), n); }};
    case FunctionalKind::mu:
        return {0.0, [p, n](double t) { return p->conditional_mu_mean(std::exp(2.0 * t), n); }};
    case FunctionalKind::mu_sq_over_sigma2: {
        const bool free = post.mu_sigma_free();
        const std::size_t N = post.n_groups();
        return {free ? 0.0 : -2.0, [p, n, N, free](double t) {
                    const double s2 = std::exp(2.0 * t);
                    std::vector<double> mean(N);
                    std::vector<double> var(N);
                    p->conditional_mu(s2, mean, var);
                    const double second = mean[n] * mean[n] + var[n];
                    return free ? second / s2 : second;
                }};
    }
    }
    return {};
}

quad::Options quad_options(const FunctionalRequest& req)
{
    quad::Options o;
    o.rel_tol = req.tolerance;
    o.max_intervals = req.max_intervals;
    return o;
}

Method resolve(const SigmaMarginal& post, Method m)
{
    if (m == Method::automatic) {
        return post.conjugate() ? Method::closed_form : Method::quadrature;
    }
    return m;
}

} // namespace

std::string to_string(Method m)
{
    switch (m) {
    case Method::automatic:
        return "auto";
    case Method::closed_form:
        return "closed_form";
    case Method::quadrature:
        return "quadrature";
    case Method::importance:
        return "importance";
    }
    return "?";
}

Method method_from_string(const std::string& s)
{
    if (s == "auto" || s == "automatic") {
        return Method::automatic;
    }
    if (s == "closed_form" || s == "closed-form") {
        return Method::closed_form;
    }
    if (s == "quadrature") {
        return Method::quadrature;
    }
    if (s == "importance") {
        return Method::importance;
    }
    throw InvalidArgument("unknown integration method '" + s +
                          "' (expected auto, closed_form, quadrature or importance)");
}

std::string Functional::name() const
{
    switch (kind) {
    case FunctionalKind::inv_sigma2:
        return "inv_sigma2";
    case FunctionalKind::sigma2:
        return "sigma2";
    case FunctionalKind::sigma:
        return "sigma";
    case FunctionalKind::log_sigma2:
        return "log_sigma2";
    case FunctionalKind::mu_over_sigma2:
        return "mu_over_sigma2(" + std::to_string(group) + ")";
    case FunctionalKind::mu:
        return "mu(" + std::to_string(group) + ")";
    case FunctionalKind::mu_sq_over_sigma2:
        return "mu_sq_over_sigma2(" + std::to_string(group) + ")";
    }
    return "?";
}

double Functional::operator()(double s2, std::span<const double> mu) const
{
    switch (kind) {
    case FunctionalKind::inv_sigma2:
        return 1.0 / s2;
    case FunctionalKind::sigma2:
        return s2;
    case FunctionalKind::sigma:
        return std::sqrt(s2);
    case FunctionalKind::log_sigma2:
        return std::log(s2);
    case FunctionalKind::mu_over_sigma2:
        return mu[group] / s2;
    case FunctionalKind::mu:
        return mu[group];
    case FunctionalKind::mu_sq_over_sigma2:
        return mu[group] * mu[group] / s2;
    }
    return 0.0;
}

SigmaMarginal::SigmaMarginal(const Dataset& data, const Prior& prior)
    : SigmaMarginal(suff_stats(data), prior)
{
}

SigmaMarginal::SigmaMarginal(const SuffStats& stats, const Prior& prior)
    : stats_(stats), prior_(prior), kind_(Kind::uniform)
{
    const std::size_t N = stats.n_groups;
    const double Nd = static_cast<double>(N);
    const double J = static_cast<double>(stats.n_reps);
    const double NJ = Nd * J;
    const double S = stats.within_ss();

    const PriorValidity validity = validate_prior(prior, N, stats.n_reps);
    if (!validity.valid) {
        throw InvalidPrior(label(prior) + " is not valid for N=" + std::to_string(N) +
                           ", J=" + std::to_string(stats.n_reps) + ": " + validity.reason);
    }
    tail_ = sigma_tail_exponent(prior, N, stats.n_reps);

    if (const auto* p = std::get_if<PowerPrior>(&prior)) {
        kind_ = Kind::uniform;
        k_ = p->k;
        shape_ = Nd * (J - 1.0) + k_;
        scale_ = S;
        log_const_ = -0.5 * NJ * kLog2Pi + 0.5 * Nd * (kLog2Pi - std::log(J));
        mean_ = stats.means;
        unit_var_.assign(N, 1.0 / J);
    } else {
        const auto& g = std::get<GaussHierPrior>(prior);
        k_ = g.k;
        const SymTridiag q = ar1_precision(N, g.rho);
        std::vector<double> dev(N);
        for (std::size_t i = 0; i < N; ++i) {
            dev[i] = stats.means[i] - g.mu0;
        }
        const std::vector<double> ones(N, 1.0);
        const std::vector<double> q_ones = q.multiply(ones);
        const std::vector<double> q_dev = q.multiply(dev);
        if (g.scale_by_sigma) {
            kind_ = Kind::scaled;
            // K = J I + C^{-1} / tau2; posterior precision of mu is K / sigma^2.
            SymTridiag kmat;
            kmat.diag.resize(N);
            kmat.off.resize(q.off.size());
            for (std::size_t i = 0; i < N; ++i) {
                kmat.diag[i] = J + q.diag[i] / g.tau2;
            }
            for (std::size_t i = 0; i < q.off.size(); ++i) {
                kmat.off[i] = q.off[i] / g.tau2;
            }
            scaled_ldl_.emplace(kmat);
            std::vector<double> rhs(N);
            std::vector<double> jdev(N);
            for (std::size_t i = 0; i < N; ++i) {
                rhs[i] = J * stats.means[i] + q_ones[i] * g.mu0 / g.tau2;
                jdev[i] = J * dev[i];
            }
            mean_ = scaled_ldl_->solve(rhs);
            unit_var_ = scaled_ldl_->inverse_diagonal();
            // q = d' (I/J + tau2 C)^{-1} d = (J d)' K^{-1} (C^{-1} d / tau2)
            const std::vector<double> u = scaled_ldl_->solve(jdev);
            double quadform = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                quadform += u[i] * q_dev[i] / g.tau2;
            }
            shape_ = NJ + k_;
            scale_ = S + std::max(0.0, quadform);
            log_const_ = -0.5 * NJ * kLog2Pi -
                         0.5 * (Nd * std::log(g.tau2) + ar1_log_det(N, g.rho) + scaled_ldl_->log_det());
        } else {
            kind_ = Kind::unscaled;
            prior_prec_.diag.resize(N);
            prior_prec_.off.resize(q.off.size());
            for (std::size_t i = 0; i < N; ++i) {
                prior_prec_.diag[i] = q.diag[i] / g.tau2;
            }
            for (std::size_t i = 0; i < q.off.size(); ++i) {
                prior_prec_.off[i] = q.off[i] / g.tau2;
            }
            prior_shift_.resize(N);
            prior_prec_dev_.resize(N);
            for (std::size_t i = 0; i < N; ++i) {
                prior_shift_[i] = q_ones[i] * g.mu0 / g.tau2;
                prior_prec_dev_[i] = q_dev[i] / g.tau2;
            }
            dev_ = std::move(dev);
            log_det_prior_prec_ = -Nd * std::log(g.tau2) - ar1_log_det(N, g.rho);
            log_const_ = -0.5 * NJ * kLog2Pi;
        }
    }

    if (conjugate()) {
        if (!(scale_ > 0.0)) {
            throw DegenerateData("posterior is improper at sigma -> 0: every group is constant");
        }
        guess_ = 0.5 * std::log(scale_ / shape_);
    } else {
        if (!(S > 0.0)) {
            throw DegenerateData("posterior is improper at sigma -> 0: every group is constant");
        }
        guess_ = 0.5 * std::log(S / (Nd * (J - 1.0)));
    }
}

TridiagLdl SigmaMarginal::unscaled_factor(double sigma2) const
{
    SymTridiag lam = prior_prec_;
    const double a = static_cast<double>(stats_.n_reps) / sigma2;
    for (double& d : lam.diag) {
        d += a;
    }
    return TridiagLdl(lam);
}

double SigmaMarginal::log_density(double t) const
{
    if (conjugate()) {
        return log_const_ - shape_ * t - 0.5 * scale_ * std::exp(-2.0 * t);
    }
    const double sigma2 = std::exp(2.0 * t);
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
        return -std::numeric_limits<double>::infinity();
    }
    const std::size_t N = stats_.n_groups;
    const double NJ = static_cast<double>(N * stats_.n_reps);
    const double a = static_cast<double>(stats_.n_reps) / sigma2;
    const TridiagLdl lam = unscaled_factor(sigma2);
    std::vector<double> adev(N);
    for (std::size_t i = 0; i < N; ++i) {
        adev[i] = a * dev_[i];
    }
    const std::vector<double> u = lam.solve(adev);
    CompensatedSum quadform;
    for (std::size_t i = 0; i < N; ++i) {
        quadform += u[i] * prior_prec_dev_[i];
    }
    CompensatedSum total;
    total += log_const_;
    total += -(NJ + k_) * t;
    total += 0.5 * log_det_prior_prec_;
    total += -0.5 * lam.log_det();
    total += -0.5 * quadform.value();
    total += -0.5 * stats_.within_ss() / sigma2;
    return total.value();
}

void SigmaMarginal::conditional_mu(double sigma2, std::span<double> mean, std::span<double> var) const
{
    const std::size_t N = stats_.n_groups;
    if (mu_sigma_free()) {
        for (std::size_t i = 0; i < N; ++i) {
            mean[i] = mean_[i];
            var[i] = sigma2 * unit_var_[i];
        }
        return;
    }
    const TridiagLdl lam = unscaled_factor(sigma2);
    const double a = static_cast<double>(stats_.n_reps) / sigma2;
    std::vector<double> rhs(N);
    for (std::size_t i = 0; i < N; ++i) {
        rhs[i] = a * stats_.means[i] + prior_shift_[i];
    }
    const auto m = lam.solve(rhs);
    const auto v = lam.inverse_diagonal();
    std::copy(m.begin(), m.end(), mean.begin());
    std::copy(v.begin(), v.end(), var.begin());
}

double SigmaMarginal::conditional_mu_mean(double sigma2, std::size_t n) const
{
    if (mu_sigma_free()) {
        return mean_[n];
    }
    std::vector<double> mean(stats_.n_groups);
    std::vector<double> var(stats_.n_groups);
    conditional_mu(sigma2, mean, var);
    return mean[n];
}

void SigmaMarginal::sample_mu(double sigma2, std::span<const double> z, std::span<double> out) const
{
    const std::size_t N = stats_.n_groups;
    switch (kind_) {
    case Kind::uniform: {
        const double sd = std::sqrt(sigma2 / static_cast<double>(stats_.n_reps));
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = mean_[i] + sd * z[i];
        }
        return;
    }
    case Kind::scaled: {
        const auto x = scaled_ldl_->sample_inverse(z);
        const double sd = std::sqrt(sigma2);
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = mean_[i] + sd * x[i];
        }
        return;
    }
    case Kind::unscaled: {
        const TridiagLdl lam = unscaled_factor(sigma2);
        const double a = static_cast<double>(stats_.n_reps) / sigma2;
        std::vector<double> rhs(N);
        for (std::size_t i = 0; i < N; ++i) {
            rhs[i] = a * stats_.means[i] + prior_shift_[i];
        }
        const auto m = lam.solve(rhs);
        const auto x = lam.sample_inverse(z);
        for (std::size_t i = 0; i < N; ++i) {
            out[i] = m[i] + x[i];
        }
        return;
    }
    }
}

std::optional<double> SigmaMarginal::closed_form_log_marginal() const
{
    if (!conjugate()) {
        return std::nullopt;
    }
    const double h = 0.5 * (shape_ - 1.0);
    return log_const_ + std::log(0.5) - h * std::log(0.5 * scale_) + std::lgamma(h);
}

SigmaMarginal sigma_marginal(const Dataset& data, const Prior& prior)
{
    return SigmaMarginal(data, prior);
}

void check_moment_finite(const SigmaMarginal& post, const Functional& phi)
{
    check_group(post, phi);
    const double p = required_power(post, phi.kind);
    const double margin = post.tail_exponent() - p - 1.0;
    if (!(margin > 0.0)) {
        std::ostringstream msg;
        msg << "E[" << phi.name() << " | x] diverges under " << label(post.prior())
            << ": posterior tail exponent " << post.tail_exponent() << " leaves "
            << "integrability margin " << margin << " <= 0";
        throw MomentDivergent(msg.str());
    }
}

double closed_form_expectation(const SigmaMarginal& post, const Functional& phi)
{
    if (!post.conjugate()) {
        throw MethodUnavailable("no closed form for " + phi.name() + " under " + label(post.prior()));
    }
    check_moment_finite(post, phi);
    const double a = post.conj_shape();
    const double S = post.conj_scale();
    const double inv = (a - 1.0) / S;
    auto mean_n = [&] { return post.conditional_mu_mean(1.0, phi.group); };
    switch (phi.kind) {
    case FunctionalKind::inv_sigma2:
        return inv;
    case FunctionalKind::sigma2:
        return S / (a - 3.0);
    case FunctionalKind::sigma:
        return conj_power_moment(a, S, 1.0);
    case FunctionalKind::log_sigma2:
        return std::log(0.5 * S) - boost::math::digamma(0.5 * (a - 1.0));
    case FunctionalKind::mu_over_sigma2:
        return mean_n() * inv;
    case FunctionalKind::mu:
        return mean_n();
    case FunctionalKind::mu_sq_over_sigma2: {
        std::vector<double> mean(post.n_groups());
        std::vector<double> var(post.n_groups());
        post.conditional_mu(1.0, mean, var);
        return mean[phi.group] * mean[phi.group] * inv + var[phi.group];
    }
    }
    return 0.0;
}

quad::LogIntegral log_marginal_quadrature(const SigmaMarginal& post, const quad::Options& opts)
{
    auto lam = [&post](double t) { return post.log_density(t) + t; };
    return quad::integrate_log(lam, post.log_sigma_guess(), opts);
}

ExpectationResult expectation(const SigmaMarginal& post, const FunctionalRequest& req)
{
    if (!(req.tolerance > 0.0)) {
        throw InvalidArgument("tolerance must be positive");
    }
    check_group(post, req.phi);
    if (req.analytic_divergence_check) {
        check_moment_finite(post, req.phi);
    }
    ExpectationResult out;
    out.method = resolve(post, req.method);
    switch (out.method) {
    case Method::closed_form:
        out.value = closed_form_expectation(post, req.phi);
        return out;
    case Method::quadrature: {
        const quad::Options opts = quad_options(req);
        const Integrand ig = integrand_for(post, req.phi);
        auto lam = [&post](double t) { return post.log_density(t) + t; };
        auto lam_p = [&post, p = ig.power](double t) { return post.log_density(t) + t + p * t; };
        const auto den = quad::integrate_log(lam, post.log_sigma_guess(), opts);
        const auto num = quad::integrate_log(lam_p, post.log_sigma_guess(), opts,
                                             -std::numeric_limits<double>::infinity(),
                                             std::numeric_limits<double>::infinity(), ig.factor);
        out.value = num.sign * std::exp(num.log_value - den.log_value);
        out.rel_error = num.rel_error + den.rel_error;
        out.evaluations = num.evaluations + den.evaluations;
        return out;
    }
    case Method::importance: {
        if (req.sample_count < 2) {
            throw InvalidArgument("importance sampling needs at least two samples");
        }
        const WeightedSample sample = importance_sample(post, req.sample_count, req.seed, req.threads);
        const Functional phi = req.phi;
        const McEstimate est =
            weighted_mean(sample, [&phi](double s2, std::span<const double> mu) { return phi(s2, mu); });
        out.value = est.value;
        out.std_error = est.std_error;
        out.ess = sample.ess;
        out.ess_warning = sample.ess_warning;
        out.evaluations = sample.size();
        return out;
    }
    case Method::automatic:
        break;
    }
    throw InvalidArgument("unresolved integration method");
}

ExpectationResult expectation(const Dataset& data, const Prior& prior, const FunctionalRequest& req)
{
    return expectation(SigmaMarginal(data, prior), req);
}

std::vector<double> group_expectations(const SigmaMarginal& post, FunctionalKind kind,
                                       const FunctionalRequest& req)
{
    if (!is_group_kind(kind)) {
        throw InvalidArgument("group_expectations needs a per-group functional");
    }
    const std::size_t N = post.n_groups();
    if (req.analytic_divergence_check) {
        check_moment_finite(post, Functional{kind, 0});
    }
    std::vector<double> out(N, 0.0);
    switch (resolve(post, req.method)) {
    case Method::closed_form:
        for (std::size_t n = 0; n < N; ++n) {
            out[n] = closed_form_expectation(post, Functional{kind, n});
        }
        return out;
    case Method::quadrature: {
        const double p = required_power(post, kind);
        const double powers[] = {0.0, p};
        const PosteriorRule rule = posterior_rule(post, powers, quad_options(req));
        std::vector<double> mean(N);
        std::vector<double> var(N);
        for (std::size_t i = 0; i < rule.sigma2.size(); ++i) {
            const double s2 = rule.sigma2[i];
            const double w = rule.weights[i];
            post.conditional_mu(s2, mean, var);
            for (std::size_t n = 0; n < N; ++n) {
                switch (kind) {
                case FunctionalKind::mu:
                    out[n] += w * mean[n];
                    break;
                case FunctionalKind::mu_over_sigma2:
                    out[n] += w * mean[n] / s2;
                    break;
                default:
                    out[n] += w * (mean[n] * mean[n] + var[n]) / s2;
                    break;
                }
            }
        }
        return out;
    }
    case Method::importance: {
        const WeightedSample sample = importance_sample(post, req.sample_count, req.seed, req.threads);
        for (std::size_t i = 0; i < sample.size(); ++i) {
            const auto mu = sample.mu_row(i);
            for (std::size_t n = 0; n < N; ++n) {
                out[n] += sample.weights[i] * Functional{kind, n}(sample.sigma2[i], mu);
            }
        }
        return out;
    }
    case Method::automatic:
        break;
    }
    throw InvalidArgument("unresolved integration method");
}

PosteriorRule posterior_rule(const SigmaMarginal& post, std::span<const double> powers,
                             const quad::Options& opts)
{
    std::vector<quad::LogFn> tilts;
    for (double p : powers) {
        if (p != 0.0) {
            tilts.push_back([p](double t) { return p * t; });
        }
    }
    auto lam = [&post](double t) { return post.log_density(t) + t; };
    const quad::Rule r = quad::normalized_rule(lam, tilts, post.log_sigma_guess(), opts);
    PosteriorRule rule;
    rule.intervals = r.intervals;
    rule.evaluations = r.evaluations;
    rule.weights = r.weights;
    rule.sigma2.reserve(r.nodes.size());
    for (double t : r.nodes) {
        rule.sigma2.push_back(std::exp(2.0 * t));
    }
    return rule;
}

double log_lower_tail_fraction(const SigmaMarginal& post, double alpha, double power,
                               const quad::Options& opts)
{
    if (!(alpha > 0.0)) {
        throw InvalidArgument("alpha must be positive");
    }
    auto lam_p = [&post, power](double t) { return post.log_density(t) + t + power * t; };
    const auto full = quad::integrate_log(lam_p, post.log_sigma_guess(), opts);
    const double cut = std::log(alpha);
    const auto tail = quad::integrate_log(lam_p, cut, opts,
                                          -std::numeric_limits<double>::infinity(), cut);
    return tail.log_value - full.log_value;
}

} // namespace rkl
