#include "rkl/estimators.hpp"

#include "rkl/divergences.hpp"
#include "rkl/error.hpp"
#include "rkl/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <boost/math/tools/minima.hpp>

namespace rkl {

namespace {

Method resolve(const SigmaMarginal& post, Method m)
{
    if (m == Method::automatic) {
        return post.conjugate() ? Method::closed_form : Method::quadrature;
    }
    return m;
}

int brent_bits(double tol)
{
    return std::clamp(static_cast<int>(std::ceil(1.0 - std::log2(tol))), 8,
                      std::numeric_limits<double>::digits / 2 + 1);
}

struct Minimum {
    double x;
    double f;
};

// Brent on [a, b]; a minimiser pinned to either end is reported as failure.
template <class F>
Minimum minimize_interior(F f, double a, double b, double tol, const std::string& what)
{
    boost::uintmax_t iters = 500;
    const auto r = boost::math::tools::brent_find_minima(f, a, b, brent_bits(tol), iters);
    const double edge = 1e-6 * (b - a);
    if (!std::isfinite(r.second) || r.first - a < edge || b - r.first < edge) {
        std::ostringstream msg;
        msg << what << ": minimiser " << r.first << " reached the search bracket [" << a << ", " << b
            << "] (objective " << r.second << ", " << iters << " iterations)";
        throw OptimizerFailed(msg.str());
    }
    return {r.first, r.second};
}

void require_spread(const SuffStats& st, const std::string& who)
{
    if (!(st.s2 > 0.0)) {
        throw DegenerateData(who + " needs s^2 > 0; every group is constant");
    }
}

std::string method_label(const ExpectationResult& r)
{
    return to_string(r.method);
}

double ratio_tolerance(const ExpectationResult& r, const FunctionalRequest& req)
{
    switch (r.method) {
    case Method::closed_form:
        return 0.0;
    case Method::quadrature:
        return std::max(r.rel_error, req.tolerance);
    default:
        return r.value != 0.0 ? std::abs(r.std_error / r.value) : r.std_error;
    }
}

// MAP log density coefficient: log |d sigma^2 / d eta| = c log sigma^2 + const.
double jacobian_power(Transform t)
{
    switch (t) {
    case Transform::identity:
        return 0.0;
    case Transform::sqrt:
        return 0.5;
    case Transform::log:
        return 1.0;
    case Transform::reciprocal:
        return 2.0;
    }
    return 0.0;
}

} // namespace

FunctionalRequest EstimateOptions::request(const Functional& phi) const
{
    FunctionalRequest r;
    r.phi = phi;
    r.method = method;
    r.tolerance = tolerance;
    r.max_intervals = max_intervals;
    r.sample_count = samples;
    r.seed = seed;
    r.threads = threads;
    return r;
}

std::string to_string(LossKind k)
{
    return k == LossKind::reverse_kl ? "reverse_kl" : "forward_kl";
}

Estimate rkl_estimate(const Dataset& data, const Prior& prior, const EstimateOptions& opts)
{
    const SigmaMarginal post(data, prior);
    require_spread(post.stats(), "rkl");
    const FunctionalRequest req = opts.request(Functional::inv_sigma2());
    const ExpectationResult inv = expectation(post, req);
    Estimate est;
    est.estimator_name = "rkl";
    est.sigma2_hat = 1.0 / inv.value;
    const auto b = group_expectations(post, FunctionalKind::mu_over_sigma2, req);
    est.mu_hat.resize(b.size());
    for (std::size_t n = 0; n < b.size(); ++n) {
        est.mu_hat[n] = est.sigma2_hat * b[n];
    }
    est.method = method_label(inv);
    est.tolerance = ratio_tolerance(inv, req);
    return est;
}

PosteriorRisk::PosteriorRisk(const SigmaMarginal& post, LossKind loss, const EstimateOptions& opts)
    : loss_(loss), n_(post.n_groups()), J_(static_cast<double>(post.n_reps()))
{
    const std::vector<Functional> needed =
        loss == LossKind::reverse_kl
            ? std::vector<Functional>{Functional::inv_sigma2(), Functional::log_sigma2(),
                                      Functional::mu_sq_over_sigma2(0)}
            : std::vector<Functional>{Functional::sigma2(), Functional::log_sigma2(), Functional::mu(0)};
    try {
        for (const auto& phi : needed) {
            check_moment_finite(post, phi);
        }
    } catch (const MomentDivergent& e) {
        throw RiskDivergent("posterior " + to_string(loss) + " risk is infinite for every estimate: " +
                            e.what());
    }

    const Method m = resolve(post, opts.method) == Method::importance ? Method::importance : Method::quadrature;
    method_ = to_string(m);
    e_mu_inv_.assign(n_, 0.0);
    e_mu2_inv_.assign(n_, 0.0);
    e_mu_.assign(n_, 0.0);
    std::vector<double> mean(n_);
    std::vector<double> var(n_);

    if (m == Method::importance) {
        WeightedSample sample = importance_sample(post, opts.samples, opts.seed, opts.threads);
        s2_ = sample.sigma2;
        w_ = sample.weights;
        mu_draws_ = std::move(sample.mu);
    } else {
        quad::Options q;
        q.rel_tol = opts.tolerance;
        q.max_intervals = opts.max_intervals;
        const double power = loss == LossKind::reverse_kl ? -2.0 : 2.0;
        try {
            const double powers[] = {power};
            PosteriorRule rule = posterior_rule(post, powers, q);
            s2_ = std::move(rule.sigma2);
            w_ = std::move(rule.weights);
        } catch (const MomentDivergent& e) {
            throw RiskDivergent("posterior " + to_string(loss) + " risk does not converge: " + e.what());
        }
    }

    const bool sampled = !mu_draws_.empty();
    auto node_moments = [&](std::size_t i) {
        if (sampled) {
            std::copy_n(mu_draws_.begin() + static_cast<std::ptrdiff_t>(i * n_), n_, mean.begin());
            std::fill(var.begin(), var.end(), 0.0);
        } else {
            post.conditional_mu(s2_[i], mean, var);
        }
    };
    for (std::size_t i = 0; i < s2_.size(); ++i) {
        const double s2 = s2_[i];
        const double w = w_[i];
        e_inv_ += w / s2;
        e_log_ += w * std::log(s2);
        e_s2_ += w * s2;
        node_moments(i);
        for (std::size_t n = 0; n < n_; ++n) {
            e_mu_inv_[n] += w * mean[n] / s2;
            e_mu2_inv_[n] += w * (mean[n] * mean[n] + var[n]) / s2;
            e_mu_[n] += w * mean[n];
        }
    }
    if (loss == LossKind::forward_kl) {
        spread_.assign(s2_.size(), 0.0);
        for (std::size_t i = 0; i < s2_.size(); ++i) {
            node_moments(i);
            double acc = 0.0;
            for (std::size_t n = 0; n < n_; ++n) {
                const double d = mean[n] - e_mu_[n];
                acc += d * d + var[n];
            }
            spread_[i] = acc;
        }
    }
    lo_ = *std::min_element(s2_.begin(), s2_.end());
    hi_ = *std::max_element(s2_.begin(), s2_.end());
    if (!sampled) {
        post_.emplace(post);
    }
}

double PosteriorRisk::sigma_risk(double v) const
{
    const double NJ = static_cast<double>(n_) * J_;
    if (loss_ == LossKind::reverse_kl) {
        return 0.5 * NJ * (v * e_inv_ - 1.0 - std::log(v) + e_log_);
    }
    double spread = 0.0;
    for (std::size_t i = 0; i < w_.size(); ++i) {
        spread += w_[i] * spread_[i];
    }
    return 0.5 * NJ * (e_s2_ / v - 1.0 - e_log_ + std::log(v)) + J_ * spread / (2.0 * v);
}

double PosteriorRisk::mu_risk(std::size_t n, double mu_prime) const
{
    if (loss_ != LossKind::reverse_kl) {
        throw InvalidArgument("mu_risk is defined for the reverse-KL loss only");
    }
    return 0.5 * J_ * (mu_prime * mu_prime * e_inv_ - 2.0 * mu_prime * e_mu_inv_.at(n) + e_mu2_inv_.at(n));
}

double PosteriorRisk::mu_argmin(std::size_t n) const
{
    return loss_ == LossKind::reverse_kl ? e_mu_inv_.at(n) / e_inv_ : e_mu_.at(n);
}

double PosteriorRisk::total_risk(const ParamPoint& theta_prime) const
{
    if (theta_prime.mu.size() != n_) {
        throw InvalidArgument("estimate has the wrong number of means");
    }
    const std::size_t N = n_;
    const std::size_t J = static_cast<std::size_t>(J_);
    std::vector<double> mean(N);
    std::vector<double> var(N);
    double risk = 0.0;
    for (std::size_t i = 0; i < s2_.size(); ++i) {
        if (post_) {
            post_->conditional_mu(s2_[i], mean, var);
        } else {
            std::copy_n(mu_draws_.begin() + static_cast<std::ptrdiff_t>(i * N), N, mean.begin());
            std::fill(var.begin(), var.end(), 0.0);
        }
        const double var_sum = std::accumulate(var.begin(), var.end(), 0.0);
        const ParamPoint theta(s2_[i], mean);
        // E over mu | sigma of the mean term adds sum(var) to |mu' - mean|^2.
        const double l = loss_ == LossKind::reverse_kl
                             ? kl_products(theta_prime, theta, N, J) + J_ * var_sum / (2.0 * s2_[i])
                             : kl_products(theta, theta_prime, N, J) + J_ * var_sum / (2.0 * theta_prime.sigma2);
        risk += w_[i] * l;
    }
    return risk;
}

Estimate bayes_estimate_generic(const Dataset& data, const Prior& prior, LossKind loss,
                                const EstimateOptions& opts)
{
    const SigmaMarginal post(data, prior);
    require_spread(post.stats(), "bayes_estimate_generic");
    const PosteriorRisk risk(post, loss, opts);
    const double a = std::log(risk.sigma2_lo()) - 2.0;
    const double b = std::log(risk.sigma2_hi()) + 2.0;
    const Minimum best = minimize_interior([&](double y) { return risk.sigma_risk(std::exp(y)); }, a, b,
                                           opts.optimizer_tol, to_string(loss) + " sigma risk");
    Estimate est;
    est.estimator_name = loss == LossKind::reverse_kl ? "rkl_generic" : "minekl_generic";
    est.sigma2_hat = std::exp(best.x);
    est.mu_hat.resize(post.n_groups());
    double total = best.f;
    for (std::size_t n = 0; n < post.n_groups(); ++n) {
        est.mu_hat[n] = risk.mu_argmin(n);
        if (loss == LossKind::reverse_kl) {
            total += risk.mu_risk(n, est.mu_hat[n]);
        }
    }
    est.method = risk.method();
    est.tolerance = opts.optimizer_tol;
    est.risk = total;
    return est;
}

Estimate minekl_estimate(const Dataset& data, const Prior& prior, const EstimateOptions& opts)
{
    const SigmaMarginal post(data, prior);
    require_spread(post.stats(), "minekl");
    if (resolve(post, opts.method) != Method::closed_form) {
        Estimate est = bayes_estimate_generic(data, prior, LossKind::forward_kl, opts);
        est.estimator_name = "minekl";
        return est;
    }
    double e_s2 = 0.0;
    try {
        e_s2 = closed_form_expectation(post, Functional::sigma2());
    } catch (const MomentDivergent& e) {
        throw RiskDivergent(std::string("posterior forward_kl risk is infinite for every estimate: ") + e.what());
    }
    const std::size_t N = post.n_groups();
    std::vector<double> mean(N);
    std::vector<double> unit(N);
    post.conditional_mu(1.0, mean, unit);
    const double mean_unit = std::accumulate(unit.begin(), unit.end(), 0.0) / static_cast<double>(N);
    Estimate est;
    est.estimator_name = "minekl";
    est.sigma2_hat = e_s2 * (1.0 + mean_unit);
    est.mu_hat = mean;
    est.method = "closed_form";
    return est;
}

Estimate mle_estimate(const Dataset& data)
{
    const SuffStats st = suff_stats(data);
    require_spread(st, "mle");
    Estimate est;
    est.estimator_name = "mle";
    est.sigma2_hat = st.s2;
    est.mu_hat = st.means;
    return est;
}

std::string to_string(Transform t)
{
    switch (t) {
    case Transform::identity:
        return "identity";
    case Transform::sqrt:
        return "sqrt";
    case Transform::log:
        return "log";
    case Transform::reciprocal:
        return "reciprocal";
    }
    return "?";
}

Transform transform_from_string(const std::string& s)
{
    for (Transform t : {Transform::identity, Transform::sqrt, Transform::log, Transform::reciprocal}) {
        if (to_string(t) == s) {
            return t;
        }
    }
    throw InvalidArgument("unknown transform '" + s + "' (expected identity, sqrt, log or reciprocal)");
}

double transform_forward(Transform t, double sigma2)
{
    switch (t) {
    case Transform::identity:
        return sigma2;
    case Transform::sqrt:
        return std::sqrt(sigma2);
    case Transform::log:
        return std::log(sigma2);
    case Transform::reciprocal:
        return 1.0 / sigma2;
    }
    return sigma2;
}

double transform_inverse(Transform t, double eta)
{
    switch (t) {
    case Transform::identity:
        return eta;
    case Transform::sqrt:
        return eta * eta;
    case Transform::log:
        return std::exp(eta);
    case Transform::reciprocal:
        return 1.0 / eta;
    }
    return eta;
}

double transform_log_jacobian(Transform t, double sigma2)
{
    switch (t) {
    case Transform::identity:
        return 0.0;
    case Transform::sqrt:
        return std::log(2.0) + 0.5 * std::log(sigma2);
    case Transform::log:
        return std::log(sigma2);
    case Transform::reciprocal:
        return 2.0 * std::log(sigma2);
    }
    return 0.0;
}

Estimate map_estimate(const Dataset& data, const Prior& prior, Transform t, const EstimateOptions& opts)
{
    const SigmaMarginal post(data, prior);
    const SuffStats& st = post.stats();
    require_spread(st, "map");
    const std::size_t N = st.n_groups;
    const double Nd = static_cast<double>(N);
    const double NJ = Nd * static_cast<double>(st.n_reps);
    const double c = jacobian_power(t);

    Estimate est;
    est.estimator_name = t == Transform::identity ? "map" : "map_" + to_string(t);
    std::vector<double> mean(N);
    std::vector<double> var(N);

    const bool numeric = !post.conjugate() || opts.method == Method::quadrature ||
                         opts.method == Method::importance;
    if (!numeric) {
        // Profiling mu out (instead of integrating it) removes the sigma^N factor;
        // d(sigma) = d(sigma^2) / (2 sigma) and the transform add the rest.
        const double e = post.conj_shape() + Nd + 1.0 - 2.0 * c;
        if (!(e > 0.0)) {
            throw OptimizerFailed("posterior density in the " + to_string(t) + " coordinate has no mode");
        }
        est.sigma2_hat = post.conj_scale() / e;
        post.conditional_mu(est.sigma2_hat, mean, var);
        est.mu_hat = mean;
        est.method = "closed_form";
        return est;
    }

    auto profile = [&](double y) {
        const double v = std::exp(y);
        post.conditional_mu(v, mean, var);
        const ParamPoint theta(v, mean);
        return -(log_likelihood(st, theta) + log_prior_density(prior, theta) - 0.5 * y + c * y);
    };
    const double centre = std::log(st.within_ss() / NJ);
    const Minimum best = minimize_interior(profile, centre - 12.0, centre + 12.0, opts.optimizer_tol,
                                           "map profile in the " + to_string(t) + " coordinate");
    est.sigma2_hat = std::exp(best.x);
    post.conditional_mu(est.sigma2_hat, mean, var);
    est.mu_hat = mean;
    est.method = "numeric";
    est.tolerance = opts.optimizer_tol;
    return est;
}

Estimate postex_estimate(const Dataset& data, const Prior& prior, PostExFunctional functional,
                         const EstimateOptions& opts)
{
    const SigmaMarginal post(data, prior);
    require_spread(post.stats(), "postex");
    const bool sig = functional == PostExFunctional::sigma;
    const FunctionalRequest req = opts.request(sig ? Functional::sigma() : Functional::sigma2());
    const ExpectationResult r = expectation(post, req);
    Estimate est;
    est.estimator_name = sig ? "postex_sigma" : "postex";
    est.sigma2_hat = sig ? r.value * r.value : r.value;
    est.mu_hat = group_expectations(post, FunctionalKind::mu, req);
    est.method = method_label(r);
    est.tolerance = ratio_tolerance(r, req);
    return est;
}

Estimate corrected_baseline(const Dataset& data)
{
    const SuffStats st = suff_stats(data);
    require_spread(st, "baseline");
    const double J = static_cast<double>(st.n_reps);
    Estimate est;
    est.estimator_name = "baseline";
    est.sigma2_hat = J * st.s2 / (J - 1.0);
    est.mu_hat = st.means;
    return est;
}

const std::vector<std::string>& estimator_names()
{
    static const std::vector<std::string> names{"rkl",  "rkl_generic", "rkl_reference", "minekl",
                                                "minekl_generic", "mle", "map", "postex",
                                                "postex_sigma", "baseline"};
    return names;
}

Estimate run_estimator(const std::string& name, const Dataset& data, const Prior& prior,
                       const EstimateOptions& opts)
{
    if (name == "rkl") {
        return rkl_estimate(data, prior, opts);
    }
    if (name == "rkl_generic") {
        return bayes_estimate_generic(data, prior, LossKind::reverse_kl, opts);
    }
    if (name == "rkl_reference") {
        return rkl_via_reference(data, prior, opts);
    }
    if (name == "minekl") {
        return minekl_estimate(data, prior, opts);
    }
    if (name == "minekl_generic") {
        return bayes_estimate_generic(data, prior, LossKind::forward_kl, opts);
    }
    if (name == "mle") {
        return mle_estimate(data);
    }
    if (name == "map") {
        return map_estimate(data, prior, Transform::identity, opts);
    }
    if (name == "postex") {
        return postex_estimate(data, prior, PostExFunctional::sigma2, opts);
    }
    if (name == "postex_sigma") {
        return postex_estimate(data, prior, PostExFunctional::sigma, opts);
    }
    if (name == "baseline") {
        return corrected_baseline(data);
    }
    std::string known;
    for (const auto& n : estimator_names()) {
        known += (known.empty() ? "" : ", ") + n;
    }
    throw InvalidArgument("unknown estimator '" + name + "' (known: " + known + ")");
}

} // namespace rkl
