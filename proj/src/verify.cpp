#include "rkl/verify.hpp"

#include "rkl/divergences.hpp"
#include "rkl/error.hpp"
#include "rkl/estimators.hpp"
#include "rkl/posterior.hpp"
#include "rkl/reference.hpp"
#include "rkl/reparam.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

namespace rkl {

namespace {

double uniform(Engine& eng, double lo, double hi)
{
    return boost::random::uniform_real_distribution<double>(lo, hi)(eng);
}

std::size_t uniform_int(Engine& eng, std::size_t lo, std::size_t hi)
{
    return boost::random::uniform_int_distribution<std::size_t>(lo, hi)(eng);
}

double rel(double a, double b)
{
    return std::abs(a - b) / std::abs(b);
}

std::string describe(const Dataset& d, const Prior& p)
{
    std::ostringstream os;
    os << "N=" << d.n_groups() << " J=" << d.n_reps() << " " << label(p);
    return os.str();
}

} // namespace

bool VerifyReport::all_pass() const
{
    return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.pass; });
}

Dataset random_dataset(Engine& eng, std::size_t max_groups, double sigma2_lo, double sigma2_hi)
{
    const std::size_t N = uniform_int(eng, 1, max_groups);
    const std::size_t J = uniform_int(eng, 2, 5);
    const double sigma2 = uniform(eng, sigma2_lo, sigma2_hi);
    std::vector<double> mu(N);
    for (double& m : mu) {
        m = uniform(eng, -3.0, 3.0);
    }
    return simulate(ParamPoint(sigma2, mu), J, eng());
}

Prior random_prior(Engine& eng, std::size_t n_groups, std::size_t n_reps)
{
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double k = uniform(eng, -0.5, 5.0);
        Prior p;
        switch (uniform_int(eng, 0, 2)) {
        case 0:
            p = PowerPrior{k};
            break;
        case 1:
            p = GaussHierPrior{k, uniform(eng, -2.0, 2.0), uniform(eng, 0.2, 5.0), uniform(eng, -0.9, 0.9), true};
            break;
        default:
            p = GaussHierPrior{k, uniform(eng, -2.0, 2.0), uniform(eng, 0.2, 5.0), uniform(eng, -0.9, 0.9), false};
            break;
        }
        if (validate_prior(p, n_groups, n_reps).valid) {
            return p;
        }
    }
    return PowerPrior{1.0};
}

PropertyResult verify_reference_equivalence(const VerifyOptions& opts)
{
    PropertyResult r;
    r.name = "reference_equivalence";
    r.threshold = 1e-6;
    for (std::size_t i = 0; i < opts.instances; ++i) {
        Engine eng = substream(opts.seed, {1, i});
        const Dataset d = random_dataset(eng);
        const Prior p = random_prior(eng, d.n_groups(), d.n_reps());
        try {
            const Estimate direct = rkl_estimate(d, p);
            const double target = direct.method == "closed_form" ? direct.sigma2_hat * (1.0 + opts.perturb)
                                                                 : direct.sigma2_hat;
            const Estimate via = rkl_via_reference(d, p);
            double dev = rel(via.sigma2_hat, target);
            for (std::size_t n = 0; n < d.n_groups(); ++n) {
                dev = std::max(dev, std::abs(via.mu_hat[n] - direct.mu_hat[n]) / std::max(1.0, std::abs(direct.mu_hat[n])));
            }
            if (dev > r.max_deviation) {
                r.max_deviation = dev;
                r.detail = "worst: " + describe(d, p);
            }
        } catch (const Error& e) {
            r.max_deviation = INFINITY;
            r.detail = describe(d, p) + ": " + e.what();
        }
        ++r.cases;
    }
    r.pass = r.max_deviation <= r.threshold;
    return r;
}

PropertyResult verify_integration_agreement(const VerifyOptions& opts)
{
    PropertyResult r;
    r.name = "integration_agreement";
    // Deviations are scaled so that 1 is the limit: quadrature error / 1e-6,
    // importance error / (3 standard errors).
    r.threshold = 1.0;
    const std::vector<Prior> priors{PowerPrior{3.0}, GaussHierPrior{2.0, 0.5, 1.5, 0.4, true},
                                    GaussHierPrior{2.0, 0.5, 1.5, 0.4, false}};
    std::ostringstream detail;
    for (std::size_t i = 0; i < priors.size(); ++i) {
        Engine eng = substream(opts.seed, {2, i});
        const Dataset d = random_dataset(eng, 8, 0.5, 3.0);
        const SigmaMarginal post(d, priors[i]);
        for (const Functional& phi :
             {Functional::inv_sigma2(), Functional::sigma2(), Functional::sigma(), Functional::log_sigma2(),
              Functional::mu_over_sigma2(0), Functional::mu(0), Functional::mu_sq_over_sigma2(0)}) {
            try {
                FunctionalRequest req;
                req.phi = phi;
                req.method = Method::quadrature;
                const double quad = expectation(post, req).value;
                double oracle = quad;
                if (post.conjugate()) {
                    oracle = closed_form_expectation(post, phi) * (1.0 + opts.perturb);
                    r.max_deviation = std::max(r.max_deviation, rel(quad, oracle) / 1e-6);
                }
                req.method = Method::importance;
                req.sample_count = opts.importance_samples;
                req.seed = derive_seed(opts.seed, {2, i, static_cast<std::uint64_t>(phi.kind)});
                req.threads = opts.threads;
                const ExpectationResult is = expectation(post, req);
                r.max_deviation = std::max(r.max_deviation, std::abs(is.value - oracle) / (3.0 * is.std_error));
                ++r.cases;
            } catch (const MomentDivergent&) {
                // Divergent moments have nothing to agree on.
            } catch (const Error& e) {
                r.max_deviation = INFINITY;
                detail << describe(d, priors[i]) << " " << phi.name() << ": " << e.what() << "; ";
            }
        }
    }
    r.detail = detail.str();
    r.pass = r.max_deviation <= r.threshold;
    return r;
}

PropertyResult verify_pinsker(const VerifyOptions& opts)
{
    PropertyResult r;
    r.name = "pinsker";
    r.threshold = 1e-4;
    r.max_deviation = -INFINITY;
    for (std::size_t i = 0; i < opts.pinsker_pairs; ++i) {
        Engine eng = substream(opts.seed, {3, i});
        const std::size_t N = uniform_int(eng, 1, 5);
        const std::size_t J = uniform_int(eng, 1, 4);
        std::vector<double> ma(N);
        std::vector<double> mb(N);
        const double scale = uniform(eng, 0.0, 2.0);
        for (std::size_t n = 0; n < N; ++n) {
            ma[n] = uniform(eng, -1.0, 1.0);
            mb[n] = ma[n] + scale * uniform(eng, -1.0, 1.0);
        }
        const ParamPoint a(std::exp(uniform(eng, -1.5, 1.5)), ma);
        const ParamPoint b(std::exp(uniform(eng, -1.5, 1.5)), mb);
        const double tv = tv_distance(a, b, N, J, r.threshold);
        const double bound = std::sqrt(kl_products(a, b, N, J) / 2.0);
        r.max_deviation = std::max(r.max_deviation, tv - bound);
        ++r.cases;
    }
    r.detail = "deviation is tv - sqrt(kl / 2)";
    r.pass = r.max_deviation <= r.threshold;
    return r;
}

PropertyResult verify_invariance(const VerifyOptions& opts)
{
    PropertyResult r;
    r.name = "invariance";
    r.threshold = 1e-6;
    for (std::size_t i = 0; i < 10; ++i) {
        Engine eng = substream(opts.seed, {4, i});
        // Redraw until log(sigma2_hat) is away from zero, where the relative
        // metric for the log transform is meaningless.
        Dataset d = random_dataset(eng, 20, 2.5, 6.0);
        Prior p = random_prior(eng, d.n_groups(), d.n_reps());
        try {
            Estimate est = rkl_estimate(d, p);
            for (int tries = 0; std::abs(std::log(est.sigma2_hat)) < 0.2 && tries < 100; ++tries) {
                d = random_dataset(eng, 20, 2.5, 6.0);
                p = random_prior(eng, d.n_groups(), d.n_reps());
                est = rkl_estimate(d, p);
            }
            const SigmaMarginal post(d, p);
            const double s2 = est.method == "closed_form" ? est.sigma2_hat * (1.0 + opts.perturb) : est.sigma2_hat;
            for (Transform t : {Transform::sqrt, Transform::log, Transform::reciprocal}) {
                const double direct = transform_forward(t, s2);
                const double eta = rkl_transformed(post, t).eta_hat;
                r.max_deviation = std::max(r.max_deviation, rel(eta, direct));
                ++r.cases;
            }
        } catch (const Error& e) {
            r.max_deviation = INFINITY;
            r.detail = describe(d, p) + ": " + e.what();
        }
    }
    r.pass = r.max_deviation <= r.threshold;
    return r;
}

VerifyReport run_verify(const VerifyOptions& opts)
{
    VerifyReport rep;
    rep.properties.push_back(verify_reference_equivalence(opts));
    rep.properties.push_back(verify_integration_agreement(opts));
    rep.properties.push_back(verify_pinsker(opts));
    rep.properties.push_back(verify_invariance(opts));
    return rep;
}

} // namespace rkl
