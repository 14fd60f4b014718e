#include "rkl/error.hpp"
#include "rkl/posterior.hpp"
#include "rkl/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

namespace rkl {

namespace {

constexpr std::size_t kChunk = 4096;

struct Proposal {
    double shape = 1.0;
    double rate = 1.0;

    // log density of sigma^2 = rate / G, G ~ Gamma(shape, 1).
    double log_pdf(double v) const
    {
        return shape * std::log(rate) - std::lgamma(shape) - (shape + 1.0) * std::log(v) - rate / v;
    }
};

Proposal make_proposal(const SigmaMarginal& post)
{
    if (post.conjugate()) {
        return {0.5 * (post.conj_shape() - 1.0), 0.5 * post.conj_scale()};
    }
    const double N = static_cast<double>(post.n_groups());
    const double J = static_cast<double>(post.n_reps());
    const double upper = 0.5 * (post.tail_exponent() - 1.0);
    const double uniform_form = 0.5 * (N * (J - 1.0) + (post.tail_exponent() - N * J) - 1.0);
    const double shape = std::clamp(uniform_form, std::min(0.5, upper), upper);
    return {shape, 0.5 * post.stats().within_ss()};
}

} // namespace

WeightedSample importance_sample(const SigmaMarginal& post, std::size_t count, std::uint64_t seed,
                                 std::size_t threads)
{
    if (count == 0) {
        throw InvalidArgument("sample count must be positive");
    }
    const std::size_t N = post.n_groups();
    const Proposal prop = make_proposal(post);

    WeightedSample out;
    out.n_groups = N;
    out.sigma2.resize(count);
    out.mu.resize(count * N);
    std::vector<double> log_w(count);

    const std::size_t n_chunks = (count + kChunk - 1) / kChunk;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        std::vector<double> z(N);
        for (std::size_t c = next++; c < n_chunks; c = next++) {
            Engine eng = substream(seed, {c});
            boost::random::gamma_distribution<double> gamma(prop.shape, 1.0);
            boost::random::normal_distribution<double> normal(0.0, 1.0);
            const std::size_t end = std::min(count, (c + 1) * kChunk);
            for (std::size_t i = c * kChunk; i < end; ++i) {
                double g = gamma(eng);
                while (!(g > 0.0)) {
                    g = gamma(eng);
                }
                const double v = prop.rate / g;
                for (double& zi : z) {
                    zi = normal(eng);
                }
                out.sigma2[i] = v;
                post.sample_mu(v, z, std::span<double>(out.mu.data() + i * N, N));
                // target density in v = sigma^2: p(sigma) / (2 sigma)
                const double t = 0.5 * std::log(v);
                log_w[i] = post.log_density(t) - std::log(2.0) - t - prop.log_pdf(v);
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(threads, n_chunks));
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    const double lmax = *std::max_element(log_w.begin(), log_w.end());
    if (!std::isfinite(lmax)) {
        throw Error("importance weights are not finite");
    }
    out.weights.resize(count);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        out.weights[i] = std::exp(log_w[i] - lmax);
        total += out.weights[i];
    }
    double sq = 0.0;
    for (double& w : out.weights) {
        w /= total;
        sq += w * w;
    }
    out.ess = 1.0 / sq;
    out.ess_warning = out.ess < kEssWarningFraction * static_cast<double>(count);
    return out;
}

WeightedSample importance_sample(const Dataset& data, const Prior& prior, std::size_t count,
                                 std::uint64_t seed, std::size_t threads)
{
    return importance_sample(SigmaMarginal(data, prior), count, seed, threads);
}

McEstimate weighted_mean(const WeightedSample& sample,
                         const std::function<double(double, std::span<const double>)>& phi)
{
    McEstimate est;
    std::vector<double> vals(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        vals[i] = phi(sample.sigma2[i], sample.mu_row(i));
        est.value += sample.weights[i] * vals[i];
    }
    double var = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double d = vals[i] - est.value;
        var += sample.weights[i] * sample.weights[i] * d * d;
    }
    est.std_error = std::sqrt(var);
    return est;
}

} // namespace rkl
