#include "support.hpp"

#include "rkl/error.hpp"
#include "rkl/priors.hpp"
#include "rkl/tridiag.hpp"

#include <doctest.h>

using namespace rkl;

TEST_CASE("power prior density")
{
    CHECK(log_prior_density(PowerPrior{0.0}, ParamPoint(3.0, {1.0})) == 0.0);
    CHECK(log_prior_density(PowerPrior{2.0}, ParamPoint(4.0, {1.0})) == doctest::Approx(-2.0 * std::log(2.0)));
}

TEST_CASE("hierarchical prior density against a dense Gaussian")
{
    // N = 2: correlation [[1, rho], [rho, 1]], covariance tau2 * C (times sigma^2 if scaled).
    const double rho = 0.6;
    const double tau2 = 1.7;
    const double mu0 = 0.3;
    for (bool scaled : {false, true}) {
        const GaussHierPrior p{1.5, mu0, tau2, rho, scaled};
        const double sigma2 = 2.2;
        const ParamPoint t(sigma2, {0.9, -0.4});
        const double c = tau2 * (scaled ? sigma2 : 1.0);
        const double det = c * c * (1.0 - rho * rho);
        const double a = 0.9 - mu0;
        const double b = -0.4 - mu0;
        const double quad = (a * a - 2.0 * rho * a * b + b * b) / (c * (1.0 - rho * rho));
        const double want = -1.5 * std::log(std::sqrt(sigma2)) - std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) -
                            0.5 * quad;
        CHECK(log_prior_density(p, t) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("validate_prior boundary cases")
{
    CHECK(validate_prior(PowerPrior{1.0}, 1, 2).valid);
    CHECK_FALSE(validate_prior(PowerPrior{0.0}, 1, 2).valid);
    CHECK(validate_prior(PowerPrior{1.0}, 2, 2).valid);
    const auto v = validate_prior(PowerPrior{-3.0}, 1, 2);
    CHECK_FALSE(v.valid);
    CHECK_FALSE(v.reason.empty());
    REQUIRE(v.min_N_for_finiteness);
    CHECK(*v.min_N_for_finiteness == 5);
    CHECK(validate_prior(PowerPrior{-3.0}, 5, 2).valid);
    CHECK(sigma_tail_exponent(PowerPrior{1.0}, 10, 3) == 21.0);
    CHECK(sigma_tail_exponent(GaussHierPrior{1.0}, 10, 3) == 31.0);
}

TEST_CASE("prior parsing, labels and JSON round trip")
{
    const Prior p = parse_prior("family=gauss-hier,k=2,mu0=0.5,tau2=3,rho=0.9,scale_by_sigma=true");
    const auto& g = std::get<GaussHierPrior>(p);
    CHECK(g.k == 2.0);
    CHECK(g.mu0 == 0.5);
    CHECK(g.tau2 == 3.0);
    CHECK(g.rho == 0.9);
    CHECK(g.scale_by_sigma);
    CHECK(std::get<PowerPrior>(parse_prior("family=power,k=4")).k == 4.0);
    CHECK_THROWS_AS(parse_prior("family=cauchy"), InvalidArgument);
    CHECK_THROWS_AS(parse_prior("family=power,k=x"), InvalidArgument);
    CHECK_THROWS_AS(parse_prior("family=gauss-hier,rho=1.0"), InvalidArgument);
    CHECK_THROWS_AS(parse_prior("family=gauss-hier,tau2=0"), InvalidArgument);

    const Prior back = prior_from_json(to_json(p));
    CHECK(label(back) == label(p));
    CHECK(label(PowerPrior{1.0}) != label(PowerPrior{2.0}));
}

TEST_CASE("mu generator exists only for proper mu priors")
{
    CHECK_FALSE(mu_generator(PowerPrior{1.0}, 1.0));
    const auto gen = mu_generator(GaussHierPrior{1.0, 5.0, 0.01, 0.0, false}, 1.0);
    REQUIRE(gen);
    Engine eng = substream(1, {0});
    const auto mu = (*gen)(1000, eng);
    double mean = 0.0;
    for (double m : mu) {
        mean += m;
    }
    CHECK(mean / 1000.0 == doctest::Approx(5.0).epsilon(0.01));
}

namespace {

std::vector<std::vector<double>> dense(const SymTridiag& a)
{
    const std::size_t n = a.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        m[i][i] = a.diag[i];
        if (i + 1 < n) {
            m[i][i + 1] = m[i + 1][i] = a.off[i];
        }
    }
    return m;
}

// Gauss-Jordan inverse and determinant.
std::vector<std::vector<double>> invert(std::vector<std::vector<double>> m, double& log_det)
{
    const std::size_t n = m.size();
    std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        inv[i][i] = 1.0;
    }
    log_det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        const double p = m[c][c];
        log_det += std::log(p);
        for (std::size_t j = 0; j < n; ++j) {
            m[c][j] /= p;
            inv[c][j] /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r != c) {
                const double f = m[r][c];
                for (std::size_t j = 0; j < n; ++j) {
                    m[r][j] -= f * m[c][j];
                    inv[r][j] -= f * inv[c][j];
                }
            }
        }
    }
    return inv;
}

} // namespace

TEST_CASE("tridiagonal LDL against dense Gauss-Jordan")
{
    test::Gen gen(21);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = gen.integer(1, 9);
        SymTridiag a;
        for (std::size_t i = 0; i < n; ++i) {
            a.diag.push_back(gen.uniform(2.5, 5.0));
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            a.off.push_back(gen.uniform(-1.0, 1.0));
        }
        double log_det = 0.0;
        const auto inv = invert(dense(a), log_det);
        const TridiagLdl ldl(a);
        CHECK(ldl.log_det() == doctest::Approx(log_det).epsilon(1e-12));
        std::vector<double> b(n);
        for (auto& x : b) {
            x = gen.uniform(-2.0, 2.0);
        }
        const auto x = ldl.solve(b);
        const auto diag = ldl.inverse_diagonal();
        for (std::size_t i = 0; i < n; ++i) {
            double want = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                want += inv[i][j] * b[j];
            }
            CHECK(x[i] == doctest::Approx(want).epsilon(1e-11));
            CHECK(diag[i] == doctest::Approx(inv[i][i]).epsilon(1e-11));
        }
        const auto back = a.multiply(x);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(back[i] == doctest::Approx(b[i]).epsilon(1e-11));
        }
    }
}

TEST_CASE("AR(1) precision inverts the correlation matrix")
{
    for (double rho : {0.0, 0.5, -0.7, 0.95}) {
        const std::size_t n = 6;
        const SymTridiag p = ar1_precision(n, rho);
        for (std::size_t j = 0; j < n; ++j) {
            std::vector<double> col(n);
            for (std::size_t i = 0; i < n; ++i) {
                col[i] = std::pow(rho, static_cast<double>(i > j ? i - j : j - i));
            }
            const auto e = p.multiply(col);
            for (std::size_t i = 0; i < n; ++i) {
                CHECK(e[i] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
            }
        }
        CHECK(ar1_log_det(n, rho) == doctest::Approx(-TridiagLdl(p).log_det()).epsilon(1e-12));
    }
    CHECK_THROWS_AS(TridiagLdl(SymTridiag{{1.0, 1.0}, {2.0}}), InvalidArgument);
}
