#include "rkl/priors.hpp"

#include "rkl/error.hpp"
#include "rkl/text.hpp"
#include "rkl/tridiag.hpp"

#include <boost/random/normal_distribution.hpp>

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace rkl {

namespace {

void check_params(const GaussHierPrior& p)
{
    if (!(p.tau2 > 0.0) || !std::isfinite(p.tau2)) {
        throw InvalidArgument("gauss-hier prior needs tau2 > 0");
    }
    if (!(std::abs(p.rho) < 1.0)) {
        throw InvalidArgument("gauss-hier prior needs |rho| < 1");
    }
    if (!std::isfinite(p.mu0) || !std::isfinite(p.k)) {
        throw InvalidArgument("gauss-hier prior parameters must be finite");
    }
}

std::string compact(double v)
{
    return format_real(v);
}

} // namespace

std::string label(const Prior& prior)
{
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, PowerPrior>) {
                return "power(k=" + compact(p.k) + ")";
            } else {
                return "gauss-hier(k=" + compact(p.k) + ",mu0=" + compact(p.mu0) +
                       ",tau2=" + compact(p.tau2) + ",rho=" + compact(p.rho) +
                       (p.scale_by_sigma ? ",scaled)" : ")");
            }
        },
        prior);
}

double log_prior_density(const Prior& prior, const ParamPoint& theta)
{
    const double log_sigma = 0.5 * std::log(theta.sigma2);
    if (const auto* p = std::get_if<PowerPrior>(&prior)) {
        return -p->k * log_sigma;
    }
    const auto& g = std::get<GaussHierPrior>(prior);
    check_params(g);
    const std::size_t n = theta.mu.size();
    const double var = g.tau2 * (g.scale_by_sigma ? theta.sigma2 : 1.0);
    const SymTridiag q = ar1_precision(n, g.rho);
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = theta.mu[i] - g.mu0;
    }
    const auto qd = q.multiply(d);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        quad += d[i] * qd[i];
    }
    quad /= var;
    const double nd = static_cast<double>(n);
    const double log_det = nd * std::log(var) + ar1_log_det(n, g.rho);
    return -g.k * log_sigma - 0.5 * nd * std::log(2.0 * std::numbers::pi) - 0.5 * log_det -
           0.5 * quad;
}

double sigma_tail_exponent(const Prior& prior, std::size_t n_groups, std::size_t n_reps)
{
    const double N = static_cast<double>(n_groups);
    const double J = static_cast<double>(n_reps);
    if (const auto* p = std::get_if<PowerPrior>(&prior)) {
        return N * (J - 1.0) + p->k;
    }
    return N * J + std::get<GaussHierPrior>(prior).k;
}

PriorValidity validate_prior(const Prior& prior, std::size_t n_groups, std::size_t n_reps)
{
    PriorValidity out;
    if (n_reps < 2 || n_groups < 1) {
        out.reason = "problem needs N >= 1 and J >= 2";
        return out;
    }
    double k = 0.0;
    double per_group = static_cast<double>(n_reps) - 1.0;
    if (const auto* p = std::get_if<PowerPrior>(&prior)) {
        k = p->k;
        if (!std::isfinite(k)) {
            out.reason = "k must be finite";
            return out;
        }
    } else {
        const auto& g = std::get<GaussHierPrior>(prior);
        try {
            check_params(g);
        } catch (const InvalidArgument& e) {
            out.reason = e.what();
            return out;
        }
        k = g.k;
        per_group = static_cast<double>(n_reps);
    }
    // Smallest N with N * per_group + k > 1.
    const double bound = (1.0 - k) / per_group;
    out.min_N_for_finiteness =
        bound < 1.0 ? std::size_t{1} : static_cast<std::size_t>(std::floor(bound)) + 1;

    const double e = sigma_tail_exponent(prior, n_groups, n_reps);
    out.valid = e > 1.0;
    if (!out.valid) {
        std::ostringstream msg;
        msg << "marginal r(x) diverges as sigma -> infinity: tail exponent " << e
            << " <= 1 (needs N >= " << *out.min_N_for_finiteness << ")";
        out.reason = msg.str();
    }
    return out;
}

std::optional<MuGenerator> mu_generator(const Prior& prior, double sigma2)
{
    const auto* g = std::get_if<GaussHierPrior>(&prior);
    if (g == nullptr) {
        return std::nullopt;
    }
    check_params(*g);
    const GaussHierPrior p = *g;
    const double var = p.tau2 * (p.scale_by_sigma ? sigma2 : 1.0);
    return MuGenerator([p, var](std::size_t n, Engine& engine) {
        boost::random::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> mu(n);
        const double sd = std::sqrt(var);
        const double innov = std::sqrt(var * (1.0 - p.rho * p.rho));
        double prev = sd * normal(engine);
        mu[0] = p.mu0 + prev;
        for (std::size_t i = 1; i < n; ++i) {
            prev = p.rho * prev + innov * normal(engine);
            mu[i] = p.mu0 + prev;
        }
        return mu;
    });
}

namespace {

bool parse_bool(std::string_view v)
{
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw InvalidArgument("expected a boolean, got '" + std::string(v) + "'");
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
        s.remove_prefix(1);
    }
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
        s.remove_suffix(1);
    }
    return s;
}

} // namespace

Prior parse_prior(std::string_view spec)
{
    nlohmann::json j = nlohmann::json::object();
    for (auto item : split(spec, ',')) {
        item = trim(item);
        if (item.empty()) {
            continue;
        }
        auto eq = item.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("prior spec item '" + std::string(item) + "' lacks '='");
        }
        const std::string key(trim(item.substr(0, eq)));
        const auto value = trim(item.substr(eq + 1));
        if (j.contains(key)) {
            throw InvalidArgument("prior spec repeats key '" + key + "'");
        }
        if (key == "family") {
            j[key] = std::string(value);
        } else if (key == "scale_by_sigma") {
            j[key] = parse_bool(value);
        } else {
            j[key] = parse_real(value);
        }
    }
    return prior_from_json(j);
}

Prior prior_from_json(const nlohmann::json& j)
{
    if (j.is_string()) {
        return parse_prior(j.get<std::string>());
    }
    if (!j.is_object()) {
        throw InvalidArgument("prior must be an object or a 'family=...' string");
    }
    if (!j.contains("family")) {
        throw InvalidArgument("prior lacks 'family'");
    }
    const auto family = j.at("family").get<std::string>();
    auto number = [&](const char* key, double fallback) {
        if (!j.contains(key)) {
            return fallback;
        }
        if (!j[key].is_number()) {
            throw InvalidArgument(std::string("prior key '") + key + "' must be a number");
        }
        return j[key].get<double>();
    };
    std::set<std::string> allowed;
    Prior out;
    if (family == "power") {
        allowed = {"family", "k"};
        out = PowerPrior{number("k", 1.0)};
    } else if (family == "gauss-hier") {
        allowed = {"family", "k", "mu0", "tau2", "rho", "scale_by_sigma"};
        GaussHierPrior g;
        g.k = number("k", g.k);
        g.mu0 = number("mu0", g.mu0);
        g.tau2 = number("tau2", g.tau2);
        g.rho = number("rho", g.rho);
        if (j.contains("scale_by_sigma")) {
            if (!j["scale_by_sigma"].is_boolean()) {
                throw InvalidArgument("prior key 'scale_by_sigma' must be a boolean");
            }
            g.scale_by_sigma = j["scale_by_sigma"].get<bool>();
        }
        check_params(g);
        out = g;
    } else {
        throw InvalidArgument("unknown prior family '" + family + "' (expected power or gauss-hier)");
    }
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) {
            throw InvalidArgument("unknown prior key '" + key + "' for family " + family);
        }
    }
    return out;
}

nlohmann::json to_json(const Prior& prior)
{
    if (const auto* p = std::get_if<PowerPrior>(&prior)) {
        return {{"family", "power"}, {"k", p->k}};
    }
    const auto& g = std::get<GaussHierPrior>(prior);
    return {{"family", "gauss-hier"}, {"k", g.k},     {"mu0", g.mu0},
            {"tau2", g.tau2},         {"rho", g.rho}, {"scale_by_sigma", g.scale_by_sigma}};
}

} // namespace rkl
