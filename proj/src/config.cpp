#include "rkl/config.hpp"

#include "rkl/dataset_io.hpp"
#include "rkl/error.hpp"

#include <fstream>
#include <set>

namespace rkl {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    if (!obj.is_object()) {
        throw InvalidArgument("'" + where + "' must be an object");
    }
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) {
            std::string list;
            for (const auto& a : allowed) {
                list += (list.empty() ? "" : ", ") + a;
            }
            throw InvalidArgument("unknown key '" + (where.empty() ? key : where + "." + key) + "' (allowed: " + list +
                                  ")");
        }
    }
}

double get_real(const json& obj, const std::string& where, const char* key, double fallback)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_number()) {
        throw InvalidArgument("'" + where + "." + key + "' must be a number");
    }
    return obj[key].get<double>();
}

std::uint64_t get_count(const json& obj, const std::string& where, const char* key, std::uint64_t fallback)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    const json& v = obj[key];
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw InvalidArgument("'" + where + "." + key + "' must be a nonnegative integer");
    }
    return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const std::string& where, const char* key, const std::string& fallback)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_string()) {
        throw InvalidArgument("'" + where + "." + key + "' must be a string");
    }
    return obj[key].get<std::string>();
}

bool get_bool(const json& obj, const std::string& where, const char* key, bool fallback)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_boolean()) {
        throw InvalidArgument("'" + where + "." + key + "' must be true or false");
    }
    return obj[key].get<bool>();
}

std::vector<double> get_reals(const json& v, const std::string& where)
{
    if (!v.is_array()) {
        throw InvalidArgument("'" + where + "' must be a list of numbers");
    }
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) {
            throw InvalidArgument("'" + where + "' must be a list of numbers");
        }
        out.push_back(x.get<double>());
    }
    return out;
}

std::vector<std::string> get_strings(const json& v, const std::string& where)
{
    if (!v.is_array()) {
        throw InvalidArgument("'" + where + "' must be a list of strings");
    }
    std::vector<std::string> out;
    for (const auto& x : v) {
        if (!x.is_string()) {
            throw InvalidArgument("'" + where + "' must be a list of strings");
        }
        out.push_back(x.get<std::string>());
    }
    return out;
}

} // namespace

void apply_override(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw InvalidArgument("override '" + assignment + "' must look like section.key=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) {
        value = text;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) {
            throw InvalidArgument("override '" + assignment + "' has an empty key");
        }
        if (!node->is_object()) {
            if (!node->is_null()) {
                throw InvalidArgument("override '" + assignment + "' descends into a non-object");
            }
            *node = json::object();
        }
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

Config parse_config(const json& doc)
{
    Config cfg;
    cfg.source = doc;
    reject_unknown(doc, "", {"problem", "prior", "priors", "estimators", "integration", "experiment", "output", "verify"});

    try {
        if (doc.contains("problem")) {
            const json& p = doc["problem"];
            reject_unknown(p, "problem", {"N", "J", "sigma2_true", "mu_spec", "seed"});
            cfg.problem.N = get_count(p, "problem", "N", cfg.problem.N);
            cfg.problem.J = get_count(p, "problem", "J", cfg.problem.J);
            cfg.problem.sigma2_true = get_real(p, "problem", "sigma2_true", cfg.problem.sigma2_true);
            cfg.problem.seed = get_count(p, "problem", "seed", cfg.problem.seed);
            if (p.contains("mu_spec")) {
                if (p["mu_spec"].is_string() && p["mu_spec"].get<std::string>() == "prior") {
                    cfg.problem.mu_from_prior = true;
                    cfg.problem.mu_spec.clear();
                } else {
                    cfg.problem.mu_spec = get_reals(p["mu_spec"], "problem.mu_spec");
                }
            }
        }
        if (cfg.problem.N < 1) {
            throw InvalidArgument("'problem.N' must be at least 1");
        }
        if (cfg.problem.J < 2) {
            throw InvalidArgument("'problem.J' must be at least 2 (got " + std::to_string(cfg.problem.J) + ")");
        }
        if (!(cfg.problem.sigma2_true > 0.0)) {
            throw InvalidArgument("'problem.sigma2_true' must be positive");
        }
        if (!cfg.problem.mu_from_prior && cfg.problem.mu_spec.empty()) {
            throw InvalidArgument("'problem.mu_spec' must not be empty");
        }

        if (doc.contains("prior") && doc.contains("priors")) {
            throw InvalidArgument("give either 'prior' or 'priors', not both");
        }
        if (doc.contains("prior")) {
            cfg.priors = {prior_from_json(doc["prior"])};
        } else if (doc.contains("priors")) {
            if (!doc["priors"].is_array() || doc["priors"].empty()) {
                throw InvalidArgument("'priors' must be a nonempty list");
            }
            cfg.priors.clear();
            for (const auto& p : doc["priors"]) {
                cfg.priors.push_back(prior_from_json(p));
            }
        }

        if (doc.contains("estimators")) {
            cfg.estimators = get_strings(doc["estimators"], "estimators");
            const auto& known = estimator_names();
            for (const auto& e : cfg.estimators) {
                if (std::find(known.begin(), known.end(), e) == known.end()) {
                    std::string list;
                    for (const auto& k : known) {
                        list += (list.empty() ? "" : ", ") + k;
                    }
                    throw InvalidArgument("unknown estimator '" + e + "' in 'estimators' (known: " + list + ")");
                }
            }
        }

        if (doc.contains("integration")) {
            const json& g = doc["integration"];
            reject_unknown(g, "integration", {"method", "rel_tol", "max_nodes", "importance_samples", "seed", "optimizer_tol"});
            cfg.integration.method = method_from_string(get_string(g, "integration", "method", "auto"));
            cfg.integration.tolerance = get_real(g, "integration", "rel_tol", cfg.integration.tolerance);
            const auto nodes = get_count(g, "integration", "max_nodes", cfg.integration.max_intervals * 15);
            cfg.integration.max_intervals = std::max<std::uint64_t>(1, nodes / 15);
            cfg.integration.samples = get_count(g, "integration", "importance_samples", cfg.integration.samples);
            cfg.integration.seed = get_count(g, "integration", "seed", cfg.integration.seed);
            cfg.integration.optimizer_tol = get_real(g, "integration", "optimizer_tol", cfg.integration.optimizer_tol);
        }
        if (!(cfg.integration.tolerance > 0.0) || !(cfg.integration.optimizer_tol > 0.0)) {
            throw InvalidArgument("'integration.rel_tol' and 'integration.optimizer_tol' must be positive");
        }
        if (cfg.integration.samples < 2) {
            throw InvalidArgument("'integration.importance_samples' must be at least 2");
        }

        ExperimentSpec& x = cfg.experiment;
        x.J = cfg.problem.J;
        x.true_sigma2 = cfg.problem.sigma2_true;
        x.mu_fixed = cfg.problem.mu_from_prior ? std::vector<double>{0.0} : cfg.problem.mu_spec;
        x.mu_mode = cfg.problem.mu_from_prior ? MuMode::prior : MuMode::automatic;
        x.priors = cfg.priors;
        x.estimators = cfg.estimators;
        x.estimate = cfg.integration;
        if (doc.contains("experiment")) {
            const json& e = doc["experiment"];
            reject_unknown(e, "experiment", {"kind", "N_grid", "replicates", "master_seed", "mu_mode", "threads",
                                             "alpha", "transforms", "dataset"});
            x.kind = experiment_kind_from_string(get_string(e, "experiment", "kind", to_string(x.kind)));
            if (e.contains("N_grid")) {
                x.N_grid.clear();
                for (double v : get_reals(e["N_grid"], "experiment.N_grid")) {
                    if (!(v >= 1.0) || v != std::floor(v)) {
                        throw InvalidArgument("'experiment.N_grid' must hold positive integers");
                    }
                    x.N_grid.push_back(static_cast<std::size_t>(v));
                }
            }
            x.replicates = get_count(e, "experiment", "replicates", x.replicates);
            x.master_seed = get_count(e, "experiment", "master_seed", x.master_seed);
            if (e.contains("mu_mode")) {
                x.mu_mode = mu_mode_from_string(get_string(e, "experiment", "mu_mode", "auto"));
            }
            x.threads = get_count(e, "experiment", "threads", x.threads);
            if (e.contains("alpha")) {
                if (e["alpha"].is_string() && e["alpha"].get<std::string>() == "auto") {
                    x.alpha.reset();
                } else {
                    x.alpha = get_real(e, "experiment", "alpha", 0.0);
                }
            }
            if (e.contains("transforms")) {
                x.transforms.clear();
                for (const auto& t : get_strings(e["transforms"], "experiment.transforms")) {
                    x.transforms.push_back(transform_from_string(t));
                }
            }
            if (e.contains("dataset")) {
                x.dataset = read_dataset_csv(get_string(e, "experiment", "dataset", ""));
            }
        }

        if (doc.contains("output")) {
            const json& o = doc["output"];
            reject_unknown(o, "output", {"dir", "formats", "run_name", "record_runtime"});
            cfg.output.dir = get_string(o, "output", "dir", cfg.output.dir.string());
            if (o.contains("formats")) {
                cfg.output.formats = get_strings(o["formats"], "output.formats");
                for (const auto& f : cfg.output.formats) {
                    if (f != "csv" && f != "json" && f != "svg") {
                        throw InvalidArgument("unknown output format '" + f + "' (expected csv, json or svg)");
                    }
                }
            }
            cfg.output.run_name = get_string(o, "output", "run_name", cfg.output.run_name);
            if (cfg.output.run_name.empty() || cfg.output.run_name.find('/') != std::string::npos) {
                throw InvalidArgument("'output.run_name' must be a nonempty name without '/'");
            }
            cfg.output.record_runtime = get_bool(o, "output", "record_runtime", cfg.output.record_runtime);
        }
        x.record_runtime = cfg.output.record_runtime;

        if (doc.contains("verify")) {
            const json& v = doc["verify"];
            reject_unknown(v, "verify", {"seed", "instances", "pinsker_pairs", "importance_samples", "threads"});
            cfg.verify.seed = get_count(v, "verify", "seed", cfg.verify.seed);
            cfg.verify.instances = get_count(v, "verify", "instances", cfg.verify.instances);
            cfg.verify.pinsker_pairs = get_count(v, "verify", "pinsker_pairs", cfg.verify.pinsker_pairs);
            cfg.verify.importance_samples = get_count(v, "verify", "importance_samples", cfg.verify.importance_samples);
            cfg.verify.threads = get_count(v, "verify", "threads", cfg.verify.threads);
        }
        x.validate();
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("config: ") + e.what());
    }
    return cfg;
}

Config load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config file " + path.string());
    }
    json doc = json::parse(in, nullptr, false, true);
    if (doc.is_discarded()) {
        throw InvalidArgument("config file " + path.string() + " is not valid JSON");
    }
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    return parse_config(doc);
}

Config default_config(const std::vector<std::string>& overrides)
{
    json doc = json::object();
    for (const auto& o : overrides) {
        apply_override(doc, o);
    }
    return parse_config(doc);
}

MuGenerator problem_mu_generator(const Config& cfg)
{
    if (cfg.problem.mu_from_prior) {
        for (const auto& p : cfg.priors) {
            if (auto gen = mu_generator(p, cfg.problem.sigma2_true)) {
                return *gen;
            }
        }
        throw InvalidArgument("'problem.mu_spec' is \"prior\" but no prior is proper in mu");
    }
    const std::vector<double> values = cfg.problem.mu_spec;
    return [values](std::size_t n, Engine&) {
        std::vector<double> mu(n);
        for (std::size_t i = 0; i < n; ++i) {
            mu[i] = values[i % values.size()];
        }
        return mu;
    };
}

} // namespace rkl
