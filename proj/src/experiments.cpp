#include "rkl/experiments.hpp"

#include "rkl/error.hpp"
#include "rkl/posterior.hpp"
#include "rkl/reparam.hpp"
#include "rkl/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numbers>
#include <thread>

namespace rkl {

namespace {

template <class F>
void parallel_for(std::size_t count, std::size_t threads, F fn)
{
    const std::size_t n = std::max<std::size_t>(1, std::min(threads, count));
    if (n == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

MuGenerator fixed_generator(const std::vector<double>& values)
{
    return [values](std::size_t n_groups, Engine&) {
        std::vector<double> mu(n_groups);
        for (std::size_t i = 0; i < n_groups; ++i) {
            mu[i] = values[i % values.size()];
        }
        return mu;
    };
}

std::vector<std::size_t> grid_of(const ExperimentSpec& spec)
{
    if (spec.dataset) {
        return {spec.dataset->n_groups()};
    }
    return spec.N_grid;
}

std::size_t replicates_of(const ExperimentSpec& spec)
{
    return spec.dataset ? 1 : spec.replicates;
}

// Index of the prior whose mu generator drives a shared dataset, if any.
std::optional<std::size_t> shared_generator_prior(const ExperimentSpec& spec)
{
    if (spec.mu_mode == MuMode::fixed) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < spec.priors.size(); ++i) {
        if (mu_generator(spec.priors[i], spec.true_sigma2)) {
            return i;
        }
    }
    return std::nullopt;
}

Dataset shared_dataset(const ExperimentSpec& spec, std::size_t N, std::size_t rep)
{
    if (spec.dataset) {
        return *spec.dataset;
    }
    const auto idx = shared_generator_prior(spec);
    if (idx) {
        return experiment_dataset(spec, N, rep, *idx);
    }
    return simulate(spec.true_sigma2, fixed_generator(spec.mu_fixed), N, spec.J,
                    derive_seed(spec.master_seed, {N, rep, 0}));
}

double auto_alpha(const ExperimentSpec& spec)
{
    const double J = static_cast<double>(spec.J);
    const double s_limit = std::sqrt(spec.true_sigma2 * (J - 1.0) / J);
    return 0.5 * std::min(s_limit, 1.0 / std::sqrt(2.0 * std::numbers::pi));
}

struct Cell {
    std::size_t N;
    std::size_t rep;
    std::size_t prior;
};

std::vector<Cell> cells_of(const ExperimentSpec& spec)
{
    std::vector<Cell> cells;
    for (std::size_t N : grid_of(spec)) {
        for (std::size_t r = 0; r < replicates_of(spec); ++r) {
            for (std::size_t p = 0; p < spec.priors.size(); ++p) {
                cells.push_back({N, r, p});
            }
        }
    }
    return cells;
}

std::vector<ResultRow> run_estimators(const ExperimentSpec& spec, const Cell& cell, const Dataset* data,
                                      const std::string& data_error)
{
    std::vector<ResultRow> rows;
    const Prior& prior = spec.priors[cell.prior];
    for (std::size_t e = 0; e < spec.estimators.size(); ++e) {
        ResultRow row;
        row.N = cell.N;
        row.replicate = cell.rep;
        row.prior_label = label(prior);
        row.estimator = spec.estimators[e];
        if (!data) {
            row.status = data_error;
            rows.push_back(std::move(row));
            continue;
        }
        EstimateOptions opts = spec.estimate;
        opts.seed = derive_seed(spec.master_seed, {cell.N, cell.rep, cell.prior, e, 1});
        opts.threads = 1;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Estimate est = run_estimator(row.estimator, *data, prior, opts);
            row.sigma2_hat = est.sigma2_hat;
            row.rel_error = std::abs(est.sigma2_hat - spec.true_sigma2) / spec.true_sigma2;
        } catch (const Error& ex) {
            row.status = status_of(ex);
        }
        if (spec.record_runtime) {
            row.runtime_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ResultTable run_table(const ExperimentSpec& spec, bool shared)
{
    spec.validate();
    const auto cells = cells_of(spec);
    std::vector<std::vector<ResultRow>> slots(cells.size());
    parallel_for(cells.size(), spec.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        try {
            const Dataset data = shared ? shared_dataset(spec, c.N, c.rep) : experiment_dataset(spec, c.N, c.rep, c.prior);
            slots[i] = run_estimators(spec, c, &data, "");
        } catch (const Error& ex) {
            slots[i] = run_estimators(spec, c, nullptr, status_of(ex));
        }
    });
    ResultTable table;
    for (auto& s : slots) {
        for (auto& r : s) {
            table.rows.push_back(std::move(r));
        }
    }
    return table;
}

} // namespace

std::string to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::consistency:
        return "consistency";
    case ExperimentKind::prior_sweep:
        return "prior_sweep";
    case ExperimentKind::invariance:
        return "invariance";
    case ExperimentKind::tail_mass:
        return "tail_mass";
    }
    return "?";
}

ExperimentKind experiment_kind_from_string(const std::string& s)
{
    for (auto k : {ExperimentKind::consistency, ExperimentKind::prior_sweep, ExperimentKind::invariance,
                   ExperimentKind::tail_mass}) {
        if (to_string(k) == s) {
            return k;
        }
    }
    throw InvalidArgument("unknown experiment kind '" + s +
                          "' (expected consistency, prior_sweep, invariance or tail_mass)");
}

std::string to_string(MuMode m)
{
    switch (m) {
    case MuMode::automatic:
        return "auto";
    case MuMode::prior:
        return "prior";
    case MuMode::fixed:
        return "fixed";
    }
    return "?";
}

MuMode mu_mode_from_string(const std::string& s)
{
    if (s == "auto") {
        return MuMode::automatic;
    }
    if (s == "prior") {
        return MuMode::prior;
    }
    if (s == "fixed") {
        return MuMode::fixed;
    }
    throw InvalidArgument("unknown mu_mode '" + s + "' (expected auto, prior or fixed)");
}

void ExperimentSpec::validate() const
{
    if (!dataset) {
        if (N_grid.empty()) {
            throw InvalidArgument("N_grid is empty");
        }
        for (std::size_t i = 0; i < N_grid.size(); ++i) {
            if (N_grid[i] == 0) {
                throw InvalidArgument("N_grid entries must be positive");
            }
            if (i > 0 && N_grid[i] <= N_grid[i - 1]) {
                throw InvalidArgument("N_grid must be strictly increasing");
            }
        }
        if (J < 2) {
            throw InvalidArgument("J must be at least 2, got " + std::to_string(J));
        }
    }
    if (!(true_sigma2 > 0.0) || !std::isfinite(true_sigma2)) {
        throw InvalidArgument("true_sigma2 must be positive and finite");
    }
    if (replicates == 0) {
        throw InvalidArgument("replicates must be at least 1");
    }
    if (threads == 0) {
        throw InvalidArgument("threads must be at least 1");
    }
    if (priors.empty()) {
        throw InvalidArgument("no priors given");
    }
    if (mu_fixed.empty() || !std::all_of(mu_fixed.begin(), mu_fixed.end(), [](double v) { return std::isfinite(v); })) {
        throw InvalidArgument("mu_fixed must be a nonempty list of finite values");
    }
    if (alpha && !(*alpha > 0.0)) {
        throw InvalidArgument("alpha must be positive");
    }
    if (kind == ExperimentKind::consistency || kind == ExperimentKind::prior_sweep) {
        if (estimators.empty()) {
            throw InvalidArgument("no estimators given");
        }
        const auto& known = estimator_names();
        for (const auto& e : estimators) {
            if (std::find(known.begin(), known.end(), e) == known.end()) {
                throw InvalidArgument("unknown estimator '" + e + "'");
            }
        }
    }
    const std::size_t reps = dataset ? dataset->n_reps() : J;
    for (const auto& p : priors) {
        if (mu_mode == MuMode::prior && !mu_generator(p, true_sigma2) && kind != ExperimentKind::prior_sweep) {
            throw InvalidArgument("mu_mode=prior needs priors that are proper in mu; " + label(p) + " is not");
        }
        for (std::size_t N : dataset ? std::vector<std::size_t>{dataset->n_groups()} : N_grid) {
            const PriorValidity v = validate_prior(p, N, reps);
            if (!v.valid) {
                throw InvalidPrior(label(p) + " is not valid at N=" + std::to_string(N) + ": " + v.reason);
            }
        }
    }
    if (mu_mode == MuMode::prior && kind == ExperimentKind::prior_sweep && !shared_generator_prior(*this)) {
        throw InvalidArgument("mu_mode=prior needs at least one prior that is proper in mu");
    }
}

nlohmann::json to_json(const ExperimentSpec& spec)
{
    nlohmann::json j;
    j["kind"] = to_string(spec.kind);
    j["N_grid"] = spec.N_grid;
    j["J"] = spec.J;
    j["true_sigma2"] = spec.true_sigma2;
    j["mu_mode"] = to_string(spec.mu_mode);
    j["mu_fixed"] = spec.mu_fixed;
    j["priors"] = nlohmann::json::array();
    for (const auto& p : spec.priors) {
        j["priors"].push_back(to_json(p));
    }
    j["estimators"] = spec.estimators;
    j["replicates"] = spec.replicates;
    j["master_seed"] = spec.master_seed;
    j["integration"] = {{"method", to_string(spec.estimate.method)},
                        {"rel_tol", spec.estimate.tolerance},
                        {"max_intervals", spec.estimate.max_intervals},
                        {"importance_samples", spec.estimate.samples},
                        {"optimizer_tol", spec.estimate.optimizer_tol}};
    j["threads"] = spec.threads;
    j["alpha"] = spec.alpha ? nlohmann::json(*spec.alpha) : nlohmann::json("auto");
    j["transforms"] = nlohmann::json::array();
    for (auto t : spec.transforms) {
        j["transforms"].push_back(to_string(t));
    }
    j["record_runtime"] = spec.record_runtime;
    if (spec.dataset) {
        j["dataset"] = {{"N", spec.dataset->n_groups()},
                        {"J", spec.dataset->n_reps()},
                        {"values", spec.dataset->values()}};
    }
    return j;
}

Dataset experiment_dataset(const ExperimentSpec& spec, std::size_t N, std::size_t replicate,
                           std::size_t prior_index)
{
    if (spec.dataset) {
        return *spec.dataset;
    }
    if (prior_index >= spec.priors.size()) {
        throw InvalidArgument("prior index out of range");
    }
    if (spec.mu_mode != MuMode::fixed) {
        if (auto gen = mu_generator(spec.priors[prior_index], spec.true_sigma2)) {
            return simulate(spec.true_sigma2, *gen, N, spec.J,
                            derive_seed(spec.master_seed, {N, replicate, prior_index + 1}));
        }
        if (spec.mu_mode == MuMode::prior) {
            throw InvalidArgument(label(spec.priors[prior_index]) + " cannot generate means");
        }
    }
    return simulate(spec.true_sigma2, fixed_generator(spec.mu_fixed), N, spec.J,
                    derive_seed(spec.master_seed, {N, replicate, 0}));
}

std::string status_of(const std::exception& e)
{
    if (dynamic_cast<const MomentDivergent*>(&e)) {
        return "moment_divergent";
    }
    if (dynamic_cast<const RiskDivergent*>(&e)) {
        return "risk_divergent";
    }
    if (dynamic_cast<const MethodUnavailable*>(&e)) {
        return "method_unavailable";
    }
    if (dynamic_cast<const OptimizerFailed*>(&e)) {
        return "optimizer_failed";
    }
    if (dynamic_cast<const DegenerateData*>(&e)) {
        return "degenerate_data";
    }
    if (dynamic_cast<const InvalidPrior*>(&e)) {
        return "invalid_prior";
    }
    if (dynamic_cast<const InvalidArgument*>(&e)) {
        return "invalid_argument";
    }
    return "error";
}

double median(std::vector<double> values)
{
    if (values.empty()) {
        throw InvalidArgument("median of an empty set");
    }
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
    const double hi = values[mid];
    if (values.size() % 2 == 1) {
        return hi;
    }
    const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

std::vector<SummaryRow> summarize(const ResultTable& table, double true_sigma2)
{
    std::vector<SummaryRow> out;
    std::map<std::tuple<std::size_t, std::string, std::string>, std::size_t> index;
    std::vector<std::vector<double>> values;
    for (const auto& r : table.rows) {
        const auto key = std::make_tuple(r.N, r.prior_label, r.estimator);
        auto it = index.find(key);
        if (it == index.end()) {
            it = index.emplace(key, out.size()).first;
            out.push_back({r.N, r.prior_label, r.estimator, 0, 0, std::nullopt, std::nullopt});
            values.emplace_back();
        }
        if (r.status == "ok" && r.sigma2_hat) {
            out[it->second].ok += 1;
            values[it->second].push_back(*r.sigma2_hat);
        } else {
            out[it->second].failed += 1;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (values[i].empty()) {
            continue;
        }
        out[i].median_sigma2 = median(values[i]);
        std::vector<double> err;
        for (double v : values[i]) {
            err.push_back(std::abs(v - true_sigma2));
        }
        out[i].median_abs_error = median(err);
    }
    return out;
}

std::vector<SpreadRow> prior_spread(const ResultTable& table)
{
    struct Acc {
        std::vector<double> vals;
        bool complete = true;
    };
    std::map<std::tuple<std::size_t, std::size_t, std::string>, Acc> cells;
    for (const auto& r : table.rows) {
        auto& acc = cells[std::make_tuple(r.N, r.replicate, r.estimator)];
        if (r.status == "ok" && r.sigma2_hat) {
            acc.vals.push_back(*r.sigma2_hat);
        } else {
            acc.complete = false;
        }
    }
    std::vector<SpreadRow> out;
    std::map<std::pair<std::size_t, std::string>, std::vector<double>> spreads;
    std::vector<std::pair<std::size_t, std::string>> order;
    for (const auto& r : table.rows) {
        const auto key = std::make_pair(r.N, r.estimator);
        if (spreads.find(key) == spreads.end()) {
            spreads[key];
            order.push_back(key);
        }
    }
    for (const auto& [key, acc] : cells) {
        if (acc.complete && acc.vals.size() >= 2) {
            const auto [lo, hi] = std::minmax_element(acc.vals.begin(), acc.vals.end());
            spreads[{std::get<0>(key), std::get<2>(key)}].push_back(*hi - *lo);
        }
    }
    for (const auto& key : order) {
        const auto& v = spreads[key];
        SpreadRow row;
        row.N = key.first;
        row.estimator = key.second;
        row.replicates = v.size();
        if (!v.empty()) {
            row.median_spread = median(v);
            row.max_spread = *std::max_element(v.begin(), v.end());
        }
        out.push_back(row);
    }
    return out;
}

ResultTable run_consistency(const ExperimentSpec& spec)
{
    return run_table(spec, false);
}

ResultTable run_prior_sweep(const ExperimentSpec& spec)
{
    return run_table(spec, true);
}

InvarianceTable run_invariance(const ExperimentSpec& spec)
{
    spec.validate();
    const auto cells = cells_of(spec);
    std::vector<std::vector<InvarianceRow>> slots(cells.size());
    parallel_for(cells.size(), spec.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        const Prior& prior = spec.priors[c.prior];
        EstimateOptions opts = spec.estimate;
        opts.seed = derive_seed(spec.master_seed, {c.N, c.rep, c.prior, 2});
        opts.threads = 1;
        auto base_row = [&](Transform t, const std::string& est) {
            InvarianceRow row;
            row.N = c.N;
            row.replicate = c.rep;
            row.prior_label = label(prior);
            row.transform = to_string(t);
            row.estimator = est;
            return row;
        };
        std::optional<Dataset> data;
        std::optional<SigmaMarginal> post;
        std::string data_status;
        try {
            data = experiment_dataset(spec, c.N, c.rep, c.prior);
            post.emplace(*data, prior);
        } catch (const Error& ex) {
            data_status = status_of(ex);
        }
        // Estimates in the sigma^2 coordinate, computed once.
        auto attempt = [](auto fn) -> std::pair<std::optional<double>, std::string> {
            try {
                return {fn(), "ok"};
            } catch (const Error& ex) {
                return {std::nullopt, status_of(ex)};
            }
        };
        std::pair<std::optional<double>, std::string> rkl{std::nullopt, data_status};
        std::pair<std::optional<double>, std::string> postex{std::nullopt, data_status};
        std::pair<std::optional<double>, std::string> map{std::nullopt, data_status};
        if (post) {
            rkl = attempt([&] { return rkl_estimate(*data, prior, opts).sigma2_hat; });
            postex = attempt([&] { return postex_transformed(*post, Transform::identity, opts); });
            map = attempt([&] { return map_estimate(*data, prior, Transform::identity, opts).sigma2_hat; });
        }
        for (Transform t : spec.transforms) {
            auto fill = [&](const std::string& name, const std::pair<std::optional<double>, std::string>& base,
                            auto transformed_fn) {
                InvarianceRow row = base_row(t, name);
                row.status = base.second;
                if (base.first) {
                    row.direct = transform_forward(t, *base.first);
                }
                if (post) {
                    const auto tr = attempt(transformed_fn);
                    row.transformed = tr.first;
                    if (row.status == "ok") {
                        row.status = tr.second;
                    }
                }
                if (row.direct && row.transformed) {
                    row.rel_diff = std::abs(*row.direct - *row.transformed) / std::abs(*row.direct);
                }
                slots[i].push_back(std::move(row));
            };
            fill("rkl", rkl, [&] { return rkl_transformed(*post, t, opts).eta_hat; });
            fill("postex", postex, [&] { return postex_transformed(*post, t, opts); });
            fill("map", map, [&] { return transform_forward(t, map_estimate(*data, prior, t, opts).sigma2_hat); });
        }
    });
    InvarianceTable table;
    for (auto& s : slots) {
        for (auto& r : s) {
            table.rows.push_back(std::move(r));
        }
    }
    return table;
}

TailMassTable run_tail_mass(const ExperimentSpec& spec)
{
    spec.validate();
    const auto cells = cells_of(spec);
    const double alpha = spec.alpha ? *spec.alpha : auto_alpha(spec);
    std::vector<TailMassRow> rows(cells.size());
    parallel_for(cells.size(), spec.threads, [&](std::size_t i) {
        const Cell& c = cells[i];
        TailMassRow& row = rows[i];
        row.N = c.N;
        row.replicate = c.rep;
        row.prior_label = label(spec.priors[c.prior]);
        row.alpha = alpha;
        try {
            const Dataset data = experiment_dataset(spec, c.N, c.rep, c.prior);
            const SigmaMarginal post(data, spec.priors[c.prior]);
            row.s = std::sqrt(post.stats().s2);
            if (alpha >= row.s) {
                row.status = "alpha_rejected";
                return;
            }
            quad::Options q;
            q.rel_tol = spec.estimate.tolerance;
            q.max_intervals = spec.estimate.max_intervals;
            row.log10_fraction = log_lower_tail_fraction(post, alpha, -2.0, q) / std::numbers::ln10;
        } catch (const Error& ex) {
            row.status = status_of(ex);
        }
    });
    return {std::move(rows)};
}

std::vector<TailMassVerdict> tail_mass_verdicts(const TailMassTable& table)
{
    std::vector<TailMassVerdict> out;
    std::map<std::string, std::map<std::size_t, std::vector<const TailMassRow*>>> by_prior;
    std::vector<std::string> order;
    for (const auto& r : table.rows) {
        if (by_prior.find(r.prior_label) == by_prior.end()) {
            order.push_back(r.prior_label);
        }
        by_prior[r.prior_label][r.replicate].push_back(&r);
    }
    for (const auto& name : order) {
        TailMassVerdict v;
        v.prior_label = name;
        v.max_log10_at_last = -std::numeric_limits<double>::infinity();
        for (auto& [rep, rows] : by_prior[name]) {
            std::sort(rows.begin(), rows.end(), [](auto* a, auto* b) { return a->N < b->N; });
            ++v.replicates;
            bool dec = true;
            for (std::size_t k = 0; k < rows.size(); ++k) {
                if (rows[k]->status != "ok" || !rows[k]->log10_fraction) {
                    dec = false;
                    continue;
                }
                if (k > 0 && (!rows[k - 1]->log10_fraction ||
                              !(*rows[k]->log10_fraction < *rows[k - 1]->log10_fraction))) {
                    dec = false;
                }
            }
            if (dec) {
                ++v.decreasing;
            }
            const auto* last = rows.back();
            v.max_log10_at_last = std::max(v.max_log10_at_last, last->log10_fraction
                                                                    ? *last->log10_fraction
                                                                    : std::numeric_limits<double>::infinity());
        }
        out.push_back(v);
    }
    return out;
}

} // namespace rkl
