#include "cli.hpp"

#include "rkl/config.hpp"
#include "rkl/dataset_io.hpp"
#include "rkl/emit.hpp"
#include "rkl/error.hpp"
#include "rkl/estimators.hpp"
#include "rkl/experiments.hpp"
#include "rkl/rng.hpp"
#include "rkl/text.hpp"
#include "rkl/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

namespace rkl::cli {

namespace {

using nlohmann::json;

std::string status_name_for_display(const std::string& s);

struct Common {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("-c,--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", c.overrides, "override a config key, e.g. experiment.replicates=5");
}

Config load(const Common& c)
{
    return c.config.empty() ? default_config(c.overrides) : load_config(c.config, c.overrides);
}

std::string num(double v)
{
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

int cmd_simulate(const Common& c, const std::string& out_path, std::ostream& out)
{
    const Config cfg = load(c);
    const std::filesystem::path csv =
        out_path.empty() ? cfg.output.dir / "datasets" / (cfg.output.run_name + ".csv") : std::filesystem::path(out_path);
    const MuGenerator gen = problem_mu_generator(cfg);
    const Dataset data = simulate(cfg.problem.sigma2_true, gen, cfg.problem.N, cfg.problem.J, cfg.problem.seed);
    Engine mu_eng = substream(cfg.problem.seed, {0});
    DatasetMeta meta;
    meta.n_groups = data.n_groups();
    meta.n_reps = data.n_reps();
    meta.sigma2_true = cfg.problem.sigma2_true;
    meta.mu_true = gen(cfg.problem.N, mu_eng);
    meta.mu_spec = cfg.problem.mu_from_prior ? json("prior") : json(cfg.problem.mu_spec);
    meta.seed = cfg.problem.seed;
    write_dataset_csv(csv, data);
    write_dataset_meta(sidecar_path(csv), meta);
    out << "wrote " << csv.string() << " and " << sidecar_path(csv).string() << " (N=" << data.n_groups()
        << ", J=" << data.n_reps() << ")\n";
    return kOk;
}

int cmd_estimate(const Common& c, const std::string& data_path, const std::vector<std::string>& names,
                 const std::string& json_path, bool strict, std::ostream& out)
{
    const Config cfg = load(c);
    const Dataset data = read_dataset_csv(data_path);
    const std::vector<std::string> ests = names.empty() ? cfg.estimators : names;
    json report = json::array();
    bool failed = false;
    std::size_t prior_w = 8;
    for (const auto& prior : cfg.priors) {
        prior_w = std::max(prior_w, label(prior).size() + 2);
    }
    out << std::left << std::setw(static_cast<int>(prior_w)) << "prior" << std::setw(16) << "estimator" << std::setw(18) << "sigma2_hat"
        << std::setw(14) << "method"
        << "status\n";
    for (const auto& prior : cfg.priors) {
        for (const auto& name : ests) {
            json row = {{"prior", label(prior)}, {"estimator", name}};
            std::string shown = "-";
            std::string method = "-";
            std::string status = "ok";
            std::string message;
            try {
                const Estimate e = run_estimator(name, data, prior, cfg.integration);
                row["sigma2_hat"] = e.sigma2_hat;
                row["mu_hat"] = e.mu_hat;
                row["method"] = e.method;
                if (e.risk) {
                    row["risk"] = *e.risk;
                }
                shown = num(e.sigma2_hat);
                method = e.method;
            } catch (const Error& ex) {
                status = status_of(ex);
                message = ex.what();
                row["message"] = message;
                failed = true;
            }
            row["status"] = status;
            report.push_back(row);
            out << std::left << std::setw(static_cast<int>(prior_w)) << label(prior) << std::setw(16) << name << std::setw(18) << shown
                << std::setw(14) << method << (status == "ok" ? "ok" : status_name_for_display(status)) << "\n";
            if (!message.empty()) {
                out << "    " << message << "\n";
            }
        }
    }
    if (!json_path.empty()) {
        const std::string text = report.dump(2) + "\n";
        if (json_path == "-") {
            out << text;
        } else {
            write_text_file(json_path, text);
        }
    }
    return strict && failed ? kCompute : kOk;
}

std::vector<std::string> write_outputs(const Config& cfg, const std::filesystem::path& dir,
                                       const std::string& csv, const std::string& svg, const json& summary,
                                       const std::vector<std::pair<std::string, std::string>>& extra_csv)
{
    std::vector<std::string> files;
    auto has = [&](const char* f) {
        return std::find(cfg.output.formats.begin(), cfg.output.formats.end(), f) != cfg.output.formats.end();
    };
    if (has("csv")) {
        write_text_file(dir / "results.csv", csv);
        files.push_back("results.csv");
        for (const auto& [name, text] : extra_csv) {
            write_text_file(dir / name, text);
            files.push_back(name);
        }
    }
    if (has("svg")) {
        write_text_file(dir / "plot.svg", svg);
        files.push_back("plot.svg");
    }
    if (has("json")) {
        files.push_back("manifest.json");
        write_text_file(dir / "manifest.json", manifest(cfg.experiment, cfg.output.run_name, files, summary).dump(2) + "\n");
    }
    return files;
}

json summary_json(const std::vector<SummaryRow>& rows)
{
    json s = json::array();
    for (const auto& r : rows) {
        s.push_back({{"N", r.N},
                     {"prior", r.prior_label},
                     {"estimator", r.estimator},
                     {"ok", r.ok},
                     {"failed", r.failed},
                     {"median_sigma2", r.median_sigma2 ? json(*r.median_sigma2) : json(nullptr)},
                     {"median_abs_error", r.median_abs_error ? json(*r.median_abs_error) : json(nullptr)}});
    }
    return s;
}

int cmd_experiment(const Common& c, std::size_t threads, std::ostream& out)
{
    Config cfg = load(c);
    if (threads > 0) {
        cfg.experiment.threads = threads;
    }
    const ExperimentSpec& spec = cfg.experiment;
    spec.validate();
    const std::filesystem::path dir = cfg.output.dir / to_string(spec.kind) / cfg.output.run_name;
    std::vector<std::string> files;
    switch (spec.kind) {
    case ExperimentKind::consistency:
    case ExperimentKind::prior_sweep: {
        const bool sweep = spec.kind == ExperimentKind::prior_sweep;
        const ResultTable table = sweep ? run_prior_sweep(spec) : run_consistency(spec);
        const auto summary = summarize(table, spec.true_sigma2);
        json sj = {{"medians", summary_json(summary)}};
        std::vector<std::pair<std::string, std::string>> extra{{"summary.csv", to_csv(summary)}};
        if (sweep) {
            const auto spread = prior_spread(table);
            extra.emplace_back("spread.csv", to_csv(spread));
            json sp = json::array();
            for (const auto& r : spread) {
                sp.push_back({{"N", r.N},
                              {"estimator", r.estimator},
                              {"median_spread", r.median_spread ? json(*r.median_spread) : json(nullptr)}});
            }
            sj["spread"] = sp;
        }
        files = write_outputs(cfg, dir, to_csv(table), svg_consistency_plot(summary, spec.true_sigma2, to_string(spec.kind)),
                              sj, extra);
        std::size_t prior_w = 8;
        for (const auto& r : summary) {
            prior_w = std::max(prior_w, r.prior_label.size() + 2);
        }
        out << std::left << std::setw(8) << "N" << std::setw(static_cast<int>(prior_w)) << "prior" << std::setw(16) << "estimator"
            << std::setw(16) << "median" << "ok/failed\n";
        for (const auto& r : summary) {
            out << std::left << std::setw(8) << r.N << std::setw(static_cast<int>(prior_w)) << r.prior_label << std::setw(16) << r.estimator
                << std::setw(16) << (r.median_sigma2 ? num(*r.median_sigma2) : "-") << r.ok << "/" << r.failed << "\n";
        }
        break;
    }
    case ExperimentKind::invariance: {
        const InvarianceTable table = run_invariance(spec);
        std::map<std::pair<std::string, std::string>, double> worst;
        std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> pts;
        for (const auto& r : table.rows) {
            auto key = std::make_pair(r.estimator, r.transform);
            if (r.rel_diff) {
                worst[key] = std::max(worst[key], *r.rel_diff);
                pts[key].emplace_back(static_cast<double>(r.N), std::log10(std::max(*r.rel_diff, 1e-17)));
            } else {
                worst.try_emplace(key, std::numeric_limits<double>::quiet_NaN());
            }
        }
        json sj = json::array();
        for (const auto& [key, v] : worst) {
            sj.push_back({{"estimator", key.first}, {"transform", key.second}, {"max_rel_diff", std::isnan(v) ? json(nullptr) : json(v)}});
            out << std::left << std::setw(10) << key.first << std::setw(12) << key.second << "max rel diff "
                << (std::isnan(v) ? std::string("-") : num(v)) << "\n";
        }
        std::vector<PlotSeries> series;
        for (auto& [key, p] : pts) {
            std::map<double, std::vector<double>> byN;
            for (auto& [x, y] : p) {
                byN[x].push_back(y);
            }
            PlotSeries s{key.first + " / " + key.second, {}};
            for (auto& [x, ys] : byN) {
                s.points.emplace_back(x, median(ys));
            }
            series.push_back(s);
        }
        PlotSpec ps;
        ps.title = "invariance: median log10 relative difference";
        ps.y_label = "log10 rel diff";
        files = write_outputs(cfg, dir, to_csv(table), svg_line_plot(series, ps), {{"max_rel_diff", sj}}, {});
        break;
    }
    case ExperimentKind::tail_mass: {
        const TailMassTable table = run_tail_mass(spec);
        const auto verdicts = tail_mass_verdicts(table);
        json sj = json::array();
        for (const auto& v : verdicts) {
            sj.push_back({{"prior", v.prior_label},
                          {"replicates", v.replicates},
                          {"decreasing", v.decreasing},
                          {"max_log10_fraction_at_last_N", v.max_log10_at_last}});
            out << v.prior_label << ": decreasing in " << v.decreasing << "/" << v.replicates
                << " replicates; max log10 fraction at last N " << num(v.max_log10_at_last) << "\n";
        }
        std::map<std::string, std::map<double, std::vector<double>>> by;
        for (const auto& r : table.rows) {
            if (r.log10_fraction) {
                by[r.prior_label][static_cast<double>(r.N)].push_back(*r.log10_fraction);
            }
        }
        std::vector<PlotSeries> series;
        for (auto& [name, m] : by) {
            PlotSeries s{name, {}};
            for (auto& [x, ys] : m) {
                s.points.emplace_back(x, median(ys));
            }
            series.push_back(s);
        }
        PlotSpec ps;
        ps.title = "tail mass below alpha";
        ps.y_label = "median log10 fraction";
        files = write_outputs(cfg, dir, to_csv(table), svg_line_plot(series, ps), {{"verdicts", sj}}, {});
        break;
    }
    }
    out << "wrote";
    for (const auto& f : files) {
        out << " " << (dir / f).string();
    }
    out << "\n";
    return kOk;
}

int cmd_verify(const Common& c, double perturb, std::ostream& out)
{
    const Config cfg = load(c);
    VerifyOptions opts = cfg.verify;
    opts.perturb = perturb;
    const VerifyReport rep = run_verify(opts);
    out << std::left << std::setw(24) << "property" << std::setw(7) << "result" << std::setw(8) << "cases"
        << std::setw(16) << "max deviation"
        << "threshold\n";
    for (const auto& p : rep.properties) {
        out << std::left << std::setw(24) << p.name << std::setw(7) << (p.pass ? "PASS" : "FAIL") << std::setw(8)
            << p.cases << std::setw(16) << num(p.max_deviation) << num(p.threshold) << "\n";
        if (!p.detail.empty()) {
            out << "    " << p.detail << "\n";
        }
    }
    return rep.all_pass() ? kOk : kPropertyFailure;
}

std::string status_name_for_display(const std::string& s)
{
    static const std::map<std::string, std::string> names{{"moment_divergent", "MomentDivergent"},
                                                          {"risk_divergent", "RiskDivergent"},
                                                          {"method_unavailable", "MethodUnavailable"},
                                                          {"optimizer_failed", "OptimizerFailed"},
                                                          {"degenerate_data", "DegenerateData"},
                                                          {"invalid_prior", "InvalidPrior"},
                                                          {"invalid_argument", "InvalidArgument"}};
    auto it = names.find(s);
    return it == names.end() ? s : it->second;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bayes point estimation for the Neyman-Scott problem", "rkl"};
    app.require_subcommand(1);

    Common sim_c;
    std::string sim_out;
    auto* sim = app.add_subcommand("simulate", "simulate a dataset from problem settings");
    add_common(sim, sim_c);
    sim->add_option("-o,--out", sim_out, "dataset CSV path (sidecar JSON is written next to it)");

    Common est_c;
    std::string est_data;
    std::vector<std::string> est_names;
    std::string est_json;
    bool est_strict = false;
    auto* est = app.add_subcommand("estimate", "run estimators on a dataset");
    add_common(est, est_c);
    est->add_option("-d,--data", est_data, "dataset CSV")->required();
    est->add_option("-e,--estimator", est_names, "estimator name (repeatable; default from config)");
    est->add_option("--json", est_json, "write results as JSON to this path ('-' for stdout)");
    est->add_flag("--strict", est_strict, "exit with status 2 if any estimator fails");

    Common exp_c;
    std::size_t exp_threads = 0;
    auto* exp = app.add_subcommand("experiment", "run the experiment described by the config");
    add_common(exp, exp_c);
    exp->add_option("-j,--threads", exp_threads, "worker threads (overrides experiment.threads)");

    Common ver_c;
    double ver_perturb = 0.0;
    auto* ver = app.add_subcommand("verify", "run the built-in property suites");
    add_common(ver, ver_c);
    ver->add_option("--perturb", ver_perturb, "test mode: relative error injected into closed-form results");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) {
            return cmd_simulate(sim_c, sim_out, out);
        }
        if (*est) {
            return cmd_estimate(est_c, est_data, est_names, est_json, est_strict, out);
        }
        if (*exp) {
            return cmd_experiment(exp_c, exp_threads, out);
        }
        if (*ver) {
            return cmd_verify(ver_c, ver_perturb, out);
        }
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const InvalidPrior& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kCompute;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kCompute;
    }
    return kUsage;
}

} // namespace rkl::cli
