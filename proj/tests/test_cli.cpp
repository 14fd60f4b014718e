#include "support.hpp"

#include "cli.hpp"
#include "rkl/dataset_io.hpp"
#include "rkl/emit.hpp"

#include <doctest.h>

#include <filesystem>
#include <sstream>

using namespace rkl;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args)
{
    std::ostringstream out;
    std::ostringstream err;
    Run r;
    r.code = cli::run(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("rkl_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

} // namespace

TEST_CASE("usage errors exit with 1")
{
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({"estimate"}).code == cli::kUsage);
    CHECK(run({"--help"}).code == cli::kOk);
    const Run bad = run({"simulate", "--set", "problem.J=1"});
    CHECK(bad.code == cli::kUsage);
    CHECK(bad.err.find("problem.J") != std::string::npos);
}

TEST_CASE("simulate writes a reloadable dataset, deterministically")
{
    const fs::path dir = scratch("simulate");
    const std::string a = (dir / "a.csv").string();
    const std::string b = (dir / "b.csv").string();
    REQUIRE(run({"simulate", "--set", "problem.N=7", "--set", "problem.J=3", "-o", a}).code == 0);
    REQUIRE(run({"simulate", "--set", "problem.N=7", "--set", "problem.J=3", "-o", b}).code == 0);
    const Dataset d = read_dataset_csv(a);
    CHECK(d.n_groups() == 7);
    CHECK(d.n_reps() == 3);
    CHECK(read_text_file(a) == read_text_file(b));
    const DatasetMeta meta = read_dataset_meta(sidecar_path(a));
    CHECK(meta.n_groups == 7);
    REQUIRE(meta.mu_true);
    CHECK(meta.mu_true->size() == 7);
    fs::remove_all(dir);
}

TEST_CASE("estimate prints values and statuses")
{
    const fs::path dir = scratch("estimate");
    const std::string data = (dir / "e1.csv").string();
    write_dataset_csv(data, test::example_e1());

    const Run ok = run({"estimate", "-d", data, "-e", "rkl", "--set", "prior={\"family\":\"power\",\"k\":1}"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find(" 2 ") != std::string::npos);

    const Run div = run({"estimate", "-d", data, "-e", "postex", "-e", "rkl"});
    CHECK(div.code == 0);
    CHECK(div.out.find("MomentDivergent") != std::string::npos);
    CHECK(run({"estimate", "-d", data, "-e", "postex", "--strict"}).code == cli::kCompute);

    const std::string js = (dir / "out.json").string();
    REQUIRE(run({"estimate", "-d", data, "-e", "rkl", "-e", "mle", "--json", js}).code == 0);
    const auto doc = nlohmann::json::parse(read_text_file(js));
    REQUIRE(doc.size() == 2);
    CHECK(doc[0]["sigma2_hat"].get<double>() == doctest::Approx(2.0));
    CHECK(doc[1]["sigma2_hat"].get<double>() == doctest::Approx(1.0));

    const Run missing = run({"estimate", "-d", (dir / "nope.csv").string()});
    CHECK(missing.code == cli::kUsage);
    CHECK(missing.err.find("nope.csv") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("experiment writes the run directory and reruns identically")
{
    const fs::path dir = scratch("experiment");
    const std::vector<std::string> args{"experiment",
                                        "--set",
                                        "output.dir=" + dir.string(),
                                        "--set",
                                        "output.run_name=small",
                                        "--set",
                                        "experiment.N_grid=[10,50]",
                                        "--set",
                                        "experiment.replicates=3",
                                        "--set",
                                        "estimators=[\"rkl\",\"mle\",\"postex\"]"};
    REQUIRE(run(args).code == 0);
    const fs::path out = dir / "consistency" / "small";
    CHECK(fs::exists(out / "results.csv"));
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(fs::exists(out / "plot.svg"));
    CHECK(fs::exists(out / "summary.csv"));
    const std::string first = read_text_file(out / "results.csv");
    CHECK(result_table_from_csv(first).rows.size() == 2 * 3 * 3);
    std::vector<std::string> threaded = args;
    threaded.insert(threaded.end(), {"-j", "3"});
    REQUIRE(run(threaded).code == 0);
    CHECK(read_text_file(out / "results.csv") == first);
    const auto manifest = nlohmann::json::parse(read_text_file(out / "manifest.json"));
    CHECK(manifest["master_seed"] == 1);

    const std::vector<std::string> inv{"experiment",
                                       "--set",
                                       "output.dir=" + dir.string(),
                                       "--set",
                                       "experiment.kind=invariance",
                                       "--set",
                                       "experiment.N_grid=[10]",
                                       "--set",
                                       "experiment.replicates=2"};
    REQUIRE(run(inv).code == 0);
    const std::string csv = read_text_file(dir / "invariance" / "run" / "results.csv");
    CHECK(csv.rfind("N,replicate,prior_label,transform,estimator,direct,transformed,rel_diff,status", 0) == 0);
    CHECK(csv.find(",sqrt,") != std::string::npos);
    CHECK(csv.find(",log,") != std::string::npos);
    CHECK(csv.find(",reciprocal,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("verify passes by default and fails under a perturbed closed form")
{
    const std::vector<std::string> small{"--set", "verify.instances=8", "--set", "verify.pinsker_pairs=20", "--set",
                                         "verify.importance_samples=20000"};
    std::vector<std::string> args{"verify"};
    args.insert(args.end(), small.begin(), small.end());
    const Run good = run(args);
    CHECK_MESSAGE(good.code == cli::kOk, good.out);
    CHECK(good.out.find("FAIL") == std::string::npos);
    args.insert(args.end(), {"--perturb", "0.01"});
    const Run bad = run(args);
    CHECK(bad.code == cli::kPropertyFailure);
    CHECK(bad.out.find("FAIL") != std::string::npos);
}
