#include "support.hpp"

#include "rkl/config.hpp"
#include "rkl/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace rkl;
using nlohmann::json;

namespace {

std::string error_of(const json& doc)
{
    try {
        (void)parse_config(doc);
    } catch (const InvalidArgument& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST_CASE("defaults parse")
{
    const Config c = default_config();
    CHECK(c.problem.J == 2);
    CHECK(c.priors.size() == 1);
    CHECK(c.experiment.kind == ExperimentKind::consistency);
    CHECK(c.output.formats.size() == 3);
}

TEST_CASE("unknown keys are rejected with their path")
{
    CHECK(error_of(json::parse(R"({"problme": {}})")).find("problme") != std::string::npos);
    CHECK(error_of(json::parse(R"({"problem": {"NN": 3}})")).find("problem.NN") != std::string::npos);
    CHECK(error_of(json::parse(R"({"output": {"colour": "red"}})")).find("output.colour") != std::string::npos);
    CHECK(error_of(json::parse(R"({"prior": {"family": "power", "kk": 1}})")).find("kk") != std::string::npos);
}

TEST_CASE("invalid values are diagnosed, never crash")
{
    CHECK(error_of(json::parse(R"({"problem": {"J": 1}})")).find("problem.J") != std::string::npos);
    CHECK_FALSE(error_of(json::parse(R"({"problem": {"N": -3}})")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"problem": {"sigma2_true": "big"}})")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"estimators": ["rkl", "magic"]})")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"experiment": {"N_grid": [100, 10]}})")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"experiment": {"kind": "nope"}})")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"output": {"formats": ["pdf"]}})")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"prior": {"family": "power"}, "priors": []})")).empty());
    CHECK_FALSE(error_of(json::parse(R"([1, 2])")).empty());
    CHECK_FALSE(error_of(json::parse(R"({"integration": {"method": "guess"}})")).empty());

    // Random garbage documents: every failure is an InvalidArgument.
    test::Gen gen(81);
    const std::vector<std::string> keys{"problem", "prior", "experiment", "output", "integration", "N", "J", "kind"};
    for (int rep = 0; rep < 200; ++rep) {
        json doc = json::object();
        json& sec = doc[keys[gen.integer(0, 4)]];
        sec = json::object();
        for (int i = 0; i < 3; ++i) {
            const std::string k = keys[gen.integer(0, keys.size() - 1)];
            switch (gen.integer(0, 3)) {
            case 0:
                sec[k] = gen.uniform(-5.0, 5.0);
                break;
            case 1:
                sec[k] = "text";
                break;
            case 2:
                sec[k] = json::array({1, "a"});
                break;
            default:
                sec[k] = nullptr;
            }
        }
        try {
            (void)parse_config(doc);
        } catch (const InvalidArgument&) {
        } catch (const std::exception& e) {
            FAIL("unexpected exception type: " << e.what());
        }
    }
}

TEST_CASE("overrides set nested keys")
{
    const Config c = default_config({"experiment.replicates=5", "problem.sigma2_true=2.5", "output.run_name=abc",
                                     "experiment.N_grid=[10,20]", "prior={\"family\":\"power\",\"k\":3}"});
    CHECK(c.experiment.replicates == 5);
    CHECK(c.problem.sigma2_true == 2.5);
    CHECK(c.experiment.true_sigma2 == 2.5);
    CHECK(c.output.run_name == "abc");
    CHECK(c.experiment.N_grid == std::vector<std::size_t>{10, 20});
    CHECK(std::get<PowerPrior>(c.priors[0]).k == 3.0);
    CHECK_THROWS_AS(default_config({"noequals"}), InvalidArgument);
    CHECK_THROWS_AS(default_config({"experiment.bogus=1"}), InvalidArgument);
}

TEST_CASE("config files load, and errors name the file")
{
    const auto dir = std::filesystem::temp_directory_path() / "rkl_config_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "c.json";
    {
        std::ofstream out(path);
        out << R"({
  // comments are allowed
  "problem": {"N": 4, "J": 3, "mu_spec": "prior"},
  "priors": [{"family": "gauss-hier", "k": 1, "tau2": 2, "rho": 0.5}],
  "integration": {"method": "quadrature", "max_nodes": 1500}
})";
    }
    const Config c = load_config(path, {"problem.seed=9"});
    CHECK(c.problem.N == 4);
    CHECK(c.problem.mu_from_prior);
    CHECK(c.problem.seed == 9);
    CHECK(c.integration.method == Method::quadrature);
    CHECK(c.integration.max_intervals == 100);
    CHECK(c.experiment.mu_mode == MuMode::prior);

    try {
        (void)load_config(dir / "absent.json");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("absent.json") != std::string::npos);
    }
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(load_config(path), InvalidArgument);
    std::filesystem::remove_all(dir);
}
