#include "support.hpp"

#include "rkl/dataset_io.hpp"
#include "rkl/error.hpp"
#include "rkl/model.hpp"
#include "rkl/rng.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numbers>

using namespace rkl;
using rkl::test::Gen;

TEST_CASE("derive_seed is deterministic and path sensitive")
{
    CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
    CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
    CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
    CHECK(derive_seed(7, {1}) != derive_seed(7, {1, 0}));
    Engine a = substream(3, {4});
    Engine b = substream(3, {4});
    CHECK(a() == b());
}

TEST_CASE("Dataset rejects bad shapes and values")
{
    CHECK_THROWS_AS(Dataset(2, 1, {1.0, 2.0}), InvalidArgument);
    CHECK_THROWS_AS(Dataset(0, 2, {}), InvalidArgument);
    CHECK_THROWS_AS(Dataset(2, 2, {1.0, 2.0, 3.0}), InvalidArgument);
    CHECK_THROWS_AS(Dataset(1, 2, {1.0, std::nan("")}), InvalidArgument);
    CHECK_THROWS_AS(ParamPoint(0.0, {0.0}), InvalidArgument);
    CHECK_THROWS_AS(ParamPoint(-1.0, {0.0}), InvalidArgument);
}

TEST_CASE("suff_stats on small examples")
{
    const SuffStats st = suff_stats(test::example_e1());
    CHECK(st.means[0] == doctest::Approx(2.0));
    CHECK(st.means[1] == doctest::Approx(0.0));
    CHECK(st.s2 == doctest::Approx(1.0));

    const SuffStats c = suff_stats(Dataset(2, 3, std::vector<double>(6, 4.25)));
    CHECK(c.s2 == 0.0);
    CHECK(c.means[0] == 4.25);
    CHECK(c.means[1] == 4.25);
}

TEST_CASE("suff_stats matches a two-pass variance on random data")
{
    Gen gen(11);
    for (int i = 0; i < 200; ++i) {
        const Dataset d = gen.dataset(12);
        const double want = test::two_pass_s2(d);
        CHECK(suff_stats(d).s2 == doctest::Approx(want).epsilon(1e-12));
    }
    // Large offsets stress one-pass cancellation.
    std::vector<double> v;
    for (int i = 0; i < 12; ++i) {
        v.push_back(1e8 + gen.normal());
    }
    const Dataset off(3, 4, v);
    CHECK(suff_stats(off).s2 == doctest::Approx(test::two_pass_s2(off)).epsilon(1e-8));
}

TEST_CASE("log_likelihood examples and the sufficient-statistic form")
{
    const Dataset one(1, 2, {0.0, 0.0});
    CHECK(log_likelihood(one, ParamPoint(1.0, {0.0})) == doctest::Approx(-std::log(2.0 * std::numbers::pi)));

    const Dataset e1 = test::example_e1();
    const ParamPoint p(1.0, {2.0, 0.0});
    CHECK(log_likelihood(e1, p) == doctest::Approx(-5.6757541).epsilon(1e-7));
    CHECK(log_likelihood(suff_stats(e1), p) == doctest::Approx(log_likelihood(e1, p)).epsilon(1e-13));

    Gen gen(12);
    for (int i = 0; i < 100; ++i) {
        const Dataset d = gen.dataset(10);
        std::vector<double> mu(d.n_groups());
        for (auto& m : mu) {
            m = gen.uniform(-3.0, 3.0);
        }
        const ParamPoint t(gen.uniform(0.2, 4.0), mu);
        CHECK(log_likelihood(suff_stats(d), t) == doctest::Approx(log_likelihood(d, t)).epsilon(1e-11));
    }
}

TEST_CASE("simulate is reproducible and has the right scale")
{
    const ParamPoint truth(1.0, std::vector<double>(50, 0.5));
    CHECK(simulate(truth, 3, 99) == simulate(truth, 3, 99));
    CHECK_FALSE(simulate(truth, 3, 99) == simulate(truth, 3, 100));

    const std::size_t N = 100000;
    const ParamPoint big(1.0, std::vector<double>(N, 0.0));
    const Dataset d = simulate(big, 2, 5);
    CHECK(suff_stats(d).s2 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("dataset CSV and sidecar round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "rkl_test_dataset_io";
    std::filesystem::remove_all(dir);
    Gen gen(13);
    const Dataset d = gen.dataset(7, 3, 2.0);
    const auto csv = dir / "sub" / "d.csv";
    write_dataset_csv(csv, d);
    CHECK(read_dataset_csv(csv) == d);

    DatasetMeta meta;
    meta.n_groups = 7;
    meta.n_reps = 3;
    meta.sigma2_true = 2.0;
    meta.mu_true = std::vector<double>{0.1, 0.2};
    meta.seed = 42;
    write_dataset_meta(sidecar_path(csv), meta);
    CHECK(read_dataset_meta(sidecar_path(csv)) == meta);
    CHECK(sidecar_path(csv).extension() == ".json");

    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset CSV errors name the path")
{
    const auto missing = std::filesystem::temp_directory_path() / "rkl_no_such_dir" / "absent.csv";
    try {
        (void)read_dataset_csv(missing);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("absent.csv") != std::string::npos);
    }

    const auto ragged = std::filesystem::temp_directory_path() / "rkl_ragged.csv";
    {
        std::ofstream out(ragged);
        out << "1,2\n3\n";
    }
    CHECK_THROWS(read_dataset_csv(ragged));
    std::filesystem::remove(ragged);
}
