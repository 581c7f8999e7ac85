#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "latticeloc/latticestat.hpp"
#include "support.hpp"

using namespace latticeloc;

namespace {

// Two-sided Gaussian tail beyond `margin`, integrated numerically.
double tail_prob(double margin, double sigma)
{
    const auto pdf = [&](double x) { return std::exp(-0.5 * x * x / (sigma * sigma)) / (sigma * std::sqrt(2 * M_PI)); };
    return 1.0 - testsupport::simpson(pdf, -margin, margin);
}

} // namespace

TEST_CASE("distance averaging")
{
    const std::vector<double> d{5.30, 5.34, 5.32, 5.33};
    const auto r = average_distance(d);
    CHECK(r.mean_um == doctest::Approx(5.3225));
    const double var = (0.0225 * 0.0225 + 0.0175 * 0.0175 + 0.0025 * 0.0025 + 0.0075 * 0.0075) / 3.0;
    CHECK(r.std_um == doctest::Approx(std::sqrt(var)));
    CHECK(r.std_of_mean_um == doctest::Approx(std::sqrt(var) / 2.0));
    CHECK(r.pictures == 4);
    CHECK_THROWS_AS(average_distance(std::vector<double>{5.3}), Error);
}

TEST_CASE("well-count inference")
{
    const LatticeConfig lat;
    const auto a = infer_well_count(5.322, 0.036, lat);
    CHECK(a.n == 10);
    CHECK(a.residual_um * 1e3 == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(a.misassignment_prob == doctest::Approx(tail_prob(0.266 - 0.002, 0.036)).epsilon(1e-6));
    CHECK(a.misassignment_prob < 1e-9);
    CHECK_FALSE(a.unreliable());

    const auto half = infer_well_count(10.5 * 0.532, 0.05, lat);
    CHECK(half.misassignment_prob == doctest::Approx(1.0));
    CHECK(half.unreliable());

    try {
        infer_well_count(5.32, 0.266, lat);
        FAIL("expected ambiguous");
    } catch (const Error& e) {
        CHECK(e.code() == "ambiguous");
    }
    CHECK_THROWS_AS(infer_well_count(-1.0, 0.01, lat), Error);
}

TEST_CASE("empirical cdf")
{
    const std::vector<double> s{3.0, 1.0, 2.0, 2.0};
    const auto c = empirical_cdf(s);
    REQUIRE(c.size() == 4);
    CHECK(c[0].first == 1.0);
    CHECK(c[0].second == 0.25);
    CHECK(c[3].first == 3.0);
    CHECK(c[3].second == 1.0);
}

TEST_CASE("staircase recovers a synthetic blur")
{
    const LatticeConfig lat;
    for (double blur : {0.020, 0.036, 0.060}) {
        std::mt19937_64 rng(9);
        std::uniform_int_distribution<long> n(10, 20);
        std::normal_distribution<double> g(0.0, blur);
        std::vector<double> d;
        for (int i = 0; i < 4000; ++i)
            d.push_back(static_cast<double>(n(rng)) * lat.period_um + g(rng));
        const auto fit = staircase_fit(d, lat);
        CHECK(fit.step_width_um == doctest::Approx(blur).epsilon(0.1));
        double wsum = 0.0;
        for (double w : fit.step_weights)
            wsum += w;
        CHECK(wsum == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("staircase guard rails")
{
    const LatticeConfig lat;
    std::vector<double> few(10, 5.32);
    CHECK_THROWS_AS(staircase_fit(few, lat), Error);
    std::vector<double> one_step(100, 5.32);
    try {
        staircase_fit(one_step, lat);
        FAIL("expected insufficient-span");
    } catch (const Error& e) {
        CHECK(e.code() == "insufficient-span");
    }
}

TEST_CASE("pair simulation finds the right well count")
{
    const LsfModel& lsf = testsupport::default_lsf();
    CameraModel cam;
    NoiseModel noise;
    noise.photons_per_s_per_atom = kPairPhotonsPerS;
    const LatticeConfig lat;
    int correct = 0;
    for (std::uint64_t i = 0; i < 20; ++i) {
        Engine rng = make_stream(3, i);
        const auto sim = simulate_pair(lsf, cam, noise, lat, {}, rng);
        REQUIRE(sim.ok);
        CHECK(sim.campaign.pictures + sim.failed_pictures == 10);
        correct += sim.wells.n == sim.n_true;
    }
    CHECK(correct == 20);
}
