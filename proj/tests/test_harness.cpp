#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <json.hpp>

#include "latticeloc/harness.hpp"

using namespace latticeloc;

namespace {

PhaseTrace ramp_trace(int n, double dt, double slope)
{
    PhaseTrace t;
    t.times_s = Eigen::VectorXd::LinSpaced(n, 0.0, (n - 1) * dt);
    t.phi_rad = slope * t.times_s;
    return t;
}

} // namespace

TEST_CASE("phase increments")
{
    const PhaseTrace flat = ramp_trace(1001, 1e-3, 0.0);
    CHECK(phase_std_tau(flat, 0.1) == 0.0);

    const PhaseTrace ramp = ramp_trace(1001, 1e-3, 2.0);
    const auto inc = phase_increments(ramp, 0.1);
    CHECK(inc.size() == 10);
    for (double d : inc)
        CHECK(d == doctest::Approx(0.2));
    CHECK(phase_std_tau(ramp, 0.1) == doctest::Approx(0.2));

    try {
        phase_increments(ramp, 2.0);
        FAIL("expected trace-too-short");
    } catch (const Error& e) {
        CHECK(e.code() == "trace-too-short");
    }
    try {
        phase_increments(ramp, 0.1, 1000.0);
        FAIL("expected bandwidth");
    } catch (const Error& e) {
        CHECK(e.code() == "bandwidth");
    }
}

TEST_CASE("phase to displacement")
{
    const LatticeConfig lat;
    CHECK(fluct_from_phase(0.496, lat) * 1e3 == doctest::Approx(42.0).epsilon(2e-3));
    CHECK(fluct_from_phase(2 * M_PI, lat) == doctest::Approx(0.532));
    CHECK_THROWS_AS(fluct_from_phase(-1.0, lat), Error);
}

TEST_CASE("gaussianity statistic")
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(3.0, 2.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> gs, us;
    for (int i = 0; i < 20000; ++i) {
        gs.push_back(g(rng));
        us.push_back(u(rng));
    }
    CHECK(gaussianity_check(gs) < 0.01);
    CHECK(gaussianity_check(us) > 0.02);
    try {
        gaussianity_check(std::vector<double>(10, 1.0));
        FAIL("expected too-few-samples");
    } catch (const Error& e) {
        CHECK(e.code() == "too-few-samples");
    }
    try {
        gaussianity_check(std::vector<double>(2000, 1.0));
        FAIL("expected degenerate-input");
    } catch (const Error& e) {
        CHECK(e.code() == "degenerate-input");
    }
}

TEST_CASE("campaign kinds round-trip")
{
    for (auto k : {CampaignKind::single_shot, CampaignKind::pair, CampaignKind::staircase, CampaignKind::transport,
                   CampaignKind::phase})
        CHECK(campaign_kind_from_string(to_string(k)) == k);
    CHECK_THROWS_AS(campaign_kind_from_string("bogus"), Error);
}

TEST_CASE("metric summaries")
{
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    const auto m = summarize("x", v, "std", 1.0, 0.1);
    CHECK(m.mean == 2.5);
    CHECK(m.std == doctest::Approx(std::sqrt(5.0 / 3.0)));
    CHECK(m.value == m.std);
    CHECK(m.n == 4);
    CHECK(m.pass() == std::optional<bool>(false));
    CHECK_FALSE(summarize("y", v, "mean").pass().has_value());
}

TEST_CASE("parallel_for covers every index and rethrows the first error")
{
    std::vector<int> hits(1000, 0);
    parallel_for(1000, 4, [&](int i) { hits[static_cast<std::size_t>(i)] += 1; });
    for (int h : hits)
        CHECK(h == 1);
    try {
        parallel_for(100, 4, [](int i) {
            if (i == 17 || i == 60)
                throw Error("boom", std::to_string(i));
        });
        FAIL("expected an exception");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("17") != std::string::npos);
    }
}

TEST_CASE("campaigns do not depend on the worker count")
{
    for (auto kind : {CampaignKind::single_shot, CampaignKind::transport}) {
        CampaignSpec spec;
        spec.kind = kind;
        spec.trials = 40;
        spec.master_seed = 77;
        spec.jobs = 1;
        const auto a = run_campaign(spec);
        spec.jobs = 4;
        const auto b = run_campaign(spec);
        CHECK(a.data.to_csv() == b.data.to_csv());
        CHECK(summary_to_json(a.summary) == summary_to_json(b.summary));
        CHECK(a.data.rows.size() == 40);
    }
}

TEST_CASE("summary json layout")
{
    CampaignSpec spec;
    spec.kind = CampaignKind::transport;
    spec.trials = 20;
    spec.master_seed = 3;
    const auto r = run_campaign(spec);
    const auto j = nlohmann::json::parse(summary_to_json(r.summary));
    CHECK(j["kind"] == "transport");
    CHECK(j["provenance"]["seed"] == 3);
    CHECK(j["provenance"]["trials"] == 20);
    CHECK(j["provenance"]["config_hash"].get<std::string>().size() == 16);
    for (const auto& m : j["metrics"]) {
        for (const char* key : {"metric", "statistic", "value", "mean", "std", "stderr", "n", "paper_target",
                                "tolerance", "pass"})
            CHECK(m.contains(key));
    }
    CHECK(r.data.header == std::vector<std::string>{"trial", "initial_um", "measured_initial_um", "final_um",
                                                    "measured_final_um", "error_nm"});
    spec.trials = 0;
    CHECK_THROWS_AS(run_campaign(spec), Error);
}
