#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "latticeloc/cli.hpp"
#include "latticeloc/io.hpp"

namespace {

struct Run
{
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    args.insert(args.begin(), "latticeloc");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = latticeloc::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::filesystem::path temp_path(const std::string& name)
{
    return std::filesystem::temp_directory_path() / ("latticeloc_test_" + name);
}

} // namespace

TEST_CASE("budget subcommand")
{
    const auto r = run({"budget", "--dx-stat-nm", "130", "--dx-backgr-nm", "15", "--fluct-1s-nm", "42",
                        "--exposure-s", "1", "--readout-s", "0.5"});
    CHECK(r.code == 0);
    CHECK(r.out.find("dx_total = 143.7 nm") != std::string::npos);
}

TEST_CASE("infer-wells subcommand")
{
    const auto r = run({"infer-wells", "--d-um", "5.322", "--unc-nm", "36"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("n=10 ", 0) == 0);
    const auto bad = run({"infer-wells", "--d-um", "5.322", "--unc-nm", "300"});
    CHECK(bad.code == 1);
    CHECK(bad.err.rfind("ERROR:ambiguous:", 0) == 0);
}

TEST_CASE("usage errors exit with 2")
{
    CHECK(run({}).code == 2);
    CHECK(run({"budget", "--no-such-flag"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
}

TEST_CASE("calibrate-lsf reports the calibrated model")
{
    const auto r = run({"calibrate-lsf", "--format", "json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["gauss_bias_nm"].get<double>() == doctest::Approx(42.0).epsilon(1e-4));
}

TEST_CASE("frame round trip through simulate-frame and localize")
{
    const auto frame = temp_path("frame.json");
    const auto sim = run({"simulate-frame", "--atoms-um", "46.65", "--seed", "4", "--out", frame.string()});
    REQUIRE(sim.code == 0);
    const auto loc = run({"localize", "--frame", frame.string(), "--model", "lsf", "--format", "json"});
    REQUIRE(loc.code == 0);
    const auto j = nlohmann::json::parse(loc.out);
    CHECK(j["converged"] == true);
    CHECK(std::abs(j["center_um"].get<double>() - 46.65) < 0.6);
    std::filesystem::remove(frame);

    const auto missing = run({"localize", "--frame", temp_path("missing.json").string()});
    CHECK(missing.code == 1);
    CHECK(missing.err.rfind("ERROR:", 0) == 0);
}

TEST_CASE("campaign output files")
{
    const auto csv = temp_path("transport.csv");
    const auto r = run({"transport", "--trials", "10", "--seed", "2", "--out", csv.string()});
    REQUIRE(r.code == 0);
    const std::string data = latticeloc::read_file(csv);
    CHECK(data.rfind("trial,initial_um,measured_initial_um,final_um,measured_final_um,error_nm\n", 0) == 0);
    const auto summary = nlohmann::json::parse(latticeloc::read_file(csv.string() + ".summary.json"));
    CHECK(summary["provenance"]["trials"] == 10);
    std::filesystem::remove(csv);
    std::filesystem::remove(csv.string() + ".summary.json");
}
