#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latticeloc/config.hpp"
#include "latticeloc/imagesim.hpp"
#include "latticeloc/transport.hpp"

namespace latticeloc {

// Phase-trace analysis ------------------------------------------------------

/// Increments phi(t + tau) - phi(t) over consecutive disjoint windows.
/// Throws Error("trace-too-short") when the trace is shorter than tau, and
/// Error("bandwidth") when bandwidth_hz is given and the sampling rate is
/// below twice it.
std::vector<double> phase_increments(const PhaseTrace& trace, double tau_s,
                                     std::optional<double> bandwidth_hz = std::nullopt);

/// rms of the lag-tau increments (structure-function convention).
double phase_std_tau(const PhaseTrace& trace, double tau_s, std::optional<double> bandwidth_hz = std::nullopt);

/// period * sigma_phi / (2 pi). Throws Error("parameter-domain") for sigma_phi < 0.
double fluct_from_phase(double sigma_phi_rad, const LatticeConfig& lattice);

/// Largest distance between the empirical CDF and a Gaussian CDF with the
/// sample mean and std. Throws Error("too-few-samples") below 1000 samples and
/// Error("degenerate-input") for zero spread.
double gaussianity_check(std::span<const double> samples);

// Campaigns -----------------------------------------------------------------

enum class CampaignKind
{
    single_shot,
    pair,
    staircase,
    transport,
    phase,
};

std::string to_string(CampaignKind kind);
CampaignKind campaign_kind_from_string(const std::string& s);

struct CampaignSpec
{
    CampaignKind kind = CampaignKind::single_shot;
    int trials = 1;
    std::uint64_t master_seed = 0;
    /// Worker threads; 0 uses the hardware concurrency.
    unsigned jobs = 0;
    Config config;

    // pair / staircase
    int pictures = 10;
    double blur_nm = 36.0;
    /// Staircase distances from full pair simulations instead of synthetic blur.
    bool staircase_pipeline = false;

    // transport
    double target_um = 9.5;
    ClosedLoopOptions closed_loop;

    // phase
    double trace_duration_s = 10.0;
    double trace_dt_s = 1e-3;
    double tau_s = 1.0;
    double gaussianity_lag_s = 0.1;
};

struct MetricSummary
{
    std::string metric;
    /// What `value` is: "mean", "std", "fraction" or "value" (single estimate).
    std::string statistic;
    double value = 0.0;
    double mean = 0.0;
    double std = 0.0;
    double stderr_ = 0.0;
    long n = 0;
    std::optional<double> paper_target;
    std::optional<double> tolerance;

    /// |value - paper_target| <= tolerance; empty for informational metrics.
    std::optional<bool> pass() const;
};

struct CampaignSummary
{
    CampaignKind kind = CampaignKind::single_shot;
    std::vector<MetricSummary> metrics;
    /// Extra named quantities (e.g. the control-budget decomposition).
    std::vector<std::pair<std::string, double>> details;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string version;
    int trials = 0;
    int failed_trials = 0;

    const MetricSummary& metric(const std::string& name) const;
    double detail(const std::string& name) const;
};

/// Plain CSV-ready table of already formatted cells.
struct DataTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string to_csv() const;
};

struct CampaignResult
{
    CampaignSummary summary;
    DataTable data;
};

/// Runs `trials` independent trials on derived random streams and merges them
/// in trial order, so results do not depend on `jobs`.
/// Throws Error("invalid-spec") for trials < 1 or an invalid config.
CampaignResult run_campaign(const CampaignSpec& spec);

std::string summary_to_json(const CampaignSummary& summary);

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception in
/// index order is rethrown after all workers finish.
void parallel_for(int n, unsigned jobs, const std::function<void(int)>& fn);

/// Shortest round-trip decimal form of a double.
std::string format_number(double v);

MetricSummary summarize(std::string name, std::span<const double> samples, const std::string& statistic,
                        std::optional<double> target = std::nullopt, std::optional<double> tolerance = std::nullopt);

} // namespace latticeloc
