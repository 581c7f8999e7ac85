#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "latticeloc/core.hpp"
#include "latticeloc/localize.hpp"

namespace latticeloc {

struct PairCampaignResult
{
    std::vector<double> distances_um;
    double mean_um = 0.0;
    double std_um = 0.0;          // single-picture spread, N-1 denominator
    double std_of_mean_um = 0.0;  // std_um / sqrt(N)
    int pictures = 0;
};

struct WellAssignment
{
    long n = 0;
    double residual_um = 0.0;  // d_mean - n * period
    double misassignment_prob = 0.0;
    bool unreliable() const { return misassignment_prob >= 0.5; }
};

struct StaircaseFit
{
    double step_width_um = 0.0;
    std::vector<double> step_positions_um;
    std::vector<double> step_weights;
    double chi2 = 0.0;
};

struct StaircaseOptions
{
    double grid_step_um = 0.001;
    double min_width_um = 1e-4;
    int min_pairs = 20;
    int min_steps = 3;
    /// Steps sit at n * period + step_offset_um.
    double step_offset_um = 0.0;
};

/// x2 - x1 of a converged two-peak fit.
double pair_distance(const FitResult& fit);

/// Throws Error("too-few-samples") for fewer than two distances.
PairCampaignResult average_distance(std::span<const double> distances_um);

/// Nearest well count and the two-sided Gaussian probability that the true
/// count differs. Throws Error("ambiguous") when unc >= period / 2.
WellAssignment infer_well_count(double d_mean_um, double d_mean_unc_um, const LatticeConfig& lattice);

/// Empirical CDF evaluated on the sorted samples: (x_k, (k + 1) / N).
std::vector<std::pair<double, double>> empirical_cdf(std::span<const double> samples);

/// Least-squares fit of the empirical CDF (sampled on a dense grid) by error-
/// function steps fixed at n * period (+ opt.step_offset_um), with free step
/// weights and one common width. Throws Error("insufficient-span").
StaircaseFit staircase_fit(std::span<const double> d_means_um, const LatticeConfig& lattice,
                           const StaircaseOptions& opt = {});

// Full-pipeline pair simulation --------------------------------------------

struct PairSimulationOptions
{
    int pictures = 10;
    long n_min = 9;  // 4.79 um, clear of the 4 um overlap floor
    long n_max = 40;
};

struct PairSimulation
{
    long n_true = 0;
    double d_true_um = 0.0;
    PairCampaignResult campaign;
    WellAssignment wells;
    int failed_pictures = 0;
    bool ok = false;
};

/// Loads a pair with a random well count, takes `pictures` frames (common-mode
/// drift when the noise model is trace-based), fits both peaks in each frame
/// and infers the well count from the averaged distance.
PairSimulation simulate_pair(const LsfModel& lsf, const CameraModel& cam, const NoiseModel& noise,
                             const LatticeConfig& lattice, const PairSimulationOptions& opt, Engine& rng);

} // namespace latticeloc
