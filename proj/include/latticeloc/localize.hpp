#pragma once

#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "latticeloc/imagesim.hpp"
#include "latticeloc/lsf.hpp"

namespace latticeloc {

enum class Weighting
{
    unweighted,
    variance,  // 1 / (gain * model signal + bin_noise^2), re-evaluated from the model
};

struct FitOptions
{
    /// Inclusive bin range; auto (+-half_window_bins around the peak) when empty.
    std::optional<std::pair<int, int>> window;
    int half_window_bins = 8;
    double init_width_um = 1.3;
    /// Background noise per bin in counts; estimated from the profile when negative.
    double bin_noise = -1.0;
    double gain = 350.0;
    /// Defaults: unweighted for the Gaussian fit, variance for LSF-model fits.
    std::optional<Weighting> weighting;
    int reweight_passes = 3;
    double step_tolerance_um = 1e-4;
    int max_iterations = 100;
    /// Subtracted from Gaussian-fit centres (set to the calibrated bias for
    /// absolute coordinates; zero keeps it as a global origin shift).
    double subtract_bias_um = 0.0;
    double min_separation_um = 4.0;
};

struct FitResult
{
    std::vector<double> centers_um;
    std::vector<double> center_uncertainty_um;
    /// Gaussian fit: peak height in counts. LSF fits: integrated signal counts.
    std::vector<double> amplitudes;
    double width_um = 0.0;  // Gaussian sigma; the LSF half-width for LSF fits
    double background = 0.0;
    double chi2 = 0.0;
    double gradient_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    int window_lo = 0;
    int window_hi = 0;

    double center() const { return centers_um.at(0); }
    double center_uncertainty() const { return center_uncertainty_um.at(0); }
};

/// offset + A exp(-(x - x0)^2 / (2 sigma^2)), fitted by damped Gauss-Newton.
/// Returns the raw (bias-uncorrected) centre unless subtract_bias_um is set.
/// Throws Error("no-peak") or Error("window"); non-convergence is reported
/// through FitResult::converged.
FitResult fit_gaussian_1d(const BinnedProfile& profile, const FitOptions& opt = {});

/// offset + S * P_i(x0) with P_i the fraction of the LSF falling in bin i;
/// x0 is the LSF maximum.
FitResult fit_lsf_1d(const BinnedProfile& profile, const LsfModel& lsf, const FitOptions& opt = {});

/// Joint fit of two LSF peaks sharing one offset. centers_um is sorted.
/// Throws Error("overlap") below opt.min_separation_um, Error("no-second-peak").
FitResult fit_two_peaks(const BinnedProfile& profile, const LsfModel& lsf, const FitOptions& opt = {});

/// Bin with the largest 3-bin moving average; ties go to the lower index.
int find_peak_bin(const Eigen::VectorXd& counts);

/// Robust per-bin noise estimate (MAD of first differences).
double estimate_bin_noise(const Eigen::VectorXd& counts);

/// Shot-noise localisation law: 1.44 w_ax / sqrt(N_ph).
double predict_stat_error(double w_ax_um, double n_photons);

struct BudgetInputs
{
    double dx_stat_um = 0.0;
    double dx_backgr_um = 0.0;
    double fluct_1s_um = 0.0;
    double exposure_s = 1.0;
    /// Adds 2 sigma_fluct(readout)^2 when > 0.
    double readout_s = 0.0;
};

struct ErrorBudget
{
    double dx_stat_um = 0.0;
    double dx_backgr_um = 0.0;
    double sigma_fluct_exposure_um = 0.0;
    double sigma_fluct_readout_um = 0.0;
    double dx_total_um = 0.0;
};

ErrorBudget predict_single_shot_error(const BudgetInputs& in);

// Least-squares problems behind the fitters; public so that their Jacobians
// can be checked directly.
namespace models {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// params = (offset, amplitude, x0, sigma)
struct GaussianProblem
{
    using Scalar = double;
    Vector x, y, w;

    void evaluate(const Vector& p, Vector& r, Matrix& J) const;
    double step_norm(const Vector& dp) const;
    bool admissible(const Vector& p) const { return p(3) > 0.0; }
};

/// params = (offset, S_1, ..., S_k, x_1, ..., x_k)
struct BinnedLsfProblem
{
    using Scalar = double;
    const LsfModel* lsf = nullptr;
    Vector x, y, w;
    double bin_um = 1.0;
    int peaks = 1;

    void evaluate(const Vector& p, Vector& r, Matrix& J) const;
    double step_norm(const Vector& dp) const;
    bool admissible(const Vector&) const { return true; }
    /// Model signal (no offset) per bin for the current parameters.
    Vector signal(const Vector& p) const;
};

} // namespace models

} // namespace latticeloc
