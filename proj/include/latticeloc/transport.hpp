#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latticeloc/core.hpp"
#include "latticeloc/lsf.hpp"

namespace latticeloc {

/// Triangular velocity profile of the optical conveyor belt: constant
/// acceleration over the first half of the distance, constant deceleration
/// over the second. Lengths in micrometres, times in seconds, a in m/s^2.
struct MotionProfile
{
    double length_um = 0.0;  // signed
    double accel_m_s2 = 1000.0;
    double t_half_s = 0.0;
    double t_total_s = 0.0;
    double v_peak_m_s = 0.0;  // magnitude
    double wavelength_um = 1.064;

    /// Signed belt velocity in m/s.
    double velocity(double t_s) const;
    /// Signed displacement in micrometres since t = 0.
    double position(double t_s) const;
    /// Mutual detuning 2 v / lambda in Hz.
    double detuning(double t_s) const;
    double peak_detuning_hz() const;
};

/// Throws Error("parameter-domain") for a <= 0.
MotionProfile motion_profile(double length_um, double accel_m_s2 = 1000.0, double wavelength_um = 1.064);

/// Digital dual-frequency synthesizer: the detuning is updated every
/// update_interval_s on a free-running clock and can only take multiples of
/// freq_step_hz.
struct SynthesizerModel
{
    // Step calibrated so that the rms displacement error over transports from
    // a 5 um MOT spread to a 9.5 um target is 190 nm (see calibrate_freq_step).
    static constexpr double kDefaultFreqStepHz = 14533.42;
    static constexpr double kDefaultUpdateIntervalS = 50e-6;

    double freq_step_hz = kDefaultFreqStepHz;
    double update_interval_s = kDefaultUpdateIntervalS;
};

struct QuantizedProfile
{
    std::vector<double> detuning_hz;  // one level per update interval
    std::vector<double> duration_s;   // last interval may be partial
    double displacement_error_um = 0.0;
};

/// Each update interval carries the interval-averaged detuning rounded to the
/// synthesizer grid (halves away from zero). Clock ticks fall at
/// clock_phase * update_interval + k * update_interval after the start, with
/// clock_phase in [0, 1). The displacement error is the exact integral of the
/// velocity difference.
QuantizedProfile quantize_profile(const MotionProfile& profile, const SynthesizerModel& synth,
                                  double clock_phase = 0.0);

/// rms quantization displacement error for transports of length
/// target - x0 with x0 ~ Normal(0, spread), evaluated on a deterministic
/// quantile grid of `samples` points paired with equidistributed clock phases.
double transport_rms_error(const SynthesizerModel& synth, double target_um, double spread_um, double accel_m_s2,
                           double wavelength_um, int samples = 4001);

/// Frequency step giving the requested rms over that distribution.
double calibrate_freq_step(double target_rms_um, double update_interval_s, double target_um = 9.5,
                           double spread_um = 5.0, double accel_m_s2 = 1000.0, double wavelength_um = 1.064);

struct TransportArgs
{
    double accel_m_s2 = 1000.0;
    /// Relative length-scale error: the belt moves (1 + scale_error) times the
    /// commanded distance.
    double scale_error = 0.0;
    /// No quantization when empty.
    std::optional<SynthesizerModel> synth = SynthesizerModel{};
};

struct TransportOutcome
{
    double final_um = 0.0;
    double commanded_um = 0.0;
    double quantization_error_um = 0.0;
    double drift_um = 0.0;
};

/// Moves the lattice by the commanded distance target - measured_start (plus
/// quantization error, scale error and the drift accrued over the cycle). The
/// synthesizer clock phase is drawn from rng. The atom stays in its well, so
/// it ends on a site of the displaced lattice.
TransportOutcome execute_transport(double start_um, double measured_start_um, double target_um,
                                   const TransportArgs& args, double drift_um, const LatticeConfig& lattice,
                                   Engine& rng);

struct ClosedLoopOptions
{
    double mot_sigma_um = 5.0;
    double sigma_drift_um = 0.140;  // lattice drift between the two exposures
    double trace_dt_s = 1e-3;
    TransportArgs transport;
};

struct PlacementResult
{
    double initial_um = 0.0;
    double measured_initial_um = 0.0;
    double final_um = 0.0;
    double measured_final_um = 0.0;
    double target_um = 0.0;
    double quantization_error_um = 0.0;
    double drift_um = 0.0;
    /// Distance from the target to the nearest site of the undisplaced lattice.
    double site_rounding_um = 0.0;
    bool ok = true;
    std::string failure;

    double error_um() const { return final_um - target_um; }
    double measured_error_um() const { return measured_final_um - target_um; }
};

struct Instrument
{
    LatticeConfig lattice;
    CameraModel camera;
    NoiseModel noise;
    LsfModel lsf;
};

/// One place-at-target experiment in axis coordinates (0 = MOT centre, which
/// images onto the middle of the frame). Fit failures mark the result !ok.
PlacementResult closed_loop_place(double target_um, const Instrument& inst, const ClosedLoopOptions& opt, Engine& rng);

/// sqrt(2 dx_stat^2 + sigma_drift^2 + sigma_transp^2)
double control_budget(double dx_stat_um, double sigma_drift_um, double sigma_transp_um);
/// Inverse for sigma_transp; throws Error("negative-discriminant").
double solve_transport_error(double sigma_control_um, double dx_stat_um, double sigma_drift_um);

} // namespace latticeloc
