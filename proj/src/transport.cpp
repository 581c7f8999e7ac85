#include "latticeloc/transport.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "latticeloc/imagesim.hpp"
#include "latticeloc/localize.hpp"

namespace latticeloc {

namespace {

constexpr double kUmPerM = 1e6;

double round_half_away(double x)
{
    return std::copysign(std::floor(std::abs(x) + 0.5), x);
}

// Standard normal quantile by Newton iteration on erfc, from a bisection start.
double normal_quantile(double p)
{
    double lo = -10.0;
    double hi = 10.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p)
            lo = mid;
        else
            hi = mid;
    }
    double z = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {
        const double f = 0.5 * std::erfc(-z / std::numbers::sqrt2) - p;
        const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
        if (pdf > 0.0)
            z -= f / pdf;
    }
    return z;
}

} // namespace

double MotionProfile::velocity(double t_s) const
{
    if (t_s <= 0.0 || t_s >= t_total_s)
        return 0.0;
    const double speed = t_s < t_half_s ? accel_m_s2 * t_s : accel_m_s2 * (t_total_s - t_s);
    return std::copysign(speed, length_um);
}

double MotionProfile::position(double t_s) const
{
    if (t_s <= 0.0)
        return 0.0;
    if (t_s >= t_total_s)
        return length_um;
    double d_m = 0.0;
    if (t_s <= t_half_s) {
        d_m = 0.5 * accel_m_s2 * t_s * t_s;
    } else {
        const double r = t_total_s - t_s;
        d_m = std::abs(length_um) / kUmPerM - 0.5 * accel_m_s2 * r * r;
    }
    return std::copysign(d_m * kUmPerM, length_um);
}

double MotionProfile::detuning(double t_s) const
{
    return 2.0 * velocity(t_s) / (wavelength_um / kUmPerM);
}

double MotionProfile::peak_detuning_hz() const
{
    return 2.0 * v_peak_m_s / (wavelength_um / kUmPerM);
}

MotionProfile motion_profile(double length_um, double accel_m_s2, double wavelength_um)
{
    if (!(accel_m_s2 > 0.0))
        throw Error("parameter-domain", "acceleration must be > 0");
    if (!(wavelength_um > 0.0))
        throw Error("parameter-domain", "wavelength must be > 0");
    MotionProfile p;
    p.length_um = length_um;
    p.accel_m_s2 = accel_m_s2;
    p.wavelength_um = wavelength_um;
    const double l_m = std::abs(length_um) / kUmPerM;
    p.t_half_s = std::sqrt(l_m / accel_m_s2);
    p.t_total_s = 2.0 * p.t_half_s;
    p.v_peak_m_s = std::sqrt(l_m * accel_m_s2);
    return p;
}

QuantizedProfile quantize_profile(const MotionProfile& profile, const SynthesizerModel& synth, double clock_phase)
{
    if (!(synth.freq_step_hz > 0.0) || !(synth.update_interval_s > 0.0))
        throw Error("parameter-domain", "synthesizer step and update interval must be > 0");
    if (!(clock_phase >= 0.0 && clock_phase < 1.0))
        throw Error("parameter-domain", "clock phase must lie in [0, 1)");

    QuantizedProfile q;
    const double T = profile.t_total_s;
    if (T <= 0.0)
        return q;
    // detuning (Hz) -> belt velocity (um/s)
    const double um_per_cycle = 0.5 * profile.wavelength_um;
    const double dt_u = synth.update_interval_s;
    const double first_tick = clock_phase > 0.0 ? clock_phase * dt_u : dt_u;

    double err_um = 0.0;
    double t0 = 0.0;
    for (long k = 0; t0 < T; ++k) {
        const double t1 = std::min(T, first_tick + static_cast<double>(k) * dt_u);
        const double dt = t1 - t0;
        const double exact_um = profile.position(t1) - profile.position(t0);
        const double mean_hz = exact_um / um_per_cycle / dt;
        const double level = round_half_away(mean_hz / synth.freq_step_hz) * synth.freq_step_hz;
        q.detuning_hz.push_back(level);
        q.duration_s.push_back(dt);
        err_um += level * um_per_cycle * dt - exact_um;
        t0 = t1;
    }
    q.displacement_error_um = err_um;
    return q;
}

double transport_rms_error(const SynthesizerModel& synth, double target_um, double spread_um, double accel_m_s2,
                           double wavelength_um, int samples)
{
    if (samples < 1)
        throw Error("parameter-domain", "samples must be >= 1");
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    double sum2 = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double x0 = spread_um * normal_quantile((k + 0.5) / samples);
        const double phase = std::fmod(k * golden, 1.0);
        const auto prof = motion_profile(target_um - x0, accel_m_s2, wavelength_um);
        const double e = quantize_profile(prof, synth, phase).displacement_error_um;
        sum2 += e * e;
    }
    return std::sqrt(sum2 / samples);
}

double calibrate_freq_step(double target_rms_um, double update_interval_s, double target_um, double spread_um,
                           double accel_m_s2, double wavelength_um)
{
    if (!(target_rms_um > 0.0))
        throw Error("parameter-domain", "target rms must be > 0");
    auto rms = [&](double step) {
        return transport_rms_error({step, update_interval_s}, target_um, spread_um, accel_m_s2, wavelength_um);
    };
    // The rms grows roughly linearly with the step; bracket, then bisect.
    double lo = 1.0;
    double hi = 1e2;
    while (rms(hi) < target_rms_um) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e9)
            throw Error("calibration-failure", "no frequency step reaches the requested rms");
    }
    for (int i = 0; i < 60 && hi - lo > 1e-3; ++i) {
        const double mid = 0.5 * (lo + hi);
        (rms(mid) < target_rms_um ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

TransportOutcome execute_transport(double start_um, double measured_start_um, double target_um,
                                   const TransportArgs& args, double drift_um, const LatticeConfig& lattice,
                                   Engine& rng)
{
    TransportOutcome out;
    out.commanded_um = target_um - measured_start_um;
    out.drift_um = drift_um;
    if (args.synth) {
        std::uniform_real_distribution<double> phase(0.0, 1.0);
        const auto prof = motion_profile(out.commanded_um, args.accel_m_s2, lattice.wavelength_um);
        out.quantization_error_um = quantize_profile(prof, *args.synth, phase(rng)).displacement_error_um;
    }
    // The atom rides its well, so it ends on a site of the displaced lattice.
    const double belt_um = (1.0 + args.scale_error) * (out.commanded_um + out.quantization_error_um);
    out.final_um = start_um + belt_um + drift_um;
    return out;
}

PlacementResult closed_loop_place(double target_um, const Instrument& inst, const ClosedLoopOptions& opt, Engine& rng)
{
    PlacementResult res;
    res.target_um = target_um;
    res.site_rounding_um = target_um - inst.lattice.snap(target_um);

    std::normal_distribution<double> mot(0.0, opt.mot_sigma_um);
    res.initial_um = inst.lattice.snap(opt.mot_sigma_um > 0.0 ? mot(rng) : 0.0);

    const double centre = 0.5 * inst.camera.frame_width_um();
    FitOptions fopt;
    fopt.gain = inst.camera.gain_counts_per_photon;
    fopt.bin_noise = inst.noise.bin_noise(inst.camera.exposure_s);
    const bool trace = inst.noise.drift_model == DriftModel::trace_based;

    auto measure = [&](double x_um) {
        AtomEnsemble atoms;
        atoms.positions_um = {x_um + centre};
        Frame frame;
        if (trace) {
            const DriftTrace t = gen_drift_trace(inst.noise, inst.camera.exposure_s, opt.trace_dt_s, rng);
            frame = render_frame(atoms, inst.lsf, inst.camera, inst.noise, &t, rng);
        } else {
            frame = render_frame(atoms, inst.lsf, inst.camera, inst.noise, nullptr, rng);
        }
        const FitResult fit = fit_gaussian_1d(bin_columns(frame), fopt);
        if (!fit.converged)
            throw Error("fit-failed", "Gaussian fit did not converge");
        return fit.center() - centre;
    };

    try {
        res.measured_initial_um = measure(res.initial_um);
        std::normal_distribution<double> jump(0.0, 1.0);
        res.drift_um = opt.sigma_drift_um > 0.0 ? opt.sigma_drift_um * jump(rng) : 0.0;
        const TransportOutcome moved = execute_transport(res.initial_um, res.measured_initial_um, target_um,
                                                         opt.transport, res.drift_um, inst.lattice, rng);
        res.quantization_error_um = moved.quantization_error_um;
        res.final_um = moved.final_um;
        res.measured_final_um = measure(res.final_um);
    } catch (const Error& e) {
        res.ok = false;
        res.failure = e.code();
    }
    return res;
}

double control_budget(double dx_stat_um, double sigma_drift_um, double sigma_transp_um)
{
    if (dx_stat_um < 0.0 || sigma_drift_um < 0.0 || sigma_transp_um < 0.0)
        throw Error("parameter-domain", "budget terms must be non-negative");
    return std::sqrt(2.0 * dx_stat_um * dx_stat_um + sigma_drift_um * sigma_drift_um +
                     sigma_transp_um * sigma_transp_um);
}

double solve_transport_error(double sigma_control_um, double dx_stat_um, double sigma_drift_um)
{
    const double disc = sigma_control_um * sigma_control_um - 2.0 * dx_stat_um * dx_stat_um -
                        sigma_drift_um * sigma_drift_um;
    if (disc < 0.0) {
        throw Error("negative-discriminant", "sigma_control is smaller than the statistical and drift terms alone");
    }
    return std::sqrt(disc);
}

} // namespace latticeloc
