// Acceptance checks. `latticeloc_acceptance N` runs criterion N; without an
// argument all criteria run. Each prints one PASS/FAIL line; the exit status
// is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "latticeloc/calibration.hpp"
#include "latticeloc/cli.hpp"
#include "latticeloc/harness.hpp"
#include "latticeloc/io.hpp"
#include "latticeloc/latticestat.hpp"
#include "latticeloc/localize.hpp"
#include "latticeloc/transport.hpp"

using namespace latticeloc;

namespace {

struct Verdict
{
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double stddev(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v)
        m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

const LsfModel& lsf()
{
    static const LsfModel m = calibrate_lsf().model;
    return m;
}

enum class Fitter
{
    gaussian,
    lsf,
};

struct Spread
{
    double std_nm = 0.0;
    int failed = 0;
};

// Std of single-atom centre errors over `frames` frames at random pixel phase.
// Non-converged fits are dropped and counted.
Spread localization_std(const NoiseModel& noise, int frames, std::uint64_t seed, Fitter fitter)
{
    const CameraModel cam;
    FitOptions fopt;
    fopt.gain = cam.gain_counts_per_photon;
    fopt.bin_noise = noise.bin_noise(cam.exposure_s);
    std::vector<double> err(static_cast<std::size_t>(frames), std::nan(""));
    parallel_for(frames, 0, [&](int i) {
        Engine rng = make_stream(seed, static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> ph(-0.5, 0.5);
        AtomEnsemble atoms;
        atoms.positions_um = {0.5 * cam.frame_width_um() + ph(rng) * cam.pixel_um};
        const auto prof = bin_columns(render_frame(atoms, lsf(), cam, noise, nullptr, rng));
        const auto fit = fitter == Fitter::gaussian ? fit_gaussian_1d(prof, fopt) : fit_lsf_1d(prof, lsf(), fopt);
        if (fit.converged)
            err[static_cast<std::size_t>(i)] = (fit.center() - atoms.positions_um[0]) * 1e3;
    });
    std::vector<double> ok;
    for (double e : err) {
        if (!std::isnan(e))
            ok.push_back(e);
    }
    return {stddev(ok), frames - static_cast<int>(ok.size())};
}

NoiseModel shot_only(double photons)
{
    NoiseModel n;
    n.photons_per_s_per_atom = photons;
    n.background_noise_counts_per_bin = 0.0;
    n.fluct_1s_um = 0.0;
    return n;
}

Verdict c1_shot_noise_law()
{
    const Spread g200 = localization_std(shot_only(200.0), 2000, 101, Fitter::gaussian);
    const Spread l200 = localization_std(shot_only(200.0), 2000, 101, Fitter::lsf);
    const double s200 = g200.std_nm;
    int failed = g200.failed;

    // Log-log slope over photon numbers.
    const std::vector<double> photons{50, 100, 200, 400, 800};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double n : photons) {
        const double x = std::log(n);
        const Spread sp = localization_std(shot_only(n), 2000, 102, Fitter::gaussian);
        failed += sp.failed;
        const double y = std::log(sp.std_nm);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double k = static_cast<double>(photons.size());
    const double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    const bool pass = std::abs(s200 - 130.0) <= 13.0 && std::abs(slope + 0.5) <= 0.03;
    return {pass, fmt("std(N=200)=%.1f nm (target 130 +- 13), exponent=%.3f (target -0.5 +- 0.03); "
                      "lsf-fit std=%.1f nm; %d of 12000 gaussian fits dropped",
                      s200, slope, l200.std_nm, failed)};
}

Verdict c2_gauss_bias()
{
    const double b = gaussian_fit_bias(lsf(), 1.3) * 1e3;
    return {std::abs(b - 42.0) <= 2.0, fmt("bias=%.2f nm (target 42 +- 2)", b)};
}

Verdict c3_background_noise()
{
    // Noisy minus noise-free fit of the same deterministic signal.
    const CameraModel cam;
    NoiseModel noisy;
    noisy.shot_noise = false;
    noisy.fluct_1s_um = 0.0;
    NoiseModel clean = noisy;
    clean.background_noise_counts_per_bin = 0.0;
    const int frames = 2000;
    std::vector<double> diff(frames), diff_lsf(frames);
    FitOptions fopt;
    fopt.bin_noise = noisy.bin_noise(cam.exposure_s);
    parallel_for(frames, 0, [&](int i) {
        Engine rng = make_stream(103, static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> ph(-0.5, 0.5);
        AtomEnsemble atoms;
        atoms.positions_um = {0.5 * cam.frame_width_um() + ph(rng) * cam.pixel_um};
        const auto a = bin_columns(render_frame(atoms, lsf(), cam, noisy, nullptr, rng));
        const auto b = bin_columns(render_frame(atoms, lsf(), cam, clean, nullptr, rng));
        diff[static_cast<std::size_t>(i)] = (fit_gaussian_1d(a, fopt).center() - fit_gaussian_1d(b, fopt).center()) * 1e3;
        diff_lsf[static_cast<std::size_t>(i)] =
            (fit_lsf_1d(a, lsf(), fopt).center() - fit_lsf_1d(b, lsf(), fopt).center()) * 1e3;
    });
    const double s = stddev(diff);
    return {std::abs(s - 15.0) <= 3.0,
            fmt("background-only std=%.1f nm (target 15 +- 3); lsf-fit std=%.1f nm", s, stddev(diff_lsf))};
}

Verdict c4_budget_closure()
{
    BudgetInputs in{0.130, 0.015, 0.042, 1.0, 0.0};
    const double a = predict_single_shot_error(in).dx_total_um * 1e3;
    in.readout_s = 0.5;
    const double b = predict_single_shot_error(in).dx_total_um * 1e3;

    CampaignSpec spec;
    spec.kind = CampaignKind::single_shot;
    spec.trials = 2000;
    spec.master_seed = 104;
    const auto additive = run_campaign(spec).summary.metric("dx_stat_nm").value;
    spec.config.noise.drift_model = DriftModel::trace_based;
    const auto traced = run_campaign(spec).summary.metric("dx_total_nm").value;
    const NoiseModel& n = spec.config.noise;
    const double f1 = n.fluct(1.0) * 1e3;
    const double fr = n.fluct(0.5) * 1e3;
    const double model = std::sqrt(additive * additive + f1 * f1 + 2.0 * fr * fr);
    const double rel = std::abs(traced - model) / model;
    const bool pass = std::abs(a - 137.4) <= 0.05 && std::abs(b - 143.7) <= 0.05 && rel <= 0.30;
    return {pass, fmt("budget=%.2f nm (137.4), with readout=%.2f nm (143.7); trace MC=%.1f nm vs additive "
                      "model=%.1f nm, rel. diff %.1f%% (<= 30%%)",
                      a, b, traced, model, 100.0 * rel)};
}

CampaignSummary pair_campaign()
{
    static const CampaignSummary s = [] {
        CampaignSpec spec;
        spec.kind = CampaignKind::pair;
        spec.trials = 1000;
        spec.master_seed = 105;
        return run_campaign(spec).summary;
    }();
    return s;
}

Verdict c5_pair_std()
{
    const double s = pair_campaign().metric("pair_distance_std_nm").value;
    return {std::abs(s - 161.0) <= 0.15 * 161.0, fmt("pair distance std=%.1f nm (target 161 +- 15%%)", s)};
}

Verdict c6_staircase()
{
    CampaignSpec spec;
    spec.kind = CampaignKind::staircase;
    spec.trials = 50;
    spec.blur_nm = 36.0;
    spec.master_seed = 106;
    const auto r = run_campaign(spec);
    const double w = r.summary.metric("step_width_nm").value;

    // Free step offset: the best fit should sit on lattice multiples.
    std::vector<double> d;
    for (const auto& row : r.data.rows)
        d.push_back(std::stod(row[0]));
    const LatticeConfig lat;
    const auto scan = [&](double centre, double step, int half) {
        double best = centre;
        double best_chi2 = INFINITY;
        for (int k = -half; k <= half; ++k) {
            StaircaseOptions opt;
            opt.grid_step_um = 0.004;
            opt.step_offset_um = centre + step * k;
            const auto f = staircase_fit(d, lat, opt);
            if (f.chi2 < best_chi2) {
                best_chi2 = f.chi2;
                best = opt.step_offset_um;
            }
        }
        return best;
    };
    const double best_off = scan(scan(0.0, 0.01, 20), 0.002, 5);
    const double off_nm = best_off * 1e3;
    const double off_tol = 3.0 * w / std::sqrt(static_cast<double>(d.size()));
    const bool pass = std::abs(w - 36.0) <= 8.0 && std::abs(off_nm) <= off_tol;
    return {pass, fmt("step width=%.1f nm (target 36 +- 8); best step offset=%.0f nm (|.| <= %.1f)", w, off_nm,
                      off_tol)};
}

Verdict c7_well_inference()
{
    const auto& m = pair_campaign().metric("well_inference_accuracy");
    return {m.value >= 0.999, fmt("correct well count in %.4f of %ld pairs (>= 0.999)", m.value, m.n)};
}

Verdict c8_closed_loop()
{
    CampaignSpec spec;
    spec.kind = CampaignKind::transport;
    spec.trials = 400;
    spec.master_seed = 108;
    const double s = run_campaign(spec).summary.metric("sigma_control_nm").value;
    const double t = solve_transport_error(0.300, 0.130, 0.140) * 1e3;
    const bool pass = s >= 270.0 && s <= 330.0 && std::abs(t - 191.0) <= 0.5;
    return {pass, fmt("sigma_control=%.1f nm (target 300 +- 10%%); inverse sigma_transp=%.2f nm (191)", s, t)};
}

Verdict c9_scale_error()
{
    CampaignSpec spec;
    spec.kind = CampaignKind::transport;
    spec.trials = 4000;
    spec.master_seed = 109;
    spec.target_um = 30.0;
    spec.closed_loop.transport.scale_error = 0.004;
    const double m = run_campaign(spec).summary.metric("mean_offset_nm").value;
    return {std::abs(m - 120.0) <= 15.0, fmt("mean final offset=%.1f nm (target 120 +- 15)", m)};
}

Verdict c10_phase()
{
    CampaignSpec spec;
    spec.kind = CampaignKind::phase;
    spec.trials = 1000;
    spec.master_seed = 110;
    const auto s = run_campaign(spec).summary;
    const double phi = s.metric("sigma_phi_rad").value;
    const double fl = s.metric("fluct_nm").value;
    const double g = s.metric("gaussianity_deviation").value;
    const bool pass = std::abs(phi - 0.496) <= 0.0496 && std::abs(fl - 42.0) <= 4.2 && g < 0.01;
    return {pass, fmt("sigma_phi=%.4f rad (0.496 +- 10%%), fluct=%.2f nm (42 +- 10%%), gaussianity=%.4f (< 0.01)",
                      phi, fl, g)};
}

int cli(const std::vector<std::string>& args)
{
    std::vector<const char*> argv{"latticeloc"};
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Verdict c11_determinism()
{
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / ("latticeloc_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    bool same = true;
    int checked = 0;
    for (const std::string kind : {"single-shot", "pair", "staircase", "transport", "phase"}) {
        std::vector<std::string> outputs;
        for (const std::string jobs : {"1", "3", "1"}) {
            const fs::path p = dir / (kind + "_" + jobs + "_" + std::to_string(outputs.size()) + ".csv");
            if (cli({"run-campaign", "--kind", kind, "--trials", "60", "--seed", "11", "--jobs", jobs, "--out",
                     p.string()}) != 0) {
                same = false;
                continue;
            }
            outputs.push_back(read_file(p) + read_file(p.string() + ".summary.json"));
        }
        for (const auto& o : outputs)
            same = same && o == outputs.front();
        ++checked;
    }
    fs::remove_all(dir);
    return {same, fmt("%d campaign kinds repeated with seed 11 at 1 and 3 jobs: %s", checked,
                      same ? "byte-identical" : "outputs differ")};
}

const std::vector<std::pair<std::string, std::function<Verdict()>>> kCriteria{
    {"shot-noise localization law", c1_shot_noise_law},
    {"gaussian-fit bias", c2_gauss_bias},
    {"background-only localization noise", c3_background_noise},
    {"single-shot error budget", c4_budget_closure},
    {"pair distance spread", c5_pair_std},
    {"staircase step width", c6_staircase},
    {"well-count inference", c7_well_inference},
    {"closed-loop control", c8_closed_loop},
    {"transport scale error", c9_scale_error},
    {"phase round trip", c10_phase},
    {"determinism", c11_determinism},
};

} // namespace

int main(int argc, char** argv)
{
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i)
        selected.push_back(std::atoi(argv[i]));
    if (selected.empty()) {
        for (int i = 1; i <= static_cast<int>(kCriteria.size()); ++i)
            selected.push_back(i);
    }
    int failures = 0;
    for (int c : selected) {
        const auto t0 = std::chrono::steady_clock::now();
        if (c < 1 || c > static_cast<int>(kCriteria.size())) {
            std::fprintf(stderr, "unknown criterion %d\n", c);
            return 2;
        }
        const auto& [name, fn] = kCriteria[static_cast<std::size_t>(c - 1)];
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("criterion %2d %s: %s | %s [%.1f s]\n", c, v.pass ? "PASS" : "FAIL", name.c_str(),
                    v.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !v.pass;
    }
    return failures == 0 ? 0 : 1;
}
