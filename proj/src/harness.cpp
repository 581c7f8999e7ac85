#include "latticeloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "latticeloc/calibration.hpp"
#include "latticeloc/latticestat.hpp"
#include "latticeloc/localize.hpp"

#ifndef LATTICELOC_VERSION
#define LATTICELOC_VERSION "0.0.0"
#endif

namespace latticeloc {

// Phase analysis --------------------------------------------------------------

std::vector<double> phase_increments(const PhaseTrace& trace, double tau_s, std::optional<double> bandwidth_hz)
{
    if (!(tau_s > 0.0))
        throw Error("parameter-domain", "tau must be > 0");
    const Eigen::Index n = trace.times_s.size();
    if (n < 2 || trace.phi_rad.size() != n)
        throw Error("trace-too-short", "phase trace needs at least two samples");
    const double dt = (trace.times_s(n - 1) - trace.times_s(0)) / static_cast<double>(n - 1);
    if (bandwidth_hz && 1.0 / dt < 2.0 * *bandwidth_hz) {
        throw Error("bandwidth", "sampling rate " + std::to_string(1.0 / dt) + " Hz is below twice the " +
                                     std::to_string(*bandwidth_hz) + " Hz analysis bandwidth");
    }
    const auto lag = static_cast<Eigen::Index>(std::llround(tau_s / dt));
    if (lag < 1 || lag > n - 1) {
        throw Error("trace-too-short", "trace of " + std::to_string(trace.times_s(n - 1) - trace.times_s(0)) +
                                           " s cannot hold a " + std::to_string(tau_s) + " s window");
    }
    std::vector<double> inc;
    inc.reserve(static_cast<std::size_t>((n - 1) / lag));
    for (Eigen::Index k = 0; k + lag < n; k += lag)
        inc.push_back(trace.phi_rad(k + lag) - trace.phi_rad(k));
    return inc;
}

double phase_std_tau(const PhaseTrace& trace, double tau_s, std::optional<double> bandwidth_hz)
{
    const auto inc = phase_increments(trace, tau_s, bandwidth_hz);
    double s2 = 0.0;
    for (double d : inc)
        s2 += d * d;
    return std::sqrt(s2 / static_cast<double>(inc.size()));
}

double fluct_from_phase(double sigma_phi_rad, const LatticeConfig& lattice)
{
    if (sigma_phi_rad < 0.0)
        throw Error("parameter-domain", "sigma_phi must be >= 0");
    return lattice.period_um * sigma_phi_rad / (2.0 * std::numbers::pi);
}

double gaussianity_check(std::span<const double> samples)
{
    if (samples.size() < 1000) {
        throw Error("too-few-samples",
                    "gaussianity check needs >= 1000 samples, got " + std::to_string(samples.size()));
    }
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double mean = 0.0;
    for (double v : s)
        mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : s)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (n - 1.0));
    if (!(sd > 0.0))
        throw Error("degenerate-input", "samples have zero spread");

    double dmax = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double F = 0.5 * std::erfc(-(s[k] - mean) / (sd * std::numbers::sqrt2));
        const double lo = static_cast<double>(k) / n;
        const double hi = static_cast<double>(k + 1) / n;
        dmax = std::max({dmax, std::abs(F - lo), std::abs(hi - F)});
    }
    return dmax;
}

// Plumbing ------------------------------------------------------------------

std::string to_string(CampaignKind kind)
{
    switch (kind) {
    case CampaignKind::single_shot: return "single-shot";
    case CampaignKind::pair: return "pair";
    case CampaignKind::staircase: return "staircase";
    case CampaignKind::transport: return "transport";
    case CampaignKind::phase: return "phase";
    }
    return "?";
}

CampaignKind campaign_kind_from_string(const std::string& s)
{
    for (auto k : {CampaignKind::single_shot, CampaignKind::pair, CampaignKind::staircase, CampaignKind::transport,
                   CampaignKind::phase}) {
        if (to_string(k) == s)
            return k;
    }
    throw Error("invalid-spec", "unknown campaign kind '" + s + "'");
}

std::optional<bool> MetricSummary::pass() const
{
    if (!paper_target || !tolerance)
        return std::nullopt;
    return std::abs(value - *paper_target) <= *tolerance;
}

const MetricSummary& CampaignSummary::metric(const std::string& name) const
{
    for (const auto& m : metrics)
        if (m.metric == name)
            return m;
    throw Error("missing-metric", "campaign summary has no metric '" + name + "'");
}

double CampaignSummary::detail(const std::string& name) const
{
    for (const auto& [k, v] : details)
        if (k == name)
            return v;
    throw Error("missing-metric", "campaign summary has no detail '" + name + "'");
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string DataTable::to_csv() const
{
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i)
                out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    line(header);
    for (const auto& r : rows)
        line(r);
    return out;
}

MetricSummary summarize(std::string name, std::span<const double> samples, const std::string& statistic,
                        std::optional<double> target, std::optional<double> tolerance)
{
    MetricSummary m;
    m.metric = std::move(name);
    m.statistic = statistic;
    m.paper_target = target;
    m.tolerance = tolerance;
    m.n = static_cast<long>(samples.size());
    if (samples.empty()) {
        m.value = m.mean = m.std = m.stderr_ = std::nan("");
        return m;
    }
    const double n = static_cast<double>(samples.size());
    for (double v : samples)
        m.mean += v;
    m.mean /= n;
    double var = 0.0;
    for (double v : samples)
        var += (v - m.mean) * (v - m.mean);
    m.std = samples.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;

    if (statistic == "std") {
        m.value = m.std;
        m.stderr_ = samples.size() > 1 ? m.std / std::sqrt(2.0 * (n - 1.0)) : 0.0;
    } else {
        m.value = m.mean;
        m.stderr_ = m.std / std::sqrt(n);
    }
    return m;
}

void parallel_for(int n, unsigned jobs, const std::function<void(int)>& fn)
{
    if (n <= 0)
        return;
    if (jobs == 0)
        jobs = std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, static_cast<unsigned>(n));

    std::atomic<int> next{0};
    std::mutex mu;
    int failed_index = n;
    std::exception_ptr failure;

    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(jobs);
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);
}

std::string summary_to_json(const CampaignSummary& s)
{
    using nlohmann::ordered_json;
    auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };
    auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };

    ordered_json metrics = ordered_json::array();
    for (const auto& m : s.metrics) {
        const auto pass = m.pass();
        metrics.push_back({{"metric", m.metric},
                           {"statistic", m.statistic},
                           {"value", num(m.value)},
                           {"mean", num(m.mean)},
                           {"std", num(m.std)},
                           {"stderr", num(m.stderr_)},
                           {"n", m.n},
                           {"paper_target", opt(m.paper_target)},
                           {"tolerance", opt(m.tolerance)},
                           {"pass", pass ? ordered_json(*pass) : ordered_json(nullptr)}});
    }
    ordered_json details = ordered_json::object();
    for (const auto& [k, v] : s.details)
        details[k] = num(v);

    ordered_json j;
    j["kind"] = to_string(s.kind);
    j["metrics"] = std::move(metrics);
    j["details"] = std::move(details);
    j["provenance"] = {{"seed", s.seed},
                       {"config_hash", s.config_hash},
                       {"version", s.version},
                       {"trials", s.trials},
                       {"failed_trials", s.failed_trials}};
    return j.dump(2) + "\n";
}

// Campaign kinds ------------------------------------------------------------

namespace {

std::string hex64(std::uint64_t v)
{
    char buf[17];
    static constexpr char digits[] = "0123456789abcdef";
    for (int i = 15; i >= 0; --i, v >>= 4)
        buf[i] = digits[v & 0xf];
    buf[16] = '\0';
    return buf;
}

std::string nm(double um)
{
    return format_number(um * 1e3);
}

FitOptions fit_options(const CameraModel& cam, const NoiseModel& noise)
{
    FitOptions f;
    f.gain = cam.gain_counts_per_photon;
    f.bin_noise = noise.bin_noise(cam.exposure_s);
    return f;
}

struct ShotTrial
{
    bool ok = false;
    double true_um = 0.0;
    double gauss_um = 0.0;
    double lsf_um = 0.0;
};

void run_single_shot(const CampaignSpec& spec, const LsfModel& lsf, CampaignResult& out)
{
    const Config& cfg = spec.config;
    const NoiseModel noise = cfg.single_atom_noise();
    const CameraModel& cam = cfg.camera;
    const bool trace = noise.drift_model == DriftModel::trace_based;
    const FitOptions fopt = fit_options(cam, noise);
    const double centre = 0.5 * cam.frame_width_um();

    std::vector<ShotTrial> trials(static_cast<std::size_t>(spec.trials));
    parallel_for(spec.trials, spec.jobs, [&](int i) {
        Engine rng = make_stream(spec.master_seed, static_cast<std::uint64_t>(i));
        std::uniform_real_distribution<double> phase(-0.5, 0.5);
        ShotTrial t;
        const double x = centre + phase(rng) * cam.pixel_um;
        AtomEnsemble atoms;
        atoms.positions_um = {x};
        // In trace mode the reference is where the atom is once the image has
        // been read out.
        t.true_um = x;
        Frame frame;
        if (trace) {
            const DriftTrace tr = gen_drift_trace(noise, cam.exposure_s + cam.readout_s, 1e-3, rng);
            frame = render_frame(atoms, lsf, cam, noise, &tr, rng);
            t.true_um += tr.at(cam.exposure_s + cam.readout_s);
        } else {
            frame = render_frame(atoms, lsf, cam, noise, nullptr, rng);
        }
        const BinnedProfile prof = bin_columns(frame);
        try {
            const FitResult g = fit_gaussian_1d(prof, fopt);
            const FitResult l = fit_lsf_1d(prof, lsf, fopt);
            if (g.converged && l.converged) {
                t.gauss_um = g.center();
                t.lsf_um = l.center();
                t.ok = true;
            }
        } catch (const Error&) {
        }
        trials[static_cast<std::size_t>(i)] = t;
    });

    std::vector<double> g_err;
    std::vector<double> l_err;
    out.data.header = {"trial", "true_um", "gauss_um", "lsf_um", "gauss_error_nm", "lsf_error_nm", "status"};
    for (int i = 0; i < spec.trials; ++i) {
        const auto& t = trials[static_cast<std::size_t>(i)];
        if (!t.ok) {
            ++out.summary.failed_trials;
            out.data.rows.push_back({std::to_string(i), format_number(t.true_um), "nan", "nan", "nan", "nan",
                                     "fit-failed"});
            continue;
        }
        g_err.push_back((t.gauss_um - t.true_um) * 1e3);
        l_err.push_back((t.lsf_um - t.true_um) * 1e3);
        out.data.rows.push_back({std::to_string(i), format_number(t.true_um), format_number(t.gauss_um),
                                 format_number(t.lsf_um), format_number(g_err.back()), format_number(l_err.back()),
                                 "ok"});
    }

    if (trace) {
        BudgetInputs in;
        in.dx_stat_um = 0.130;
        in.dx_backgr_um = 0.015;
        in.fluct_1s_um = noise.fluct_1s_um;
        in.exposure_s = cam.exposure_s;
        in.readout_s = cam.readout_s;
        const double target = predict_single_shot_error(in).dx_total_um * 1e3;
        out.summary.metrics.push_back(summarize("dx_total_nm", g_err, "std", target, 0.3 * target));
    } else {
        out.summary.metrics.push_back(summarize("dx_stat_nm", g_err, "std", 130.0, 13.0));
    }
    out.summary.metrics.push_back(summarize("dx_lsf_nm", l_err, "std"));
    out.summary.metrics.push_back(summarize("gauss_offset_nm", g_err, "mean"));
    out.summary.metrics.push_back(summarize("lsf_offset_nm", l_err, "mean"));
    out.summary.details.emplace_back("photons_per_s", noise.photons_per_s_per_atom);
    out.summary.details.emplace_back("shot_noise_law_nm",
                                     predict_stat_error(cfg.w_ax_um, noise.photons_per_s_per_atom * cam.exposure_s) *
                                         1e3);
}

void run_pair(const CampaignSpec& spec, const LsfModel& lsf, CampaignResult& out)
{
    const Config& cfg = spec.config;
    const NoiseModel noise = cfg.pair_noise();
    PairSimulationOptions popt;
    popt.pictures = spec.pictures;

    std::vector<PairSimulation> sims(static_cast<std::size_t>(spec.trials));
    parallel_for(spec.trials, spec.jobs, [&](int i) {
        Engine rng = make_stream(spec.master_seed, static_cast<std::uint64_t>(i));
        sims[static_cast<std::size_t>(i)] = simulate_pair(lsf, cfg.camera, noise, cfg.lattice, popt, rng);
    });

    out.data.header = {"pair_id", "n_true", "d_mean_um", "d_std_um", "n_inferred", "residual_nm", "misassign_prob"};
    std::vector<double> variances;
    std::vector<double> correct;
    std::vector<double> std_of_mean;
    for (int i = 0; i < spec.trials; ++i) {
        const auto& s = sims[static_cast<std::size_t>(i)];
        if (!s.ok) {
            ++out.summary.failed_trials;
            out.data.rows.push_back({std::to_string(i), std::to_string(s.n_true), "nan", "nan", "nan", "nan", "nan"});
            continue;
        }
        variances.push_back(s.campaign.std_um * s.campaign.std_um * 1e6);
        correct.push_back(s.wells.n == s.n_true ? 1.0 : 0.0);
        std_of_mean.push_back(s.campaign.std_of_mean_um * 1e3);
        out.data.rows.push_back({std::to_string(i), std::to_string(s.n_true), format_number(s.campaign.mean_um),
                                 format_number(s.campaign.std_um), std::to_string(s.wells.n), nm(s.wells.residual_um),
                                 format_number(s.wells.misassignment_prob)});
    }
    // Pooled single-picture spread: sqrt of the mean per-pair variance.
    MetricSummary spread = summarize("pair_distance_std_nm", variances, "mean", 161.0, 0.15 * 161.0);
    spread.statistic = "pooled-std";
    spread.value = std::sqrt(spread.mean);
    spread.stderr_ = spread.stderr_ / (2.0 * spread.value);
    out.summary.metrics.push_back(spread);
    MetricSummary acc = summarize("well_inference_accuracy", correct, "fraction", 1.0, 1e-3);
    out.summary.metrics.push_back(acc);
    out.summary.metrics.push_back(summarize("distance_std_of_mean_nm", std_of_mean, "mean"));
    out.summary.details.emplace_back("photons_per_s", noise.photons_per_s_per_atom);
    out.summary.details.emplace_back("pictures_per_pair", spec.pictures);
}

void run_staircase(const CampaignSpec& spec, const LsfModel& lsf, CampaignResult& out)
{
    const Config& cfg = spec.config;
    const LatticeConfig& lat = cfg.lattice;
    PairSimulationOptions popt;
    popt.pictures = spec.pictures;

    std::vector<double> d(static_cast<std::size_t>(spec.trials), std::nan(""));
    std::vector<double> blur(static_cast<std::size_t>(spec.trials), std::nan(""));
    parallel_for(spec.trials, spec.jobs, [&](int i) {
        Engine rng = make_stream(spec.master_seed, static_cast<std::uint64_t>(i));
        if (spec.staircase_pipeline) {
            const auto s = simulate_pair(lsf, cfg.camera, cfg.pair_noise(), lat, popt, rng);
            if (s.ok) {
                d[static_cast<std::size_t>(i)] = s.campaign.mean_um;
                blur[static_cast<std::size_t>(i)] = s.campaign.std_of_mean_um * 1e3;
            }
        } else {
            std::uniform_int_distribution<long> pick(popt.n_min, popt.n_max);
            std::normal_distribution<double> g(0.0, spec.blur_nm * 1e-3);
            const long n = pick(rng);
            d[static_cast<std::size_t>(i)] = static_cast<double>(n) * lat.period_um + g(rng);
            blur[static_cast<std::size_t>(i)] = spec.blur_nm;
        }
    });

    std::vector<double> valid;
    std::vector<double> valid_blur;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (std::isnan(d[i])) {
            ++out.summary.failed_trials;
            continue;
        }
        valid.push_back(d[i]);
        valid_blur.push_back(blur[i]);
    }
    const StaircaseFit fit = staircase_fit(valid, lat);

    out.data.header = {"d_um", "cdf"};
    for (const auto& [x, c] : empirical_cdf(valid))
        out.data.rows.push_back({format_number(x), format_number(c)});

    const double w = fit.step_width_um * 1e3;
    MetricSummary m = summarize("step_width_nm", std::span<const double>(&w, 1), "value", 36.0, 8.0);
    out.summary.metrics.push_back(m);
    out.summary.metrics.push_back(summarize("mean_distance_blur_nm", valid_blur, "mean"));
    out.summary.details.emplace_back("chi2", fit.chi2);
    out.summary.details.emplace_back("first_step_um", fit.step_positions_um.front());
    out.summary.details.emplace_back("last_step_um", fit.step_positions_um.back());
}

void run_transport(const CampaignSpec& spec, const LsfModel& lsf, CampaignResult& out)
{
    const Config& cfg = spec.config;
    const Instrument inst{cfg.lattice, cfg.camera, cfg.single_atom_noise(), lsf};

    std::vector<PlacementResult> res(static_cast<std::size_t>(spec.trials));
    parallel_for(spec.trials, spec.jobs, [&](int i) {
        Engine rng = make_stream(spec.master_seed, static_cast<std::uint64_t>(i));
        res[static_cast<std::size_t>(i)] = closed_loop_place(spec.target_um, inst, spec.closed_loop, rng);
    });

    out.data.header = {"trial", "initial_um", "measured_initial_um", "final_um", "measured_final_um", "error_nm"};
    std::vector<double> err;
    std::vector<double> true_err;
    std::vector<double> quant;
    std::vector<double> drift;
    std::vector<double> meas;
    for (int i = 0; i < spec.trials; ++i) {
        const auto& r = res[static_cast<std::size_t>(i)];
        if (!r.ok) {
            ++out.summary.failed_trials;
            out.data.rows.push_back({std::to_string(i), format_number(r.initial_um), "nan", "nan", "nan", "nan"});
            continue;
        }
        err.push_back(r.measured_error_um() * 1e3);
        true_err.push_back(r.error_um() * 1e3);
        quant.push_back(r.quantization_error_um * 1e3);
        drift.push_back(r.drift_um * 1e3);
        meas.push_back((r.measured_initial_um - r.initial_um) * 1e3);
        out.data.rows.push_back({std::to_string(i), format_number(r.initial_um), format_number(r.measured_initial_um),
                                 format_number(r.final_um), format_number(r.measured_final_um), format_number(err.back())});
    }

    out.summary.metrics.push_back(summarize("sigma_control_nm", err, "std", 300.0, 30.0));
    const double scale = spec.closed_loop.transport.scale_error;
    if (scale != 0.0) {
        const double shift = scale * spec.target_um * 1e3;
        out.summary.metrics.push_back(summarize("mean_offset_nm", err, "mean", shift, 15.0));
    } else {
        out.summary.metrics.push_back(summarize("mean_offset_nm", err, "mean"));
    }
    out.summary.metrics.push_back(summarize("true_error_nm", true_err, "std"));

    // rms quantization error (mean is not subtracted).
    double q2 = 0.0;
    for (double q : quant)
        q2 += q * q;
    const double sigma_transp = quant.empty() ? 0.0 : std::sqrt(q2 / static_cast<double>(quant.size()));
    const MetricSummary dx = summarize("dx_meas_nm", meas, "std");
    const MetricSummary dr = summarize("sigma_drift_nm", drift, "std");
    out.summary.metrics.push_back(dx);
    out.summary.metrics.push_back(dr);
    double predicted = std::nan("");
    if (!err.empty())
        predicted = control_budget(dx.value * 1e-3, dr.value * 1e-3, sigma_transp * 1e-3) * 1e3;

    out.summary.details.emplace_back("target_um", spec.target_um);
    out.summary.details.emplace_back("site_rounding_nm", (spec.target_um - cfg.lattice.snap(spec.target_um)) * 1e3);
    out.summary.details.emplace_back("eq3_dx_stat_nm", dx.value);
    out.summary.details.emplace_back("eq3_sigma_drift_nm", dr.value);
    out.summary.details.emplace_back("eq3_sigma_transp_nm", sigma_transp);
    out.summary.details.emplace_back("eq3_sigma_control_nm", predicted);
}

void run_phase(const CampaignSpec& spec, CampaignResult& out)
{
    const Config& cfg = spec.config;
    const NoiseModel noise = cfg.single_atom_noise();
    const std::vector<double> taus = {0.01, 0.03, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0};

    struct PhaseTrial
    {
        std::vector<std::vector<double>> inc;  // per tau in `taus`
        std::vector<double> main;
        std::vector<double> gauss;
    };
    std::vector<PhaseTrial> trials(static_cast<std::size_t>(spec.trials));
    parallel_for(spec.trials, spec.jobs, [&](int i) {
        Engine rng = make_stream(spec.master_seed, static_cast<std::uint64_t>(i));
        const PhaseTrace ph = drift_to_phase(gen_drift_trace(noise, spec.trace_duration_s, spec.trace_dt_s, rng),
                                             cfg.lattice);
        PhaseTrial t;
        for (double tau : taus) {
            if (tau <= spec.trace_duration_s)
                t.inc.push_back(phase_increments(ph, tau));
            else
                t.inc.emplace_back();
        }
        t.main = phase_increments(ph, spec.tau_s);
        t.gauss = phase_increments(ph, spec.gaussianity_lag_s);
        trials[static_cast<std::size_t>(i)] = std::move(t);
    });

    auto pooled_rms = [&](auto pick) {
        double s2 = 0.0;
        long n = 0;
        for (const auto& t : trials)
            for (double v : pick(t)) {
                s2 += v * v;
                ++n;
            }
        return std::pair{n ? std::sqrt(s2 / static_cast<double>(n)) : std::nan(""), n};
    };

    out.data.header = {"tau_s", "sigma_phi_rad", "fluct_nm", "increments"};
    for (std::size_t k = 0; k < taus.size(); ++k) {
        const auto [s, n] = pooled_rms([&](const PhaseTrial& t) -> const std::vector<double>& { return t.inc[k]; });
        if (n == 0)
            continue;
        out.data.rows.push_back({format_number(taus[k]), format_number(s),
                                 nm(fluct_from_phase(s, cfg.lattice)), std::to_string(n)});
    }

    const auto [sigma, n] = pooled_rms([](const PhaseTrial& t) -> const std::vector<double>& { return t.main; });
    // Wiener expectation for the configured fluct and tau.
    const double expected = 2.0 * std::numbers::pi * noise.fluct(spec.tau_s) / cfg.lattice.period_um;
    MetricSummary m;
    m.metric = "sigma_phi_rad";
    m.statistic = "rms";
    m.value = m.mean = sigma;
    m.n = n;
    m.stderr_ = sigma / std::sqrt(2.0 * static_cast<double>(std::max(1L, n)));
    m.paper_target = 0.496;
    m.tolerance = 0.0496;
    out.summary.metrics.push_back(m);

    MetricSummary f = m;
    f.metric = "fluct_nm";
    f.value = f.mean = fluct_from_phase(sigma, cfg.lattice) * 1e3;
    f.stderr_ = fluct_from_phase(m.stderr_, cfg.lattice) * 1e3;
    f.paper_target = 42.0;
    f.tolerance = 4.2;
    out.summary.metrics.push_back(f);

    std::vector<double> pooled;
    for (const auto& t : trials)
        pooled.insert(pooled.end(), t.gauss.begin(), t.gauss.end());
    const double dev = gaussianity_check(pooled);
    MetricSummary g;
    g.metric = "gaussianity_deviation";
    g.statistic = "value";
    g.value = g.mean = dev;
    g.n = static_cast<long>(pooled.size());
    g.paper_target = 0.0;
    g.tolerance = 0.01;
    out.summary.metrics.push_back(g);

    out.summary.details.emplace_back("tau_s", spec.tau_s);
    out.summary.details.emplace_back("expected_sigma_phi_rad", expected);
    out.summary.details.emplace_back("gaussianity_lag_s", spec.gaussianity_lag_s);
}

} // namespace

CampaignResult run_campaign(const CampaignSpec& spec)
{
    if (spec.trials < 1)
        throw Error("invalid-spec", "trial count must be >= 1");
    if (const auto bad = validate_config(spec.config); !bad.empty())
        throw Error("invalid-spec", "invalid config: " + bad.front());

    CampaignResult out;
    out.summary.kind = spec.kind;
    out.summary.seed = spec.master_seed;
    out.summary.config_hash = hex64(fnv1a64(spec.config.canonical()));
    out.summary.version = LATTICELOC_VERSION;
    out.summary.trials = spec.trials;

    if (spec.kind == CampaignKind::phase) {
        run_phase(spec, out);
        return out;
    }
    const LsfModel lsf = calibrate_lsf(spec.config.w_ax_um, spec.config.gauss_bias_um).model;
    switch (spec.kind) {
    case CampaignKind::single_shot: run_single_shot(spec, lsf, out); break;
    case CampaignKind::pair: run_pair(spec, lsf, out); break;
    case CampaignKind::staircase: run_staircase(spec, lsf, out); break;
    case CampaignKind::transport: run_transport(spec, lsf, out); break;
    case CampaignKind::phase: break;
    }
    return out;
}

} // namespace latticeloc
