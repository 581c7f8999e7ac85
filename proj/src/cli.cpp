#include "latticeloc/cli.hpp"

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latticeloc/calibration.hpp"
#include "latticeloc/config.hpp"
#include "latticeloc/harness.hpp"
#include "latticeloc/io.hpp"
#include "latticeloc/latticestat.hpp"
#include "latticeloc/localize.hpp"
#include "latticeloc/transport.hpp"

namespace latticeloc {

namespace {

using nlohmann::ordered_json;

struct Common
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_path;
    std::optional<int> trials;
    std::string format;
    unsigned jobs = 0;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_format)
{
    c.format = default_format;
    sub->add_option("--config", c.config_path, "Config file (key = value lines)")->check(CLI::ExistingFile);
    sub->add_option("--seed", c.seed, "Master seed (default: config seed, which defaults to 0)");
    sub->add_option("--out", c.out_path, "Output file; campaign summaries go to <out>.summary.json");
    sub->add_option("--trials", c.trials, "Number of trials")->check(CLI::PositiveNumber);
    sub->add_option("--format", c.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    sub->add_option("--jobs", c.jobs, "Worker threads (0 = all cores)")->capture_default_str();
}

Config load_config(const Common& c)
{
    Config cfg = c.config_path.empty() ? Config{} : Config::load(c.config_path);
    if (c.seed)
        cfg.seed = *c.seed;
    if (const auto bad = validate_config(cfg); !bad.empty())
        throw Error("invalid-config", bad.front());
    return cfg;
}

LsfModel calibrated_lsf(const Config& cfg)
{
    return calibrate_lsf(cfg.w_ax_um, cfg.gauss_bias_um).model;
}

void emit(const Common& c, std::ostream& out, const std::string& text)
{
    if (c.out_path.empty())
        out << text;
    else
        write_file_atomic(c.out_path, text);
}

void emit_campaign(const Common& c, std::ostream& out, const CampaignResult& r)
{
    const std::string summary = summary_to_json(r.summary);
    if (c.out_path.empty()) {
        out << summary;
        return;
    }
    if (c.format == "json") {
        write_file_atomic(c.out_path, summary);
        return;
    }
    write_file_atomic(c.out_path, r.data.to_csv());
    write_file_atomic(c.out_path + ".summary.json", summary);
}

std::string fixed(double v, int digits)
{
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(digits) << v;
    return ss.str();
}

ordered_json fit_to_json(const FitResult& r)
{
    ordered_json j;
    if (r.centers_um.size() == 1) {
        j["center_um"] = r.center();
        j["center_unc_um"] = r.center_uncertainty();
        j["amplitude"] = r.amplitudes.at(0);
    } else {
        j["center_um"] = r.centers_um;
        j["center_unc_um"] = r.center_uncertainty_um;
        j["amplitude"] = r.amplitudes;
    }
    j["width_um"] = r.width_um;
    j["background"] = r.background;
    j["converged"] = r.converged;
    j["chi2"] = r.chi2;
    j["iterations"] = r.iterations;
    return j;
}

struct CampaignFlags
{
    int pictures = 10;
    double blur_nm = 36.0;
    bool pipeline = false;
    double target_um = 9.5;
    double sigma_drift_nm = 140.0;
    double mot_sigma_um = 5.0;
    double freq_step_hz = SynthesizerModel::kDefaultFreqStepHz;
    double update_interval_s = SynthesizerModel::kDefaultUpdateIntervalS;
    bool no_quantization = false;
    double scale_error = 0.0;
    double accel = 1000.0;
    double duration_s = 10.0;
    double dt_s = 1e-3;
    double tau_s = 1.0;
    double lag_s = 0.1;
};

void add_pair_flags(CLI::App* sub, CampaignFlags& f)
{
    sub->add_option("--pictures", f.pictures, "Pictures per pair")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_staircase_flags(CLI::App* sub, CampaignFlags& f)
{
    sub->add_option("--blur-nm", f.blur_nm, "Gaussian blur of synthetic mean distances")->capture_default_str();
    sub->add_flag("--pipeline", f.pipeline, "Mean distances from full pair simulations");
}

void add_transport_flags(CLI::App* sub, CampaignFlags& f)
{
    sub->add_option("--target-um", f.target_um, "Target position relative to the MOT centre")->capture_default_str();
    sub->add_option("--sigma-drift-nm", f.sigma_drift_nm, "Lattice drift between the two exposures")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--mot-sigma-um", f.mot_sigma_um, "Spread of initial positions")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--freq-step-hz", f.freq_step_hz, "Synthesizer frequency step")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--update-interval-s", f.update_interval_s, "Synthesizer update interval")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_flag("--no-quantization", f.no_quantization, "Ideal continuous detuning");
    sub->add_option("--scale-error", f.scale_error, "Relative transport length-scale error")->capture_default_str();
    sub->add_option("--accel", f.accel, "Acceleration in m/s^2")->check(CLI::PositiveNumber)->capture_default_str();
}

void add_phase_flags(CLI::App* sub, CampaignFlags& f)
{
    sub->add_option("--duration-s", f.duration_s, "Trace duration")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--dt-s", f.dt_s, "Trace sampling interval")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--tau-s", f.tau_s, "Analysis window")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--lag-s", f.lag_s, "Increment lag for the gaussianity check")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

CampaignSpec make_spec(CampaignKind kind, const Common& c, const CampaignFlags& f, const Config& cfg)
{
    static const std::map<CampaignKind, int> default_trials = {
        {CampaignKind::single_shot, 2000}, {CampaignKind::pair, 1000}, {CampaignKind::staircase, 50},
        {CampaignKind::transport, 400},    {CampaignKind::phase, 1000},
    };
    CampaignSpec s;
    s.kind = kind;
    s.trials = c.trials.value_or(default_trials.at(kind));
    s.master_seed = cfg.seed;
    s.jobs = c.jobs;
    s.config = cfg;
    s.pictures = f.pictures;
    s.blur_nm = f.blur_nm;
    s.staircase_pipeline = f.pipeline;
    s.target_um = f.target_um;
    s.closed_loop.mot_sigma_um = f.mot_sigma_um;
    s.closed_loop.sigma_drift_um = f.sigma_drift_nm * 1e-3;
    s.closed_loop.transport.accel_m_s2 = f.accel;
    s.closed_loop.transport.scale_error = f.scale_error;
    if (f.no_quantization)
        s.closed_loop.transport.synth.reset();
    else
        s.closed_loop.transport.synth = SynthesizerModel{f.freq_step_hz, f.update_interval_s};
    s.trace_duration_s = f.duration_s;
    s.trace_dt_s = f.dt_s;
    s.tau_s = f.tau_s;
    s.gaussianity_lag_s = f.lag_s;
    return s;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Single-atom localization, lattice-distance and transport simulator", "latticeloc"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(LATTICELOC_VERSION));

    CampaignFlags flags;

    // calibrate-lsf
    Common c_cal;
    std::optional<double> cal_w;
    std::optional<double> cal_bias;
    auto* cal = app.add_subcommand("calibrate-lsf", "Solve the LSF shape for a half-width and Gaussian-fit bias");
    add_common(cal, c_cal, "json");
    cal->add_option("--w-ax-um", cal_w, "1/sqrt(e) half-width (default: config w_ax_um)");
    cal->add_option("--bias-nm", cal_bias, "Gaussian-fit bias (default: config gauss_bias_nm)");
    cal->callback([&] {
        const Config cfg = load_config(c_cal);
        const auto r = calibrate_lsf(cal_w.value_or(cfg.w_ax_um), cal_bias ? *cal_bias * 1e-3 : cfg.gauss_bias_um);
        const LsfModel& m = r.model;
        if (c_cal.format == "csv") {
            DataTable t{{"x_um", "lsf"}, {}};
            for (int i = -600; i <= 600; ++i) {
                const double x = i * 0.01;
                t.rows.push_back({format_number(x), format_number(m(x))});
            }
            emit(c_cal, out, t.to_csv());
            return;
        }
        ordered_json j;
        j["sigma1_um"] = m.sigma1();
        j["sigma2_um"] = m.sigma2();
        j["offset_delta_um"] = m.offset_delta();
        j["width_ratio"] = m.width_ratio();
        j["height_ratio"] = m.height_ratio();
        j["peak_shift_um"] = m.peak_shift();
        j["half_width_um"] = m.half_width();
        j["gauss_bias_nm"] = gaussian_fit_bias(m, m.half_width()) * 1e3;
        j["half_width_residual_um"] = r.half_width_residual_um;
        j["bias_residual_um"] = r.bias_residual_um;
        emit(c_cal, out, j.dump(2) + "\n");
    });

    // simulate-frame
    Common c_sim;
    std::vector<double> sim_atoms;
    std::optional<double> sim_photons;
    auto* sim = app.add_subcommand("simulate-frame", "Render one ICCD exposure");
    add_common(sim, c_sim, "json");
    sim->add_option("--atoms-um", sim_atoms, "Atom positions in frame coordinates (default: frame centre)");
    sim->add_option("--photons-per-s", sim_photons, "Detected photons per atom per second")
        ->check(CLI::NonNegativeNumber);
    sim->callback([&] {
        const Config cfg = load_config(c_sim);
        const LsfModel lsf = calibrated_lsf(cfg);
        NoiseModel noise = cfg.single_atom_noise();
        if (sim_photons)
            noise.photons_per_s_per_atom = *sim_photons;
        AtomEnsemble atoms;
        atoms.positions_um = sim_atoms.empty() ? std::vector<double>{0.5 * cfg.camera.frame_width_um()} : sim_atoms;
        Engine rng = make_stream(cfg.seed, 0);
        Frame frame;
        if (noise.drift_model == DriftModel::trace_based) {
            const DriftTrace tr = gen_drift_trace(noise, cfg.camera.exposure_s, 1e-3, rng);
            frame = render_frame(atoms, lsf, cfg.camera, noise, &tr, rng, cfg.seed);
        } else {
            frame = render_frame(atoms, lsf, cfg.camera, noise, nullptr, rng, cfg.seed);
        }
        if (c_sim.format == "csv") {
            const BinnedProfile p = bin_columns(frame);
            DataTable t{{"x_um", "counts"}, {}};
            for (Eigen::Index i = 0; i < p.size(); ++i)
                t.rows.push_back({format_number(p.x_um(i)), format_number(p.counts(i))});
            emit(c_sim, out, t.to_csv());
        } else {
            emit(c_sim, out, frame_to_json(frame) + "\n");
        }
    });

    // localize
    Common c_loc;
    std::string loc_frame;
    std::string loc_model = "gaussian";
    std::string loc_weighting;
    bool loc_debias = false;
    auto* loc = app.add_subcommand("localize", "Fit a frame file");
    add_common(loc, c_loc, "json");
    loc->add_option("--frame", loc_frame, "Frame JSON file")->required();
    loc->add_option("--model", loc_model, "Fit model")
        ->check(CLI::IsMember({"gaussian", "lsf", "two-peak"}))
        ->capture_default_str();
    loc->add_option("--weighting", loc_weighting, "Least-squares weighting (default depends on the model)")
        ->check(CLI::IsMember({"unweighted", "variance"}));
    loc->add_flag("--subtract-bias", loc_debias, "Subtract the calibrated Gaussian-fit bias");
    loc->callback([&] {
        const Config cfg = load_config(c_loc);
        const Frame frame = frame_from_json(read_file(loc_frame));
        const BinnedProfile prof = bin_columns(frame);
        FitOptions opt;
        opt.gain = cfg.camera.gain_counts_per_photon;
        if (!loc_weighting.empty())
            opt.weighting = loc_weighting == "variance" ? Weighting::variance : Weighting::unweighted;
        if (loc_debias)
            opt.subtract_bias_um = cfg.gauss_bias_um;
        FitResult r;
        if (loc_model == "gaussian") {
            r = fit_gaussian_1d(prof, opt);
        } else {
            const LsfModel lsf = calibrated_lsf(cfg);
            r = loc_model == "lsf" ? fit_lsf_1d(prof, lsf, opt) : fit_two_peaks(prof, lsf, opt);
        }
        emit(c_loc, out, fit_to_json(r).dump(2) + "\n");
    });

    // campaigns
    Common c_pair;
    auto* pair = app.add_subcommand("pair-campaign", "Pair distances and well-count inference");
    add_common(pair, c_pair, "csv");
    add_pair_flags(pair, flags);
    pair->callback([&] {
        const Config cfg = load_config(c_pair);
        emit_campaign(c_pair, out, run_campaign(make_spec(CampaignKind::pair, c_pair, flags, cfg)));
    });

    Common c_stair;
    auto* stair = app.add_subcommand("staircase", "Cumulative distance distribution and step-width fit");
    add_common(stair, c_stair, "csv");
    add_pair_flags(stair, flags);
    add_staircase_flags(stair, flags);
    stair->callback([&] {
        const Config cfg = load_config(c_stair);
        emit_campaign(c_stair, out, run_campaign(make_spec(CampaignKind::staircase, c_stair, flags, cfg)));
    });

    Common c_tr;
    auto* tr = app.add_subcommand("transport", "Closed-loop place-at-target trials");
    add_common(tr, c_tr, "csv");
    add_transport_flags(tr, flags);
    tr->callback([&] {
        const Config cfg = load_config(c_tr);
        emit_campaign(c_tr, out, run_campaign(make_spec(CampaignKind::transport, c_tr, flags, cfg)));
    });

    Common c_ph;
    std::string ph_trace;
    auto* ph = app.add_subcommand("phase", "Beat-note phase statistics and position fluctuations");
    add_common(ph, c_ph, "csv");
    add_phase_flags(ph, flags);
    ph->add_option("--trace", ph_trace, "Analyse a CSV phase trace (t_s,phi_rad) instead of simulating")
        ->check(CLI::ExistingFile);
    ph->callback([&] {
        const Config cfg = load_config(c_ph);
        if (ph_trace.empty()) {
            emit_campaign(c_ph, out, run_campaign(make_spec(CampaignKind::phase, c_ph, flags, cfg)));
            return;
        }
        std::istringstream in(read_file(ph_trace));
        std::string line;
        std::vector<double> t;
        std::vector<double> phi;
        while (std::getline(in, line)) {
            if (line.empty() || !(std::isdigit(static_cast<unsigned char>(line[0])) || line[0] == '-' ||
                                  line[0] == '.'))
                continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos)
                throw Error("trace-format", "expected t_s,phi_rad rows");
            t.push_back(std::stod(line.substr(0, comma)));
            phi.push_back(std::stod(line.substr(comma + 1)));
        }
        PhaseTrace trace{Eigen::Map<Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size())),
                         Eigen::Map<Eigen::VectorXd>(phi.data(), static_cast<Eigen::Index>(phi.size()))};
        const double s = phase_std_tau(trace, flags.tau_s);
        ordered_json j;
        j["tau_s"] = flags.tau_s;
        j["sigma_phi_rad"] = s;
        j["fluct_nm"] = fluct_from_phase(s, cfg.lattice) * 1e3;
        emit(c_ph, out, j.dump(2) + "\n");
    });

    Common c_run;
    std::string run_kind;
    auto* run = app.add_subcommand("run-campaign", "Run any campaign kind");
    add_common(run, c_run, "csv");
    run->add_option("--kind", run_kind, "Campaign kind")
        ->required()
        ->check(CLI::IsMember({"single-shot", "pair", "staircase", "transport", "phase"}));
    add_pair_flags(run, flags);
    add_staircase_flags(run, flags);
    add_transport_flags(run, flags);
    add_phase_flags(run, flags);
    run->callback([&] {
        const Config cfg = load_config(c_run);
        emit_campaign(c_run, out, run_campaign(make_spec(campaign_kind_from_string(run_kind), c_run, flags, cfg)));
    });

    // infer-wells
    Common c_inf;
    double inf_d = 0.0;
    double inf_unc = 0.0;
    auto* inf = app.add_subcommand("infer-wells", "Well count from a mean distance");
    add_common(inf, c_inf, "csv");
    inf->add_option("--d-um", inf_d, "Mean distance")->required();
    inf->add_option("--unc-nm", inf_unc, "Uncertainty of the mean distance")->required();
    inf->callback([&] {
        const Config cfg = load_config(c_inf);
        const WellAssignment a = infer_well_count(inf_d, inf_unc * 1e-3, cfg.lattice);
        if (c_inf.format == "json") {
            ordered_json j;
            j["n"] = a.n;
            j["residual_nm"] = a.residual_um * 1e3;
            j["misassign_prob"] = a.misassignment_prob;
            j["unreliable"] = a.unreliable();
            emit(c_inf, out, j.dump(2) + "\n");
        } else {
            emit(c_inf, out,
                 "n=" + std::to_string(a.n) + " residual_nm=" + fixed(a.residual_um * 1e3, 1) +
                     " misassign_prob=" + format_number(a.misassignment_prob) + "\n");
        }
    });

    // budget
    Common c_bud;
    double b_stat = 130.0;
    double b_backgr = 15.0;
    double b_fluct = 42.0;
    double b_exposure = 1.0;
    double b_readout = 0.0;
    std::optional<double> b_drift;
    std::optional<double> b_transp;
    std::optional<double> b_control;
    auto* bud = app.add_subcommand("budget", "Single-shot and closed-loop error budgets");
    add_common(bud, c_bud, "csv");
    bud->add_option("--dx-stat-nm", b_stat, "Statistical error")->check(CLI::NonNegativeNumber)->capture_default_str();
    bud->add_option("--dx-backgr-nm", b_backgr, "Background error")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    bud->add_option("--fluct-1s-nm", b_fluct, "Lattice fluctuation over 1 s")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    bud->add_option("--exposure-s", b_exposure, "Exposure time")->check(CLI::PositiveNumber)->capture_default_str();
    bud->add_option("--readout-s", b_readout, "Readout interval")->check(CLI::NonNegativeNumber)->capture_default_str();
    bud->add_option("--sigma-drift-nm", b_drift, "Inter-exposure drift (enables the control budget)")
        ->check(CLI::NonNegativeNumber);
    auto* o_transp = bud->add_option("--sigma-transp-nm", b_transp, "Transport error (forward control budget)")
                         ->check(CLI::NonNegativeNumber);
    bud->add_option("--sigma-control-nm", b_control, "Measured control width (solves for the transport error)")
        ->check(CLI::NonNegativeNumber)
        ->excludes(o_transp);
    bud->callback([&] {
        load_config(c_bud);
        BudgetInputs in{b_stat * 1e-3, b_backgr * 1e-3, b_fluct * 1e-3, b_exposure, b_readout};
        const ErrorBudget e = predict_single_shot_error(in);
        ordered_json j;
        j["dx_total_nm"] = e.dx_total_um * 1e3;
        std::string text = "dx_total = " + fixed(e.dx_total_um * 1e3, 1) + " nm\n";
        if (b_drift && b_transp) {
            const double v = control_budget(b_stat * 1e-3, *b_drift * 1e-3, *b_transp * 1e-3) * 1e3;
            j["sigma_control_nm"] = v;
            text += "sigma_control = " + fixed(v, 1) + " nm\n";
        } else if (b_drift && b_control) {
            const double v = solve_transport_error(*b_control * 1e-3, b_stat * 1e-3, *b_drift * 1e-3) * 1e3;
            j["sigma_transp_nm"] = v;
            text += "sigma_transp = " + fixed(v, 1) + " nm\n";
        } else if (b_transp || b_control) {
            throw Error("usage", "--sigma-transp-nm and --sigma-control-nm need --sigma-drift-nm");
        }
        emit(c_bud, out, c_bud.format == "json" ? j.dump(2) + "\n" : text);
    });

    try {
        std::vector<std::string> args;
        for (int i = argc - 1; i >= 1; --i)
            args.emplace_back(argv[i]);
        app.parse(std::move(args));
    } catch (const CLI::ParseError& e) {
        // --help and --version exit 0; everything else is a usage error.
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        if (e.code() == "usage") {
            err << "ERROR:usage:" << e.what() << "\n";
            return 2;
        }
        err << "ERROR:" << e.code() << ":" << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "ERROR:internal:" << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace latticeloc
