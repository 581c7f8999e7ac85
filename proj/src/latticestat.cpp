#include "latticeloc/latticestat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "latticeloc/imagesim.hpp"

namespace latticeloc {

double pair_distance(const FitResult& fit)
{
    if (!fit.converged || fit.centers_um.size() != 2)
        throw Error("fit-failed", "pair distance needs a converged two-peak fit");
    const double d = fit.centers_um[1] - fit.centers_um[0];
    if (!(d > 0.0))
        throw Error("fit-failed", "two-peak fit returned coincident centres");
    return d;
}

PairCampaignResult average_distance(std::span<const double> distances_um)
{
    if (distances_um.size() < 2)
        throw Error("too-few-samples", "distance averaging needs at least two pictures");
    const Eigen::Map<const Eigen::VectorXd> d(distances_um.data(), static_cast<Eigen::Index>(distances_um.size()));
    PairCampaignResult r;
    r.distances_um.assign(distances_um.begin(), distances_um.end());
    r.pictures = static_cast<int>(d.size());
    r.mean_um = d.mean();
    r.std_um = std::sqrt((d.array() - r.mean_um).square().sum() / static_cast<double>(d.size() - 1));
    r.std_of_mean_um = r.std_um / std::sqrt(static_cast<double>(d.size()));
    return r;
}

WellAssignment infer_well_count(double d_mean_um, double d_mean_unc_um, const LatticeConfig& lattice)
{
    if (!(d_mean_um > 0.0) || !(d_mean_unc_um > 0.0))
        throw Error("parameter-domain", "well inference needs d_mean > 0 and unc > 0");
    const double half = 0.5 * lattice.period_um;
    if (d_mean_unc_um >= half) {
        throw Error("ambiguous", "distance uncertainty " + std::to_string(d_mean_unc_um * 1e3) +
                                     " nm is not below half a lattice period (" + std::to_string(half * 1e3) +
                                     " nm); the well count cannot be resolved");
    }
    WellAssignment a;
    a.n = std::lround(d_mean_um / lattice.period_um);
    a.residual_um = d_mean_um - static_cast<double>(a.n) * lattice.period_um;
    const double margin = std::max(0.0, half - std::abs(a.residual_um));
    a.misassignment_prob = std::clamp(std::erfc(margin / (d_mean_unc_um * std::numbers::sqrt2)), 0.0, 1.0);
    return a;
}

std::vector<std::pair<double, double>> empirical_cdf(std::span<const double> samples)
{
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(s.size());
    const double n = static_cast<double>(s.size());
    for (std::size_t k = 0; k < s.size(); ++k)
        out.emplace_back(s[k], static_cast<double>(k + 1) / n);
    return out;
}

namespace {

struct StaircaseSystem
{
    Eigen::VectorXd grid;
    Eigen::VectorXd ecdf;
    std::vector<double> steps;

    // Weighted residual norm with the weights solved linearly for width s.
    double cost(double s, Eigen::VectorXd* weights = nullptr) const
    {
        const Eigen::Index K = static_cast<Eigen::Index>(steps.size());
        Eigen::MatrixXd BtB = Eigen::MatrixXd::Zero(K, K);
        Eigen::VectorXd BtF = Eigen::VectorXd::Zero(K);
        Eigen::VectorXd row(K);
        const double reach = 9.0 * s;
        for (Eigen::Index j = 0; j < grid.size(); ++j) {
            const double g = grid(j);
            for (Eigen::Index k = 0; k < K; ++k) {
                const double z = g - steps[static_cast<std::size_t>(k)];
                if (z <= -reach)
                    row(k) = 0.0;
                else if (z >= reach)
                    row(k) = 1.0;
                else
                    row(k) = 0.5 * std::erfc(-z / (s * std::numbers::sqrt2));
            }
            BtB.selfadjointView<Eigen::Lower>().rankUpdate(row);
            BtF += row * ecdf(j);
        }
        BtB.triangularView<Eigen::StrictlyUpper>() = BtB.transpose();
        const Eigen::VectorXd w = BtB.ldlt().solve(BtF);

        double c = 0.0;
        for (Eigen::Index j = 0; j < grid.size(); ++j) {
            double model = 0.0;
            for (Eigen::Index k = 0; k < K; ++k) {
                const double z = grid(j) - steps[static_cast<std::size_t>(k)];
                if (z >= reach)
                    model += w(k);
                else if (z > -reach)
                    model += w(k) * 0.5 * std::erfc(-z / (s * std::numbers::sqrt2));
            }
            const double r = model - ecdf(j);
            c += r * r;
        }
        if (weights)
            *weights = w;
        return c;
    }
};

} // namespace

StaircaseFit staircase_fit(std::span<const double> d_means_um, const LatticeConfig& lattice,
                           const StaircaseOptions& opt)
{
    if (static_cast<int>(d_means_um.size()) < opt.min_pairs) {
        throw Error("insufficient-span", "staircase fit needs at least " + std::to_string(opt.min_pairs) +
                                             " pairs, got " + std::to_string(d_means_um.size()));
    }
    const double p = lattice.period_um;
    std::vector<double> sorted(d_means_um.begin(), d_means_um.end());
    std::sort(sorted.begin(), sorted.end());

    std::vector<long> occupied;
    const double off = opt.step_offset_um;
    for (double d : sorted)
        occupied.push_back(std::lround((d - off) / p));
    occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
    if (static_cast<int>(occupied.size()) < opt.min_steps) {
        throw Error("insufficient-span", "distances occupy " + std::to_string(occupied.size()) +
                                             " lattice steps; at least " + std::to_string(opt.min_steps) +
                                             " are required");
    }
    const long n_min = occupied.front();
    const long n_max = occupied.back();

    StaircaseSystem sys;
    for (long n = n_min; n <= n_max; ++n)
        sys.steps.push_back(static_cast<double>(n) * p + off);
    // Grid offset by half a step so no grid point sits exactly on a lattice multiple.
    const double start = (static_cast<double>(n_min) - 0.5) * p + off + 0.5 * opt.grid_step_um;
    const double stop = (static_cast<double>(n_max) + 0.5) * p + off;
    const auto count = static_cast<Eigen::Index>(std::floor((stop - start) / opt.grid_step_um)) + 1;
    sys.grid = Eigen::VectorXd::LinSpaced(count, start, start + static_cast<double>(count - 1) * opt.grid_step_um);
    sys.ecdf.resize(count);
    const double N = static_cast<double>(sorted.size());
    for (Eigen::Index j = 0; j < count; ++j) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), sys.grid(j));
        sys.ecdf(j) = static_cast<double>(it - sorted.begin()) / N;
    }

    // Coarse log scan, then golden-section refinement around the best point.
    const double lo = std::log(opt.min_width_um);
    const double hi = std::log(0.5 * p);
    const int scan = 60;
    std::vector<double> costs(scan + 1);
    int best = 0;
    for (int i = 0; i <= scan; ++i) {
        costs[static_cast<std::size_t>(i)] = sys.cost(std::exp(lo + (hi - lo) * i / scan));
        if (costs[static_cast<std::size_t>(i)] < costs[static_cast<std::size_t>(best)])
            best = i;
    }
    double a = lo + (hi - lo) * std::max(0, best - 1) / scan;
    double b = lo + (hi - lo) * std::min(scan, best + 1) / scan;
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = sys.cost(std::exp(c));
    double fd = sys.cost(std::exp(d));
    while (b - a > 1e-7) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = sys.cost(std::exp(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = sys.cost(std::exp(d));
        }
    }
    double log_s = 0.5 * (a + b);
    // The scan edge can beat the interior when the optimum is the lower bound.
    if (best == 0 && costs[0] <= sys.cost(std::exp(log_s)))
        log_s = lo;

    StaircaseFit fit;
    fit.step_width_um = std::exp(log_s);
    Eigen::VectorXd w;
    fit.chi2 = sys.cost(fit.step_width_um, &w);
    fit.step_positions_um = sys.steps;
    fit.step_weights.assign(w.data(), w.data() + w.size());
    return fit;
}

PairSimulation simulate_pair(const LsfModel& lsf, const CameraModel& cam, const NoiseModel& noise,
                             const LatticeConfig& lattice, const PairSimulationOptions& opt, Engine& rng)
{
    PairSimulation sim;
    std::uniform_int_distribution<long> pick(opt.n_min, opt.n_max);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    sim.n_true = pick(rng);
    sim.d_true_um = static_cast<double>(sim.n_true) * lattice.period_um;

    const double centre = 0.5 * cam.frame_width_um();
    AtomEnsemble atoms;
    const double x1 = lattice.snap(centre - 0.5 * sim.d_true_um + jitter(rng) * lattice.period_um);
    atoms.positions_um = {x1, x1 + sim.d_true_um};

    FitOptions fopt;
    fopt.gain = cam.gain_counts_per_photon;
    fopt.bin_noise = noise.bin_noise(cam.exposure_s);

    std::vector<double> distances;
    for (int k = 0; k < opt.pictures; ++k) {
        try {
            Frame frame;
            if (noise.drift_model == DriftModel::trace_based) {
                const DriftTrace trace = gen_drift_trace(noise, cam.exposure_s, 1e-3, rng);
                frame = render_frame(atoms, lsf, cam, noise, &trace, rng);
            } else {
                frame = render_frame(atoms, lsf, cam, noise, nullptr, rng);
            }
            const FitResult fit = fit_two_peaks(bin_columns(frame), lsf, fopt);
            distances.push_back(pair_distance(fit));
        } catch (const Error&) {
            ++sim.failed_pictures;
        }
    }
    if (distances.size() < 2)
        return sim;
    sim.campaign = average_distance(distances);
    try {
        sim.wells = infer_well_count(sim.campaign.mean_um, std::max(sim.campaign.std_of_mean_um, 1e-9), lattice);
    } catch (const Error&) {
        return sim;
    }
    sim.ok = true;
    return sim;
}

} // namespace latticeloc
