#include "latticeloc/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "latticeloc/solver.hpp"

namespace latticeloc {

namespace models {

void GaussianProblem::evaluate(const Vector& p, Vector& r, Matrix& J) const
{
    const Eigen::Index n = x.size();
    r.resize(n);
    J.resize(n, 4);
    const double off = p(0), A = p(1), x0 = p(2), s = p(3);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double u = x(i) - x0;
        const double e = std::exp(-0.5 * u * u / (s * s));
        r(i) = w(i) * (off + A * e - y(i));
        J(i, 0) = w(i);
        J(i, 1) = w(i) * e;
        J(i, 2) = w(i) * A * e * u / (s * s);
        J(i, 3) = w(i) * A * e * u * u / (s * s * s);
    }
}

double GaussianProblem::step_norm(const Vector& dp) const
{
    return std::hypot(dp(2), dp(3));
}

void BinnedLsfProblem::evaluate(const Vector& p, Vector& r, Matrix& J) const
{
    const Eigen::Index n = x.size();
    r.resize(n);
    J.resize(n, 1 + 2 * peaks);
    const double half = 0.5 * bin_um;
    for (Eigen::Index i = 0; i < n; ++i) {
        double model = p(0);
        J(i, 0) = w(i);
        for (int k = 0; k < peaks; ++k) {
            const double S = p(1 + k);
            const double x0 = p(1 + peaks + k);
            const double lo = x(i) - half - x0;
            const double hi = x(i) + half - x0;
            const double mass = lsf->cdf(hi) - lsf->cdf(lo);
            model += S * mass;
            J(i, 1 + k) = w(i) * mass;
            J(i, 1 + peaks + k) = w(i) * S * (lsf->density(lo) - lsf->density(hi));
        }
        r(i) = w(i) * (model - y(i));
    }
}

double BinnedLsfProblem::step_norm(const Vector& dp) const
{
    return dp.tail(peaks).norm();
}

Vector BinnedLsfProblem::signal(const Vector& p) const
{
    const double half = 0.5 * bin_um;
    Vector s = Vector::Zero(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        for (int k = 0; k < peaks; ++k) {
            const double x0 = p(1 + peaks + k);
            s(i) += p(1 + k) * (lsf->cdf(x(i) + half - x0) - lsf->cdf(x(i) - half - x0));
        }
    }
    return s;
}

} // namespace models

namespace {

double median(std::vector<double> v)
{
    if (v.empty())
        return 0.0;
    const auto mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double hi = v[mid];
    if (v.size() % 2 == 1)
        return hi;
    const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lo + hi);
}

Eigen::VectorXd smooth3(const Eigen::VectorXd& y)
{
    const Eigen::Index n = y.size();
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index a = std::max<Eigen::Index>(0, i - 1);
        const Eigen::Index b = std::min<Eigen::Index>(n - 1, i + 1);
        s(i) = y.segment(a, b - a + 1).mean();
    }
    return s;
}

struct Window
{
    int lo = 0;
    int hi = 0;
    int size() const { return hi - lo + 1; }
};

Window clip_window(int lo, int hi, Eigen::Index n)
{
    return {std::max(0, lo), std::min(static_cast<int>(n) - 1, hi)};
}

void require_window(const Window& w)
{
    if (w.size() < 5)
        throw Error("window", "fit window holds " + std::to_string(w.size()) + " bins; at least 5 are required");
}

double edge_median(const Eigen::VectorXd& y, const Window& w)
{
    return median({y(w.lo), y(w.lo + 1), y(w.hi - 1), y(w.hi)});
}

int nearest_bin(const BinnedProfile& prof, double x_um)
{
    const double idx = (x_um - prof.x_um(0)) / prof.bin_um;
    return std::clamp(static_cast<int>(std::lround(idx)), 0, static_cast<int>(prof.size()) - 1);
}

double resolve_noise(const BinnedProfile& prof, const FitOptions& opt)
{
    return opt.bin_noise >= 0.0 ? opt.bin_noise : estimate_bin_noise(prof.counts);
}

void require_peak(double peak_value, double baseline, double noise)
{
    const double height = peak_value - baseline;
    if (!(height > 0.0) || height < 5.0 * noise) {
        throw Error("no-peak", "peak height " + std::to_string(height) + " counts is below 5x the bin noise (" +
                                   std::to_string(noise) + ")");
    }
}

Eigen::VectorXd variance_weights(const Eigen::VectorXd& signal, double gain, double noise)
{
    Eigen::VectorXd w(signal.size());
    for (Eigen::Index i = 0; i < signal.size(); ++i) {
        const double var = std::max(gain * std::max(signal(i), 0.0) + noise * noise, 1.0);
        w(i) = 1.0 / std::sqrt(var);
    }
    return w;
}

// Covariance diagonal from the residual-scaled curvature.
Eigen::VectorXd parameter_sigmas(const DampedGaussNewtonResult<double>& sol, Eigen::Index n_data)
{
    const Eigen::Index n_par = sol.params.size();
    if (n_data <= n_par)
        return Eigen::VectorXd::Constant(n_par, std::numeric_limits<double>::quiet_NaN());
    const double s2 = sol.cost / static_cast<double>(n_data - n_par);
    const Eigen::MatrixXd inv = sol.normal_matrix.ldlt().solve(Eigen::MatrixXd::Identity(n_par, n_par));
    return (s2 * inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
}

DampedGaussNewtonOptions<double> solver_options(const FitOptions& opt)
{
    DampedGaussNewtonOptions<double> o;
    o.step_tolerance = opt.step_tolerance_um;
    o.max_iterations = opt.max_iterations;
    return o;
}

// Runs the binned-LSF fit for `peaks` peaks over a window, with optional
// window re-centring (single peak, auto window) and variance reweighting.
struct LsfFit
{
    models::BinnedLsfProblem problem;
    DampedGaussNewtonResult<double> sol;
    Window window;
    int total_iterations = 0;
};

void load_window(models::BinnedLsfProblem& prob, const BinnedProfile& prof, const Window& w)
{
    prob.x = prof.x_um.segment(w.lo, w.size());
    prob.y = prof.counts.segment(w.lo, w.size());
    prob.w = Eigen::VectorXd::Ones(w.size());
}

LsfFit run_lsf_fit(const BinnedProfile& prof, const LsfModel& lsf, const FitOptions& opt, Window window,
                   Eigen::VectorXd p0, int peaks, bool recentre, double noise)
{
    LsfFit fit;
    fit.problem.lsf = &lsf;
    fit.problem.bin_um = prof.bin_um;
    fit.problem.peaks = peaks;
    fit.window = window;
    load_window(fit.problem, prof, window);

    const auto sopt = solver_options(opt);
    fit.sol = damped_gauss_newton(fit.problem, p0, sopt);
    fit.total_iterations += fit.sol.iterations;

    for (int pass = 0; recentre && pass < 2; ++pass) {
        const int k = nearest_bin(prof, fit.sol.params(2));
        const Window moved = clip_window(k - opt.half_window_bins, k + opt.half_window_bins, prof.size());
        if (moved.lo == fit.window.lo && moved.hi == fit.window.hi)
            break;
        require_window(moved);
        fit.window = moved;
        load_window(fit.problem, prof, moved);
        fit.sol = damped_gauss_newton(fit.problem, fit.sol.params, sopt);
        fit.total_iterations += fit.sol.iterations;
    }

    if (opt.weighting.value_or(Weighting::variance) == Weighting::variance) {
        for (int pass = 0; pass < opt.reweight_passes; ++pass) {
            fit.problem.w = variance_weights(fit.problem.signal(fit.sol.params), opt.gain, noise);
            fit.sol = damped_gauss_newton(fit.problem, fit.sol.params, sopt);
            fit.total_iterations += fit.sol.iterations;
        }
    }
    return fit;
}

FitResult to_result(const LsfFit& fit, const LsfModel& lsf, const BinnedProfile& prof)
{
    const int peaks = fit.problem.peaks;
    const auto& p = fit.sol.params;
    const Eigen::VectorXd sig = parameter_sigmas(fit.sol, fit.problem.x.size());

    std::vector<int> order(static_cast<std::size_t>(peaks));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return p(1 + peaks + a) < p(1 + peaks + b); });

    FitResult r;
    for (int k : order) {
        r.centers_um.push_back(p(1 + peaks + k));
        r.center_uncertainty_um.push_back(sig(1 + peaks + k));
        r.amplitudes.push_back(p(1 + k));
    }
    r.width_um = lsf.half_width();
    r.background = p(0);
    r.chi2 = fit.sol.cost;
    r.gradient_norm = fit.sol.gradient_norm;
    r.iterations = fit.total_iterations;
    r.window_lo = fit.window.lo;
    r.window_hi = fit.window.hi;

    const double lo_edge = prof.x_um(fit.window.lo) - 0.5 * prof.bin_um;
    const double hi_edge = prof.x_um(fit.window.hi) + 0.5 * prof.bin_um;
    bool inside = true;
    for (double c : r.centers_um)
        inside = inside && c >= lo_edge && c <= hi_edge;
    r.converged = fit.sol.converged && inside;
    return r;
}

// 1/sqrt(e) half-width of a smoothed peak above `baseline`, by linear
// interpolation between bins.
double smoothed_half_width(const Eigen::VectorXd& s, int peak, double baseline, double bin_um)
{
    const double level = baseline + (s(peak) - baseline) * std::exp(-0.5);
    const int n = static_cast<int>(s.size());
    auto crossing = [&](int dir) {
        int i = peak;
        while (i + dir >= 0 && i + dir < n && s(i + dir) > level)
            i += dir;
        if (i + dir < 0 || i + dir >= n)
            return static_cast<double>(i - peak);
        const double f = (s(i) - level) / (s(i) - s(i + dir));
        return static_cast<double>(i - peak) + dir * f;
    };
    return 0.5 * (crossing(+1) - crossing(-1)) * bin_um;
}

} // namespace

int find_peak_bin(const Eigen::VectorXd& counts)
{
    if (counts.size() == 0)
        throw Error("window", "empty profile");
    const Eigen::VectorXd s = smooth3(counts);
    int best = 0;
    for (Eigen::Index i = 1; i < s.size(); ++i) {
        if (s(i) > s(best))
            best = static_cast<int>(i);
    }
    return best;
}

double estimate_bin_noise(const Eigen::VectorXd& counts)
{
    if (counts.size() < 3)
        return 0.0;
    std::vector<double> d(static_cast<std::size_t>(counts.size() - 1));
    for (Eigen::Index i = 0; i + 1 < counts.size(); ++i)
        d[static_cast<std::size_t>(i)] = counts(i + 1) - counts(i);
    const double m = median(d);
    for (double& v : d)
        v = std::abs(v - m);
    return 1.4826 * median(d) / std::sqrt(2.0);
}

FitResult fit_gaussian_1d(const BinnedProfile& profile, const FitOptions& opt)
{
    const Eigen::Index n = profile.size();
    const double noise = resolve_noise(profile, opt);

    Window window;
    int peak = 0;
    if (opt.window) {
        window = clip_window(opt.window->first, opt.window->second, n);
        require_window(window);
        peak = window.lo + find_peak_bin(profile.counts.segment(window.lo, window.size()));
    } else {
        peak = find_peak_bin(profile.counts);
        window = clip_window(peak - opt.half_window_bins, peak + opt.half_window_bins, n);
        require_window(window);
    }

    const double offset0 = edge_median(profile.counts, window);
    require_peak(smooth3(profile.counts)(peak), offset0, noise);

    models::GaussianProblem prob;
    prob.x = profile.x_um.segment(window.lo, window.size());
    prob.y = profile.counts.segment(window.lo, window.size());
    prob.w = Eigen::VectorXd::Ones(window.size());

    Eigen::VectorXd p0(4);
    p0 << offset0, profile.counts(peak) - offset0, profile.x_um(peak), opt.init_width_um;

    const auto sopt = solver_options(opt);
    auto sol = damped_gauss_newton(prob, p0, sopt);
    int iterations = sol.iterations;
    if (opt.weighting.value_or(Weighting::unweighted) == Weighting::variance) {
        for (int pass = 0; pass < opt.reweight_passes; ++pass) {
            const auto& p = sol.params;
            Eigen::VectorXd signal =
                p(1) * (-0.5 * (prob.x.array() - p(2)).square() / (p(3) * p(3))).exp();
            prob.w = variance_weights(signal, opt.gain, noise);
            sol = damped_gauss_newton(prob, sol.params, sopt);
            iterations += sol.iterations;
        }
    }

    const Eigen::VectorXd sig = parameter_sigmas(sol, prob.x.size());
    FitResult r;
    r.centers_um = {sol.params(2) - opt.subtract_bias_um};
    r.center_uncertainty_um = {sig(2)};
    r.amplitudes = {sol.params(1)};
    r.width_um = std::abs(sol.params(3));
    r.background = sol.params(0);
    r.chi2 = sol.cost;
    r.gradient_norm = sol.gradient_norm;
    r.iterations = iterations;
    r.window_lo = window.lo;
    r.window_hi = window.hi;
    const double x0 = sol.params(2);
    r.converged = sol.converged && x0 >= profile.x_um(window.lo) - 0.5 * profile.bin_um &&
                  x0 <= profile.x_um(window.hi) + 0.5 * profile.bin_um;
    return r;
}

FitResult fit_lsf_1d(const BinnedProfile& profile, const LsfModel& lsf, const FitOptions& opt)
{
    const Eigen::Index n = profile.size();
    const double noise = resolve_noise(profile, opt);

    Window window;
    int peak = 0;
    if (opt.window) {
        window = clip_window(opt.window->first, opt.window->second, n);
        require_window(window);
        peak = window.lo + find_peak_bin(profile.counts.segment(window.lo, window.size()));
    } else {
        peak = find_peak_bin(profile.counts);
        window = clip_window(peak - opt.half_window_bins, peak + opt.half_window_bins, n);
        require_window(window);
    }

    const double offset0 = edge_median(profile.counts, window);
    require_peak(smooth3(profile.counts)(peak), offset0, noise);

    Eigen::VectorXd p0(3);
    p0 << offset0, (profile.counts(peak) - offset0) * lsf.area() / profile.bin_um, profile.x_um(peak);

    const auto fit = run_lsf_fit(profile, lsf, opt, window, p0, 1, !opt.window.has_value(), noise);
    return to_result(fit, lsf, profile);
}

FitResult fit_two_peaks(const BinnedProfile& profile, const LsfModel& lsf, const FitOptions& opt)
{
    const Eigen::Index n = profile.size();
    if (n < 5)
        throw Error("window", "profile too short for a two-peak fit");
    const double noise = resolve_noise(profile, opt);
    const Eigen::VectorXd s = smooth3(profile.counts);
    const double baseline = median(std::vector<double>(profile.counts.data(), profile.counts.data() + n));

    std::vector<int> candidates;
    for (int i = 1; i + 1 < n; ++i) {
        const double h = s(i) - baseline;
        if (s(i) > s(i - 1) && s(i) >= s(i + 1) && h > 0.0 && h >= 5.0 * noise)
            candidates.push_back(i);
    }
    std::stable_sort(candidates.begin(), candidates.end(), [&](int a, int b) { return s(a) > s(b); });

    if (candidates.empty())
        throw Error("no-peak", "no peak exceeds 5x the bin noise");
    if (candidates.size() == 1) {
        // An unresolved pair shows up as one peak noticeably wider than the LSF.
        const double measured = smoothed_half_width(s, candidates[0], baseline, profile.bin_um);
        const double expected = std::sqrt(std::pow(lsf.half_width(), 2) +
                                          profile.bin_um * profile.bin_um * (1.0 / 12.0 + 2.0 / 3.0));
        if (measured > 1.2 * expected) {
            throw Error("overlap", "single peak of half-width " + std::to_string(measured) +
                                       " um; atoms closer than " + std::to_string(opt.min_separation_um) + " um");
        }
        throw Error("no-second-peak", "only one peak found");
    }

    int a = candidates[0], b = candidates[1];
    if (a > b)
        std::swap(a, b);
    const double candidate_sep = profile.x_um(b) - profile.x_um(a);
    if (candidate_sep < opt.min_separation_um - profile.bin_um) {
        throw Error("overlap", "peaks " + std::to_string(candidate_sep) + " um apart; below the " +
                                   std::to_string(opt.min_separation_um) + " um resolution floor");
    }

    Window window = opt.window ? clip_window(opt.window->first, opt.window->second, n)
                               : clip_window(a - opt.half_window_bins, b + opt.half_window_bins, n);
    require_window(window);
    const double offset0 = edge_median(profile.counts, window);
    const double to_area = lsf.area() / profile.bin_um;

    Eigen::VectorXd p0(5);
    p0 << offset0, (profile.counts(a) - offset0) * to_area, (profile.counts(b) - offset0) * to_area,
        profile.x_um(a), profile.x_um(b);

    const auto fit = run_lsf_fit(profile, lsf, opt, window, p0, 2, false, noise);
    FitResult r = to_result(fit, lsf, profile);
    if (r.amplitudes[0] <= 0.0 || r.amplitudes[1] <= 0.0)
        throw Error("no-second-peak", "two-peak fit collapsed to a single peak");
    const double d = r.centers_um[1] - r.centers_um[0];
    if (d < opt.min_separation_um) {
        throw Error("overlap", "fitted separation " + std::to_string(d) + " um is below " +
                                   std::to_string(opt.min_separation_um) + " um");
    }
    return r;
}

double predict_stat_error(double w_ax_um, double n_photons)
{
    if (!(n_photons >= 1.0))
        throw Error("parameter-domain", "photon number must be >= 1");
    return 1.44 * w_ax_um / std::sqrt(n_photons);
}

ErrorBudget predict_single_shot_error(const BudgetInputs& in)
{
    if (in.dx_stat_um < 0.0 || in.dx_backgr_um < 0.0 || in.fluct_1s_um < 0.0 || in.exposure_s < 0.0 ||
        in.readout_s < 0.0)
        throw Error("parameter-domain", "error budget components must be >= 0");
    ErrorBudget b;
    b.dx_stat_um = in.dx_stat_um;
    b.dx_backgr_um = in.dx_backgr_um;
    b.sigma_fluct_exposure_um = in.fluct_1s_um * std::sqrt(in.exposure_s);
    b.sigma_fluct_readout_um = in.fluct_1s_um * std::sqrt(in.readout_s);
    double var = b.dx_stat_um * b.dx_stat_um + b.dx_backgr_um * b.dx_backgr_um +
                 b.sigma_fluct_exposure_um * b.sigma_fluct_exposure_um;
    if (in.readout_s > 0.0)
        var += 2.0 * b.sigma_fluct_readout_um * b.sigma_fluct_readout_um;
    b.dx_total_um = std::sqrt(var);
    return b;
}

} // namespace latticeloc
