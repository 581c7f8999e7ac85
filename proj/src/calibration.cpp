#include "latticeloc/calibration.hpp"

#include <cmath>
#include <string>

#include "latticeloc/core.hpp"
#include "latticeloc/localize.hpp"

namespace latticeloc {

namespace {

constexpr double kWindowHalfWidths = 5.75;
constexpr int kSamplesPerHalfWidth = 200;
constexpr double kMaxShapeRatio = 4.0;

} // namespace

double gaussian_fit_bias(const LsfModel& lsf, double w_ref_um)
{
    const int half = static_cast<int>(std::lround(kWindowHalfWidths * kSamplesPerHalfWidth));
    const double step = w_ref_um / kSamplesPerHalfWidth;

    BinnedProfile prof;
    prof.bin_um = step;
    prof.x_um = Eigen::VectorXd::LinSpaced(2 * half + 1, -half * step, half * step);
    prof.counts = prof.x_um.unaryExpr([&](double x) { return lsf(x); });

    FitOptions opt;
    opt.window = std::pair{0, 2 * half};
    opt.bin_noise = 0.0;
    opt.init_width_um = w_ref_um;
    opt.step_tolerance_um = 1e-12 * w_ref_um;
    opt.max_iterations = 500;
    const FitResult r = fit_gaussian_1d(prof, opt);
    if (!r.converged)
        throw Error("calibration-failure", "Gaussian fit to the noise-free LSF did not converge");
    return r.center();
}

LsfCalibration calibrate_lsf(double w_ax_um, double bias_um, double width_ratio, double height_ratio)
{
    if (!(w_ax_um > 0.0) || !(bias_um >= 0.0))
        throw Error("parameter-domain", "calibration targets must be w_ax > 0 and bias >= 0");

    const double target = bias_um / w_ax_um;
    int iterations = 0;

    // Bias per unit half-width for a unit-sigma1 model with shape ratio r.
    auto shape_residual = [&](double r) {
        ++iterations;
        const LsfModel unit(1.0, r, width_ratio, height_ratio);
        const double hw = unit.half_width();
        return gaussian_fit_bias(unit, hw) / hw - target;
    };

    double ratio = 0.0;
    if (target > 0.0) {
        double lo = 0.0;
        double hi = 0.0;
        double f_hi = -target;
        const double step = 0.05;
        while (f_hi <= 0.0 && hi < kMaxShapeRatio) {
            lo = hi;
            hi += step;
            f_hi = shape_residual(hi);
        }
        if (f_hi <= 0.0) {
            throw Error("calibration-failure",
                        "no offset_delta/sigma1 <= " + std::to_string(kMaxShapeRatio) + " reaches bias/w_ax = " +
                            std::to_string(target) + "; residual at the box edge " + std::to_string(f_hi));
        }
        for (int i = 0; i < 100 && hi - lo > 1e-14; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (shape_residual(mid) > 0.0)
                hi = mid;
            else
                lo = mid;
        }
        ratio = 0.5 * (lo + hi);
    }

    const LsfModel unit(1.0, ratio, width_ratio, height_ratio);
    const double sigma1 = w_ax_um / unit.half_width();
    LsfModel model(sigma1, ratio * sigma1, width_ratio, height_ratio);

    LsfCalibration out{model, model.half_width() - w_ax_um, gaussian_fit_bias(model, w_ax_um) - bias_um, iterations};
    if (std::abs(out.half_width_residual_um) > 1e-3 || std::abs(out.bias_residual_um) > 1e-3) {
        throw Error("calibration-failure", "residuals too large: half-width " +
                                               std::to_string(out.half_width_residual_um) + " um, bias " +
                                               std::to_string(out.bias_residual_um) + " um");
    }
    return out;
}

} // namespace latticeloc
