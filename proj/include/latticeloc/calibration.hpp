#pragma once

#include "latticeloc/lsf.hpp"

namespace latticeloc {

struct LsfCalibration
{
    LsfModel model;
    double half_width_residual_um = 0.0;
    double bias_residual_um = 0.0;
    int iterations = 0;
};

/// Centre of a simple-Gaussian fit to the noise-free LSF, relative to the LSF
/// maximum. The profile is sampled every w_ref/200 over +-5.75 w_ref, which is
/// the +-8 pixel fit window at the default pixel size and width.
double gaussian_fit_bias(const LsfModel& lsf, double w_ref_um);

/// Finds (sigma1, offset_delta) so that the composite 1/sqrt(e) half-width is
/// w_ax_um and the simple-Gaussian fit is displaced by bias_um. Both
/// constraints scale with the model, so the shape ratio offset_delta/sigma1
/// is solved first and the scale follows in closed form.
///
/// Throws Error("calibration-failure") when no shape ratio in the search box
/// reaches the requested bias.
LsfCalibration calibrate_lsf(double w_ax_um = 1.3, double bias_um = 0.042,
                             double width_ratio = LsfModel::kWidthRatio,
                             double height_ratio = LsfModel::kHeightRatio);

} // namespace latticeloc
