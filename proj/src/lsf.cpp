#include "latticeloc/lsf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "latticeloc/core.hpp"

namespace latticeloc {

namespace {

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// Bisection on a bracketed sign change; f(lo) and f(hi) must differ in sign.
template <typename F>
double bisect(F&& f, double lo, double hi)
{
    double flo = f(lo);
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi)
            break;
        const double fm = f(mid);
        if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

LsfModel::LsfModel(double sigma1_um, double offset_delta_um, double width_ratio, double height_ratio)
    : sigma1_(sigma1_um), width_ratio_(width_ratio), height_ratio_(height_ratio), offset_delta_(offset_delta_um)
{
    if (!(sigma1_um > 0.0) || !std::isfinite(sigma1_um))
        throw Error("parameter-domain", "LsfModel: sigma1 must be > 0, got " + std::to_string(sigma1_um));
    if (!(width_ratio > 0.0) || !(height_ratio > 0.0))
        throw Error("parameter-domain", "LsfModel: width_ratio and height_ratio must be > 0");
    if (!std::isfinite(offset_delta_um))
        throw Error("parameter-domain", "LsfModel: offset_delta must be finite");

    const double broad_area = sigma2() / height_ratio_;
    narrow_weight_ = sigma1_ / (sigma1_ + broad_area);

    if (offset_delta_ != 0.0) {
        // The maximum lies between the two component centres.
        const double lo = std::min(0.0, offset_delta_);
        const double hi = std::max(0.0, offset_delta_);
        peak_shift_ = bisect([this](double u) { return raw_derivative(u); }, lo, hi);
    }
    peak_value_ = raw(peak_shift_);
}

double LsfModel::raw_derivative(double u) const
{
    const double s2 = sigma2();
    const double a = u / sigma1_;
    const double b = (u - offset_delta_) / s2;
    return -a / sigma1_ * std::exp(-0.5 * a * a) - b / s2 * std::exp(-0.5 * b * b) / height_ratio_;
}

double LsfModel::derivative(double x) const
{
    return raw_derivative(x + peak_shift_) / peak_value_;
}

double LsfModel::area() const
{
    const double sqrt2pi = std::sqrt(2.0 * std::numbers::pi);
    return sqrt2pi * (sigma1_ + sigma2() / height_ratio_) / peak_value_;
}

double LsfModel::density(double x) const
{
    return (*this)(x) / area();
}

double LsfModel::cdf(double x) const
{
    const double u = x + peak_shift_;
    return narrow_weight_ * normal_cdf(u / sigma1_) +
           (1.0 - narrow_weight_) * normal_cdf((u - offset_delta_) / sigma2());
}

double LsfModel::right_half_width() const
{
    const double level = std::exp(-0.5);
    auto f = [&](double x) { return (*this)(x) - level; };
    return bisect(f, 0.0, 20.0 * sigma2() + std::abs(offset_delta_));
}

double LsfModel::left_half_width() const
{
    const double level = std::exp(-0.5);
    auto f = [&](double x) { return (*this)(-x) - level; };
    return bisect(f, 0.0, 20.0 * sigma2() + std::abs(offset_delta_));
}

double LsfModel::half_width() const
{
    return 0.5 * (left_half_width() + right_half_width());
}

bool LsfModel::unimodal() const
{
    const int n = 8001;
    const double lo = std::min(0.0, offset_delta_) - 8.0 * sigma2();
    const double hi = std::max(0.0, offset_delta_) + 8.0 * sigma2();
    const double step = (hi - lo) / (n - 1);
    int maxima = 0;
    double prev_slope = raw_derivative(lo);
    for (int i = 1; i < n; ++i) {
        const double slope = raw_derivative(lo + i * step);
        if (prev_slope > 0.0 && slope <= 0.0)
            ++maxima;
        prev_slope = slope;
    }
    return maxima == 1;
}

} // namespace latticeloc
