#pragma once

#include <cmath>

namespace latticeloc {

/// Double-Gaussian line spread function of the imaging optics.
///
/// The raw profile is a narrow Gaussian of width sigma1 plus a broad Gaussian
/// of width width_ratio * sigma1 and relative height 1 / height_ratio whose
/// centre is shifted by offset_delta. All public evaluators take x as the
/// offset from the composite maximum and are normalised so that the maximum
/// is exactly 1.
class LsfModel
{
public:
    static constexpr double kWidthRatio = 3.2;
    static constexpr double kHeightRatio = 4.4;

    /// Throws Error("parameter-domain") for non-positive widths or ratios.
    LsfModel(double sigma1_um, double offset_delta_um, double width_ratio = kWidthRatio,
             double height_ratio = kHeightRatio);

    double sigma1() const { return sigma1_; }
    double sigma2() const { return sigma1_ * width_ratio_; }
    double width_ratio() const { return width_ratio_; }
    double height_ratio() const { return height_ratio_; }
    double offset_delta() const { return offset_delta_; }

    /// Position of the composite maximum in the raw (narrow-centred) frame.
    double peak_shift() const { return peak_shift_; }
    double peak_value() const { return peak_value_; }
    /// Fraction of the total area carried by the narrow component.
    double narrow_weight() const { return narrow_weight_; }

    /// Un-normalised profile in the narrow-centred frame.
    template <typename Scalar>
    Scalar raw(const Scalar& u) const
    {
        using std::exp;
        const double s2 = sigma2();
        const Scalar a = u / sigma1_;
        const Scalar b = (u - offset_delta_) / s2;
        return exp(-0.5 * a * a) + exp(-0.5 * b * b) / height_ratio_;
    }

    /// Peak-normalised intensity at offset x from the maximum.
    template <typename Scalar>
    Scalar operator()(const Scalar& x) const
    {
        return raw(x + peak_shift_) / peak_value_;
    }

    double derivative(double x) const;
    /// Integral of operator() over the real line.
    double area() const;
    /// Area-normalised density and its cumulative distribution, x from the maximum.
    double density(double x) const;
    double cdf(double x) const;

    /// Half-width at which the profile falls to 1/sqrt(e) of its maximum,
    /// averaged over the two flanks.
    double half_width() const;
    double left_half_width() const;
    double right_half_width() const;

    /// True when the profile has a single local maximum.
    bool unimodal() const;

private:
    double raw_derivative(double u) const;

    double sigma1_;
    double width_ratio_;
    double height_ratio_;
    double offset_delta_;
    double peak_shift_ = 0.0;
    double peak_value_ = 1.0;
    double narrow_weight_ = 1.0;
};

template <typename Scalar>
Scalar lsf_eval(const LsfModel& model, const Scalar& x)
{
    return model(x);
}

} // namespace latticeloc
