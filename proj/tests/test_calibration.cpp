#include <doctest.h>

#include "latticeloc/calibration.hpp"
#include "latticeloc/core.hpp"
#include "support.hpp"

using namespace latticeloc;

TEST_CASE("default calibration hits both targets")
{
    const auto c = calibrate_lsf();
    CHECK(c.model.half_width() == doctest::Approx(1.3).epsilon(1e-9));
    CHECK(gaussian_fit_bias(c.model, 1.3) == doctest::Approx(0.042).epsilon(1e-6));
    CHECK(c.model.width_ratio() == 3.2);
    CHECK(c.model.height_ratio() == 4.4);
    CHECK(c.model.sigma1() == doctest::Approx(1.15777).epsilon(1e-5));
    CHECK(c.model.offset_delta() == doctest::Approx(1.12478).epsilon(1e-5));
}

TEST_CASE("calibration is scale covariant")
{
    const auto a = calibrate_lsf(1.3, 0.042);
    const auto b = calibrate_lsf(2.6, 0.084);
    CHECK(b.model.sigma1() == doctest::Approx(2.0 * a.model.sigma1()).epsilon(1e-9));
    CHECK(b.model.offset_delta() == doctest::Approx(2.0 * a.model.offset_delta()).epsilon(1e-9));
}

TEST_CASE("zero bias gives a symmetric model")
{
    const auto c = calibrate_lsf(1.3, 0.0);
    CHECK(c.model.offset_delta() == 0.0);
    CHECK(std::abs(gaussian_fit_bias(c.model, 1.3)) < 1e-9);
}

TEST_CASE("bias grows with the broad-component offset")
{
    double prev = -1.0;
    for (double d : {0.2, 0.6, 1.0, 1.4}) {
        const double b = gaussian_fit_bias(LsfModel(1.0, d), 1.2);
        CHECK(b > prev);
        prev = b;
    }
}

TEST_CASE("unreachable bias fails loudly")
{
    CHECK_THROWS_AS(calibrate_lsf(1.3, 2.0), Error);
    CHECK_THROWS_AS(calibrate_lsf(-1.0, 0.042), Error);
}
