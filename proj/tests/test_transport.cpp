#include <doctest.h>

#include <cmath>
#include <numeric>

#include "latticeloc/transport.hpp"
#include "support.hpp"

using namespace latticeloc;

TEST_CASE("triangular motion profile")
{
    const auto p = motion_profile(30.0);
    CHECK(p.t_total_s * 1e6 == doctest::Approx(346.41).epsilon(1e-4));
    CHECK(p.v_peak_m_s == doctest::Approx(0.17321).epsilon(1e-4));
    CHECK(p.peak_detuning_hz() * 1e-3 == doctest::Approx(325.6).epsilon(1e-3));
    CHECK(p.position(p.t_total_s) == 30.0);
    CHECK(p.position(p.t_half_s) == doctest::Approx(15.0));
    // Integral of the velocity reproduces the displacement.
    const double integral = testsupport::simpson([&](double t) { return p.velocity(t); }, 0.0, p.t_half_s) +
                            testsupport::simpson([&](double t) { return p.velocity(t); }, p.t_half_s, p.t_total_s);
    CHECK(integral * 1e6 == doctest::Approx(30.0).epsilon(1e-9));

    const auto back = motion_profile(-30.0);
    CHECK(back.velocity(1e-4) == -p.velocity(1e-4));
    CHECK(back.position(2e-4) == -p.position(2e-4));
    CHECK_THROWS_AS(motion_profile(30.0, 0.0), Error);
}

TEST_CASE("quantized levels and displacement bookkeeping")
{
    const auto p = motion_profile(12.3);
    const SynthesizerModel s{};
    const auto q = quantize_profile(p, s);
    REQUIRE(q.detuning_hz.size() == q.duration_s.size());
    const double T = std::accumulate(q.duration_s.begin(), q.duration_s.end(), 0.0);
    CHECK(T == doctest::Approx(p.t_total_s).epsilon(1e-12));
    double moved = 0.0;
    for (std::size_t k = 0; k < q.duration_s.size(); ++k) {
        moved += q.detuning_hz[k] * 0.532 * q.duration_s[k];
        CHECK(std::fmod(std::abs(q.detuning_hz[k]), s.freq_step_hz) ==
              doctest::Approx(0.0).epsilon(1e-9).scale(s.freq_step_hz));
    }
    CHECK(q.displacement_error_um == doctest::Approx(moved - 12.3).epsilon(1e-9).scale(1.0));

    // First interval lies in the acceleration phase: mean detuning 2 a (dt/2) / lambda.
    const double mean0 = 2.0 * 1000.0 * 0.5 * s.update_interval_s / 1.064e-6;
    CHECK(q.detuning_hz[0] == std::round(mean0 / s.freq_step_hz) * s.freq_step_hz);

    const auto neg = quantize_profile(motion_profile(-12.3), s, 0.37);
    CHECK(neg.displacement_error_um == doctest::Approx(-quantize_profile(p, s, 0.37).displacement_error_um));
}

TEST_CASE("fine synthesizer reaches the continuum limit")
{
    const auto p = motion_profile(9.5);
    const auto q = quantize_profile(p, SynthesizerModel{1.0, 1e-6}, 0.5);
    CHECK(std::abs(q.displacement_error_um) < 1e-5);
}

TEST_CASE("quantizer domain checks")
{
    const auto p = motion_profile(9.5);
    CHECK_THROWS_AS(quantize_profile(p, SynthesizerModel{0.0, 1e-6}), Error);
    CHECK_THROWS_AS(quantize_profile(p, SynthesizerModel{}, 1.0), Error);
    CHECK(quantize_profile(motion_profile(0.0), SynthesizerModel{}).detuning_hz.empty());
}

TEST_CASE("default step reproduces the calibrated rms")
{
    const SynthesizerModel s{};
    CHECK(transport_rms_error(s, 9.5, 5.0, 1000.0, 1.064) * 1e3 == doctest::Approx(190.0).epsilon(1e-4));
    CHECK(calibrate_freq_step(0.190, s.update_interval_s) == doctest::Approx(s.freq_step_hz).epsilon(1e-5));
}

TEST_CASE("transport without quantization is exact")
{
    const LatticeConfig lat;
    Engine rng = make_stream(0, 0);
    TransportArgs args;
    args.synth.reset();
    auto o = execute_transport(1.064, 1.064, 9.5, args, 0.0, lat, rng);
    CHECK(o.final_um == doctest::Approx(9.5));
    CHECK(o.quantization_error_um == 0.0);

    o = execute_transport(1.064, 1.1, 9.5, args, 0.02, lat, rng);
    CHECK(o.final_um == doctest::Approx(1.064 + (9.5 - 1.1) + 0.02));

    args.scale_error = 0.004;
    o = execute_transport(0.0, 0.0, 30.0, args, 0.0, lat, rng);
    CHECK(o.final_um == doctest::Approx(30.12));
}

TEST_CASE("control budget")
{
    CHECK(control_budget(0.130, 0.140, 0.190) * 1e3 == doctest::Approx(std::sqrt(89500.0)));
    CHECK(solve_transport_error(0.300, 0.130, 0.140) * 1e3 == doctest::Approx(std::sqrt(36600.0)));
    CHECK(solve_transport_error(0.300, 0.130, 0.140) * 1e3 == doctest::Approx(191.3).epsilon(1e-3));
    try {
        solve_transport_error(0.1, 0.130, 0.140);
        FAIL("expected negative-discriminant");
    } catch (const Error& e) {
        CHECK(e.code() == "negative-discriminant");
    }
    CHECK_THROWS_AS(control_budget(-0.1, 0.0, 0.0), Error);
}

TEST_CASE("closed loop with noise switched off")
{
    Instrument inst{LatticeConfig{}, CameraModel{}, NoiseModel{}, testsupport::default_lsf()};
    inst.noise.shot_noise = false;
    inst.noise.background_noise_counts_per_bin = 0.0;
    inst.noise.fluct_1s_um = 0.0;
    ClosedLoopOptions opt;
    opt.sigma_drift_um = 0.0;
    opt.transport.synth.reset();
    for (std::uint64_t i = 0; i < 10; ++i) {
        Engine rng = make_stream(5, i);
        const auto r = closed_loop_place(9.5, inst, opt, rng);
        REQUIRE(r.ok);
        CHECK(r.initial_um == inst.lattice.snap(r.initial_um));
        // Only the measurement bias moves the atom off target.
        CHECK(r.error_um() == doctest::Approx(r.initial_um - r.measured_initial_um).epsilon(1e-9).scale(1.0));
        CHECK(std::abs(r.measured_error_um()) < 0.03);
    }
}
