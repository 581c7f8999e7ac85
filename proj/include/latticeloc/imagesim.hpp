#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "latticeloc/core.hpp"
#include "latticeloc/lsf.hpp"

namespace latticeloc {

using CountImage = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One ICCD exposure. Row index is the vertical pixel, column the axial one.
struct Frame
{
    CountImage counts;
    double pixel_um = 0.933;
    double exposure_s = 1.0;
    std::uint64_t seed = 0;

    int width() const { return static_cast<int>(counts.cols()); }
    int height() const { return static_cast<int>(counts.rows()); }
};

/// Column sums of a frame, with bin-centre coordinates in the object plane.
struct BinnedProfile
{
    Eigen::VectorXd counts;
    Eigen::VectorXd x_um;
    double bin_um = 0.933;

    Eigen::Index size() const { return counts.size(); }
};

/// Lattice displacement sampled on a uniform time grid; offset_um(0) == 0.
struct DriftTrace
{
    Eigen::VectorXd times_s;
    Eigen::VectorXd offset_um;

    double duration() const { return times_s.size() ? times_s(times_s.size() - 1) : 0.0; }
    /// Linear interpolation, clamped to the trace ends.
    double at(double t_s) const;
    /// Time average over [t0, t1] of the interpolated trace.
    double mean_over(double t0_s, double t1_s) const;
};

struct PhaseTrace
{
    Eigen::VectorXd times_s;
    Eigen::VectorXd phi_rad;
};

/// Wiener lattice offset with std fluct_1s * sqrt(tau / 1 s) over any window tau.
DriftTrace gen_drift_trace(const NoiseModel& noise, double duration_s, double dt_s, Engine& rng);

/// phi = 2 pi offset / period.
PhaseTrace drift_to_phase(const DriftTrace& trace, const LatticeConfig& lattice);
DriftTrace phase_to_drift(const PhaseTrace& trace, const LatticeConfig& lattice);

/// Simulates one exposure. Atom positions are frame coordinates (0 at the left
/// frame edge); atoms are centred vertically. When `drift` is given, every
/// photon is displaced by the trace value at its emission time.
///
/// Throws Error("placement") when an atom lies outside the frame.
Frame render_frame(const AtomEnsemble& atoms, const LsfModel& lsf, const CameraModel& cam, const NoiseModel& noise,
                   const DriftTrace* drift, Engine& rng, std::uint64_t seed_tag = 0);

BinnedProfile bin_columns(const Frame& frame);

/// Noise-free expected column sums (real-valued, no rounding).
BinnedProfile expected_profile(const AtomEnsemble& atoms, const LsfModel& lsf, const CameraModel& cam,
                               const NoiseModel& noise, bool include_background);

/// Frame file: {"width_px":W,"height_px":H,"pixel_um":p,"exposure_s":t,"seed":s,"counts":[[...],...]}
std::string frame_to_json(const Frame& frame);
Frame frame_from_json(std::string_view text);

} // namespace latticeloc
