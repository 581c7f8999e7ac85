#pragma once

// Instrument and trap parameters shared by every stage of the pipeline.
//
// Units: lengths are micrometres in the object plane, times are seconds,
// intensities are camera counts. Names carry a unit suffix wherever a value
// is not in those base units.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace latticeloc {

/// Domain error with a short machine-readable code (e.g. "no-peak").
class Error : public std::runtime_error
{
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code))
    {
    }

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

struct LatticeConfig
{
    double wavelength_um = 1.064;
    double period_um = 0.532;  // must equal wavelength_um / 2
    double phase_origin_um = 0.0;

    static LatticeConfig from_wavelength(double wavelength_um, double phase_origin_um = 0.0)
    {
        return {wavelength_um, wavelength_um / 2.0, phase_origin_um};
    }

    double site(long n) const { return phase_origin_um + static_cast<double>(n) * period_um; }
    long nearest_site_index(double x_um) const;
    double snap(double x_um) const { return site(nearest_site_index(x_um)); }
};

struct CameraModel
{
    double pixel_um = 0.933;
    double gain_counts_per_photon = 350.0;
    int frame_width_px = 100;
    int frame_height_px = 16;
    double exposure_s = 1.0;
    double readout_s = 0.5;

    double frame_width_um() const { return frame_width_px * pixel_um; }
    double frame_height_um() const { return frame_height_px * pixel_um; }
};

enum class DriftModel
{
    paper_additive,  // fluctuations enter the budget as independent Gaussian terms
    trace_based,     // photons sample a simulated lattice-offset trace
};

std::string to_string(DriftModel m);
DriftModel drift_model_from_string(const std::string& s);

inline constexpr double kSingleAtomPhotonsPerS = 200.0;
inline constexpr double kPairPhotonsPerS = 270.0;

struct NoiseModel
{
    double photons_per_s_per_atom = kSingleAtomPhotonsPerS;
    double background_offset_counts_per_bin = 2300.0;  // per 1 s of exposure
    double background_noise_counts_per_bin = 300.0;    // rms, per 1 s of exposure
    double fluct_1s_um = 0.042;
    DriftModel drift_model = DriftModel::paper_additive;
    bool shot_noise = true;  // false: deposit the expected signal deterministically

    // Offset grows linearly with exposure; the noise variance does too.
    double bin_offset(double exposure_s) const { return background_offset_counts_per_bin * exposure_s; }
    double bin_noise(double exposure_s) const;
    /// sigma_fluct(tau) for a Wiener lattice offset.
    double fluct(double tau_s) const;
};

struct AtomEnsemble
{
    std::vector<double> positions_um;
    double radial_sigma_um = 1.0;
};

// Deterministic random streams. stream(i) depends only on (master_seed, i), so
// trials can run in any order or in parallel and reproduce bit-identically.
using Engine = std::mt19937_64;

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t stream);
Engine make_stream(std::uint64_t master_seed, std::uint64_t stream);
Engine make_stream(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t substream);

} // namespace latticeloc
