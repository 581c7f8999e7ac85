#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latticeloc/core.hpp"
#include "latticeloc/lsf.hpp"

namespace latticeloc {

/// Everything a run needs, as read from a `key = value` config file.
struct Config
{
    LatticeConfig lattice;
    CameraModel camera;
    NoiseModel noise;
    double w_ax_um = 1.3;
    double gauss_bias_um = 0.042;
    std::uint64_t seed = 0;
    /// Set when the file pins photons_per_s; otherwise single-atom runs use
    /// 200 /s and pair runs 270 /s.
    bool photons_overridden = false;

    static Config parse(std::string_view text);
    static Config load(const std::filesystem::path& path);

    /// Stable text form used for hashing into run provenance.
    std::string canonical() const;

    NoiseModel single_atom_noise() const;
    NoiseModel pair_noise() const;
};

/// Lists every violated invariant; an empty result means the models are valid.
std::vector<std::string> validate_config(const Config& cfg);
std::vector<std::string> validate_config(const Config& cfg, const LsfModel& lsf);

std::uint64_t fnv1a64(std::string_view text);

} // namespace latticeloc
