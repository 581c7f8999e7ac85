#include "latticeloc/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace latticeloc {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(std::string_view key, std::string_view v)
{
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out))
        throw Error("config", "invalid number for '" + std::string(key) + "': '" + std::string(v) + "'");
    return out;
}

long long parse_int(std::string_view key, std::string_view v)
{
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw Error("config", "invalid integer for '" + std::string(key) + "': '" + std::string(v) + "'");
    return out;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

Config Config::parse(std::string_view text)
{
    Config cfg;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;

        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error("config", "line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        if (value.empty())
            throw Error("config", "line " + std::to_string(line_no) + ": empty value for '" + std::string(key) + "'");

        if (key == "wavelength_um") {
            cfg.lattice = LatticeConfig::from_wavelength(parse_double(key, value), cfg.lattice.phase_origin_um);
        } else if (key == "pixel_um") {
            cfg.camera.pixel_um = parse_double(key, value);
        } else if (key == "gain") {
            cfg.camera.gain_counts_per_photon = parse_double(key, value);
        } else if (key == "frame_w") {
            cfg.camera.frame_width_px = static_cast<int>(parse_int(key, value));
        } else if (key == "frame_h") {
            cfg.camera.frame_height_px = static_cast<int>(parse_int(key, value));
        } else if (key == "exposure_s") {
            cfg.camera.exposure_s = parse_double(key, value);
        } else if (key == "readout_s") {
            cfg.camera.readout_s = parse_double(key, value);
        } else if (key == "photons_per_s") {
            cfg.noise.photons_per_s_per_atom = parse_double(key, value);
            cfg.photons_overridden = true;
        } else if (key == "bg_offset") {
            cfg.noise.background_offset_counts_per_bin = parse_double(key, value);
        } else if (key == "bg_noise") {
            cfg.noise.background_noise_counts_per_bin = parse_double(key, value);
        } else if (key == "fluct_1s_nm") {
            cfg.noise.fluct_1s_um = parse_double(key, value) * 1e-3;
        } else if (key == "drift_model") {
            cfg.noise.drift_model = drift_model_from_string(std::string(value));
        } else if (key == "w_ax_um") {
            cfg.w_ax_um = parse_double(key, value);
        } else if (key == "gauss_bias_nm") {
            cfg.gauss_bias_um = parse_double(key, value) * 1e-3;
        } else if (key == "seed") {
            const long long s = parse_int(key, value);
            if (s < 0)
                throw Error("config", "seed must be non-negative");
            cfg.seed = static_cast<std::uint64_t>(s);
        } else {
            throw Error("config", "line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        }
    }
    return cfg;
}

Config Config::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("io", "cannot open config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string Config::canonical() const
{
    std::string out;
    auto put = [&](const char* k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
    put("wavelength_um", fmt(lattice.wavelength_um));
    put("pixel_um", fmt(camera.pixel_um));
    put("gain", fmt(camera.gain_counts_per_photon));
    put("frame_w", std::to_string(camera.frame_width_px));
    put("frame_h", std::to_string(camera.frame_height_px));
    put("exposure_s", fmt(camera.exposure_s));
    put("readout_s", fmt(camera.readout_s));
    put("photons_per_s", photons_overridden ? fmt(noise.photons_per_s_per_atom) : std::string("default"));
    put("bg_offset", fmt(noise.background_offset_counts_per_bin));
    put("bg_noise", fmt(noise.background_noise_counts_per_bin));
    put("fluct_1s_nm", fmt(noise.fluct_1s_um * 1e3));
    put("drift_model", to_string(noise.drift_model));
    put("w_ax_um", fmt(w_ax_um));
    put("gauss_bias_nm", fmt(gauss_bias_um * 1e3));
    put("seed", std::to_string(seed));
    return out;
}

NoiseModel Config::single_atom_noise() const
{
    NoiseModel n = noise;
    if (!photons_overridden)
        n.photons_per_s_per_atom = kSingleAtomPhotonsPerS;
    return n;
}

NoiseModel Config::pair_noise() const
{
    NoiseModel n = noise;
    if (!photons_overridden)
        n.photons_per_s_per_atom = kPairPhotonsPerS;
    return n;
}

std::vector<std::string> validate_config(const Config& cfg)
{
    std::vector<std::string> v;
    const auto& lat = cfg.lattice;
    const auto& cam = cfg.camera;
    const auto& noise = cfg.noise;

    if (!(lat.wavelength_um > 0.0))
        v.emplace_back("LatticeConfig: wavelength_um > 0");
    if (lat.period_um != lat.wavelength_um / 2.0)
        v.emplace_back("LatticeConfig: period_um == wavelength_um / 2");

    if (!(cam.pixel_um > 0.0))
        v.emplace_back("CameraModel: pixel_um > 0");
    if (!(cam.gain_counts_per_photon >= 1.0))
        v.emplace_back("CameraModel: gain >= 1");
    if (!(cam.exposure_s > 0.0))
        v.emplace_back("CameraModel: exposure_s > 0");
    if (!(cam.readout_s >= 0.0))
        v.emplace_back("CameraModel: readout_s >= 0");
    if (cam.frame_width_px < 1)
        v.emplace_back("CameraModel: frame_w >= 1");
    if (cam.frame_height_px < 1)
        v.emplace_back("CameraModel: frame_h >= 1");

    if (!(noise.photons_per_s_per_atom >= 0.0))
        v.emplace_back("NoiseModel: photons_per_s >= 0");
    if (!(noise.background_offset_counts_per_bin >= 0.0))
        v.emplace_back("NoiseModel: bg_offset >= 0");
    if (!(noise.background_noise_counts_per_bin >= 0.0))
        v.emplace_back("NoiseModel: bg_noise >= 0");
    if (!(noise.fluct_1s_um >= 0.0))
        v.emplace_back("NoiseModel: fluct_1s_nm >= 0");

    if (!(cfg.w_ax_um > 0.0))
        v.emplace_back("LsfModel: w_ax_um > 0");
    if (!(cfg.gauss_bias_um >= 0.0))
        v.emplace_back("LsfModel: gauss_bias_nm >= 0");
    else if (cfg.w_ax_um > 0.0 && !(cfg.gauss_bias_um < 0.25 * cfg.w_ax_um))
        v.emplace_back("LsfModel: gauss_bias_nm << w_ax_um");
    return v;
}

std::vector<std::string> validate_config(const Config& cfg, const LsfModel& lsf)
{
    auto v = validate_config(cfg);
    if (!lsf.unimodal())
        v.emplace_back("LsfModel: composite profile is unimodal");
    return v;
}

std::uint64_t fnv1a64(std::string_view text)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace latticeloc
