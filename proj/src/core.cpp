#include "latticeloc/core.hpp"

#include <cmath>

namespace latticeloc {

long LatticeConfig::nearest_site_index(double x_um) const
{
    return std::lround((x_um - phase_origin_um) / period_um);
}

std::string to_string(DriftModel m)
{
    return m == DriftModel::trace_based ? "trace-based" : "paper-additive";
}

DriftModel drift_model_from_string(const std::string& s)
{
    if (s == "paper-additive")
        return DriftModel::paper_additive;
    if (s == "trace-based")
        return DriftModel::trace_based;
    throw Error("config", "drift_model must be 'paper-additive' or 'trace-based', got '" + s + "'");
}

double NoiseModel::bin_noise(double exposure_s) const
{
    return background_noise_counts_per_bin * std::sqrt(exposure_s);
}

double NoiseModel::fluct(double tau_s) const
{
    return fluct_1s_um * std::sqrt(tau_s);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::uint64_t stream)
{
    return splitmix64(splitmix64(master_seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

Engine make_stream(std::uint64_t master_seed, std::uint64_t stream)
{
    const std::uint64_t s = derive_stream_seed(master_seed, stream);
    std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32)};
    return Engine(seq);
}

Engine make_stream(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t substream)
{
    return make_stream(derive_stream_seed(master_seed, stream), substream);
}

} // namespace latticeloc
