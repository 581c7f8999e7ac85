#include "latticeloc/imagesim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace latticeloc {

namespace {

double normal_cdf(double z)
{
    return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

// Integral of the piecewise-linear trace from 0 to t.
double integral_to(const DriftTrace& tr, double t)
{
    const Eigen::Index n = tr.times_s.size();
    if (n < 2 || t <= 0.0)
        return 0.0;
    double acc = 0.0;
    for (Eigen::Index k = 0; k + 1 < n; ++k) {
        const double t0 = tr.times_s(k);
        const double t1 = tr.times_s(k + 1);
        if (t <= t0)
            break;
        if (t >= t1) {
            acc += 0.5 * (tr.offset_um(k) + tr.offset_um(k + 1)) * (t1 - t0);
        } else {
            const double end = tr.at(t);
            acc += 0.5 * (tr.offset_um(k) + end) * (t - t0);
            return acc;
        }
    }
    if (t > tr.duration())
        acc += tr.offset_um(n - 1) * (t - tr.duration());
    return acc;
}

double column_mass(const LsfModel& lsf, double left_um, double right_um, double centre_um)
{
    return lsf.cdf(right_um - centre_um) - lsf.cdf(left_um - centre_um);
}

void check_placement(const AtomEnsemble& atoms, const CameraModel& cam)
{
    for (double x : atoms.positions_um) {
        if (!(x >= 0.0 && x < cam.frame_width_um()))
            throw Error("placement", "atom at " + std::to_string(x) + " um lies outside the frame [0, " +
                                         std::to_string(cam.frame_width_um()) + ") um");
    }
}

} // namespace

double DriftTrace::at(double t_s) const
{
    const Eigen::Index n = times_s.size();
    if (n == 0)
        return 0.0;
    if (t_s <= times_s(0))
        return offset_um(0);
    if (t_s >= times_s(n - 1))
        return offset_um(n - 1);
    const double dt = times_s(1) - times_s(0);
    auto k = static_cast<Eigen::Index>((t_s - times_s(0)) / dt);
    k = std::clamp<Eigen::Index>(k, 0, n - 2);
    const double f = (t_s - times_s(k)) / dt;
    return offset_um(k) + f * (offset_um(k + 1) - offset_um(k));
}

double DriftTrace::mean_over(double t0_s, double t1_s) const
{
    if (t1_s <= t0_s)
        return at(t0_s);
    return (integral_to(*this, t1_s) - integral_to(*this, t0_s)) / (t1_s - t0_s);
}

DriftTrace gen_drift_trace(const NoiseModel& noise, double duration_s, double dt_s, Engine& rng)
{
    if (!(dt_s > 0.0))
        throw Error("parameter-domain", "drift trace: dt must be > 0");
    if (!(duration_s >= dt_s))
        throw Error("parameter-domain", "drift trace: duration must be >= dt");

    const auto steps = static_cast<Eigen::Index>(std::llround(duration_s / dt_s));
    DriftTrace tr;
    tr.times_s = Eigen::VectorXd::LinSpaced(steps + 1, 0.0, static_cast<double>(steps) * dt_s);
    tr.offset_um = Eigen::VectorXd::Zero(steps + 1);
    if (noise.fluct_1s_um == 0.0)
        return tr;

    std::normal_distribution<double> step(0.0, noise.fluct_1s_um * std::sqrt(dt_s));
    for (Eigen::Index k = 1; k <= steps; ++k)
        tr.offset_um(k) = tr.offset_um(k - 1) + step(rng);
    return tr;
}

PhaseTrace drift_to_phase(const DriftTrace& trace, const LatticeConfig& lattice)
{
    return {trace.times_s, trace.offset_um * (2.0 * std::numbers::pi / lattice.period_um)};
}

DriftTrace phase_to_drift(const PhaseTrace& trace, const LatticeConfig& lattice)
{
    return {trace.times_s, trace.phi_rad * (lattice.period_um / (2.0 * std::numbers::pi))};
}

Frame render_frame(const AtomEnsemble& atoms, const LsfModel& lsf, const CameraModel& cam, const NoiseModel& noise,
                   const DriftTrace* drift, Engine& rng, std::uint64_t seed_tag)
{
    check_placement(atoms, cam);

    const int W = cam.frame_width_px;
    const int H = cam.frame_height_px;
    const double p = cam.pixel_um;
    const double y_centre = 0.5 * cam.frame_height_um();
    const double mean_photons = noise.photons_per_s_per_atom * cam.exposure_s;

    Eigen::MatrixXd signal = Eigen::MatrixXd::Zero(H, W);

    if (noise.shot_noise) {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (double x_atom : atoms.positions_um) {
            std::poisson_distribution<long> poisson(mean_photons);
            const long n = mean_photons > 0.0 ? poisson(rng) : 0;
            for (long k = 0; k < n; ++k) {
                const bool narrow = unit(rng) < lsf.narrow_weight();
                double x = x_atom - lsf.peak_shift() +
                           (narrow ? lsf.sigma1() * gauss(rng) : lsf.offset_delta() + lsf.sigma2() * gauss(rng));
                if (drift)
                    x += drift->at(cam.exposure_s * unit(rng));
                const double y = y_centre + atoms.radial_sigma_um * gauss(rng);
                const auto ix = static_cast<long>(std::floor(x / p));
                const auto iy = static_cast<long>(std::floor(y / p));
                if (ix >= 0 && ix < W && iy >= 0 && iy < H)
                    signal(iy, ix) += cam.gain_counts_per_photon;
            }
        }
    } else {
        const double shift = drift ? drift->mean_over(0.0, cam.exposure_s) : 0.0;
        Eigen::VectorXd rows(H);
        for (int j = 0; j < H; ++j) {
            rows(j) = normal_cdf(((j + 1) * p - y_centre) / atoms.radial_sigma_um) -
                      normal_cdf((j * p - y_centre) / atoms.radial_sigma_um);
        }
        for (double x_atom : atoms.positions_um) {
            Eigen::RowVectorXd cols(W);
            for (int i = 0; i < W; ++i)
                cols(i) = column_mass(lsf, i * p, (i + 1) * p, x_atom + shift);
            signal.noalias() += (mean_photons * cam.gain_counts_per_photon) * rows * cols;
        }
    }

    const double offset_px = noise.bin_offset(cam.exposure_s) / H;
    const double noise_px = noise.bin_noise(cam.exposure_s) / std::sqrt(static_cast<double>(H));
    std::normal_distribution<double> bg(0.0, noise_px > 0.0 ? noise_px : 1.0);

    Frame frame;
    frame.pixel_um = p;
    frame.exposure_s = cam.exposure_s;
    frame.seed = seed_tag;
    frame.counts.resize(H, W);
    for (int j = 0; j < H; ++j) {
        for (int i = 0; i < W; ++i) {
            double v = signal(j, i) + offset_px;
            if (noise_px > 0.0)
                v += bg(rng);
            frame.counts(j, i) = std::max<std::int64_t>(0, std::llround(v));
        }
    }
    return frame;
}

BinnedProfile bin_columns(const Frame& frame)
{
    BinnedProfile prof;
    prof.bin_um = frame.pixel_um;
    prof.counts = frame.counts.colwise().sum().cast<double>().transpose();
    prof.x_um = (Eigen::VectorXd::LinSpaced(frame.width(), 0.0, frame.width() - 1.0).array() + 0.5) * frame.pixel_um;
    return prof;
}

BinnedProfile expected_profile(const AtomEnsemble& atoms, const LsfModel& lsf, const CameraModel& cam,
                               const NoiseModel& noise, bool include_background)
{
    check_placement(atoms, cam);
    const int W = cam.frame_width_px;
    const double p = cam.pixel_um;
    const double y_centre = 0.5 * cam.frame_height_um();
    const double row_mass = normal_cdf((cam.frame_height_um() - y_centre) / atoms.radial_sigma_um) -
                            normal_cdf(-y_centre / atoms.radial_sigma_um);
    const double scale = noise.photons_per_s_per_atom * cam.exposure_s * cam.gain_counts_per_photon * row_mass;

    BinnedProfile prof;
    prof.bin_um = p;
    prof.x_um = (Eigen::VectorXd::LinSpaced(W, 0.0, W - 1.0).array() + 0.5) * p;
    prof.counts = Eigen::VectorXd::Constant(W, include_background ? noise.bin_offset(cam.exposure_s) : 0.0);
    for (double x_atom : atoms.positions_um) {
        for (int i = 0; i < W; ++i)
            prof.counts(i) += scale * column_mass(lsf, i * p, (i + 1) * p, x_atom);
    }
    return prof;
}

std::string frame_to_json(const Frame& frame)
{
    nlohmann::ordered_json j;
    j["width_px"] = frame.width();
    j["height_px"] = frame.height();
    j["pixel_um"] = frame.pixel_um;
    j["exposure_s"] = frame.exposure_s;
    j["seed"] = frame.seed;
    auto rows = nlohmann::ordered_json::array();
    for (int r = 0; r < frame.height(); ++r) {
        auto row = nlohmann::ordered_json::array();
        for (int c = 0; c < frame.width(); ++c)
            row.push_back(frame.counts(r, c));
        rows.push_back(std::move(row));
    }
    j["counts"] = std::move(rows);
    return j.dump();
}

Frame frame_from_json(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error("frame-format", std::string("frame JSON does not parse: ") + e.what());
    }
    try {
        Frame f;
        const int W = j.at("width_px").get<int>();
        const int H = j.at("height_px").get<int>();
        f.pixel_um = j.at("pixel_um").get<double>();
        f.exposure_s = j.at("exposure_s").get<double>();
        f.seed = j.at("seed").get<std::uint64_t>();
        const auto& rows = j.at("counts");
        if (W < 1 || H < 1 || !rows.is_array() || rows.size() != static_cast<std::size_t>(H))
            throw Error("frame-format", "frame counts do not match height_px");
        if (!(f.pixel_um > 0.0))
            throw Error("frame-format", "pixel_um must be > 0");
        f.counts.resize(H, W);
        for (int r = 0; r < H; ++r) {
            const auto& row = rows[static_cast<std::size_t>(r)];
            if (!row.is_array() || row.size() != static_cast<std::size_t>(W))
                throw Error("frame-format", "frame row " + std::to_string(r) + " does not match width_px");
            for (int c = 0; c < W; ++c) {
                const auto& v = row[static_cast<std::size_t>(c)];
                if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
                    throw Error("frame-format", "frame counts must be non-negative integers");
                f.counts(r, c) = v.get<std::int64_t>();
            }
        }
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw Error("frame-format", std::string("frame JSON is missing fields: ") + e.what());
    }
}

} // namespace latticeloc
