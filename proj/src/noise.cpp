#include "cns/noise.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace cns {

void BandScaleProfile::validate(const BandMap& map) const {
    if (static_cast<int>(scales.size()) != map.band_count())
        throw std::invalid_argument("BandScaleProfile: length does not match band count");
    for (double s : scales)
        if (!(s >= 0.0)) throw std::invalid_argument("BandScaleProfile: scales must be >= 0");
    if (mode == NormalizationMode::analytic_rms) {
        std::vector<double> sq(scales.size());
        for (size_t i = 0; i < scales.size(); ++i) sq[i] = scales[i] * scales[i];
        const double mean_sq = map.coordinate_mean(sq);
        if (std::abs(mean_sq - 1.0) > 1e-12)
            throw std::invalid_argument("BandScaleProfile: analytic_rms profile violates unit RMS");
    }
}

void HurstSchedule::validate() const {
    if (!(h_start > 0.0 && h_start < 1.0 && h_end > 0.0 && h_end < 1.0))
        throw std::invalid_argument("HurstSchedule: H must lie strictly inside (0,1)");
}

Field white_noise(const GridShape& shape, RngStream& rng) {
    Field out(shape);
    rng.fill_normal(out);
    return out;
}

void normalize_rms(std::vector<double>& scales, const BandMap& map) {
    std::vector<double> sq(scales.size());
    for (size_t i = 0; i < scales.size(); ++i) sq[i] = scales[i] * scales[i];
    const double mean_sq = map.coordinate_mean(sq);
    if (!(mean_sq > 0.0))
        throw std::invalid_argument("normalize_rms: profile has zero energy");
    const double inv = 1.0 / std::sqrt(mean_sq);
    for (double& s : scales) s *= inv;
}

Field color_noise(const Field& w, const BandScaleProfile& profile, const BandMap& map) {
    if (w.shape().height != map.shape().height || w.shape().width != map.shape().width)
        throw std::invalid_argument("color_noise: field does not match band map grid");
    if (static_cast<int>(profile.scales.size()) != map.band_count())
        throw std::invalid_argument("color_noise: profile length does not match band count");

    Spectrum spec = forward_transform(w);
    const GridShape& shape = w.shape();
    for (int c = 0; c < shape.channels; ++c)
        for (int iy = 0; iy < shape.height; ++iy)
            for (int ix = 0; ix < shape.width; ++ix)
                spec.at(c, iy, ix) *= profile.scales[map.band_at(iy, ix)];
    Field out = inverse_transform(spec);

    if (profile.mode == NormalizationMode::empirical_std) {
        const double mean = out.mean();
        double acc = 0.0;
        for (int i = 0; i < out.size(); ++i) {
            const double d = out[i] - mean;
            acc += d * d;
        }
        if (out.size() < 2 || !(acc > 0.0))
            throw std::invalid_argument("color_noise: degenerate sample std in empirical_std mode");
        const double std = std::sqrt(acc / static_cast<double>(out.size() - 1));
        out *= 1.0 / std;
    }
    return out;
}

BandScaleProfile power_law_profile(const BandMap& map, double exponent) {
    std::vector<double> scales(map.band_count());
    for (int b = 0; b < map.band_count(); ++b) {
        const double rho = exponent < 0.0 ? map.profile_radius(b) : map.mean_radii()[b];
        scales[b] = std::pow(rho, exponent);
    }
    normalize_rms(scales, map);
    return BandScaleProfile{std::move(scales), NormalizationMode::analytic_rms};
}

BandScaleProfile mbm_profile(const BandMap& map, const HurstSchedule& schedule, double t) {
    schedule.validate();
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("mbm_profile: t must lie in [0,1]");
    const double exponent = -(schedule.at(t) + 0.5);
    std::vector<double> scales(map.band_count());
    for (int b = 0; b < map.band_count(); ++b)
        scales[b] = std::pow(map.profile_radius(b), exponent);
    normalize_rms(scales, map);
    return BandScaleProfile{std::move(scales), NormalizationMode::analytic_rms};
}

Field band_amplitude_field(const BandMap& map, const std::vector<double>& amplitudes,
                           RngStream& rng) {
    if (static_cast<int>(amplitudes.size()) != map.band_count())
        throw std::invalid_argument("band_amplitude_field: amplitude length mismatch");
    const int H = map.shape().height, W = map.shape().width;
    GridShape shape{H, W, 1};
    Spectrum spec(shape);

    // Natural index of a storage index, and back.
    auto to_natural = [](int idx, int n) { return (idx + n - n / 2) % n; };
    auto to_storage = [](int u, int n) { return (u + n / 2) % n; };

    for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix) {
            const int uy = to_natural(iy, H), ux = to_natural(ix, W);
            const int py = to_storage((H - uy) % H, H), px = to_storage((W - ux) % W, W);
            const double amp = amplitudes[map.band_at(iy, ix)];
            if (py == iy && px == ix) {
                spec.at(0, iy, ix) = cplx(rng.uniform() < 0.5 ? -amp : amp, 0.0);
            } else if (iy < py || (iy == py && ix < px)) {
                const double phase = 6.283185307179586 * rng.uniform();
                const cplx v(amp * std::cos(phase), amp * std::sin(phase));
                spec.at(0, iy, ix) = v;
                spec.at(0, py, px) = std::conj(v);
            }
        }
    return inverse_transform(spec);
}

void save_profile_csv(const BandScaleProfile& profile, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_profile_csv: cannot open " + path);
    out << "band,scale\n";
    out.precision(17);
    for (size_t b = 0; b < profile.scales.size(); ++b)
        out << b << ',' << profile.scales[b] << '\n';
}

}  // namespace cns
