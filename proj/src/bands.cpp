#include "cns/bands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <stdexcept>

namespace cns {

namespace {

// Half-away-from-zero rounding; std::round already does this for positive
// arguments, spelled out for clarity at the exact-.5 band edges.
int round_half_away(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

BandMap::BandMap(GridShape shape, int band_count) : shape_(shape), band_count_(band_count) {
    shape_.validate();
    if (band_count < 1) throw std::invalid_argument("BandMap: band_count must be >= 1");

    const int H = shape_.height, W = shape_.width;
    rho_max_ = std::sqrt(0.25 * H * H + 0.25 * W * W);
    if (band_count_ > static_cast<int>(rho_max_) + 1)
        std::cerr << "BandMap: " << band_count_ << " bands on a " << H << "x" << W
                  << " grid exceeds floor(rho_max)+1; some bands may be empty\n";
    index_.resize(static_cast<size_t>(H) * W);
    counts_.assign(band_count_, 0);
    mean_radii_.assign(band_count_, 0.0);

    for (int iy = 0; iy < H; ++iy) {
        const int fy = shifted_freq(iy, H);
        for (int ix = 0; ix < W; ++ix) {
            const int fx = shifted_freq(ix, W);
            const double rho = std::sqrt(static_cast<double>(fy) * fy + static_cast<double>(fx) * fx);
            int b = 0;
            if (band_count_ > 1) b = round_half_away(rho / rho_max_ * (band_count_ - 1));
            if (b < 0) b = 0;
            if (b >= band_count_) b = band_count_ - 1;
            index_[static_cast<size_t>(iy) * W + ix] = b;
            counts_[b] += 1;
            mean_radii_[b] += rho;
        }
    }
    for (int b = 0; b < band_count_; ++b)
        if (counts_[b] > 0) mean_radii_[b] /= counts_[b];
}

double BandMap::profile_radius(int band) const {
    if (band == 0 && band_count_ > 1 && counts_[1] > 0) return mean_radii_[1];
    return mean_radii_[band];
}

double BandMap::coordinate_mean(const std::vector<double>& per_band) const {
    if (static_cast<int>(per_band.size()) != band_count_)
        throw std::invalid_argument("BandMap: per-band vector length mismatch");
    double acc = 0.0;
    for (int b = 0; b < band_count_; ++b) acc += counts_[b] * per_band[b];
    return acc / static_cast<double>(shape_.pixels());
}

void BandMap::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("BandMap: cannot open " + path);
    out << "f_y,f_x,band\n";
    const int H = shape_.height, W = shape_.width;
    for (int iy = 0; iy < H; ++iy)
        for (int ix = 0; ix < W; ++ix)
            out << shifted_freq(iy, H) << ',' << shifted_freq(ix, W) << ','
                << band_at(iy, ix) << '\n';
}

BandMap build_band_map(const GridShape& shape, int band_count) {
    return BandMap(shape, band_count);
}

Field project_band(const Field& field, int band, const BandMap& map) {
    if (band < 0 || band >= map.band_count())
        throw std::invalid_argument("project_band: band out of range");
    field.shape().validate();
    if (field.shape().height != map.shape().height || field.shape().width != map.shape().width)
        throw std::invalid_argument("project_band: field does not match band map grid");

    Spectrum spec = forward_transform(field);
    const GridShape& shape = field.shape();
    for (int c = 0; c < shape.channels; ++c)
        for (int iy = 0; iy < shape.height; ++iy)
            for (int ix = 0; ix < shape.width; ++ix)
                if (map.band_at(iy, ix) != band) spec.at(c, iy, ix) = cplx(0.0, 0.0);
    return inverse_transform(spec);
}

std::vector<double> band_energy(const Spectrum& spectrum, const BandMap& map) {
    const GridShape& shape = spectrum.shape();
    std::vector<double> acc(map.band_count(), 0.0);
    for (int c = 0; c < shape.channels; ++c)
        for (int iy = 0; iy < shape.height; ++iy)
            for (int ix = 0; ix < shape.width; ++ix)
                acc[map.band_at(iy, ix)] += std::norm(spectrum.at(c, iy, ix));
    for (int b = 0; b < map.band_count(); ++b)
        if (map.counts()[b] > 0) acc[b] /= static_cast<double>(map.counts()[b]) * shape.channels;
    return acc;
}

std::vector<double> psd(const std::vector<Field>& samples, const BandMap& map) {
    if (samples.empty()) throw std::invalid_argument("psd: empty sample set");
    std::vector<double> acc(map.band_count(), 0.0);
    for (const Field& sample : samples) {
        if (sample.shape().height != map.shape().height ||
            sample.shape().width != map.shape().width)
            throw std::invalid_argument("psd: sample does not match band map grid");
        std::vector<double> one = band_energy(forward_transform(sample), map);
        for (int b = 0; b < map.band_count(); ++b) acc[b] += one[b];
    }
    for (double& v : acc) v /= static_cast<double>(samples.size());
    return acc;
}

}  // namespace cns
