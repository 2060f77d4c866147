#pragma once

#include <string>
#include <vector>

#include "cns/fft.hpp"
#include "cns/field.hpp"

namespace cns {

/// Partition of the shifted 2-D frequency grid into isotropic radial bands.
///
/// Each coordinate (f_y, f_x) maps to band round(rho / rho_max * (N_b - 1))
/// with rho = sqrt(f_y^2 + f_x^2) and rho_max = sqrt((H/2)^2 + (W/2)^2).
/// round() is half-away-from-zero, since rho/rho_max*(N_b-1) can land exactly
/// on .5 for small grids. The map is centrosymmetric, so masking a band of a
/// Hermitian spectrum preserves Hermitian symmetry and band projections of
/// real fields stay real.
class BandMap {
public:
    BandMap(GridShape shape, int band_count);

    const GridShape& shape() const { return shape_; }
    int band_count() const { return band_count_; }
    double rho_max() const { return rho_max_; }

    /// Band of the storage coordinate (iy, ix) of a shifted spectrum.
    int band_at(int iy, int ix) const { return index_[static_cast<size_t>(iy) * shape_.width + ix]; }

    /// Band of the signed frequency (f_y, f_x).
    int band_at_freq(int fy, int fx) const {
        return band_at(fy + shape_.height / 2, fx + shape_.width / 2);
    }

    /// Coordinates per band; sums to H*W.
    const std::vector<int>& counts() const { return counts_; }

    /// Arithmetic mean of the coordinate radii in each band.
    const std::vector<double>& mean_radii() const { return mean_radii_; }

    /// Mean radius with the DC band clamped to band 1's radius, for power laws
    /// with negative exponents where rho=0 is singular.
    double profile_radius(int band) const;

    /// Coordinate-weighted mean of per-band values: (1/(H*W)) * sum_b count_b * v_b.
    double coordinate_mean(const std::vector<double>& per_band) const;

    void save_csv(const std::string& path) const;

private:
    GridShape shape_;
    int band_count_;
    double rho_max_;
    std::vector<int> index_;       // H*W entries, shifted storage order
    std::vector<int> counts_;
    std::vector<double> mean_radii_;
};

BandMap build_band_map(const GridShape& shape, int band_count);

/// Band-pass projection P_b[x]: mask the spectrum to one band, invert.
Field project_band(const Field& field, int band, const BandMap& map);

/// Radially averaged power spectral density: mean |X(f)|^2 per coordinate in
/// each band, averaged over samples and channels. Uses the unnormalized
/// forward DFT, so unit white noise gives a flat PSD at level H*W.
std::vector<double> psd(const std::vector<Field>& samples, const BandMap& map);

/// Per-band mean of |X(f)|^2 for an already-transformed spectrum.
std::vector<double> band_energy(const Spectrum& spectrum, const BandMap& map);

}  // namespace cns
