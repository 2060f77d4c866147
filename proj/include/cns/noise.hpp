#pragma once

#include <string>
#include <vector>

#include "cns/bands.hpp"
#include "cns/rng.hpp"

namespace cns {

enum class NormalizationMode {
    analytic_rms,   // profile itself carries the unit-RMS constraint; coloring is linear
    empirical_std,  // each colored sample divided by its own scalar std
};

/// Per-band amplitude multipliers for noise coloring.
struct BandScaleProfile {
    std::vector<double> scales;
    NormalizationMode mode = NormalizationMode::analytic_rms;

    void validate(const BandMap& map) const;
};

/// Linearly interpolated Hurst exponent H(t) in (0,1).
struct HurstSchedule {
    double h_start = 0.5;
    double h_end   = 0.5;

    double at(double t) const { return h_start + (h_end - h_start) * t; }
    void validate() const;
};

/// i.i.d. standard normal field; deterministic given the stream state.
Field white_noise(const GridShape& shape, RngStream& rng);

/// Scale the spectrum of w per band, invert, and (in empirical_std mode)
/// divide by the sample's own scalar std over all coordinates and channels
/// jointly (Bessel-corrected, mean-subtracted).
Field color_noise(const Field& w, const BandScaleProfile& profile, const BandMap& map);

/// scales ~ rho_band^exponent, coordinate-RMS-normalized. Band 0 uses band 1's
/// radius for negative exponents (the DC radius is 0 and power laws are only
/// defined away from it).
BandScaleProfile power_law_profile(const BandMap& map, double exponent);

/// Multifractional-Brownian-style profile: amplitude ~ rho^-(H(t)+1/2) with
/// H(t) from the schedule, realized as independent per-step colored increments.
BandScaleProfile mbm_profile(const BandMap& map, const HurstSchedule& schedule, double t);

/// Coordinate-weighted RMS normalization: rescale so (1/D) sum_coords s^2 = 1.
void normalize_rms(std::vector<double>& scales, const BandMap& map);

/// Spectral synthesis: a real single-channel field whose spectrum has
/// |X(f)| = amplitude[band(f)] exactly at every coordinate, with random phases
/// (Hermitian-paired so the field is real; self-conjugate coordinates get a
/// random sign).
Field band_amplitude_field(const BandMap& map, const std::vector<double>& amplitudes,
                           RngStream& rng);

void save_profile_csv(const BandScaleProfile& profile, const std::string& path);

}  // namespace cns
