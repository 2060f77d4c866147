#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cns/gamma.hpp"
#include "cns/solvers.hpp"

namespace cns {

enum class TiltInterpolation { linear, exponential };

/// Temporally evolving spectral tilt: the pre-normalization profile is
/// multiplied by rho_band^a(t), with a(t) interpolating start -> end.
struct TiltConfig {
    double start_exponent = 0.0;
    double end_exponent = 0.0;
    TiltInterpolation interpolation = TiltInterpolation::linear;
    double rate = 1.0;  // exponential only

    double exponent_at(double t) const;
};

/// Empirical schedule relaxations layered on top of the raw deficit profile.
struct RelaxationConfig {
    double gamma_power = 1.0;    // exponent applied to gamma
    double gamma_divider = 1.0;  // c >= 1 in gamma_tilde = gamma / c
    std::optional<TiltConfig> tilt;
    double energy_scale = 1.0;   // global multiplier on injected noise amplitude

    void validate() const;
};

/// beta(f, t) variance multipliers, one row per time-grid point. Every row has
/// coordinate-weighted RMS 1: (1/D) sum_b count_b beta_b^2 = 1.
struct CnsSchedule {
    std::vector<double> times;
    std::vector<std::vector<double>> beta;  // rows x bands
    int band_count = 0;
    std::string source_gamma;

    int rows() const { return static_cast<int>(times.size()); }
    std::vector<double> row_at(double t) const;
    void validate(const BandMap& map) const;
};

/// Deficit-proportional allocation: beta ~ sqrt(1 - (gamma/divider)^power),
/// optionally tilted by rho^a(t), each row RMS-normalized over coordinates. A
/// row with no deficit anywhere (possible only for the final all-ones gamma
/// row with divider 1) falls back to the uniform profile.
CnsSchedule build_schedule(const GammaMatrix& gamma, const BandMap& map,
                           const RelaxationConfig& relax);

/// Time-varying mBm profile matrix on the same row layout, for the ablation
/// family's alternative noise formulation.
CnsSchedule mbm_schedule(const BandMap& map, const HurstSchedule& hurst, int steps);

enum class AblationMode {
    constant_spectrum,    // every row replaced by the temporal mean, renormalized
    shuffled,             // rows permuted
    inverted,             // rows reversed
    partial_white,        // floor(fraction*T) rows replaced by all-ones
    random_unit_energy,   // floor(fraction*T) rows replaced by random RMS-1 profiles
};

AblationMode ablation_mode_from_name(const std::string& name);
const char* ablation_mode_name(AblationMode mode);

CnsSchedule ablate_schedule(const CnsSchedule& schedule, const BandMap& map, AblationMode mode,
                            double fraction, RngStream& rng);

/// Noise source driving Alg-style CNS sampling: per step, color white noise by
/// the schedule row at t (optionally followed by per-sample scalar whitening).
/// An all-ones row with whitening off short-circuits to the raw white draw, so
/// the degenerate schedule reproduces the white SDE bit for bit.
class CnsNoiseSource : public NoiseSource {
public:
    CnsNoiseSource(CnsSchedule schedule, BandMap map, bool empirical_whitening = true);
    Field draw(RngStream& rng, int step, double t, const GridShape& shape) const override;

private:
    CnsSchedule schedule_;
    BandMap map_;
    bool whitening_;
};

/// CNS sampling: the SDE integrator with schedule-colored increments and the
/// relaxation's energy scale applied to the injected amplitude.
Trajectory cns_sample(const VelocityModel& model, const PathSchedule& path,
                      const DiffusionSpec& diffusion, const CnsSchedule& schedule,
                      const BandMap& map, SolverConfig config, const Field& init,
                      bool empirical_whitening = true,
                      RecordMode record = RecordMode::full_states);

void save_schedule_csv(const CnsSchedule& schedule, const std::string& path);

}  // namespace cns
