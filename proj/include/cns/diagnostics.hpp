#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cns/bands.hpp"
#include "cns/oracle.hpp"
#include "cns/solvers.hpp"

namespace cns {

/// Per-band comparison of generated vs target radial PSDs.
struct SpectralGapReport {
    std::vector<double> band_radii;
    std::vector<double> s_generated;
    std::vector<double> s_target;
    std::vector<double> signed_log_error;  // log10(s_generated / s_target); NaN where excluded
    std::vector<bool> excluded;            // zero target energy
    double log_mae = 0.0;
    int excluded_count = 0;
};

SpectralGapReport spectral_gap(const std::vector<Field>& generated,
                               const std::vector<Field>& target, const BandMap& map);

/// Band-wise cosine similarities between projections of the initial noise
/// (and, for SDE runs, of the cumulative injected noise) and the final state.
struct PersistenceReport {
    std::vector<double> init_cosine;       // mean over trajectories
    std::vector<double> injected_cosine;   // SDE only; empty otherwise
    std::vector<int> skipped;              // per band, zero-norm projections skipped
    int trajectories = 0;
};

PersistenceReport noise_persistence(const std::vector<Trajectory>& trajectories,
                                    const BandMap& map);

struct EnergyDriftConfig {
    int steps = 64;
    int chains = 1000;
    uint64_t seed = 0;
    int threads = 1;
    int correlation_stride = 1;  // estimate the correlation every k-th step
};

/// Paired ODE/SDE energy evolution under a perturbed model, plus the per-band
/// state-error correlation and the accumulated terminal excess.
struct EnergyDriftRecord {
    std::vector<double> times;
    std::vector<double> ode_energy;  // mean of 0.5 ||x_t||^2
    std::vector<double> sde_energy;
    std::vector<double> correlation_times;
    std::vector<std::vector<double>> correlation;  // per sampled step x band, per coordinate
    // Terminal per-coordinate band-energy gap SDE - ODE, with its standard error.
    std::vector<double> excess;
    std::vector<double> excess_se;
    std::vector<double> target_energy;  // oracle band energy, for regime labelling
    int chains = 0;

    double excess_z(int band) const {
        return excess_se[band] > 0.0 ? excess[band] / excess_se[band] : 0.0;
    }
};

/// The perturbed model's score at (x, t): native when present, otherwise
/// derived from the model velocity through the path algebra.
Field effective_score(const VelocityModel& model, const PathSchedule& path, const Field& state,
                      double t);

EnergyDriftRecord energy_drift(const GaussianMixtureOracle& exact, const VelocityModel& perturbed,
                               const DiffusionSpec& diffusion, const BandMap& map,
                               const EnergyDriftConfig& config);

void save_spectral_gap_csv(const SpectralGapReport& report, const std::string& path);
void save_persistence_csv(const PersistenceReport& report, const std::string& path);
void save_energy_drift_csv(const EnergyDriftRecord& record, const std::string& path);

}  // namespace cns
