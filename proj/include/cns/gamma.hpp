#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cns/bands.hpp"
#include "cns/oracle.hpp"
#include "cns/path.hpp"
#include "cns/solvers.hpp"

namespace cns {

/// Spectral progress gamma(f, t) on a (times x bands) grid, all entries in
/// [0,1], final row identically 1.
struct GammaMatrix {
    std::vector<double> times;                // grid of t values, ascending, last = 1
    std::vector<std::vector<double>> values;  // rows match times, columns bands
    int band_count = 0;
    GridShape grid;
    int sample_count = 0;
    std::string model_id;

    int rows() const { return static_cast<int>(times.size()); }

    /// Row linearly interpolated in t (used when the sampling step count
    /// differs from the estimation grid).
    std::vector<double> row_at(double t) const;

    void validate() const;
};

struct GammaConfig {
    int steps = 64;             // ODE solver steps; the matrix gets steps+1 rows
    int chains = 16;            // trajectories averaged
    uint64_t seed = 0;
    Scheme scheme = Scheme::ode_euler;  // must be deterministic
    int threads = 1;
};

/// Estimate gamma from ODE trajectories of the model: per-step
/// finite-difference velocities, clean predictions against the trajectory's
/// own final state, residuals per spectral coordinate, clamp to [0,1],
/// channel mean, radial bin, chain mean (Kahan-compensated, order stable).
GammaMatrix compute_gamma(const VelocityModel& model, const PathSchedule& path,
                          const GammaConfig& config, const BandMap& map);

/// Same accumulation for one externally produced trajectory (states at the
/// uniform grid linspace(0, 1, size)).
std::vector<std::vector<double>> gamma_from_states(const std::vector<Field>& states,
                                                   const PathSchedule& path, const BandMap& map);

/// Linear amplitude-progress target of an ideal trajectory: t in the
/// canonical (data at t=1) convention, 1 - t in the data_at_zero convention.
double gamma_target(double t, Convention convention = Convention::data_at_zero);

void save_gamma(const GammaMatrix& matrix, const std::string& csv_path);
GammaMatrix load_gamma(const std::string& csv_path);

}  // namespace cns
