#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cns/noise.hpp"
#include "cns/oracle.hpp"
#include "cns/path.hpp"

namespace cns {

/// Raised when a state goes NaN/Inf; carries the offending step.
class IntegrationDivergedError : public std::runtime_error {
public:
    IntegrationDivergedError(int step, const std::string& what)
        : std::runtime_error(what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

enum class DiffusionFamily { constant, sigma_linear, custom_table };

/// Time-dependent diffusion coefficient D(t) >= 0. The SDE noise amplitude is
/// sqrt(2 D(t)) and the drift correction is D(t) * score, i.e. g^2 = 2 D.
struct DiffusionSpec {
    DiffusionFamily family = DiffusionFamily::sigma_linear;
    double magnitude = 1.0;
    // custom_table: piecewise-linear D over [0,1]; knots must be increasing.
    std::vector<double> table_times;
    std::vector<double> table_values;

    static DiffusionSpec constant(double magnitude) {
        return {DiffusionFamily::constant, magnitude, {}, {}};
    }
    static DiffusionSpec sigma_linear(double magnitude) {
        return {DiffusionFamily::sigma_linear, magnitude, {}, {}};
    }
    static DiffusionSpec custom(std::vector<double> times, std::vector<double> values);

    double d_at(double t) const;
    double g_squared(double t) const { return 2.0 * d_at(t); }
    double amplitude(double t) const;  // sqrt(2 D(t))

    double g_squared_integral() const;      // closed form (exact for the table too)
    double g_squared_max_slope() const;     // max |d/dt g^2|
    void validate() const;
};

struct EnergyBudget {
    double e_n;      // left Riemann sum of g^2
    double e_exact;  // integral of g^2 over [0,1]
    double bound;    // (t1-t0)^2/(2N) * max |d g^2/dt|
};

/// E_N = sum_k g^2(k/N)/N over the left-endpoint grid, with the exact budget
/// and the Riemann-sum error bound for C^1 schedules.
EnergyBudget energy_budget(const DiffusionSpec& diffusion, int steps);

/// Per-step stochastic increment generator. Implementations return a
/// unit-budget field (white, statically colored, CNS row, mBm); the solver
/// applies sqrt(2 D) * amplitude_scale * sqrt(dt).
class NoiseSource {
public:
    virtual ~NoiseSource() = default;
    virtual Field draw(RngStream& rng, int step, double t, const GridShape& shape) const = 0;
};

class WhiteNoiseSource : public NoiseSource {
public:
    Field draw(RngStream& rng, int, double, const GridShape& shape) const override {
        return white_noise(shape, rng);
    }
};

/// Static per-band coloring (power-law profiles).
class ProfileNoiseSource : public NoiseSource {
public:
    ProfileNoiseSource(BandScaleProfile profile, BandMap map)
        : profile_(std::move(profile)), map_(std::move(map)) {}
    Field draw(RngStream& rng, int, double, const GridShape& shape) const override {
        return color_noise(white_noise(shape, rng), profile_, map_);
    }

private:
    BandScaleProfile profile_;
    BandMap map_;
};

/// Time-varying Hurst coloring, one independent increment per step.
class MbmNoiseSource : public NoiseSource {
public:
    MbmNoiseSource(HurstSchedule schedule, BandMap map, bool empirical_whitening);
    Field draw(RngStream& rng, int step, double t, const GridShape& shape) const override;

private:
    HurstSchedule schedule_;
    BandMap map_;
    bool whitening_;
};

enum class Scheme { ode_euler, ode_heun, sde_euler_maruyama, sde_heun, srk2, srk2s };

bool is_stochastic(Scheme scheme);
const char* scheme_name(Scheme scheme);
Scheme scheme_from_name(const std::string& name);

struct SolverConfig {
    Scheme scheme = Scheme::sde_euler_maruyama;
    int steps = 250;
    uint64_t seed = 0;
    const NoiseSource* noise_source = nullptr;  // required for SDE schemes
    double noise_amplitude_scale = 1.0;         // multiplies injected amplitude only
};

/// Global energy-scaling ablation: amplitude multiplied by `factor`
/// (variance by factor^2); drift unchanged.
SolverConfig scale_energy(SolverConfig config, double factor);

enum class RecordMode { terminal, full_states, full_with_increments };

struct Trajectory {
    std::vector<double> times;               // t_k = k/T for k = 0..T
    std::vector<Field> states;               // T+1 states (terminal mode: init+final)
    std::vector<Field> injected_increments;  // per-step added noise (full_with_increments)
    std::vector<double> per_step_energy;     // g^2(t_k) dt * scale^2 per dimension
    Field cumulative_injected;               // sum of injected noise terms (SDE)
    bool stochastic = false;

    const Field& initial_state() const { return states.front(); }
    const Field& final_state() const { return states.back(); }
};

/// Integrate the generative dynamics from t=0 (noise) to t=1 (data) on the
/// uniform left-endpoint grid t_k = k/T, dt = 1/T.
///
/// ODE schemes integrate dx = v dt. SDE schemes integrate
///   dx = (v + D s) dt + sqrt(2 D) * scale * n dW
/// where the score s comes from the model's native score when present and the
/// path algebra otherwise. The last SDE step is drift-only whenever it would
/// inject noise, so no scheme ever evaluates the score at sigma(t) = 0.
Trajectory integrate(const VelocityModel& model, const PathSchedule& path,
                     const DiffusionSpec& diffusion, const SolverConfig& config,
                     const Field& init, RecordMode record = RecordMode::full_states);

/// Chain-parallel batch driver: chain k runs on chain_stream(seed, k) and
/// draws its init from that stream; results are independent of thread count.
std::vector<Trajectory> sample_chains(const VelocityModel& model, const PathSchedule& path,
                                      const DiffusionSpec& diffusion, const SolverConfig& config,
                                      int chains, RecordMode record, int threads);

// --- flat binary trajectory/sample store --------------------------------- //
// Header: magic "CNSB", u32 version=1, u32 frames, u32 H, u32 W, u32 C,
// u32 dtype=1 (float32 little-endian), then frames * C*H*W floats row-major.

void save_frames(const std::string& path, const std::vector<Field>& frames);
std::vector<Field> load_frames(const std::string& path);
void save_step_energy_csv(const std::string& path, const Trajectory& trajectory);

}  // namespace cns
