#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "cns/noise.hpp"
#include "cns/oracle.hpp"
#include "cns/schedule.hpp"
#include "cns/solvers.hpp"

namespace cns::cli {

/// Raised for any malformed, unknown, or out-of-range configuration input;
/// maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OracleConfig {
    // Either inline components or a synthetic power-law recipe.
    struct Component {
        double weight = 1.0;
        double variance = 1.0;
        std::vector<double> mean;  // flat C*H*W
    };
    std::vector<Component> components;  // inline form when nonempty
    // synthetic form
    int synthetic_components = 0;
    double spectral_decay = 2.0;
    double mean_energy = 1.0;
    double component_variance = 0.1;
    uint64_t synthetic_seed = 0;

    GaussianMixtureOracle build(const GridShape& shape, const PathSchedule& path) const;
};

struct SampleMode {
    std::string scheme;  // ode | sde | cns | mbm
    Scheme solver = Scheme::sde_euler_maruyama;
    int steps = 128;
    int chains = 16;
    bool store_trajectories = false;
    bool whitening = true;
    std::string gamma_file;          // cns
    RelaxationConfig relax;          // cns
    HurstSchedule hurst{0.5, 0.25};  // mbm
    std::string init_file;           // optional fixed inits
};

struct GammaMode {
    int steps = 64;
    int chains = 16;
    std::vector<std::string> trajectory_files;  // alternative to oracle runs
};

struct DriftMode {
    PerturbationSpec perturbation;
    int steps = 48;
    int chains = 1000;
    int correlation_stride = 8;
};

struct AnalyzeMode {
    std::string generated_file;
    std::string target_file;      // or draw target_samples from the oracle
    int target_samples = 0;
    std::string inits_file;       // persistence inputs
    std::string injected_file;
    std::optional<DriftMode> drift;
    bool svg = true;
};

struct AblateMode {
    std::string gamma_file;
    std::vector<std::string> modes;
    double fraction = 0.5;
    RelaxationConfig relax;
    int steps = 128;
    int chains = 32;
    int target_samples = 256;
    bool whitening = true;
};

struct Config {
    nlohmann::json snapshot;
    uint64_t seed = 0;
    int threads = 0;  // 0 = machine default
    GridShape grid{16, 16, 1};
    int bands = 8;
    PathKind path_kind = PathKind::linear;
    DiffusionSpec diffusion = DiffusionSpec::sigma_linear(1.0);
    OracleConfig oracle;

    std::optional<GammaMode> gamma;
    std::optional<SampleMode> sample;
    std::optional<AnalyzeMode> analyze;
    std::optional<AblateMode> ablate;

    PathSchedule path() const {
        return path_kind == PathKind::linear ? PathSchedule::linear() : PathSchedule::vp_trig();
    }
};

/// Parse + validate a config file. Unknown keys anywhere are hard errors.
Config load_config(const std::string& path);

}  // namespace cns::cli
