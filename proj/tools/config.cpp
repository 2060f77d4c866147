#include "config.hpp"

#include <fstream>
#include <set>

namespace cns::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items())
        if (!ok.count(item.key()))
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
}

template <class T>
T require(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": bad value for '" + key + "'");
    }
}

template <class T>
T get_or(const json& obj, const std::string& where, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + ": bad value for '" + key + "'");
    }
}

GridShape parse_grid(const json& obj) {
    check_keys(obj, "grid", {"height", "width", "channels"});
    GridShape shape{require<int>(obj, "grid", "height"), require<int>(obj, "grid", "width"),
                    get_or<int>(obj, "grid", "channels", 1)};
    try {
        shape.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("grid: ") + e.what());
    }
    return shape;
}

OracleConfig parse_oracle(const json& obj, const GridShape& grid) {
    OracleConfig oracle;
    const std::string kind = require<std::string>(obj, "oracle", "kind");
    if (kind == "gaussian_mixture") {
        check_keys(obj, "oracle", {"kind", "components"});
        if (!obj.contains("components") || !obj.at("components").is_array() ||
            obj.at("components").empty())
            throw ConfigError("oracle: gaussian_mixture needs a nonempty components array");
        for (const auto& comp : obj.at("components")) {
            check_keys(comp, "oracle.components[]", {"weight", "variance", "mean"});
            OracleConfig::Component c;
            c.weight = get_or<double>(comp, "oracle.components[]", "weight", 1.0);
            c.variance = require<double>(comp, "oracle.components[]", "variance");
            c.mean = require<std::vector<double>>(comp, "oracle.components[]", "mean");
            if (static_cast<int>(c.mean.size()) != grid.volume())
                throw ConfigError("oracle: component mean length does not match the grid");
            oracle.components.push_back(std::move(c));
        }
    } else if (kind == "synthetic_power_law") {
        check_keys(obj, "oracle",
                   {"kind", "components", "spectral_decay", "mean_energy", "component_variance",
                    "seed"});
        oracle.synthetic_components = require<int>(obj, "oracle", "components");
        oracle.spectral_decay = get_or<double>(obj, "oracle", "spectral_decay", 2.0);
        oracle.mean_energy = get_or<double>(obj, "oracle", "mean_energy", 1.0);
        oracle.component_variance = get_or<double>(obj, "oracle", "component_variance", 0.1);
        oracle.synthetic_seed = get_or<uint64_t>(obj, "oracle", "seed", 0);
        if (oracle.synthetic_components < 1)
            throw ConfigError("oracle: synthetic components must be >= 1");
    } else {
        throw ConfigError("oracle: unknown kind '" + kind + "'");
    }
    return oracle;
}

DiffusionSpec parse_diffusion(const json& obj) {
    check_keys(obj, "diffusion", {"family", "magnitude", "times", "values"});
    const std::string family = require<std::string>(obj, "diffusion", "family");
    const double magnitude = get_or<double>(obj, "diffusion", "magnitude", 1.0);
    try {
        if (family == "constant") return DiffusionSpec::constant(magnitude);
        if (family == "sigma_linear") return DiffusionSpec::sigma_linear(magnitude);
        if (family == "custom_table") {
            DiffusionSpec spec = DiffusionSpec::custom(
                require<std::vector<double>>(obj, "diffusion", "times"),
                require<std::vector<double>>(obj, "diffusion", "values"));
            spec.magnitude = magnitude;
            return spec;
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("diffusion: ") + e.what());
    }
    throw ConfigError("diffusion: unknown family '" + family + "'");
}

RelaxationConfig parse_relax(const json& obj) {
    check_keys(obj, "relax", {"gamma_power", "gamma_divider", "tilt", "energy_scale"});
    RelaxationConfig relax;
    relax.gamma_power = get_or<double>(obj, "relax", "gamma_power", 1.0);
    relax.gamma_divider = get_or<double>(obj, "relax", "gamma_divider", 1.0);
    relax.energy_scale = get_or<double>(obj, "relax", "energy_scale", 1.0);
    if (obj.contains("tilt")) {
        const json& tilt = obj.at("tilt");
        check_keys(tilt, "relax.tilt", {"start", "end", "interpolation", "rate"});
        TiltConfig t;
        t.start_exponent = require<double>(tilt, "relax.tilt", "start");
        t.end_exponent = require<double>(tilt, "relax.tilt", "end");
        const std::string kind = get_or<std::string>(tilt, "relax.tilt", "interpolation",
                                                     std::string("linear"));
        if (kind == "linear") {
            t.interpolation = TiltInterpolation::linear;
        } else if (kind == "exponential") {
            t.interpolation = TiltInterpolation::exponential;
            t.rate = require<double>(tilt, "relax.tilt", "rate");
        } else {
            throw ConfigError("relax.tilt: unknown interpolation '" + kind + "'");
        }
        relax.tilt = t;
    }
    try {
        relax.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("relax: ") + e.what());
    }
    return relax;
}

Scheme parse_solver(const std::string& scheme, const std::string& solver) {
    const bool ode = scheme == "ode";
    if (solver == "euler") return ode ? Scheme::ode_euler : Scheme::sde_euler_maruyama;
    if (solver == "heun") return ode ? Scheme::ode_heun : Scheme::sde_heun;
    if (!ode && solver == "srk2") return Scheme::srk2;
    if (!ode && solver == "srk2s") return Scheme::srk2s;
    throw ConfigError("sample: solver '" + solver + "' not available for scheme '" + scheme +
                      "'");
}

SampleMode parse_sample(const json& obj) {
    check_keys(obj, "sample",
               {"scheme", "solver", "steps", "chains", "store_trajectories", "whitening",
                "gamma_file", "relax", "hurst", "init_file"});
    SampleMode mode;
    mode.scheme = require<std::string>(obj, "sample", "scheme");
    if (mode.scheme != "ode" && mode.scheme != "sde" && mode.scheme != "cns" &&
        mode.scheme != "mbm")
        throw ConfigError("sample: scheme must be one of ode|sde|cns|mbm");
    mode.solver = parse_solver(mode.scheme, get_or<std::string>(obj, "sample", "solver",
                                                                std::string("euler")));
    mode.steps = require<int>(obj, "sample", "steps");
    mode.chains = get_or<int>(obj, "sample", "chains", 16);
    if (mode.steps < 2) throw ConfigError("sample: steps must be >= 2");
    if (mode.chains < 1) throw ConfigError("sample: chains must be >= 1");
    mode.store_trajectories = get_or<bool>(obj, "sample", "store_trajectories", false);
    mode.whitening = get_or<bool>(obj, "sample", "whitening", true);
    mode.init_file = get_or<std::string>(obj, "sample", "init_file", std::string{});

    if (mode.scheme == "cns") {
        mode.gamma_file = require<std::string>(obj, "sample", "gamma_file");
        if (obj.contains("relax")) mode.relax = parse_relax(obj.at("relax"));
    } else if (obj.contains("relax")) {
        throw ConfigError("sample: relax applies to the cns scheme only");
    }
    if (mode.scheme == "mbm") {
        const json& hurst = obj.contains("hurst") ? obj.at("hurst") : json::object();
        check_keys(hurst, "sample.hurst", {"start", "end"});
        mode.hurst.h_start = get_or<double>(hurst, "sample.hurst", "start", 0.5);
        mode.hurst.h_end = get_or<double>(hurst, "sample.hurst", "end", 0.25);
        try {
            mode.hurst.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sample.hurst: ") + e.what());
        }
    } else if (obj.contains("hurst")) {
        throw ConfigError("sample: hurst applies to the mbm scheme only");
    }
    return mode;
}

GammaMode parse_gamma(const json& obj) {
    check_keys(obj, "gamma", {"steps", "chains", "trajectories"});
    GammaMode mode;
    mode.trajectory_files =
        get_or<std::vector<std::string>>(obj, "gamma", "trajectories", {});
    mode.steps = get_or<int>(obj, "gamma", "steps", 64);
    mode.chains = get_or<int>(obj, "gamma", "chains", 16);
    if (mode.trajectory_files.empty()) {
        if (mode.steps < 2) throw ConfigError("gamma: steps must be >= 2");
        if (mode.chains < 1) throw ConfigError("gamma: chains must be >= 1");
    }
    return mode;
}

PerturbationSpec parse_perturbation(const json& obj, int bands) {
    check_keys(obj, "drift.perturbation",
               {"mode", "alphas", "alpha", "gate_by_resolution", "prediction_weight"});
    PerturbationSpec spec;
    const std::string mode = get_or<std::string>(obj, "drift.perturbation", "mode",
                                                 std::string("score_scale"));
    if (mode == "score_scale")
        spec.mode = PerturbationMode::score_scale;
    else if (mode == "velocity_shrink")
        spec.mode = PerturbationMode::velocity_shrink;
    else if (mode == "prediction_shrink")
        spec.mode = PerturbationMode::prediction_shrink;
    else if (mode == "regression_to_mean")
        spec.mode = PerturbationMode::regression_to_mean;
    else
        throw ConfigError("drift.perturbation: unknown mode '" + mode + "'");
    if (obj.contains("alphas")) {
        spec.alphas = require<std::vector<double>>(obj, "drift.perturbation", "alphas");
        if (static_cast<int>(spec.alphas.size()) != bands)
            throw ConfigError("drift.perturbation: alphas length must match bands");
    } else {
        spec.alphas.assign(bands, require<double>(obj, "drift.perturbation", "alpha"));
    }
    spec.gate_by_resolution = get_or<bool>(obj, "drift.perturbation", "gate_by_resolution", false);
    spec.prediction_weight = get_or<double>(obj, "drift.perturbation", "prediction_weight", 1.0);
    return spec;
}

AnalyzeMode parse_analyze(const json& obj, int bands) {
    check_keys(obj, "analyze",
               {"generated", "target", "target_samples", "inits", "injected", "drift", "svg"});
    AnalyzeMode mode;
    mode.generated_file = get_or<std::string>(obj, "analyze", "generated", std::string{});
    mode.target_file = get_or<std::string>(obj, "analyze", "target", std::string{});
    mode.target_samples = get_or<int>(obj, "analyze", "target_samples", 0);
    mode.inits_file = get_or<std::string>(obj, "analyze", "inits", std::string{});
    mode.injected_file = get_or<std::string>(obj, "analyze", "injected", std::string{});
    mode.svg = get_or<bool>(obj, "analyze", "svg", true);
    if (obj.contains("drift")) {
        const json& drift = obj.at("drift");
        check_keys(drift, "drift", {"perturbation", "steps", "chains", "correlation_stride"});
        DriftMode d;
        if (!drift.contains("perturbation"))
            throw ConfigError("drift: missing perturbation block");
        d.perturbation = parse_perturbation(drift.at("perturbation"), bands);
        d.steps = get_or<int>(drift, "drift", "steps", 48);
        d.chains = get_or<int>(drift, "drift", "chains", 1000);
        d.correlation_stride = get_or<int>(drift, "drift", "correlation_stride", 8);
        mode.drift = std::move(d);
    }
    if (mode.generated_file.empty() && !mode.drift)
        throw ConfigError("analyze: nothing to do (no generated samples and no drift block)");
    if (!mode.generated_file.empty() && mode.target_file.empty() && mode.target_samples < 1)
        throw ConfigError("analyze: spectral gap needs a target file or target_samples");
    return mode;
}

AblateMode parse_ablate(const json& obj) {
    check_keys(obj, "ablate",
               {"gamma_file", "modes", "fraction", "relax", "steps", "chains", "target_samples",
                "whitening"});
    AblateMode mode;
    mode.gamma_file = require<std::string>(obj, "ablate", "gamma_file");
    mode.modes = require<std::vector<std::string>>(obj, "ablate", "modes");
    if (mode.modes.empty()) throw ConfigError("ablate: modes must be nonempty");
    for (const std::string& name : mode.modes) {
        if (name == "none") continue;  // the unablated schedule as a reference row
        try {
            ablation_mode_from_name(name);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("ablate: ") + e.what());
        }
    }
    mode.fraction = get_or<double>(obj, "ablate", "fraction", 0.5);
    if (mode.fraction < 0.0 || mode.fraction > 1.0)
        throw ConfigError("ablate: fraction must lie in [0,1]");
    if (obj.contains("relax")) mode.relax = parse_relax(obj.at("relax"));
    mode.steps = get_or<int>(obj, "ablate", "steps", 128);
    mode.chains = get_or<int>(obj, "ablate", "chains", 32);
    mode.target_samples = get_or<int>(obj, "ablate", "target_samples", 256);
    mode.whitening = get_or<bool>(obj, "ablate", "whitening", true);
    if (mode.steps < 2 || mode.chains < 1 || mode.target_samples < 1)
        throw ConfigError("ablate: steps/chains/target_samples out of range");
    return mode;
}

}  // namespace

GaussianMixtureOracle OracleConfig::build(const GridShape& shape,
                                          const PathSchedule& path) const {
    try {
        if (!components.empty()) {
            std::vector<double> weights, variances;
            std::vector<Field> means;
            for (const Component& c : components) {
                weights.push_back(c.weight);
                variances.push_back(c.variance);
                Field mu(shape);
                for (int i = 0; i < mu.size(); ++i) mu[i] = c.mean[i];
                means.push_back(std::move(mu));
            }
            return GaussianMixtureOracle(std::move(weights), std::move(means),
                                         std::move(variances), path);
        }
        return structured_oracle(shape, synthetic_components, spectral_decay, mean_energy,
                                 component_variance, synthetic_seed, path);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("oracle: ") + e.what());
    }
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);  // allow comments
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    check_keys(doc, "config",
               {"version", "seed", "threads", "grid", "bands", "path", "diffusion", "oracle",
                "gamma", "sample", "analyze", "ablate"});
    if (require<int>(doc, "config", "version") != 1)
        throw ConfigError("config: unsupported version (expected 1)");

    Config config;
    config.snapshot = doc;
    config.seed = get_or<uint64_t>(doc, "config", "seed", 0);
    config.threads = get_or<int>(doc, "config", "threads", 0);
    config.grid = parse_grid(doc.contains("grid") ? doc.at("grid") : json::object());
    config.bands = get_or<int>(doc, "config", "bands", 8);
    if (config.bands < 1) throw ConfigError("config: bands must be >= 1");

    if (doc.contains("path")) {
        const json& p = doc.at("path");
        check_keys(p, "path", {"kind"});
        const std::string kind = get_or<std::string>(p, "path", "kind", std::string("linear"));
        if (kind == "linear")
            config.path_kind = PathKind::linear;
        else if (kind == "vp_trig")
            config.path_kind = PathKind::vp_trig;
        else
            throw ConfigError("path: unknown kind '" + kind + "'");
    }
    if (doc.contains("diffusion")) config.diffusion = parse_diffusion(doc.at("diffusion"));
    if (doc.contains("oracle")) config.oracle = parse_oracle(doc.at("oracle"), config.grid);

    if (doc.contains("gamma")) config.gamma = parse_gamma(doc.at("gamma"));
    if (doc.contains("sample")) config.sample = parse_sample(doc.at("sample"));
    if (doc.contains("analyze")) config.analyze = parse_analyze(doc.at("analyze"), config.bands);
    if (doc.contains("ablate")) config.ablate = parse_ablate(doc.at("ablate"));
    return config;
}

}  // namespace cns::cli
