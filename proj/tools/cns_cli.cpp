#include <filesystem>
#include <iostream>
#include <memory>

#include "CLI11.hpp"

#include "cns/diagnostics.hpp"
#include "cns/gamma.hpp"
#include "cns/parallel.hpp"
#include "cns/schedule.hpp"
#include "cns/svg.hpp"
#include "cns/text.hpp"
#include "cns/version.hpp"

#include "config.hpp"
#include "manifest.hpp"

namespace fs = std::filesystem;
using namespace cns;
using cns::cli::Config;
using cns::cli::ConfigError;
using cns::cli::Manifest;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    int threads = 0;
    int64_t seed_override = -1;
};

Config prepare(const CommonArgs& args) {
    Config config = cns::cli::load_config(args.config_path);
    if (args.threads > 0) config.threads = args.threads;
    if (config.threads <= 0) config.threads = default_threads();
    if (args.seed_override >= 0) {
        config.seed = static_cast<uint64_t>(args.seed_override);
        config.snapshot["seed"] = config.seed;
    }
    fs::create_directories(args.out_dir);
    return config;
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------

int cmd_gen_gamma(const CommonArgs& args) {
    Config config = prepare(args);
    if (!config.gamma) throw ConfigError("gen-gamma: config needs a gamma block");
    Manifest manifest("gen-gamma", config.snapshot, config.seed);

    PathSchedule path = config.path();
    BandMap map = build_band_map(config.grid, config.bands);
    GammaMatrix gamma;

    if (!config.gamma->trajectory_files.empty()) {
        // External trajectories: equal-weight average of per-file estimates.
        std::vector<std::vector<double>> acc;
        int rows = 0;
        for (const std::string& file : config.gamma->trajectory_files) {
            manifest.add_input(file);
            std::vector<Field> states = load_frames(file);
            auto one = gamma_from_states(states, path, map);
            if (acc.empty()) {
                acc = one;
                rows = static_cast<int>(one.size());
            } else {
                if (static_cast<int>(one.size()) != rows)
                    throw ConfigError("gen-gamma: trajectory files disagree on step count");
                for (int k = 0; k < rows; ++k)
                    for (int b = 0; b < map.band_count(); ++b) acc[k][b] += one[k][b];
            }
        }
        const double n = static_cast<double>(config.gamma->trajectory_files.size());
        for (auto& row : acc)
            for (double& v : row) v = std::min(1.0, std::max(0.0, v / n));
        gamma.values = std::move(acc);
        gamma.band_count = map.band_count();
        gamma.grid = config.grid;
        gamma.sample_count = static_cast<int>(n);
        for (int k = 0; k < rows; ++k)
            gamma.times.push_back(static_cast<double>(k) / (rows - 1));
        for (double& v : gamma.values.back()) v = 1.0;
    } else {
        GaussianMixtureOracle oracle = config.oracle.build(config.grid, path);
        GammaConfig gc{config.gamma->steps, config.gamma->chains, config.seed, Scheme::ode_euler,
                       config.threads};
        gamma = compute_gamma(oracle, path, gc, map);
    }
    gamma.model_id = "oracle";

    const std::string gamma_path = join(args.out_dir, "gamma.csv");
    save_gamma(gamma, gamma_path);
    write_heatmap_svg(join(args.out_dir, "gamma.svg"), "gamma(f,t)", gamma.values);
    const std::string bands_path = join(args.out_dir, "bands.csv");
    map.save_csv(bands_path);

    manifest.add_output(gamma_path);
    manifest.add_output(bands_path);
    manifest.write(args.out_dir);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_sample(const CommonArgs& args) {
    Config config = prepare(args);
    if (!config.sample) throw ConfigError("sample: config needs a sample block");
    const cns::cli::SampleMode& mode = *config.sample;
    Manifest manifest("sample", config.snapshot, config.seed);

    PathSchedule path = config.path();
    BandMap map = build_band_map(config.grid, config.bands);
    GaussianMixtureOracle oracle = config.oracle.build(config.grid, path);

    // Resolve the noise source.
    std::unique_ptr<NoiseSource> source;
    std::unique_ptr<CnsSchedule> schedule;
    double amplitude_scale = 1.0;
    if (mode.scheme == "sde") {
        source = std::make_unique<WhiteNoiseSource>();
    } else if (mode.scheme == "cns") {
        manifest.add_input(mode.gamma_file);
        GammaMatrix gamma = load_gamma(mode.gamma_file);
        if (gamma.band_count != map.band_count())
            throw ConfigError("sample: gamma file band count does not match config bands");
        schedule = std::make_unique<CnsSchedule>(build_schedule(gamma, map, mode.relax));
        source = std::make_unique<CnsNoiseSource>(*schedule, map, mode.whitening);
        amplitude_scale = mode.relax.energy_scale;
        save_schedule_csv(*schedule, join(args.out_dir, "schedule.csv"));
    } else if (mode.scheme == "mbm") {
        source = std::make_unique<MbmNoiseSource>(mode.hurst, map, mode.whitening);
    }

    SolverConfig solver{mode.solver, mode.steps, config.seed, source.get(), 1.0};
    solver = scale_energy(solver, amplitude_scale);
    const bool stochastic = is_stochastic(mode.solver);

    std::vector<Field> fixed_inits;
    if (!mode.init_file.empty()) {
        manifest.add_input(mode.init_file);
        fixed_inits = load_frames(mode.init_file);
        if (static_cast<int>(fixed_inits.size()) < mode.chains)
            throw ConfigError("sample: init file has fewer frames than chains");
    }

    const RecordMode record =
        mode.store_trajectories ? RecordMode::full_states : RecordMode::terminal;
    std::vector<Trajectory> runs(mode.chains);
    parallel_for(mode.chains, config.threads, [&](int i) {
        RngStream stream = chain_stream(config.seed, static_cast<uint64_t>(i));
        Field init = white_noise(config.grid, stream);
        if (!fixed_inits.empty()) init = fixed_inits[i];
        SolverConfig chain_solver = solver;
        chain_solver.seed = stream.engine()();
        try {
            runs[i] = integrate(oracle, path, config.diffusion, chain_solver, init, record);
        } catch (const IntegrationDivergedError& e) {
            throw IntegrationDivergedError(e.step(),
                                           "chain " + std::to_string(i) + ": " + e.what());
        }
    });

    std::vector<Field> finals, inits, injected;
    for (const Trajectory& t : runs) {
        finals.push_back(t.final_state());
        inits.push_back(t.initial_state());
        if (stochastic) injected.push_back(t.cumulative_injected);
    }
    const std::string samples_path = join(args.out_dir, "samples.bin");
    const std::string inits_path = join(args.out_dir, "inits.bin");
    save_frames(samples_path, finals);
    save_frames(inits_path, inits);
    manifest.add_output(samples_path);
    manifest.add_output(inits_path);
    if (stochastic) {
        const std::string injected_path = join(args.out_dir, "injected.bin");
        save_frames(injected_path, injected);
        manifest.add_output(injected_path);
    }
    const std::string energies_path = join(args.out_dir, "energies.csv");
    save_step_energy_csv(energies_path, runs.front());
    manifest.add_output(energies_path);
    if (mode.store_trajectories) {
        fs::create_directories(join(args.out_dir, "trajectories"));
        for (int i = 0; i < mode.chains; ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "trajectories/traj_%05d.bin", i);
            const std::string traj_path = join(args.out_dir, name);
            save_frames(traj_path, runs[i].states);
            manifest.add_output(traj_path);
        }
    }
    manifest.write(args.out_dir);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_analyze(const CommonArgs& args) {
    Config config = prepare(args);
    if (!config.analyze) throw ConfigError("analyze: config needs an analyze block");
    const cns::cli::AnalyzeMode& mode = *config.analyze;
    Manifest manifest("analyze", config.snapshot, config.seed);

    PathSchedule path = config.path();
    BandMap map = build_band_map(config.grid, config.bands);

    if (!mode.generated_file.empty()) {
        manifest.add_input(mode.generated_file);
        std::vector<Field> generated = load_frames(mode.generated_file);

        std::vector<Field> target;
        if (!mode.target_file.empty()) {
            manifest.add_input(mode.target_file);
            target = load_frames(mode.target_file);
        } else {
            GaussianMixtureOracle oracle = config.oracle.build(config.grid, path);
            RngStream rng(mix_seed(config.seed + 1));
            for (int i = 0; i < mode.target_samples; ++i)
                target.push_back(oracle.sample_data(rng));
        }
        SpectralGapReport report = spectral_gap(generated, target, map);
        const std::string gap_path = join(args.out_dir, "spectral_gap.csv");
        save_spectral_gap_csv(report, gap_path);
        manifest.add_output(gap_path);
        if (mode.svg) {
            write_line_chart_svg(join(args.out_dir, "spectral_gap.svg"), "radial PSD",
                                 report.band_radii,
                                 {{"generated", report.s_generated}, {"target", report.s_target}},
                                 true);
        }

        if (!mode.inits_file.empty()) {
            manifest.add_input(mode.inits_file);
            std::vector<Field> inits = load_frames(mode.inits_file);
            std::vector<Field> injected;
            if (!mode.injected_file.empty()) {
                manifest.add_input(mode.injected_file);
                injected = load_frames(mode.injected_file);
            }
            if (inits.size() != generated.size() ||
                (!injected.empty() && injected.size() != generated.size()))
                throw std::runtime_error("analyze: store sizes disagree");
            std::vector<Trajectory> trajectories;
            for (size_t i = 0; i < generated.size(); ++i) {
                Trajectory t;
                t.times = {0.0, 1.0};
                t.states = {inits[i], generated[i]};
                if (!injected.empty()) {
                    t.stochastic = true;
                    t.cumulative_injected = injected[i];
                }
                trajectories.push_back(std::move(t));
            }
            PersistenceReport persistence = noise_persistence(trajectories, map);
            const std::string pers_path = join(args.out_dir, "persistence.csv");
            save_persistence_csv(persistence, pers_path);
            manifest.add_output(pers_path);
            if (mode.svg) {
                std::vector<SvgSeries> series{{"init_vs_final", persistence.init_cosine}};
                if (!persistence.injected_cosine.empty())
                    series.push_back({"injected_vs_final", persistence.injected_cosine});
                write_line_chart_svg(join(args.out_dir, "persistence.svg"),
                                     "band cosine similarity", map.mean_radii(), series, false);
            }
        }
    }

    if (mode.drift) {
        GaussianMixtureOracle oracle = config.oracle.build(config.grid, path);
        auto shared = std::make_shared<GaussianMixtureOracle>(oracle);
        PerturbedOracle perturbed(shared, map, mode.drift->perturbation);
        EnergyDriftConfig dc{mode.drift->steps, mode.drift->chains, config.seed, config.threads,
                             mode.drift->correlation_stride};
        EnergyDriftRecord record =
            energy_drift(*shared, perturbed, config.diffusion, map, dc);
        const std::string drift_path = join(args.out_dir, "energy_drift.csv");
        save_energy_drift_csv(record, drift_path);
        manifest.add_output(drift_path);
        if (mode.svg) {
            write_line_chart_svg(join(args.out_dir, "energy_drift.svg"), "mean state energy",
                                 record.times,
                                 {{"ode", record.ode_energy}, {"sde", record.sde_energy}}, false);
        }
    }
    manifest.write(args.out_dir);
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_ablate(const CommonArgs& args) {
    Config config = prepare(args);
    if (!config.ablate) throw ConfigError("ablate: config needs an ablate block");
    const cns::cli::AblateMode& mode = *config.ablate;
    Manifest manifest("ablate", config.snapshot, config.seed);

    PathSchedule path = config.path();
    BandMap map = build_band_map(config.grid, config.bands);
    GaussianMixtureOracle oracle = config.oracle.build(config.grid, path);

    manifest.add_input(mode.gamma_file);
    GammaMatrix gamma = load_gamma(mode.gamma_file);
    CnsSchedule base = build_schedule(gamma, map, mode.relax);

    std::vector<Field> target;
    {
        RngStream rng(mix_seed(config.seed + 1));
        for (int i = 0; i < mode.target_samples; ++i) target.push_back(oracle.sample_data(rng));
    }

    auto run_log_mae = [&](const CnsSchedule& schedule) {
        std::vector<Field> finals(mode.chains);
        parallel_for(mode.chains, config.threads, [&](int i) {
            RngStream stream = chain_stream(config.seed, static_cast<uint64_t>(i));
            Field init = white_noise(config.grid, stream);
            SolverConfig solver{Scheme::sde_euler_maruyama, mode.steps, stream.engine()(),
                                nullptr, 1.0};
            solver = scale_energy(solver, mode.relax.energy_scale);
            finals[i] = cns_sample(oracle, path, config.diffusion, schedule, map, solver, init,
                                   mode.whitening, RecordMode::terminal)
                            .final_state();
        });
        return spectral_gap(finals, target, map).log_mae;
    };

    const std::string csv_path = join(args.out_dir, "ablation.csv");
    std::ofstream csv(csv_path);
    if (!csv) throw std::runtime_error("ablate: cannot open " + csv_path);
    csv << "mode,fraction,log_mae\n";
    RngStream ablation_rng(mix_seed(config.seed + 2));
    for (const std::string& name : mode.modes) {
        CnsSchedule variant = name == "none"
                                  ? base
                                  : ablate_schedule(base, map, ablation_mode_from_name(name),
                                                    mode.fraction, ablation_rng);
        const std::string sched_path = join(args.out_dir, "schedule_" + name + ".csv");
        save_schedule_csv(variant, sched_path);
        manifest.add_output(sched_path);
        csv << name << ',' << format_double(mode.fraction) << ','
            << format_double(run_log_mae(variant)) << '\n';
    }
    csv.close();
    manifest.add_output(csv_path);
    manifest.write(args.out_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"colored-noise sampling toolkit"};
    app.set_version_flag("--version", kLibraryVersion);
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", args.config_path, "config file (JSON)")->required();
        cmd->add_option("--out", args.out_dir, "output directory")->required();
        cmd->add_option("--threads", args.threads, "worker cap (default: machine)");
        cmd->add_option("--seed", args.seed_override, "override the config seed");
    };
    CLI::App* gen = app.add_subcommand("gen-gamma", "estimate the gamma(f,t) matrix");
    CLI::App* sample = app.add_subcommand("sample", "run a sampling experiment");
    CLI::App* analyze = app.add_subcommand("analyze", "spectral and energy reports");
    CLI::App* ablate = app.add_subcommand("ablate", "schedule ablation sweep");
    for (CLI::App* cmd : {gen, sample, analyze, ablate}) add_common(cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_gamma(args);
        if (sample->parsed()) return cmd_sample(args);
        if (analyze->parsed()) return cmd_analyze(args);
        if (ablate->parsed()) return cmd_ablate(args);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const IntegrationDivergedError& e) {
        std::cerr << "numerical divergence: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "io error: " << e.what() << '\n';
        return 4;
    }
}
