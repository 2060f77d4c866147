#include "cns/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "cns/parallel.hpp"
#include "cns/path.hpp"
#include "cns/text.hpp"

namespace cns {

SpectralGapReport spectral_gap(const std::vector<Field>& generated,
                               const std::vector<Field>& target, const BandMap& map) {
    if (generated.empty() || target.empty())
        throw std::invalid_argument("spectral_gap: empty sample set");
    SpectralGapReport report;
    report.band_radii = map.mean_radii();
    report.s_generated = psd(generated, map);
    report.s_target = psd(target, map);
    const int Nb = map.band_count();
    report.signed_log_error.assign(Nb, std::numeric_limits<double>::quiet_NaN());
    report.excluded.assign(Nb, false);

    double acc = 0.0;
    int used = 0;
    for (int b = 0; b < Nb; ++b) {
        if (!(report.s_target[b] > 0.0) || !(report.s_generated[b] > 0.0)) {
            report.excluded[b] = true;
            ++report.excluded_count;
            continue;
        }
        report.signed_log_error[b] = std::log10(report.s_generated[b] / report.s_target[b]);
        acc += std::abs(report.signed_log_error[b]);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("spectral_gap: every band excluded");
    report.log_mae = acc / used;
    return report;
}

namespace {

double band_cosine(const Field& a, const Field& b, int band, const BandMap& map, bool& ok) {
    const Field pa = project_band(a, band, map);
    const Field pb = project_band(b, band, map);
    const double na = std::sqrt(pa.squared_norm()), nb = std::sqrt(pb.squared_norm());
    if (!(na > 0.0) || !(nb > 0.0)) {
        ok = false;
        return 0.0;
    }
    ok = true;
    return dot(pa, pb) / (na * nb);
}

}  // namespace

PersistenceReport noise_persistence(const std::vector<Trajectory>& trajectories,
                                    const BandMap& map) {
    if (trajectories.empty()) throw std::invalid_argument("noise_persistence: no trajectories");
    const int Nb = map.band_count();
    PersistenceReport report;
    report.trajectories = static_cast<int>(trajectories.size());
    report.init_cosine.assign(Nb, 0.0);
    report.skipped.assign(Nb, 0);
    std::vector<int> init_used(Nb, 0), inj_used(Nb, 0);

    const bool any_injected = std::any_of(trajectories.begin(), trajectories.end(),
                                          [](const Trajectory& t) { return t.stochastic; });
    if (any_injected) report.injected_cosine.assign(Nb, 0.0);

    for (const Trajectory& traj : trajectories) {
        for (int b = 0; b < Nb; ++b) {
            bool ok = false;
            const double c = band_cosine(traj.initial_state(), traj.final_state(), b, map, ok);
            if (ok) {
                report.init_cosine[b] += c;
                ++init_used[b];
            } else {
                ++report.skipped[b];
            }
            if (traj.stochastic) {
                bool ok2 = false;
                const double c2 =
                    band_cosine(traj.cumulative_injected, traj.final_state(), b, map, ok2);
                if (ok2) {
                    report.injected_cosine[b] += c2;
                    ++inj_used[b];
                } else {
                    ++report.skipped[b];
                }
            }
        }
    }
    for (int b = 0; b < Nb; ++b) {
        if (init_used[b] > 0) report.init_cosine[b] /= init_used[b];
        if (any_injected && inj_used[b] > 0) report.injected_cosine[b] /= inj_used[b];
    }
    return report;
}

Field effective_score(const VelocityModel& model, const PathSchedule& path, const Field& state,
                      double t) {
    if (auto native = model.native_score(state, t)) return *native;
    return score_from_velocity(state, model.velocity(state, t), t, path);
}

EnergyDriftRecord energy_drift(const GaussianMixtureOracle& exact, const VelocityModel& perturbed,
                               const DiffusionSpec& diffusion, const BandMap& map,
                               const EnergyDriftConfig& config) {
    if (config.chains < 2) throw std::invalid_argument("energy_drift: need >= 2 chains");
    const PathSchedule& path = exact.path();
    const int T = config.steps;
    const int Nb = map.band_count();
    const GridShape shape = exact.shape();

    const int stride = std::max(1, config.correlation_stride);
    std::vector<int> corr_steps;
    for (int k = 0; k < T; k += stride) corr_steps.push_back(k);

    struct ChainOut {
        std::vector<double> ode_energy, sde_energy;
        std::vector<std::vector<double>> corr;  // corr_steps x bands
        std::vector<double> gap;                // per-band terminal energy gap
    };
    std::vector<ChainOut> chains(config.chains);

    parallel_for(config.chains, config.threads, [&](int i) {
        RngStream stream = chain_stream(config.seed, static_cast<uint64_t>(i));
        Field init = white_noise(shape, stream);
        const uint64_t sde_seed = stream.engine()();

        SolverConfig ode{Scheme::ode_euler, T, 0, nullptr, 1.0};
        Trajectory ode_traj =
            integrate(perturbed, path, diffusion, ode, init, RecordMode::full_states);

        WhiteNoiseSource white;
        SolverConfig sde{Scheme::sde_euler_maruyama, T, sde_seed, &white, 1.0};
        Trajectory sde_traj =
            integrate(perturbed, path, diffusion, sde, init, RecordMode::full_states);

        ChainOut& out = chains[i];
        out.ode_energy.resize(T + 1);
        out.sde_energy.resize(T + 1);
        for (int k = 0; k <= T; ++k) {
            out.ode_energy[k] = 0.5 * ode_traj.states[k].squared_norm();
            out.sde_energy[k] = 0.5 * sde_traj.states[k].squared_norm();
        }

        // State-error correlation along the stochastic path: per band, the
        // per-coordinate mean of Re(x_hat* err_hat) with err = s_model - s_exact.
        out.corr.assign(corr_steps.size(), std::vector<double>(Nb, 0.0));
        for (size_t idx = 0; idx < corr_steps.size(); ++idx) {
            const int k = corr_steps[idx];
            const double t = sde_traj.times[k];
            const Field& x = sde_traj.states[k];
            Field err = effective_score(perturbed, path, x, t);
            err -= exact.score(x, t);
            const Spectrum xs = forward_transform(x);
            const Spectrum es = forward_transform(err);
            std::vector<double>& acc = out.corr[idx];
            for (int c = 0; c < shape.channels; ++c)
                for (int iy = 0; iy < shape.height; ++iy)
                    for (int ix = 0; ix < shape.width; ++ix) {
                        const cplx prod = std::conj(xs.at(c, iy, ix)) * es.at(c, iy, ix);
                        acc[map.band_at(iy, ix)] += prod.real();
                    }
            for (int b = 0; b < Nb; ++b)
                acc[b] /= static_cast<double>(map.counts()[b]) * shape.channels;
        }

        std::vector<double> e_sde = band_energy(forward_transform(sde_traj.final_state()), map);
        std::vector<double> e_ode = band_energy(forward_transform(ode_traj.final_state()), map);
        out.gap.resize(Nb);
        for (int b = 0; b < Nb; ++b) out.gap[b] = e_sde[b] - e_ode[b];
    });

    EnergyDriftRecord record;
    record.chains = config.chains;
    record.times.resize(T + 1);
    for (int k = 0; k <= T; ++k) record.times[k] = static_cast<double>(k) / T;
    record.ode_energy.assign(T + 1, 0.0);
    record.sde_energy.assign(T + 1, 0.0);
    for (const ChainOut& c : chains)
        for (int k = 0; k <= T; ++k) {
            record.ode_energy[k] += c.ode_energy[k];
            record.sde_energy[k] += c.sde_energy[k];
        }
    for (int k = 0; k <= T; ++k) {
        record.ode_energy[k] /= config.chains;
        record.sde_energy[k] /= config.chains;
    }

    record.correlation_times.resize(corr_steps.size());
    for (size_t idx = 0; idx < corr_steps.size(); ++idx)
        record.correlation_times[idx] = record.times[corr_steps[idx]];
    record.correlation.assign(corr_steps.size(), std::vector<double>(Nb, 0.0));
    for (const ChainOut& c : chains)
        for (size_t idx = 0; idx < corr_steps.size(); ++idx)
            for (int b = 0; b < Nb; ++b) record.correlation[idx][b] += c.corr[idx][b];
    for (auto& row : record.correlation)
        for (double& v : row) v /= config.chains;

    record.excess.assign(Nb, 0.0);
    record.excess_se.assign(Nb, 0.0);
    for (const ChainOut& c : chains)
        for (int b = 0; b < Nb; ++b) record.excess[b] += c.gap[b];
    for (int b = 0; b < Nb; ++b) record.excess[b] /= config.chains;
    for (const ChainOut& c : chains)
        for (int b = 0; b < Nb; ++b) {
            const double d = c.gap[b] - record.excess[b];
            record.excess_se[b] += d * d;
        }
    for (int b = 0; b < Nb; ++b)
        record.excess_se[b] =
            std::sqrt(record.excess_se[b] / (config.chains - 1.0) / config.chains);

    record.target_energy = exact.band_target_energy(map);
    return record;
}

void save_spectral_gap_csv(const SpectralGapReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_spectral_gap_csv: cannot open " + path);
    out << "band,radius,s_generated,s_target,signed_log_error,excluded\n";
    for (size_t b = 0; b < report.band_radii.size(); ++b) {
        out << b << ',' << format_double(report.band_radii[b]) << ','
            << format_double(report.s_generated[b]) << ',' << format_double(report.s_target[b])
            << ',';
        if (report.excluded[b])
            out << "";
        else
            out << format_double(report.signed_log_error[b]);
        out << ',' << (report.excluded[b] ? 1 : 0) << '\n';
    }
    out << "# log_mae," << format_double(report.log_mae) << '\n';
}

void save_persistence_csv(const PersistenceReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_persistence_csv: cannot open " + path);
    const bool has_injected = !report.injected_cosine.empty();
    out << "band,init_cosine" << (has_injected ? ",injected_cosine" : "") << ",skipped\n";
    for (size_t b = 0; b < report.init_cosine.size(); ++b) {
        out << b << ',' << format_double(report.init_cosine[b]);
        if (has_injected) out << ',' << format_double(report.injected_cosine[b]);
        out << ',' << report.skipped[b] << '\n';
    }
}

void save_energy_drift_csv(const EnergyDriftRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_energy_drift_csv: cannot open " + path);
    out << "band,target_energy,excess,excess_se,z\n";
    for (size_t b = 0; b < record.excess.size(); ++b)
        out << b << ',' << format_double(record.target_energy[b]) << ','
            << format_double(record.excess[b]) << ',' << format_double(record.excess_se[b]) << ','
            << format_double(record.excess_z(static_cast<int>(b))) << '\n';
    out << "# times_and_energies\n";
    out << "t,ode_energy,sde_energy\n";
    for (size_t k = 0; k < record.times.size(); ++k)
        out << format_double(record.times[k]) << ',' << format_double(record.ode_energy[k]) << ','
            << format_double(record.sde_energy[k]) << '\n';
}

}  // namespace cns
