#include "cns/solvers.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cns/parallel.hpp"

namespace cns {

// --- diffusion ------------------------------------------------------------ //

DiffusionSpec DiffusionSpec::custom(std::vector<double> times, std::vector<double> values) {
    DiffusionSpec spec;
    spec.family = DiffusionFamily::custom_table;
    spec.magnitude = 1.0;
    spec.table_times = std::move(times);
    spec.table_values = std::move(values);
    spec.validate();
    return spec;
}

void DiffusionSpec::validate() const {
    if (!(magnitude > 0.0)) throw std::invalid_argument("DiffusionSpec: magnitude must be > 0");
    if (family == DiffusionFamily::custom_table) {
        if (table_times.size() < 2 || table_times.size() != table_values.size())
            throw std::invalid_argument("DiffusionSpec: custom table needs >= 2 matching knots");
        for (size_t i = 1; i < table_times.size(); ++i)
            if (!(table_times[i] > table_times[i - 1]))
                throw std::invalid_argument("DiffusionSpec: table times must increase");
        for (double v : table_values)
            if (!(v >= 0.0)) throw std::invalid_argument("DiffusionSpec: D(t) must be >= 0");
    }
}

double DiffusionSpec::d_at(double t) const {
    switch (family) {
        case DiffusionFamily::constant:
            return magnitude;
        case DiffusionFamily::sigma_linear:
            // magnitude * sigma(t) of the canonical linear path.
            return magnitude * std::max(0.0, 1.0 - t);
        case DiffusionFamily::custom_table: {
            if (t <= table_times.front()) return magnitude * table_values.front();
            if (t >= table_times.back()) return magnitude * table_values.back();
            size_t hi = 1;
            while (table_times[hi] < t) ++hi;
            const double t0 = table_times[hi - 1], t1 = table_times[hi];
            const double w = (t - t0) / (t1 - t0);
            return magnitude * ((1.0 - w) * table_values[hi - 1] + w * table_values[hi]);
        }
    }
    return 0.0;
}

double DiffusionSpec::amplitude(double t) const { return std::sqrt(2.0 * d_at(t)); }

double DiffusionSpec::g_squared_integral() const {
    switch (family) {
        case DiffusionFamily::constant:
            return 2.0 * magnitude;
        case DiffusionFamily::sigma_linear:
            return magnitude;  // integral of 2m(1-t) over [0,1]
        case DiffusionFamily::custom_table: {
            // g^2 is piecewise linear, so the trapezoid over the knots is exact.
            double acc = 0.0;
            auto clip = [](double t) { return std::min(1.0, std::max(0.0, t)); };
            // Flat extension outside the knot range.
            if (table_times.front() > 0.0)
                acc += 2.0 * magnitude * table_values.front() * clip(table_times.front());
            for (size_t i = 1; i < table_times.size(); ++i) {
                const double a = clip(table_times[i - 1]), b = clip(table_times[i]);
                if (b <= a) continue;
                const double va = d_at(a), vb = d_at(b);
                acc += (vb + va) * (b - a);  // 2 * mean(D) * dt = mean(g^2) * dt
            }
            if (table_times.back() < 1.0)
                acc += 2.0 * magnitude * table_values.back() * (1.0 - clip(table_times.back()));
            return acc;
        }
    }
    return 0.0;
}

double DiffusionSpec::g_squared_max_slope() const {
    switch (family) {
        case DiffusionFamily::constant:
            return 0.0;
        case DiffusionFamily::sigma_linear:
            return 2.0 * magnitude;
        case DiffusionFamily::custom_table: {
            double peak = 0.0;
            for (size_t i = 1; i < table_times.size(); ++i) {
                const double slope = 2.0 * magnitude *
                                     (table_values[i] - table_values[i - 1]) /
                                     (table_times[i] - table_times[i - 1]);
                peak = std::max(peak, std::abs(slope));
            }
            return peak;
        }
    }
    return 0.0;
}

EnergyBudget energy_budget(const DiffusionSpec& diffusion, int steps) {
    if (steps < 1) throw std::invalid_argument("energy_budget: steps must be >= 1");
    const double dt = 1.0 / steps;
    double e_n = 0.0;
    for (int k = 0; k < steps; ++k) e_n += diffusion.g_squared(k * dt) * dt;
    return EnergyBudget{e_n, diffusion.g_squared_integral(),
                        diffusion.g_squared_max_slope() / (2.0 * steps)};
}

// --- noise sources --------------------------------------------------------- //

MbmNoiseSource::MbmNoiseSource(HurstSchedule schedule, BandMap map, bool empirical_whitening)
    : schedule_(schedule), map_(std::move(map)), whitening_(empirical_whitening) {
    schedule_.validate();
}

Field MbmNoiseSource::draw(RngStream& rng, int /*step*/, double t, const GridShape& shape) const {
    BandScaleProfile profile = mbm_profile(map_, schedule_, t);
    if (whitening_) profile.mode = NormalizationMode::empirical_std;
    return color_noise(white_noise(shape, rng), profile, map_);
}

// --- schemes ---------------------------------------------------------------- //

bool is_stochastic(Scheme scheme) {
    return scheme != Scheme::ode_euler && scheme != Scheme::ode_heun;
}

const char* scheme_name(Scheme scheme) {
    switch (scheme) {
        case Scheme::ode_euler: return "ode_euler";
        case Scheme::ode_heun: return "ode_heun";
        case Scheme::sde_euler_maruyama: return "sde_euler_maruyama";
        case Scheme::sde_heun: return "sde_heun";
        case Scheme::srk2: return "srk2";
        case Scheme::srk2s: return "srk2s";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    for (Scheme s : {Scheme::ode_euler, Scheme::ode_heun, Scheme::sde_euler_maruyama,
                     Scheme::sde_heun, Scheme::srk2, Scheme::srk2s})
        if (name == scheme_name(s)) return s;
    throw std::invalid_argument("unknown solver scheme: " + name);
}

SolverConfig scale_energy(SolverConfig config, double factor) {
    if (!(factor > 0.0)) throw std::invalid_argument("scale_energy: factor must be > 0");
    config.noise_amplitude_scale *= factor;
    return config;
}

namespace {

// Full SDE drift v + D(t) * score. When D(t) = 0 the score is skipped, which
// both avoids the sigma(t)=0 singularity and makes D==0 reduce to the ODE
// bitwise. Writes into `out`; `scratch` holds the velocity.
class DriftEvaluator {
public:
    DriftEvaluator(const VelocityModel& model, const PathSchedule& path,
                   const DiffusionSpec& diffusion)
        : model_(model), path_(path), diffusion_(diffusion) {}

    void velocity(Field& out, const Field& x, double t) const { out = model_.velocity(x, t); }

    void full_drift(Field& out, const Field& x, double t) const {
        out = model_.velocity(x, t);
        const double d = diffusion_.d_at(t);
        if (d == 0.0) return;
        if (auto native = model_.native_score(x, t)) {
            out.axpy(d, *native);
        } else {
            out.axpy(d, score_from_velocity(x, out, t, path_));
        }
    }

private:
    const VelocityModel& model_;
    const PathSchedule& path_;
    const DiffusionSpec& diffusion_;
};

void check_finite(const Field& x, int step) {
    for (int i = 0; i < x.size(); ++i)
        if (!std::isfinite(x[i]))
            throw IntegrationDivergedError(step, "integration diverged at step " +
                                                     std::to_string(step));
}

}  // namespace

Trajectory integrate(const VelocityModel& model, const PathSchedule& path,
                     const DiffusionSpec& diffusion, const SolverConfig& config,
                     const Field& init, RecordMode record) {
    if (config.steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
    if (!(init.shape() == model.shape()))
        throw std::invalid_argument("integrate: init shape does not match model shape");
    diffusion.validate();
    const bool stochastic = is_stochastic(config.scheme);
    if (stochastic && config.noise_source == nullptr)
        throw std::invalid_argument("integrate: SDE schemes require a noise source");

    const int T = config.steps;
    const double dt = 1.0 / T;
    const double sqrt_dt = std::sqrt(dt);
    const GridShape shape = init.shape();
    DriftEvaluator drift(model, path, diffusion);
    RngStream rng(config.seed);

    Trajectory traj;
    traj.stochastic = stochastic;
    traj.times.resize(T + 1);
    for (int k = 0; k <= T; ++k) traj.times[k] = static_cast<double>(k) / T;
    traj.per_step_energy.assign(T, 0.0);
    if (stochastic) traj.cumulative_injected = Field(shape);

    const bool keep_all = record != RecordMode::terminal;
    if (keep_all) traj.states.reserve(T + 1);
    traj.states.push_back(init);

    Field x = init;
    Field f1(shape), f2(shape), f3(shape), stage(shape);
    Field noise1(shape), noise2(shape), injected(shape);

    for (int k = 0; k < T; ++k) {
        const double t = traj.times[k];
        const double amp = stochastic ? diffusion.amplitude(t) * config.noise_amplitude_scale : 0.0;
        const bool last = (k == T - 1);
        bool injected_noise = false;

        switch (config.scheme) {
            case Scheme::ode_euler: {
                drift.velocity(f1, x, t);
                x.axpy(dt, f1);
                break;
            }
            case Scheme::ode_heun: {
                drift.velocity(f1, x, t);
                stage = x;
                stage.axpy(dt, f1);
                drift.velocity(f2, stage, t + dt);
                x.axpy(0.5 * dt, f1);
                x.axpy(0.5 * dt, f2);
                break;
            }
            case Scheme::sde_euler_maruyama: {
                drift.full_drift(f1, x, t);
                x.axpy(dt, f1);
                if (amp > 0.0 && !last) {
                    noise1 = config.noise_source->draw(rng, k, t, shape);
                    injected = noise1;
                    injected *= amp * sqrt_dt;
                    x += injected;
                    injected_noise = true;
                }
                break;
            }
            case Scheme::sde_heun: {
                // Predictor-corrector (stochastic Heun), trapezoidal amplitude;
                // weak order 2 for additive noise.
                if (amp > 0.0 && last) {
                    drift.full_drift(f1, x, t);
                    x.axpy(dt, f1);
                    break;
                }
                drift.full_drift(f1, x, t);
                if (amp > 0.0) noise1 = config.noise_source->draw(rng, k, t, shape);
                stage = x;
                stage.axpy(dt, f1);
                if (amp > 0.0) stage.axpy(amp * sqrt_dt, noise1);
                drift.full_drift(f2, stage, t + dt);
                x.axpy(0.5 * dt, f1);
                x.axpy(0.5 * dt, f2);
                if (amp > 0.0) {
                    const double amp_next =
                        diffusion.amplitude(t + dt) * config.noise_amplitude_scale;
                    injected = noise1;
                    injected *= 0.5 * (amp + amp_next) * sqrt_dt;
                    x += injected;
                    injected_noise = true;
                }
                break;
            }
            case Scheme::srk2:
            case Scheme::srk2s: {
                // Additive-noise stochastic Runge-Kutta. Both use the exact
                // iterated-integral pair I1 = sqrt(h) xi1,
                // I10 = h^{3/2} (xi1 + xi2/sqrt(3)) / 2, and inject
                //   g(t) I1 + (g(t+h) - g(t)) I10/h.
                // srk2: Ralston 2-stage drift; srk2s: Kutta 3-stage drift.
                if (amp > 0.0 && last) {
                    drift.full_drift(f1, x, t);
                    x.axpy(dt, f1);
                    break;
                }
                const bool noisy = amp > 0.0;
                double amp_next = 0.0;
                if (noisy) {
                    noise1 = config.noise_source->draw(rng, k, t, shape);
                    noise2 = config.noise_source->draw(rng, k, t, shape);
                    amp_next = diffusion.amplitude(t + dt) * config.noise_amplitude_scale;
                }
                // I10/h per coordinate, in units of sqrt(dt).
                const double i10_c1 = 0.5 * sqrt_dt;
                const double i10_c2 = 0.5 * sqrt_dt / std::sqrt(3.0);

                drift.full_drift(f1, x, t);
                if (config.scheme == Scheme::srk2) {
                    stage = x;
                    stage.axpy(0.75 * dt, f1);
                    if (noisy) {
                        stage.axpy(1.5 * amp * i10_c1, noise1);
                        stage.axpy(1.5 * amp * i10_c2, noise2);
                    }
                    drift.full_drift(f2, stage, t + 0.75 * dt);
                    x.axpy(dt / 3.0, f1);
                    x.axpy(2.0 * dt / 3.0, f2);
                } else {
                    stage = x;
                    stage.axpy(0.5 * dt, f1);
                    if (noisy) {
                        stage.axpy(1.5 * amp * i10_c1, noise1);
                        stage.axpy(1.5 * amp * i10_c2, noise2);
                    }
                    drift.full_drift(f2, stage, t + 0.5 * dt);
                    stage = x;
                    stage.axpy(-dt, f1);
                    stage.axpy(2.0 * dt, f2);
                    drift.full_drift(f3, stage, t + dt);
                    x.axpy(dt / 6.0, f1);
                    x.axpy(4.0 * dt / 6.0, f2);
                    x.axpy(dt / 6.0, f3);
                }
                if (noisy) {
                    injected = noise1;
                    injected *= amp * sqrt_dt + (amp_next - amp) * i10_c1;
                    injected.axpy((amp_next - amp) * i10_c2, noise2);
                    x += injected;
                    injected_noise = true;
                }
                break;
            }
        }

        check_finite(x, k);
        if (injected_noise) {
            traj.per_step_energy[k] = amp * amp * dt;
            traj.cumulative_injected += injected;
            if (record == RecordMode::full_with_increments) traj.injected_increments.push_back(injected);
        } else if (record == RecordMode::full_with_increments && stochastic) {
            traj.injected_increments.push_back(Field(shape));
        }
        if (keep_all) traj.states.push_back(x);
    }
    if (!keep_all) traj.states.push_back(x);
    return traj;
}

std::vector<Trajectory> sample_chains(const VelocityModel& model, const PathSchedule& path,
                                      const DiffusionSpec& diffusion, const SolverConfig& config,
                                      int chains, RecordMode record, int threads) {
    if (chains < 1) throw std::invalid_argument("sample_chains: chains must be >= 1");
    std::vector<Trajectory> out(chains);
    parallel_for(chains, threads, [&](int i) {
        RngStream stream = chain_stream(config.seed, static_cast<uint64_t>(i));
        Field init = white_noise(model.shape(), stream);
        SolverConfig chain_config = config;
        // Hand the remainder of the chain's stream to the integrator by
        // re-seeding it with a derived value drawn from the stream itself.
        chain_config.seed = stream.engine()();
        try {
            out[i] = integrate(model, path, diffusion, chain_config, init, record);
        } catch (const IntegrationDivergedError& e) {
            throw IntegrationDivergedError(e.step(), "chain " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

// --- flat binary store ------------------------------------------------------ //

namespace {
constexpr char kMagic[4] = {'C', 'N', 'S', 'B'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kDtypeF32 = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("frame store: truncated header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

void save_frames(const std::string& path, const std::vector<Field>& frames) {
    if (frames.empty()) throw std::invalid_argument("save_frames: no frames");
    const GridShape shape = frames[0].shape();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_frames: cannot open " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_u32(out, static_cast<uint32_t>(frames.size()));
    write_u32(out, static_cast<uint32_t>(shape.height));
    write_u32(out, static_cast<uint32_t>(shape.width));
    write_u32(out, static_cast<uint32_t>(shape.channels));
    write_u32(out, kDtypeF32);
    std::vector<float> buf(static_cast<size_t>(shape.volume()));
    for (const Field& frame : frames) {
        if (!(frame.shape() == shape)) throw std::invalid_argument("save_frames: mixed shapes");
        for (int i = 0; i < frame.size(); ++i) buf[i] = static_cast<float>(frame[i]);
        out.write(reinterpret_cast<const char*>(buf.data()),
                  static_cast<std::streamsize>(buf.size() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("save_frames: write failed for " + path);
}

std::vector<Field> load_frames(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_frames: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("load_frames: bad magic in " + path);
    const uint32_t version = read_u32(in);
    if (version != kVersion)
        throw std::runtime_error("load_frames: unsupported version in " + path);
    const uint32_t frames = read_u32(in);
    const uint32_t H = read_u32(in), W = read_u32(in), C = read_u32(in);
    const uint32_t dtype = read_u32(in);
    if (dtype != kDtypeF32) throw std::runtime_error("load_frames: unsupported dtype");
    if (frames == 0 || H == 0 || W == 0 || C == 0)
        throw std::runtime_error("load_frames: corrupt header in " + path);
    GridShape shape{static_cast<int>(H), static_cast<int>(W), static_cast<int>(C)};
    std::vector<Field> out;
    out.reserve(frames);
    std::vector<float> buf(static_cast<size_t>(shape.volume()));
    for (uint32_t k = 0; k < frames; ++k) {
        in.read(reinterpret_cast<char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * sizeof(float)));
        if (!in) throw std::runtime_error("load_frames: truncated file " + path);
        Field frame(shape);
        for (int i = 0; i < frame.size(); ++i) frame[i] = static_cast<double>(buf[i]);
        out.push_back(std::move(frame));
    }
    return out;
}

void save_step_energy_csv(const std::string& path, const Trajectory& trajectory) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_step_energy_csv: cannot open " + path);
    out << "step,t,energy\n";
    out.precision(17);
    for (size_t k = 0; k < trajectory.per_step_energy.size(); ++k)
        out << k << ',' << trajectory.times[k] << ',' << trajectory.per_step_energy[k] << '\n';
}

}  // namespace cns
