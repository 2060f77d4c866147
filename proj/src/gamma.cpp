#include "cns/gamma.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "cns/parallel.hpp"
#include "cns/text.hpp"

namespace cns {

namespace {
// Gamma runs are deterministic; the diffusion spec is never evaluated by the
// ODE schemes but integrate() still validates one.
DiffusionSpec diffusion_off() { return DiffusionSpec::sigma_linear(1.0); }
}  // namespace

std::vector<double> GammaMatrix::row_at(double t) const {
    if (times.empty()) throw std::invalid_argument("GammaMatrix: empty");
    if (t <= times.front()) return values.front();
    if (t >= times.back()) return values.back();
    size_t hi = 1;
    while (times[hi] < t) ++hi;
    const double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
    std::vector<double> row(band_count);
    for (int b = 0; b < band_count; ++b)
        row[b] = (1.0 - w) * values[hi - 1][b] + w * values[hi][b];
    return row;
}

void GammaMatrix::validate() const {
    if (times.size() != values.size() || times.empty())
        throw std::invalid_argument("GammaMatrix: row count mismatch");
    for (const auto& row : values) {
        if (static_cast<int>(row.size()) != band_count)
            throw std::invalid_argument("GammaMatrix: band count mismatch");
        for (double v : row)
            if (!(v >= 0.0 && v <= 1.0))
                throw std::invalid_argument("GammaMatrix: entry outside [0,1]");
    }
    for (double v : values.back())
        if (v != 1.0) throw std::invalid_argument("GammaMatrix: final row must be all ones");
    for (size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::invalid_argument("GammaMatrix: times must increase");
}

double gamma_target(double t, Convention convention) {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("gamma_target: t must lie in [0,1]");
    return convention == Convention::data_at_zero ? 1.0 - t : t;
}

std::vector<std::vector<double>> gamma_from_states(const std::vector<Field>& states,
                                                   const PathSchedule& path, const BandMap& map) {
    if (states.size() < 2) throw std::invalid_argument("gamma_from_states: need >= 2 states");
    const int T = static_cast<int>(states.size()) - 1;  // steps
    const double dt = 1.0 / T;
    const GridShape& shape = states[0].shape();
    const int Nb = map.band_count();

    const Spectrum final_spec = forward_transform(states[T]);
    // Denominator floor per band: 1e-12 of the band's mean final energy, so
    // zero-energy coordinates clamp instead of emitting 0/0.
    std::vector<double> floor_b = band_energy(final_spec, map);
    for (double& v : floor_b) v *= 1e-12;

    std::vector<std::vector<double>> rows(T + 1, std::vector<double>(Nb, 0.0));
    std::vector<double> coord_gamma(Nb);
    for (int k = 0; k <= T; ++k) {
        Field pred(shape);
        if (k == T) {
            pred = states[T];
        } else {
            const double t = k * dt;
            Field v = states[k + 1];
            v -= states[k];
            v *= 1.0 / dt;
            pred = clean_prediction(states[k], v, t, path);
        }
        const Spectrum pred_spec = forward_transform(pred);

        std::vector<double> acc(Nb, 0.0);
        for (int iy = 0; iy < shape.height; ++iy)
            for (int ix = 0; ix < shape.width; ++ix) {
                const int b = map.band_at(iy, ix);
                // Channel mean of the clamped per-coordinate progress.
                double ch_mean = 0.0;
                for (int c = 0; c < shape.channels; ++c) {
                    const double denom_raw = std::norm(final_spec.at(c, iy, ix));
                    const double num = std::norm(pred_spec.at(c, iy, ix) - final_spec.at(c, iy, ix));
                    const double denom = std::max(denom_raw, floor_b[b]);
                    double g;
                    if (denom == 0.0)
                        g = num == 0.0 ? 1.0 : 0.0;
                    else
                        g = 1.0 - num / denom;
                    ch_mean += std::min(1.0, std::max(0.0, g));
                }
                acc[b] += ch_mean / shape.channels;
            }
        for (int b = 0; b < Nb; ++b)
            rows[k][b] = map.counts()[b] > 0 ? acc[b] / map.counts()[b] : 1.0;
    }
    return rows;
}

GammaMatrix compute_gamma(const VelocityModel& model, const PathSchedule& path,
                          const GammaConfig& config, const BandMap& map) {
    if (config.steps < 2) throw std::invalid_argument("compute_gamma: steps must be >= 2");
    if (config.chains < 1) throw std::invalid_argument("compute_gamma: need >= 1 chain");
    if (is_stochastic(config.scheme))
        throw std::invalid_argument("compute_gamma: gamma is estimated from ODE trajectories");

    const int T = config.steps;
    const int Nb = map.band_count();

    std::vector<std::vector<std::vector<double>>> per_chain(config.chains);
    SolverConfig solver{config.scheme, T, 0, nullptr, 1.0};
    parallel_for(config.chains, config.threads, [&](int i) {
        RngStream stream = chain_stream(config.seed, static_cast<uint64_t>(i));
        Field init = white_noise(model.shape(), stream);
        SolverConfig chain_solver = solver;
        chain_solver.seed = stream.engine()();
        Trajectory traj = integrate(model, path, diffusion_off(), chain_solver, init,
                                    RecordMode::full_states);
        per_chain[i] = gamma_from_states(traj.states, path, map);
    });

    GammaMatrix out;
    out.band_count = Nb;
    out.grid = model.shape();
    out.sample_count = config.chains;
    out.times.resize(T + 1);
    for (int k = 0; k <= T; ++k) out.times[k] = static_cast<double>(k) / T;
    out.values.assign(T + 1, std::vector<double>(Nb, 0.0));

    // Kahan-compensated sum in fixed chain order, so results are identical
    // whatever the thread count.
    for (int k = 0; k <= T; ++k)
        for (int b = 0; b < Nb; ++b) {
            double sum = 0.0, comp = 0.0;
            for (int i = 0; i < config.chains; ++i) {
                const double y = per_chain[i][k][b] - comp;
                const double t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            double v = sum / config.chains;
            out.values[k][b] = std::min(1.0, std::max(0.0, v));
        }
    // The final prediction is the final state itself, exactly.
    for (int b = 0; b < Nb; ++b) out.values[T][b] = 1.0;
    return out;
}

void save_gamma(const GammaMatrix& matrix, const std::string& csv_path) {
    matrix.validate();
    std::ofstream out(csv_path);
    if (!out) throw std::runtime_error("save_gamma: cannot open " + csv_path);
    out << "t";
    for (int b = 0; b < matrix.band_count; ++b) out << ",band_" << b;
    out << '\n';
    for (int k = 0; k < matrix.rows(); ++k) {
        out << format_double(matrix.times[k]);
        for (int b = 0; b < matrix.band_count; ++b) out << ',' << format_double(matrix.values[k][b]);
        out << '\n';
    }

    nlohmann::json meta;
    meta["version"] = 1;
    meta["rows"] = matrix.rows();
    meta["bands"] = matrix.band_count;
    meta["height"] = matrix.grid.height;
    meta["width"] = matrix.grid.width;
    meta["channels"] = matrix.grid.channels;
    meta["samples"] = matrix.sample_count;
    meta["model"] = matrix.model_id;
    std::ofstream meta_out(csv_path + ".meta.json");
    if (!meta_out) throw std::runtime_error("save_gamma: cannot open meta sidecar");
    meta_out << meta.dump(2) << '\n';
}

GammaMatrix load_gamma(const std::string& csv_path) {
    std::ifstream in(csv_path);
    if (!in) throw std::runtime_error("load_gamma: cannot open " + csv_path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_gamma: empty file");

    int bands = 0;
    {
        std::stringstream header(line);
        std::string cell;
        std::getline(header, cell, ',');
        if (cell != "t") throw std::runtime_error("load_gamma: bad header");
        while (std::getline(header, cell, ',')) ++bands;
        if (bands < 1) throw std::runtime_error("load_gamma: no band columns");
    }

    GammaMatrix out;
    out.band_count = bands;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream row(line);
        std::string cell;
        if (!std::getline(row, cell, ',')) throw std::runtime_error("load_gamma: corrupt row");
        out.times.push_back(std::strtod(cell.c_str(), nullptr));
        std::vector<double> vals;
        while (std::getline(row, cell, ',')) vals.push_back(std::strtod(cell.c_str(), nullptr));
        if (static_cast<int>(vals.size()) != bands)
            throw std::runtime_error("load_gamma: truncated or corrupt row");
        out.values.push_back(std::move(vals));
    }
    if (out.times.empty()) throw std::runtime_error("load_gamma: no data rows");

    std::ifstream meta_in(csv_path + ".meta.json");
    if (meta_in) {
        nlohmann::json meta = nlohmann::json::parse(meta_in, nullptr, true, true);
        if (meta.value("version", 1) != 1) throw std::runtime_error("load_gamma: version mismatch");
        if (meta.value("rows", out.rows()) != out.rows() ||
            meta.value("bands", out.band_count) != out.band_count)
            throw std::runtime_error("load_gamma: meta/shape mismatch");
        out.grid = GridShape{meta.value("height", 1), meta.value("width", 1),
                             meta.value("channels", 1)};
        out.sample_count = meta.value("samples", 0);
        out.model_id = meta.value("model", std::string{});
    }
    out.validate();
    return out;
}

}  // namespace cns
