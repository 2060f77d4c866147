#include "cns/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "cns/text.hpp"

namespace cns {

double TiltConfig::exponent_at(double t) const {
    const double span = end_exponent - start_exponent;
    if (interpolation == TiltInterpolation::linear) return start_exponent + span * t;
    // exponential(rate): start + span * (1 - e^{-rate t}) / (1 - e^{-rate})
    const double denom = 1.0 - std::exp(-rate);
    if (std::abs(denom) < 1e-12) return start_exponent + span * t;  // rate -> 0 limit
    return start_exponent + span * (1.0 - std::exp(-rate * t)) / denom;
}

void RelaxationConfig::validate() const {
    if (!(gamma_power > 0.0)) throw std::invalid_argument("RelaxationConfig: gamma_power must be > 0");
    if (!(gamma_divider >= 1.0))
        throw std::invalid_argument("RelaxationConfig: gamma_divider must be >= 1");
    if (!(energy_scale > 0.0 && energy_scale <= 2.0))
        throw std::invalid_argument("RelaxationConfig: energy_scale must lie in (0, 2]");
    if (energy_scale < 0.9 || energy_scale > 1.01)
        std::cerr << "RelaxationConfig: energy_scale " << energy_scale
                  << " is outside the stable [0.9, 1.01] neighborhood\n";
    if (tilt && tilt->interpolation == TiltInterpolation::exponential && !(tilt->rate > 0.0))
        throw std::invalid_argument("RelaxationConfig: exponential tilt rate must be > 0");
}

std::vector<double> CnsSchedule::row_at(double t) const {
    if (times.empty()) throw std::invalid_argument("CnsSchedule: empty");
    if (t <= times.front()) return beta.front();
    if (t >= times.back()) return beta.back();
    size_t hi = 1;
    while (times[hi] < t) ++hi;
    const double w = (t - times[hi - 1]) / (times[hi] - times[hi - 1]);
    std::vector<double> row(band_count);
    for (int b = 0; b < band_count; ++b)
        row[b] = (1.0 - w) * beta[hi - 1][b] + w * beta[hi][b];
    return row;
}

void CnsSchedule::validate(const BandMap& map) const {
    if (times.size() != beta.size() || times.empty())
        throw std::invalid_argument("CnsSchedule: row count mismatch");
    if (band_count != map.band_count())
        throw std::invalid_argument("CnsSchedule: band count mismatch");
    std::vector<double> sq(band_count);
    for (const auto& row : beta) {
        if (static_cast<int>(row.size()) != band_count)
            throw std::invalid_argument("CnsSchedule: ragged rows");
        for (int b = 0; b < band_count; ++b) {
            if (!(row[b] > 0.0)) throw std::invalid_argument("CnsSchedule: beta must be > 0");
            sq[b] = row[b] * row[b];
        }
        if (std::abs(map.coordinate_mean(sq) - 1.0) > 1e-10)
            throw std::invalid_argument("CnsSchedule: row violates unit coordinate RMS");
    }
}

namespace {

std::vector<double> normalized_row(std::vector<double> profile, const BandMap& map) {
    std::vector<double> sq(profile.size());
    for (size_t b = 0; b < profile.size(); ++b) sq[b] = profile[b] * profile[b];
    const double mean_sq = map.coordinate_mean(sq);
    if (mean_sq > 0.0) {
        const double inv = 1.0 / std::sqrt(mean_sq);
        for (double& v : profile) v *= inv;
    } else {
        // No deficit anywhere: fall back to the uniform profile (the row scales
        // noise that the sampler never injects at the data endpoint anyway).
        std::fill(profile.begin(), profile.end(), 1.0);
    }
    return profile;
}

}  // namespace

CnsSchedule build_schedule(const GammaMatrix& gamma, const BandMap& map,
                           const RelaxationConfig& relax) {
    relax.validate();
    gamma.validate();
    if (gamma.band_count != map.band_count())
        throw std::invalid_argument("build_schedule: gamma does not match band map");

    CnsSchedule out;
    out.times = gamma.times;
    out.band_count = gamma.band_count;
    out.source_gamma = gamma.model_id;
    out.beta.reserve(gamma.rows());

    const int Nb = gamma.band_count;
    for (int k = 0; k < gamma.rows(); ++k) {
        std::vector<double> profile(Nb);
        bool any_deficit = false;
        for (int b = 0; b < Nb; ++b) {
            const double relaxed = std::pow(gamma.values[k][b] / relax.gamma_divider,
                                            relax.gamma_power);
            // Deficit floored at 1e-12 so fully resolved bands keep beta > 0.
            double deficit = 1.0 - relaxed;
            if (deficit > 1e-12) any_deficit = true;
            profile[b] = std::sqrt(std::max(1e-12, deficit));
        }
        if (!any_deficit) std::fill(profile.begin(), profile.end(), 0.0);  // uniform fallback
        if (relax.tilt) {
            const double a = relax.tilt->exponent_at(gamma.times[k]);
            for (int b = 0; b < Nb; ++b) profile[b] *= std::pow(map.profile_radius(b), a);
        }
        out.beta.push_back(normalized_row(std::move(profile), map));
    }
    out.validate(map);
    return out;
}

CnsSchedule mbm_schedule(const BandMap& map, const HurstSchedule& hurst, int steps) {
    if (steps < 1) throw std::invalid_argument("mbm_schedule: steps must be >= 1");
    CnsSchedule out;
    out.band_count = map.band_count();
    out.source_gamma = "mbm";
    for (int k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) / steps;
        out.times.push_back(t);
        out.beta.push_back(mbm_profile(map, hurst, t).scales);
    }
    out.validate(map);
    return out;
}

AblationMode ablation_mode_from_name(const std::string& name) {
    if (name == "constant_spectrum") return AblationMode::constant_spectrum;
    if (name == "shuffled") return AblationMode::shuffled;
    if (name == "inverted") return AblationMode::inverted;
    if (name == "partial_white") return AblationMode::partial_white;
    if (name == "random_unit_energy") return AblationMode::random_unit_energy;
    throw std::invalid_argument("unknown ablation mode: " + name);
}

const char* ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::constant_spectrum: return "constant_spectrum";
        case AblationMode::shuffled: return "shuffled";
        case AblationMode::inverted: return "inverted";
        case AblationMode::partial_white: return "partial_white";
        case AblationMode::random_unit_energy: return "random_unit_energy";
    }
    return "?";
}

CnsSchedule ablate_schedule(const CnsSchedule& schedule, const BandMap& map, AblationMode mode,
                            double fraction, RngStream& rng) {
    CnsSchedule out = schedule;
    const int T = schedule.rows();
    const int Nb = schedule.band_count;

    auto pick_rows = [&](int count) {
        std::vector<int> idx(T);
        std::iota(idx.begin(), idx.end(), 0);
        // Fisher-Yates prefix selection.
        for (int i = 0; i < count; ++i) {
            const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(T - i)));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(count);
        return idx;
    };

    switch (mode) {
        case AblationMode::constant_spectrum: {
            std::vector<double> mean(Nb, 0.0);
            for (const auto& row : schedule.beta)
                for (int b = 0; b < Nb; ++b) mean[b] += row[b];
            for (double& v : mean) v /= T;
            const std::vector<double> row = normalized_row(std::move(mean), map);
            for (auto& r : out.beta) r = row;
            break;
        }
        case AblationMode::shuffled: {
            for (int i = T - 1; i > 0; --i) {
                const int j = static_cast<int>(rng.below(static_cast<uint64_t>(i + 1)));
                std::swap(out.beta[i], out.beta[j]);
            }
            break;
        }
        case AblationMode::inverted: {
            std::reverse(out.beta.begin(), out.beta.end());
            break;
        }
        case AblationMode::partial_white: {
            if (fraction < 0.0 || fraction > 1.0)
                throw std::invalid_argument("ablate_schedule: fraction must lie in [0,1]");
            for (int k : pick_rows(static_cast<int>(fraction * T)))
                out.beta[k].assign(Nb, 1.0);
            break;
        }
        case AblationMode::random_unit_energy: {
            if (fraction < 0.0 || fraction > 1.0)
                throw std::invalid_argument("ablate_schedule: fraction must lie in [0,1]");
            for (int k : pick_rows(static_cast<int>(fraction * T))) {
                std::vector<double> row(Nb);
                for (double& v : row) v = std::abs(rng.normal()) + 1e-3;
                out.beta[k] = normalized_row(std::move(row), map);
            }
            break;
        }
    }
    out.validate(map);
    return out;
}

CnsNoiseSource::CnsNoiseSource(CnsSchedule schedule, BandMap map, bool empirical_whitening)
    : schedule_(std::move(schedule)), map_(std::move(map)), whitening_(empirical_whitening) {
    schedule_.validate(map_);
}

Field CnsNoiseSource::draw(RngStream& rng, int /*step*/, double t, const GridShape& shape) const {
    Field w = white_noise(shape, rng);
    std::vector<double> row = schedule_.row_at(t);
    if (!whitening_) {
        bool uniform = true;
        for (double v : row)
            if (v != 1.0) {
                uniform = false;
                break;
            }
        if (uniform) return w;  // identity coloring, kept exact
    }
    BandScaleProfile profile{std::move(row), whitening_ ? NormalizationMode::empirical_std
                                                        : NormalizationMode::analytic_rms};
    return color_noise(w, profile, map_);
}

Trajectory cns_sample(const VelocityModel& model, const PathSchedule& path,
                      const DiffusionSpec& diffusion, const CnsSchedule& schedule,
                      const BandMap& map, SolverConfig config, const Field& init,
                      bool empirical_whitening, RecordMode record) {
    CnsNoiseSource source(schedule, map, empirical_whitening);
    config.noise_source = &source;
    if (!is_stochastic(config.scheme))
        throw std::invalid_argument("cns_sample: CNS requires a stochastic scheme");
    return integrate(model, path, diffusion, config, init, record);
}

void save_schedule_csv(const CnsSchedule& schedule, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_schedule_csv: cannot open " + path);
    out << "t";
    for (int b = 0; b < schedule.band_count; ++b) out << ",band_" << b;
    out << '\n';
    for (int k = 0; k < schedule.rows(); ++k) {
        out << format_double(schedule.times[k]);
        for (int b = 0; b < schedule.band_count; ++b)
            out << ',' << format_double(schedule.beta[k][b]);
        out << '\n';
    }
}

}  // namespace cns
