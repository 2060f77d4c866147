#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "cns/bands.hpp"
#include "cns/path.hpp"
#include "cns/rng.hpp"

namespace cns {

/// Pure-function velocity field v(x, t). Models with a native score estimate
/// (the analytic oracles and their perturbed wrappers) override native_score;
/// otherwise solvers derive the score from the velocity via the path algebra.
class VelocityModel {
public:
    virtual ~VelocityModel() = default;

    virtual GridShape shape() const = 0;
    virtual Field velocity(const Field& state, double t) const = 0;

    virtual std::optional<Field> native_score(const Field& /*state*/, double /*t*/) const {
        return std::nullopt;
    }
};

/// Isotropic Gaussian mixture over whole fields: x0 ~ sum_i w_i N(mu_i, var_i I).
/// Under the interpolant path the marginal at time t is the mixture
/// N(alpha mu_i, (alpha^2 var_i + sigma^2) I), which gives closed-form
/// posteriors, velocities, and scores — the reference "model" of this library.
class GaussianMixtureOracle : public VelocityModel {
public:
    GaussianMixtureOracle(std::vector<double> weights, std::vector<Field> means,
                          std::vector<double> variances, PathSchedule path);

    GridShape shape() const override { return shape_; }
    Field velocity(const Field& state, double t) const override;
    std::optional<Field> native_score(const Field& state, double t) const override;

    /// E[x0 | x_t] under the mixture posterior.
    Field posterior_mean(const Field& state, double t) const;

    /// grad_x log p_t(x); equals -E[eps|x]/sigma(t) wherever sigma > 0 and
    /// stays finite at the data endpoint for positive component variances.
    Field score(const Field& state, double t) const;

    double log_marginal(const Field& state, double t) const;

    /// Draw x0 from the mixture.
    Field sample_data(RngStream& rng) const;

    /// Expected per-coordinate band energy of the data spectrum:
    /// mean over band coords of sum_i w_i |mu_hat_i(f)|^2 + H*W*sum_i w_i var_i.
    std::vector<double> band_target_energy(const BandMap& map) const;

    const PathSchedule& path() const { return path_; }
    int component_count() const { return static_cast<int>(weights_.size()); }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<Field>& means() const { return means_; }
    const std::vector<double>& variances() const { return variances_; }

private:
    // Posterior responsibilities via log-sum-exp; also returns per-component
    // marginal variances s_i^2 = alpha^2 var_i + sigma^2.
    void responsibilities(const Field& state, double t, std::vector<double>& resp,
                          std::vector<double>& marg_var) const;

    std::vector<double> weights_;
    std::vector<Field> means_;
    std::vector<double> variances_;
    PathSchedule path_;
    GridShape shape_;
};

Field gmm_velocity(const GaussianMixtureOracle& oracle, const Field& state, double t);

/// A standard-normal single-component oracle on a 1x1x1 grid; the workhorse of
/// the moment-matching tests (the terminal marginal is N(0,1) exactly).
GaussianMixtureOracle standard_normal_oracle(const PathSchedule& path);

/// Synthetic structured oracle: `components` means drawn with a |rho|^-spectral_decay
/// amplitude spectrum and random phases, plus isotropic component variance.
GaussianMixtureOracle structured_oracle(const GridShape& shape, int components,
                                        double spectral_decay, double mean_energy,
                                        double component_variance, uint64_t seed,
                                        const PathSchedule& path);

// ---------------------------------------------------------------------------
// Synthetic model-error wrappers. Each scales a per-band quantity of the exact
// oracle by (1 - alpha_f(t)), emulating a network that underestimates where a
// band is still unresolved.

enum class PerturbationMode {
    score_scale,        // native score scaled per band; velocity stays exact
    velocity_shrink,    // velocity scaled per band; score derived from it downstream
    prediction_shrink,  // posterior clean estimate scaled per band inside the score
    // MSE-regression error: the score is shrunk per band and the clean-content
    // term inside it is conservatively shrunk by the same factor,
    //   s_model = (1-a) s* - a (t/sigma^2) E[x0|x] per band.
    // Its band energy drift flips sign where the target energy crosses the
    // white-noise level (for g^2 ~ (1-t)^2 the crossover sits exactly there).
    regression_to_mean,
};

struct PerturbationSpec {
    PerturbationMode mode = PerturbationMode::score_scale;
    std::vector<double> alphas;     // per band, in [0,1)
    // If true, alpha_f(t) decays as the band resolves along the exact marginal:
    // alpha_f(t) = alphas[f] * (1 - snr_f(t)), snr_f = a^2 R_f / (a^2 R_f + s^2 N).
    bool gate_by_resolution = false;
    // regression_to_mean only: relative severity of the conservative
    // clean-content term against the plain score shrink.
    double prediction_weight = 1.0;
};

class PerturbedOracle : public VelocityModel {
public:
    PerturbedOracle(std::shared_ptr<const GaussianMixtureOracle> oracle, BandMap map,
                    PerturbationSpec spec);

    GridShape shape() const override { return oracle_->shape(); }
    Field velocity(const Field& state, double t) const override;
    std::optional<Field> native_score(const Field& state, double t) const override;

    /// Effective per-band shrink factors (1 - alpha_f(t)).
    std::vector<double> band_factors(double t) const;

private:
    Field shrink_bands(const Field& field, const std::vector<double>& factors) const;

    std::shared_ptr<const GaussianMixtureOracle> oracle_;
    BandMap map_;
    PerturbationSpec spec_;
    std::vector<double> target_energy_;  // per band, for the resolution gate
};

}  // namespace cns
