#include "cns/path.hpp"

#include <cmath>

namespace cns {

namespace {
constexpr double kHalfPi = 1.5707963267948966192313216916398;
}

// Canonical forms (data_at_one): linear alpha=t, sigma=1-t;
// vp_trig alpha=sin(pi t/2), sigma=cos(pi t/2). The data_at_zero variant
// evaluates the canonical form at 1-t, which flips derivative signs.

double PathSchedule::alpha(double t) const {
    const double s = canon_time(t);
    return kind_ == PathKind::linear ? s : std::sin(kHalfPi * s);
}

double PathSchedule::sigma(double t) const {
    const double s = canon_time(t);
    return kind_ == PathKind::linear ? 1.0 - s : std::cos(kHalfPi * s);
}

double PathSchedule::alpha_dot(double t) const {
    const double s = canon_time(t);
    const double d = kind_ == PathKind::linear ? 1.0 : kHalfPi * std::cos(kHalfPi * s);
    return dsign() * d;
}

double PathSchedule::sigma_dot(double t) const {
    const double s = canon_time(t);
    const double d = kind_ == PathKind::linear ? -1.0 : -kHalfPi * std::sin(kHalfPi * s);
    return dsign() * d;
}

Field interpolate(const Field& x0, const Field& eps, double t, const PathSchedule& path) {
    x0.check_same_shape(eps);
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("interpolate: t must lie in [0,1]");
    Field out = x0;
    out *= path.alpha(t);
    out.axpy(path.sigma(t), eps);
    return out;
}

namespace {

// alpha_dot*sigma - alpha*sigma_dot; constant 1 for linear, pi/2 for vp_trig,
// up to the convention sign. Solving the 2x2 system
//   v = alpha_dot x0 + sigma_dot eps,  x = alpha x0 + sigma eps
// gives x0 = (sigma v - sigma_dot x)/det and eps = (alpha_dot x - alpha v)/det.
double conversion_det(double t, const PathSchedule& path) {
    const double det = path.alpha_dot(t) * path.sigma(t) - path.alpha(t) * path.sigma_dot(t);
    if (std::abs(det) < 1e-14)
        throw std::invalid_argument("path conversion: degenerate schedule at this t");
    return det;
}

}  // namespace

Field clean_prediction(const Field& state, const Field& velocity, double t,
                       const PathSchedule& path) {
    state.check_same_shape(velocity);
    const double det = conversion_det(t, path);
    Field out = velocity;
    out *= path.sigma(t) / det;
    out.axpy(-path.sigma_dot(t) / det, state);
    return out;
}

Field noise_prediction(const Field& state, const Field& velocity, double t,
                       const PathSchedule& path) {
    state.check_same_shape(velocity);
    const double det = conversion_det(t, path);
    Field out = state;
    out *= path.alpha_dot(t) / det;
    out.axpy(-path.alpha(t) / det, velocity);
    return out;
}

Field score_from_velocity(const Field& state, const Field& velocity, double t,
                          const PathSchedule& path) {
    const double sig = path.sigma(t);
    if (sig <= 0.0)
        throw std::invalid_argument("score_from_velocity: score undefined where sigma(t) = 0");
    Field out = noise_prediction(state, velocity, t, path);
    out *= -1.0 / sig;
    return out;
}

Field velocity_from_predictions(const Field& x0_hat, const Field& eps_hat, double t,
                                const PathSchedule& path) {
    x0_hat.check_same_shape(eps_hat);
    Field out = x0_hat;
    out *= path.alpha_dot(t);
    out.axpy(path.sigma_dot(t), eps_hat);
    return out;
}

}  // namespace cns
