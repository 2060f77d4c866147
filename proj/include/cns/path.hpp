#pragma once

#include <stdexcept>

#include "cns/field.hpp"

namespace cns {

// Two time conventions exist for the interpolant x_t = alpha(t) x0 + sigma(t) eps:
//   data_at_one  — alpha(0)=0, sigma(0)=1: sampling runs noise -> data as t: 0 -> 1.
//                  This is the canonical convention used by every solver here.
//   data_at_zero — alpha(0)=1, sigma(0)=0: the usual forward-process convention.
// The two are bridged by t -> 1 - t.
enum class Convention { data_at_one, data_at_zero };

enum class PathKind { linear, vp_trig };

/// Interpolant coefficient schedule alpha(t), sigma(t) with derivatives.
class PathSchedule {
public:
    static PathSchedule linear(Convention convention = Convention::data_at_one) {
        return PathSchedule(PathKind::linear, convention);
    }
    static PathSchedule vp_trig(Convention convention = Convention::data_at_one) {
        return PathSchedule(PathKind::vp_trig, convention);
    }

    double alpha(double t) const;
    double sigma(double t) const;
    double alpha_dot(double t) const;
    double sigma_dot(double t) const;

    PathKind kind() const { return kind_; }
    Convention convention() const { return convention_; }

    /// Map a time into the opposite convention; an involution.
    static double map_convention(double t) { return 1.0 - t; }

private:
    PathSchedule(PathKind kind, Convention convention) : kind_(kind), convention_(convention) {}

    // Canonical (data_at_one) coefficient as a function of canonical time.
    double canon_time(double t) const {
        return convention_ == Convention::data_at_one ? t : 1.0 - t;
    }
    double dsign() const { return convention_ == Convention::data_at_one ? 1.0 : -1.0; }

    PathKind kind_;
    Convention convention_;
};

/// x_t = alpha(t) x0 + sigma(t) eps.
Field interpolate(const Field& x0, const Field& eps, double t, const PathSchedule& path);

/// Clean-data estimate implied by (state, velocity): for the canonical linear
/// path this is x + (1-t) v.
Field clean_prediction(const Field& state, const Field& velocity, double t,
                       const PathSchedule& path);

/// Noise estimate implied by (state, velocity).
Field noise_prediction(const Field& state, const Field& velocity, double t,
                       const PathSchedule& path);

/// Score -eps_hat / sigma(t); for the canonical linear path, (t v - x)/(1 - t).
/// Undefined (throws) at the data endpoint where sigma(t) = 0.
Field score_from_velocity(const Field& state, const Field& velocity, double t,
                          const PathSchedule& path);

/// Velocity implied by (state, clean prediction, noise prediction) — the
/// inverse of the conversions above.
Field velocity_from_predictions(const Field& x0_hat, const Field& eps_hat, double t,
                                const PathSchedule& path);

}  // namespace cns
