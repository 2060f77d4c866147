#pragma once

#include <cmath>
#include <functional>

#include "cns/rng.hpp"
#include "cns/solvers.hpp"

namespace cns {

/// Scalar test problem dx = f(x, t) dt + g(t) dw with additive noise; the
/// reference bench for the solver-order studies.
struct ScalarSde {
    std::function<double(double, double)> drift;      // f(x, t)
    std::function<double(double)> amplitude;          // g(t)
};

/// Iterated-integral pair for one step of size h built from two unit normals:
/// I1 = sqrt(h) z1, I10 = h^{3/2} (z1 + z2/sqrt(3)) / 2, so that
/// Var(I1) = h, Var(I10) = h^3/3, Cov = h^2/2.
struct WienerPair {
    double i1 = 0.0;
    double i10 = 0.0;

    static WienerPair from_normals(double z1, double z2, double h) {
        const double sqrt_h = std::sqrt(h);
        return {sqrt_h * z1, 0.5 * h * sqrt_h * (z1 + z2 / std::sqrt(3.0))};
    }
    static WienerPair draw(RngStream& rng, double h) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        return from_normals(z1, z2, h);
    }
};

/// One step of the named scheme. The tableaus mirror the field integrator:
///   sde_heun — trapezoidal predictor-corrector, amplitude (g(t)+g(t+h))/2;
///   srk2     — Ralston 2-stage drift with the I10 stage coupling;
///   srk2s    — Kutta 3-stage drift with the same noise treatment.
/// ODE schemes ignore the increments.
inline double scalar_step(Scheme scheme, const ScalarSde& sde, double x, double t, double h,
                          const WienerPair& w) {
    const auto f = [&](double xx, double tt) { return sde.drift(xx, tt); };
    switch (scheme) {
        case Scheme::ode_euler:
            return x + h * f(x, t);
        case Scheme::ode_heun: {
            const double k1 = f(x, t);
            const double k2 = f(x + h * k1, t + h);
            return x + 0.5 * h * (k1 + k2);
        }
        case Scheme::sde_euler_maruyama:
            return x + h * f(x, t) + sde.amplitude(t) * w.i1;
        case Scheme::sde_heun: {
            const double g0 = sde.amplitude(t), g1 = sde.amplitude(t + h);
            const double k1 = f(x, t);
            const double k2 = f(x + h * k1 + g0 * w.i1, t + h);
            return x + 0.5 * h * (k1 + k2) + 0.5 * (g0 + g1) * w.i1;
        }
        case Scheme::srk2: {
            const double g0 = sde.amplitude(t), g1 = sde.amplitude(t + h);
            const double k1 = f(x, t);
            const double h2 = x + 0.75 * h * k1 + 1.5 * (w.i10 / h) * g0;
            const double k2 = f(h2, t + 0.75 * h);
            return x + h * (k1 / 3.0 + 2.0 * k2 / 3.0) + g0 * w.i1 + (g1 - g0) * (w.i10 / h);
        }
        case Scheme::srk2s: {
            const double g0 = sde.amplitude(t), g1 = sde.amplitude(t + h);
            const double k1 = f(x, t);
            const double h2 = x + 0.5 * h * k1 + 1.5 * (w.i10 / h) * g0;
            const double k2 = f(h2, t + 0.5 * h);
            const double h3 = x - h * k1 + 2.0 * h * k2;
            const double k3 = f(h3, t + h);
            return x + h * (k1 + 4.0 * k2 + k3) / 6.0 + g0 * w.i1 + (g1 - g0) * (w.i10 / h);
        }
    }
    return x;
}

/// Integrate the scalar SDE over [t0, t1] in n steps.
inline double scalar_integrate(Scheme scheme, const ScalarSde& sde, double x0, double t0,
                               double t1, int n, RngStream& rng) {
    const double h = (t1 - t0) / n;
    double x = x0;
    for (int k = 0; k < n; ++k) {
        const WienerPair w = is_stochastic(scheme) ? WienerPair::draw(rng, h) : WienerPair{};
        x = scalar_step(scheme, sde, x, t0 + k * h, h, w);
    }
    return x;
}

}  // namespace cns
