#pragma once

// Test-only reference implementations, kept independent of the library code
// paths they check.

#include "dynamix/systems.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace oracles {

/// Benettin-style maximum Lyapunov exponent: integrate the system together
/// with a tangent vector evolved by the Jacobian (finite-difference
/// directional derivative), renormalizing every step.
inline double benettin_lyapunov(const dynamix::SystemDef& sys, const std::vector<double>& x0,
                                double dt, int n_steps) {
    const int n = sys.dim;
    std::vector<double> x(x0), v(n, 0.0);
    v[0] = 1.0;

    auto rhs = [&](const std::vector<double>& state, std::vector<double>& out) {
        out.resize(n);
        sys.eval(state.data(), out.data());
    };
    // directional derivative J(x) v by central differences
    auto jac_mul = [&](const std::vector<double>& state, const std::vector<double>& dir,
                       std::vector<double>& out) {
        const double h = 1e-6;
        std::vector<double> xp(n), xm(n), fp(n), fm(n);
        for (int i = 0; i < n; ++i) {
            xp[i] = state[i] + h * dir[i];
            xm[i] = state[i] - h * dir[i];
        }
        rhs(xp, fp);
        rhs(xm, fm);
        out.resize(n);
        for (int i = 0; i < n; ++i) out[i] = (fp[i] - fm[i]) / (2.0 * h);
    };

    double log_sum = 0.0;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), K1(n), K2(n), K3(n), K4(n), tmp(n), vt(n);
    for (int step = 0; step < n_steps; ++step) {
        rhs(x, k1);
        jac_mul(x, v, K1);
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
        for (int i = 0; i < n; ++i) vt[i] = v[i] + 0.5 * dt * K1[i];
        rhs(tmp, k2);
        jac_mul(tmp, vt, K2);
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
        for (int i = 0; i < n; ++i) vt[i] = v[i] + 0.5 * dt * K2[i];
        rhs(tmp, k3);
        jac_mul(tmp, vt, K3);
        for (int i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
        for (int i = 0; i < n; ++i) vt[i] = v[i] + dt * K3[i];
        rhs(tmp, k4);
        jac_mul(tmp, vt, K4);
        for (int i = 0; i < n; ++i) {
            x[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            v[i] += (dt / 6.0) * (K1[i] + 2.0 * K2[i] + 2.0 * K3[i] + K4[i]);
        }
        double norm = 0.0;
        for (double c : v) norm += c * c;
        norm = std::sqrt(norm);
        log_sum += std::log(norm);
        for (double& c : v) c /= norm;
    }
    return log_sum / (n_steps * dt);
}

/// Published rectified-Adam update, written straight from the algorithm
/// listing as an independent cross-check.
struct ReferenceRadam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double m = 0.0, v = 0.0;
    long t = 0;

    double update(double theta, double grad, double lr) {
        t += 1;
        m = beta1 * m + (1 - beta1) * grad;
        v = beta2 * v + (1 - beta2) * grad * grad;
        const double m_hat = m / (1 - std::pow(beta1, t));
        const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
        const double rho =
            rho_inf - 2.0 * t * std::pow(beta2, t) / (1.0 - std::pow(beta2, t));
        if (rho > 4.0) {
            const double v_hat = std::sqrt(v / (1 - std::pow(beta2, t)));
            const double r = std::sqrt(((rho - 4) * (rho - 2) * rho_inf) /
                                       ((rho_inf - 4) * (rho_inf - 2) * rho));
            return theta - lr * r * m_hat / (v_hat + eps);
        }
        return theta - lr * m_hat;
    }
};

/// Naive double-loop mean squared error.
inline double naive_mse(const dynamix::Trajectory& a, const dynamix::Trajectory& b) {
    double acc = 0.0;
    for (int i = 0; i < a.rows; ++i)
        for (int t = 0; t < a.cols; ++t) {
            const double d = a.at(i, t) - b.at(i, t);
            acc += d * d;
        }
    return acc / (static_cast<double>(a.rows) * a.cols);
}

} // namespace oracles
