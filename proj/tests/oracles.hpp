// Test-only oracles, deliberately independent of the library's solver paths:
// direct density formulas with explicit small-matrix inverses, and brute-force
// minimization over the epsilon-sphere.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double loglik_direct2(const double mu[2], const double k[4], const double x[2]) {
    const double det = k[0] * k[3] - k[1] * k[2];
    const double inv[4] = {k[3] / det, -k[1] / det, -k[2] / det, k[0] / det};
    const double d0 = x[0] - mu[0], d1 = x[1] - mu[1];
    const double quad = d0 * (inv[0] * d0 + inv[1] * d1) + d1 * (inv[2] * d0 + inv[3] * d1);
    return -std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

inline double loglik_direct3(const double mu[3], const double k[9], const double x[3]) {
    const double det = k[0] * (k[4] * k[8] - k[5] * k[7]) - k[1] * (k[3] * k[8] - k[5] * k[6]) +
                       k[2] * (k[3] * k[7] - k[4] * k[6]);
    double inv[9];
    inv[0] = (k[4] * k[8] - k[5] * k[7]) / det;
    inv[1] = (k[2] * k[7] - k[1] * k[8]) / det;
    inv[2] = (k[1] * k[5] - k[2] * k[4]) / det;
    inv[3] = (k[5] * k[6] - k[3] * k[8]) / det;
    inv[4] = (k[0] * k[8] - k[2] * k[6]) / det;
    inv[5] = (k[2] * k[3] - k[0] * k[5]) / det;
    inv[6] = (k[3] * k[7] - k[4] * k[6]) / det;
    inv[7] = (k[1] * k[6] - k[0] * k[7]) / det;
    inv[8] = (k[0] * k[4] - k[1] * k[3]) / det;
    double d[3] = {x[0] - mu[0], x[1] - mu[1], x[2] - mu[2]};
    double quad = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) quad += d[i] * inv[3 * i + j] * d[j];
    return -1.5 * std::log(2.0 * M_PI) - 0.5 * std::log(det) - 0.5 * quad;
}

// Brute-force minimum of L(x + delta) over ||delta|| = eps in 2-D:
// dense angle grid followed by golden-section refinement.
inline double sphere_min_loglik2(const double mu[2], const double k[4], const double x[2],
                                 double eps, int grid = 200000) {
    auto eval = [&](double theta) {
        const double xp[2] = {x[0] + eps * std::cos(theta), x[1] + eps * std::sin(theta)};
        return loglik_direct2(mu, k, xp);
    };
    double best = eval(0.0), best_theta = 0.0;
    for (int i = 1; i < grid; ++i) {
        const double theta = 2.0 * M_PI * i / grid;
        const double v = eval(theta);
        if (v < best) {
            best = v;
            best_theta = theta;
        }
    }
    double a = best_theta - 2.0 * (2.0 * M_PI / grid);
    double b = best_theta + 2.0 * (2.0 * M_PI / grid);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - gr * (b - a), d = a + gr * (b - a);
    for (int it = 0; it < 200 && (b - a) > 1e-13; ++it) {
        if (eval(c) < eval(d)) {
            b = d;
            d = c;
            c = b - gr * (b - a);
        } else {
            a = c;
            c = d;
            d = a + gr * (b - a);
        }
    }
    return std::min(best, eval(0.5 * (a + b)));
}

// 3-D: Fibonacci sphere sweep, then two rounds of local refinement in
// spherical coordinates around the incumbent.
inline double sphere_min_loglik3(const double mu[3], const double k[9], const double x[3],
                                 double eps, int grid = 300000) {
    auto eval_dir = [&](double ux, double uy, double uz) {
        const double xp[3] = {x[0] + eps * ux, x[1] + eps * uy, x[2] + eps * uz};
        return loglik_direct3(mu, k, xp);
    };
    const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
    double best = 1e300, bt = 0.0, bp = 0.0;
    for (int i = 0; i < grid; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / grid;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden_angle * i;
        const double v = eval_dir(r * std::cos(phi), r * std::sin(phi), z);
        if (v < best) {
            best = v;
            bt = std::acos(z);
            bp = phi;
        }
    }
    double half_t = 4.0 * M_PI / std::sqrt(static_cast<double>(grid));
    double half_p = half_t;
    for (int round = 0; round < 3; ++round) {
        double rb = best, rbt = bt, rbp = bp;
        const int steps = 81;
        for (int i = 0; i < steps; ++i)
            for (int j = 0; j < steps; ++j) {
                const double th = bt + half_t * (2.0 * i / (steps - 1) - 1.0);
                const double ph = bp + half_p * (2.0 * j / (steps - 1) - 1.0);
                const double st = std::sin(th);
                const double v = eval_dir(st * std::cos(ph), st * std::sin(ph), std::cos(th));
                if (v < rb) {
                    rb = v;
                    rbt = th;
                    rbp = ph;
                }
            }
        best = rb;
        bt = rbt;
        bp = rbp;
        half_t /= 20.0;
        half_p /= 20.0;
    }
    return best;
}

} // namespace oracle
