#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "flowguard/matrix.hpp"
#include "flowguard/numerics.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

// Linear (Gaussian) generative model: x ~ N(mu, cov).
struct GaussianParams {
    std::vector<double> mu;
    SymMatrix cov;

    int dim() const { return cov.dim; }

    // sigma^2 if cov is spherical within `tol` relative, nullopt otherwise.
    std::optional<double> spherical_sigma2(double tol = 1e-10) const;
};

// Outcome of an exact likelihood attack.
struct PerturbationResult {
    std::vector<double> delta;
    std::optional<double> eta;
    double loglik_before = 0.0; // nats
    double loglik_after = 0.0;  // nats
    bool hard_case = false;
    int solver_iters = 0;
};

struct AdvTrainSchedule {
    double epsilon = 0.0;
    int steps = 0;
    double alpha = 0.0; // inflation factor, always alpha_factor(n, epsilon)

    static AdvTrainSchedule make(int n, double epsilon, int steps);
};

struct TradeoffPoint {
    int m = 0;
    double l_nat = 0.0;
    double l_nat_drop = 0.0;
    double l_adv = 0.0;
    double l_sen = 0.0;
};

struct UniversalDefenseReport {
    std::vector<double> u_min_clean;
    std::vector<double> u_min_retrained;
    std::vector<double> mu_retrained;
    std::vector<double> mean_shift; // epsilon * u_min exactly
    double sensitivity_clean = 0.0;
    double sensitivity_retrained = 0.0;
    bool same_direction = false;
};

// Sample mean and (1/N)-normalized sample covariance, with a small ridge
// when the sample covariance is numerically rank-deficient.
GaussianParams fit_gaussian_mle(const Matrix& samples);

// -(n/2) log(2 pi) - 1/2 log|K| - 1/2 (x-mu)^T K^-1 (x-mu), in nats.
double gaussian_loglik(const GaussianParams& p, std::span<const double> x);

// Exact minimizer of the likelihood over the closed epsilon-ball around x.
// Trust-region style: solve the secular equation for eta past 1/(2 lambda_min)
// by bisection; when the minimum-eigenvalue component of U^T(mu - x) vanishes
// and the equation has no root there, fix eta at the boundary and pad the
// solution along u_min (hard case; subsumes x = mu).
PerturbationResult optimal_perturbation(const GaussianParams& p, std::span<const double> x, double eps);

// Closed form for spherical covariance: delta = eps (x - mu) / ||x - mu||.
PerturbationResult spherical_perturbation(const GaussianParams& p, std::span<const double> x, double eps);

// Single direction decreasing the population likelihood maximally:
// eps times the minimum-eigenvalue eigenvector of K.
std::vector<double> universal_perturbation(const GaussianParams& p, double eps);

// Per-step variance inflation under spherical adversarial training:
// (2 sqrt(2) eps / n) Gamma((n+1)/2) / Gamma(n/2) + eps^2 / n.
double alpha_factor(int n, double eps);

// Population result of `steps` rounds of adversarial training on a spherical
// model: mean unchanged, variance scaled by (1 + alpha)^steps.
GaussianParams adv_train_closed_form(const GaussianParams& p, const AdvTrainSchedule& sched);

// Empirical counterpart: m rounds of (sample from current model, apply the
// exact l2 attack, refit by MLE). Deterministic given rng; sample-parallel.
GaussianParams adv_train_simulate(const GaussianParams& p, double eps, int m,
                                  std::int64_t samples, RngState rng);

// Closed-form robustness/accuracy curve for m = 0..m_max on a spherical model.
std::vector<TradeoffPoint> tradeoff_curve(const GaussianParams& p, double eps, int m_max);

// Smallest integer number of adversarial-training steps guaranteeing
// P(L(x) - L(x + delta) >= Delta) <= gamma for any ||delta||_2 <= eps.
int robust_steps_bound(double sigma, double eps, double delta_tol, double gamma, int n);

// e^{-t n / 10}, an upper bound for P(chi2(n) >= 2 t n), valid for t > 1.
double chi_square_tail_bound(int n, double t);

// Retrain against the universal attack and certify that neither the attack
// direction nor the sensitivity changes (covariance is untouched).
UniversalDefenseReport universal_defense_check(const GaussianParams& p, double eps);

} // namespace flowguard
