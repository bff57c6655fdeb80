#include "flowguard/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowguard/errors.hpp"
#include "flowguard/parallel.hpp"

namespace flowguard {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

// Shared eigendecomposition so batch attacks factor K once.
struct Factored {
    const GaussianParams* p = nullptr;
    EigenDecomp eig;
    double logdet = 0.0;

    static Factored make(const GaussianParams& p) {
        Factored f;
        f.p = &p;
        f.eig = eigh(p.cov);
        if (!f.eig.is_pd()) throw NumericError("gaussian: covariance is not positive-definite");
        for (double lam : f.eig.eigenvalues) f.logdet += std::log(lam);
        return f;
    }

    int dim() const { return eig.dim; }

    // coords of v in the eigenbasis: U^T v
    std::vector<double> to_eigen(std::span<const double> v) const {
        const int n = dim();
        std::vector<double> c(static_cast<std::size_t>(n), 0.0);
        for (int i = 0; i < n; ++i)
            for (int r = 0; r < n; ++r) c[static_cast<std::size_t>(i)] += eig.vec_at(r, i) * v[static_cast<std::size_t>(r)];
        return c;
    }

    std::vector<double> from_eigen(std::span<const double> c) const {
        const int n = dim();
        std::vector<double> v(static_cast<std::size_t>(n), 0.0);
        for (int r = 0; r < n; ++r)
            for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(r)] += eig.vec_at(r, i) * c[static_cast<std::size_t>(i)];
        return v;
    }

    double loglik(std::span<const double> x) const {
        const int n = dim();
        std::vector<double> d(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - p->mu[static_cast<std::size_t>(i)];
        const auto c = to_eigen(d);
        double quad = 0.0;
        for (int i = 0; i < n; ++i) quad += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)] / eig.eigenvalues[static_cast<std::size_t>(i)];
        return -0.5 * (n * std::log(kTwoPi) + logdet + quad);
    }
};

// Trust-region secular solve in the eigenbasis. c = U^T (mu - x).
PerturbationResult solve_perturbation(const Factored& f, std::span<const double> x, double eps) {
    if (!(eps > 0.0)) throw NumericError("optimal_perturbation: eps must be > 0");
    const int n = f.dim();
    const auto& lam = f.eig.eigenvalues;
    const double lam_min = lam.front();

    std::vector<double> diff(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) diff[static_cast<std::size_t>(i)] = f.p->mu[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i)];
    std::vector<double> c = f.to_eigen(diff);

    double cscale = 0.0;
    for (double ci : c) cscale = std::max(cscale, std::abs(ci));

    // cluster of eigenvalues equal to lambda_min at double precision
    const double lam_tol = 1e-12 * std::max(std::abs(lam.back()), std::abs(lam_min));
    int min_count = 0;
    while (min_count < n && lam[static_cast<std::size_t>(min_count)] - lam_min <= lam_tol) ++min_count;

    const double c_tol = 1e-13 * std::max(cscale, 1.0);
    bool min_component_zero = true;
    for (int i = 0; i < min_count; ++i)
        if (std::abs(c[static_cast<std::size_t>(i)]) > c_tol) min_component_zero = false;
    if (min_component_zero)
        for (int i = 0; i < min_count; ++i) c[static_cast<std::size_t>(i)] = 0.0;

    const double eta_boundary = 1.0 / (2.0 * lam_min);
    auto norm2_at = [&](double eta) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) {
            const double ci = c[static_cast<std::size_t>(i)];
            if (ci == 0.0) continue;
            const double den = 1.0 - 2.0 * eta * lam[static_cast<std::size_t>(i)];
            s += (ci / den) * (ci / den);
        }
        return s;
    };

    PerturbationResult res;
    res.loglik_before = f.loglik(x);
    int evals = 0;

    double eta;
    std::vector<double> d(static_cast<std::size_t>(n), 0.0);
    const double eps2 = eps * eps;

    const double boundary_norm2 = min_component_zero ? norm2_at(eta_boundary)
                                                     : std::numeric_limits<double>::infinity();
    if (min_component_zero && boundary_norm2 < eps2) {
        // hard case: first-order system singular along u_min; pad to the boundary
        res.hard_case = true;
        eta = eta_boundary;
        for (int i = min_count; i < n; ++i) {
            const double den = 1.0 - 2.0 * eta * lam[static_cast<std::size_t>(i)];
            d[static_cast<std::size_t>(i)] = c[static_cast<std::size_t>(i)] / den;
        }
        d[0] = std::sqrt(eps2 - boundary_norm2);
    } else {
        // g(eta) = sum c_i^2/(1-2 eta lam_i)^2 is strictly decreasing past the
        // boundary, so bracket and bisect g(eta) - eps^2.
        auto g = [&](double e) {
            ++evals;
            return norm2_at(e) - eps2;
        };
        double lo;
        if (min_component_zero) {
            lo = eta_boundary; // g finite and >= eps^2 there
        } else {
            // walk toward the pole until g > 0
            double step = std::max(1.0, std::abs(eta_boundary));
            lo = eta_boundary + step;
            while (g(lo) <= 0.0) {
                step *= 0.5;
                lo = eta_boundary + step;
                if (step < 1e-300) throw NumericError("optimal_perturbation: bracketing failed");
            }
        }
        const double hi = lo + std::max(1.0, std::abs(lo));
        eta = bisect_decreasing([&](double e) { return g(e); }, lo, hi, 1e-13 * eps2);
        for (int i = 0; i < n; ++i) {
            const double ci = c[static_cast<std::size_t>(i)];
            if (ci == 0.0) continue;
            const double den = 1.0 - 2.0 * eta * lam[static_cast<std::size_t>(i)];
            d[static_cast<std::size_t>(i)] = ci / den;
        }
    }

    res.eta = eta;
    res.solver_iters = evals;
    res.delta = f.from_eigen(d);

    std::vector<double> xa(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) xa[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + res.delta[static_cast<std::size_t>(i)];
    res.loglik_after = f.loglik(xa);
    return res;
}

} // namespace

std::optional<double> GaussianParams::spherical_sigma2(double tol) const {
    const int n = dim();
    if (n == 0) return std::nullopt;
    const double s = cov.trace() / n;
    if (!(s > 0.0)) return std::nullopt;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double want = (i == j) ? s : 0.0;
            if (std::abs(cov.at(i, j) - want) > tol * s) return std::nullopt;
        }
    return s;
}

GaussianParams fit_gaussian_mle(const Matrix& samples) {
    const std::int64_t N = samples.rows;
    const int n = static_cast<int>(samples.cols);
    if (N < 2) throw NumericError("fit_gaussian_mle: need at least 2 samples");

    std::vector<double> mu(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t r = 0; r < N; ++r)
        for (int j = 0; j < n; ++j) mu[static_cast<std::size_t>(j)] += samples.at(r, j);
    for (auto& v : mu) v /= static_cast<double>(N);

    SymMatrix cov = SymMatrix::zero(n);
    for (std::int64_t r = 0; r < N; ++r)
        for (int i = 0; i < n; ++i) {
            const double di = samples.at(r, i) - mu[static_cast<std::size_t>(i)];
            for (int j = i; j < n; ++j)
                cov.at(i, j) += di * (samples.at(r, j) - mu[static_cast<std::size_t>(j)]);
        }
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            cov.at(i, j) /= static_cast<double>(N);
            cov.at(j, i) = cov.at(i, j);
        }

    // ridge keeps K^-1 well-posed on degenerate desk-scale data
    double s = cov.trace() / n;
    if (!(s > 0.0)) s = 1.0;
    const auto eig = eigh(cov);
    if (eig.eigenvalues.front() < 1e-10 * s)
        for (int i = 0; i < n; ++i) cov.at(i, i) += 1e-8 * s;

    return GaussianParams{std::move(mu), std::move(cov)};
}

double gaussian_loglik(const GaussianParams& p, std::span<const double> x) {
    if (static_cast<int>(x.size()) != p.dim()) throw NumericError("gaussian_loglik: dimension mismatch");
    return Factored::make(p).loglik(x);
}

PerturbationResult optimal_perturbation(const GaussianParams& p, std::span<const double> x, double eps) {
    if (static_cast<int>(x.size()) != p.dim()) throw NumericError("optimal_perturbation: dimension mismatch");
    const Factored f = Factored::make(p);
    return solve_perturbation(f, x, eps);
}

PerturbationResult spherical_perturbation(const GaussianParams& p, std::span<const double> x, double eps) {
    const auto s2 = p.spherical_sigma2();
    if (!s2) throw NumericError("spherical_perturbation: covariance is not spherical");
    if (!(eps > 0.0)) throw NumericError("spherical_perturbation: eps must be > 0");
    const int n = p.dim();

    double norm = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = x[static_cast<std::size_t>(i)] - p.mu[static_cast<std::size_t>(i)];
        norm += d * d;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0)
        throw NumericError("spherical_perturbation: x equals mu; use optimal_perturbation (hard case)");

    PerturbationResult res;
    res.delta.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        res.delta[static_cast<std::size_t>(i)] = eps / norm * (x[static_cast<std::size_t>(i)] - p.mu[static_cast<std::size_t>(i)]);
    res.eta = (1.0 + norm / eps) / (2.0 * *s2);
    res.hard_case = false;
    res.solver_iters = 0;

    const Factored f = Factored::make(p);
    res.loglik_before = f.loglik(x);
    std::vector<double> xa(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) xa[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] + res.delta[static_cast<std::size_t>(i)];
    res.loglik_after = f.loglik(xa);
    return res;
}

std::vector<double> universal_perturbation(const GaussianParams& p, double eps) {
    if (!(eps > 0.0)) throw NumericError("universal_perturbation: eps must be > 0");
    const Factored f = Factored::make(p);
    auto u = f.eig.eigenvector(0);
    for (auto& v : u) v *= eps;
    return u;
}

double alpha_factor(int n, double eps) {
    if (n < 1) throw NumericError("alpha_factor: n must be >= 1");
    if (eps < 0.0) throw NumericError("alpha_factor: eps must be >= 0");
    if (eps == 0.0) return 0.0;
    const double ratio = std::exp(log_gamma(0.5 * (n + 1)) - log_gamma(0.5 * n));
    return 2.0 * std::sqrt(2.0) * eps / n * ratio + eps * eps / n;
}

AdvTrainSchedule AdvTrainSchedule::make(int n, double epsilon, int steps) {
    if (steps < 0) throw NumericError("AdvTrainSchedule: steps must be >= 0");
    return AdvTrainSchedule{epsilon, steps, alpha_factor(n, epsilon)};
}

GaussianParams adv_train_closed_form(const GaussianParams& p, const AdvTrainSchedule& sched) {
    const auto s2 = p.spherical_sigma2();
    if (!s2) throw NumericError("adv_train_closed_form: closed form requires spherical covariance");
    if (sched.alpha != alpha_factor(p.dim(), sched.epsilon))
        throw NumericError("adv_train_closed_form: schedule alpha inconsistent with alpha_factor");
    const double scale = std::pow(1.0 + sched.alpha, sched.steps);
    return GaussianParams{p.mu, SymMatrix::scaled_identity(p.dim(), *s2 * scale)};
}

GaussianParams adv_train_simulate(const GaussianParams& p, double eps, int m,
                                  std::int64_t samples, RngState rng) {
    if (samples < 2) throw NumericError("adv_train_simulate: need at least 2 samples");
    const int n = p.dim();
    GaussianParams cur = p;

    Matrix batch(samples, n);
    for (int round = 0; round < m; ++round) {
        const Factored f = Factored::make(cur);
        std::vector<double> sqrt_lam(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) sqrt_lam[static_cast<std::size_t>(i)] = std::sqrt(f.eig.eigenvalues[static_cast<std::size_t>(i)]);

        const RngState round_state = rng.substream(static_cast<std::uint64_t>(round));
        constexpr std::int64_t kChunk = 1 << 12;
        const std::int64_t chunks = (samples + kChunk - 1) / kChunk;
        par::parallel_for(chunks, [&](std::int64_t j) {
            Rng gen(round_state.substream(static_cast<std::uint64_t>(j)));
            std::vector<double> xi(static_cast<std::size_t>(n)), x(static_cast<std::size_t>(n));
            const std::int64_t begin = j * kChunk;
            const std::int64_t end = std::min<std::int64_t>(begin + kChunk, samples);
            for (std::int64_t r = begin; r < end; ++r) {
                for (int i = 0; i < n; ++i) xi[static_cast<std::size_t>(i)] = sqrt_lam[static_cast<std::size_t>(i)] * gen.next_normal();
                for (int i = 0; i < n; ++i) {
                    double v = cur.mu[static_cast<std::size_t>(i)];
                    for (int k = 0; k < n; ++k) v += f.eig.vec_at(i, k) * xi[static_cast<std::size_t>(k)];
                    x[static_cast<std::size_t>(i)] = v;
                }
                if (eps > 0.0) {
                    const auto pert = solve_perturbation(f, x, eps);
                    for (int i = 0; i < n; ++i) batch.at(r, i) = x[static_cast<std::size_t>(i)] + pert.delta[static_cast<std::size_t>(i)];
                } else {
                    for (int i = 0; i < n; ++i) batch.at(r, i) = x[static_cast<std::size_t>(i)];
                }
            }
        });
        cur = fit_gaussian_mle(batch);
    }
    return cur;
}

std::vector<TradeoffPoint> tradeoff_curve(const GaussianParams& p, double eps, int m_max) {
    const auto s2 = p.spherical_sigma2();
    if (!s2) throw NumericError("tradeoff_curve: requires spherical covariance");
    if (m_max < 0) throw NumericError("tradeoff_curve: m_max must be >= 0");
    const int n = p.dim();
    const double alpha = alpha_factor(n, eps);
    const double ratio = std::exp(log_gamma(0.5 * (n + 1)) - log_gamma(0.5 * n));
    const double sens_num = 2.0 * eps * std::sqrt(2.0) * ratio + eps * eps;

    std::vector<TradeoffPoint> pts;
    pts.reserve(static_cast<std::size_t>(m_max) + 1);
    double l_nat0 = 0.0;
    for (int m = 0; m <= m_max; ++m) {
        const double infl = std::pow(1.0 + alpha, m);
        TradeoffPoint t;
        t.m = m;
        t.l_nat = -0.5 * n * std::log(kTwoPi * *s2 * infl) - 0.5 * n / infl;
        if (m == 0) l_nat0 = t.l_nat;
        t.l_nat_drop = l_nat0 - t.l_nat;
        t.l_adv = -0.5 * n * std::log(kTwoPi * *s2 * infl) - (n + sens_num) / (2.0 * infl);
        t.l_sen = t.l_nat - t.l_adv;
        pts.push_back(t);
    }
    return pts;
}

int robust_steps_bound(double sigma, double eps, double delta_tol, double gamma, int n) {
    if (!(sigma > 0.0 && eps > 0.0 && delta_tol > 0.0)) throw NumericError("robust_steps_bound: arguments must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw NumericError("robust_steps_bound: gamma must lie in (0,1)");
    if (n < 1) throw NumericError("robust_steps_bound: n must be >= 1");

    const double alpha = alpha_factor(n, eps);
    const double denom = 2.0 * sigma * sigma * delta_tol;
    const double a1 = (2.0 * sigma * eps * std::sqrt(20.0 * std::log(1.0 / gamma)) + eps * eps) / denom;
    const double a2 = (2.0 * sigma * eps * std::sqrt(2.0 * static_cast<double>(n)) + eps * eps) / denom;

    double best = -std::numeric_limits<double>::infinity();
    if (a1 > 0.0) best = std::max(best, std::log(a1));
    if (a2 > 0.0) best = std::max(best, std::log(a2));
    if (!std::isfinite(best)) return 0;

    const double m_real = best / std::log1p(alpha);
    if (!(m_real > 0.0)) return 0;
    return static_cast<int>(std::ceil(m_real));
}

double chi_square_tail_bound(int n, double t) {
    if (n < 1) throw NumericError("chi_square_tail_bound: n must be >= 1");
    if (!(t > 1.0)) throw NumericError("chi_square_tail_bound: requires t > 1");
    return std::exp(-t * static_cast<double>(n) / 10.0);
}

UniversalDefenseReport universal_defense_check(const GaussianParams& p, double eps) {
    const Factored f = Factored::make(p);
    const int n = p.dim();
    UniversalDefenseReport rep;
    rep.u_min_clean = f.eig.eigenvector(0);
    const double lam_min = f.eig.eigenvalues.front();

    rep.mu_retrained.resize(static_cast<std::size_t>(n));
    rep.mean_shift.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        rep.mean_shift[static_cast<std::size_t>(i)] = eps * rep.u_min_clean[static_cast<std::size_t>(i)];
        rep.mu_retrained[static_cast<std::size_t>(i)] = p.mu[static_cast<std::size_t>(i)] + rep.mean_shift[static_cast<std::size_t>(i)];
    }

    // retrained model has the same covariance, so factor it independently
    const GaussianParams retrained{rep.mu_retrained, p.cov};
    const Factored fr = Factored::make(retrained);
    rep.u_min_retrained = fr.eig.eigenvector(0);

    // expected drop under delta = eps u_min is delta^T K^-1 delta / 2
    rep.sensitivity_clean = eps * eps / (2.0 * lam_min);
    rep.sensitivity_retrained = eps * eps / (2.0 * fr.eig.eigenvalues.front());

    rep.same_direction = true;
    for (int i = 0; i < n; ++i)
        if (rep.u_min_clean[static_cast<std::size_t>(i)] != rep.u_min_retrained[static_cast<std::size_t>(i)])
            rep.same_direction = false;
    return rep;
}

} // namespace flowguard
