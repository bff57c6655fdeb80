#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flowguard/errors.hpp"
#include "flowguard/gaussian.hpp"
#include "oracles.hpp"

using namespace flowguard;

namespace {

GaussianParams make_params(std::vector<double> mu, std::vector<double> cov_dense) {
    const int n = static_cast<int>(mu.size());
    return GaussianParams{std::move(mu), SymMatrix::from_dense(n, cov_dense)};
}

double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

// random PD matrix with eigenvalues in [0.2, 5]
SymMatrix random_pd(int n, Rng& rng) {
    SymMatrix a = SymMatrix::zero(n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            const double v = rng.next_normal();
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    auto e = eigh(a);
    SymMatrix out = SymMatrix::zero(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) {
                const double lam = 0.2 + 4.8 * (0.5 + std::atan(e.eigenvalues[k]) / M_PI);
                s += e.vec_at(i, k) * lam * e.vec_at(j, k);
            }
            out.at(i, j) = s;
        }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (out.at(i, j) + out.at(j, i));
            out.at(i, j) = v;
            out.at(j, i) = v;
        }
    return out;
}

} // namespace

TEST_CASE("fit_gaussian_mle on symmetric 4-point layout") {
    Matrix m(4, 2);
    const double pts[4][2] = {{0, 0}, {2, 0}, {0, 2}, {2, 2}};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 2; ++c) m.at(r, c) = pts[r][c];
    auto p = fit_gaussian_mle(m);
    CHECK(p.mu[0] == doctest::Approx(1.0));
    CHECK(p.mu[1] == doctest::Approx(1.0));
    CHECK(p.cov.at(0, 0) == doctest::Approx(1.0));
    CHECK(p.cov.at(1, 1) == doctest::Approx(1.0));
    CHECK(p.cov.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("fit_gaussian_mle ridge on a degenerate sample") {
    Matrix m(50, 2);
    for (int r = 0; r < 50; ++r) {
        m.at(r, 0) = 3.0;
        m.at(r, 1) = -1.0;
    }
    auto p = fit_gaussian_mle(m);
    CHECK(p.cov.at(0, 0) == doctest::Approx(1e-8).epsilon(1e-9));
    CHECK(p.cov.at(1, 1) == doctest::Approx(1e-8).epsilon(1e-9));
    CHECK(eigh(p.cov).is_pd());

    Matrix tiny(1, 2);
    CHECK_THROWS_AS(fit_gaussian_mle(tiny), NumericError);
}

TEST_CASE("fit_gaussian_mle Monte Carlo consistency") {
    Rng rng(RngState{31});
    Matrix m(100000, 2);
    for (std::int64_t r = 0; r < m.rows; ++r) {
        m.at(r, 0) = 2.0 * rng.next_normal();
        m.at(r, 1) = rng.next_normal();
    }
    auto p = fit_gaussian_mle(m);
    CHECK(std::abs(p.cov.at(0, 0) - 4.0) <= 0.05);
    CHECK(std::abs(p.cov.at(1, 1) - 1.0) <= 0.05);
    CHECK(std::abs(p.cov.at(0, 1)) <= 0.05);
}

TEST_CASE("gaussian_loglik standard values") {
    auto p = make_params({0, 0}, {1, 0, 0, 1});
    const double x0[] = {0.0, 0.0};
    CHECK(gaussian_loglik(p, x0) == doctest::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
    const double x1[] = {1.0, 0.0};
    CHECK(gaussian_loglik(p, x1) == doctest::Approx(-std::log(2.0 * M_PI) - 0.5).epsilon(1e-12));
}

TEST_CASE("gaussian_loglik matches direct density oracle") {
    auto p = make_params({1, 1}, {4, 0, 0, 1});
    const double mu[] = {1.0, 1.0};
    const double k[] = {4.0, 0.0, 0.0, 1.0};
    const double x[] = {3.0, 2.0};
    CHECK(gaussian_loglik(p, x) == doctest::Approx(oracle::loglik_direct2(mu, k, x)).epsilon(1e-12));
}

TEST_CASE("optimal_perturbation spherical closed form") {
    auto p = make_params({0, 0}, {1, 0, 0, 1});
    const double x[] = {3.0, 4.0};
    auto r = optimal_perturbation(p, x, 1.0);
    CHECK(r.delta[0] == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(r.delta[1] == doctest::Approx(0.8).epsilon(1e-9));
    CHECK_FALSE(r.hard_case);
    CHECK(r.loglik_after < r.loglik_before);
}

TEST_CASE("optimal_perturbation hard case at x = mu") {
    auto p = make_params({0, 0}, {4, 0, 0, 1});
    const double x[] = {0.0, 0.0};
    auto r = optimal_perturbation(p, x, 2.0);
    CHECK(r.hard_case);
    CHECK(std::abs(r.delta[0]) <= 1e-12);
    CHECK(r.delta[1] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(norm2(r.delta) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("optimal_perturbation matches sphere brute force on the spec instance") {
    auto p = make_params({0, 0}, {4, 0, 0, 1});
    const double mu[] = {0.0, 0.0};
    const double k[] = {4.0, 0.0, 0.0, 1.0};
    const double x[] = {1.0, 1.0};
    auto r = optimal_perturbation(p, x, 0.5);
    const double brute = oracle::sphere_min_loglik2(mu, k, x, 0.5);
    CHECK(std::abs(r.loglik_after - brute) <= 1e-3);
    CHECK(norm2(r.delta) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("optimal_perturbation optimality, KKT residual and active constraint") {
    Rng rng(RngState{404});
    for (int trial = 0; trial < 30; ++trial) {
        const int n = (trial % 2 == 0) ? 2 : 3;
        SymMatrix k = random_pd(n, rng);
        std::vector<double> mu(n), x(n);
        for (int i = 0; i < n; ++i) {
            mu[i] = rng.next_normal();
            x[i] = mu[i] + 2.0 * rng.next_normal();
        }
        const double eps = 0.2 + 1.5 * rng.next_unit();
        GaussianParams p{mu, k};
        auto r = optimal_perturbation(p, x, eps);

        CHECK(norm2(r.delta) <= eps * (1.0 + 1e-9));
        CHECK(std::abs(norm2(r.delta) - eps) <= 1e-9 * eps);
        CHECK(r.loglik_after <= r.loglik_before);

        // KKT: (K^-1 - 2 eta I) delta = K^-1 (mu - x), 2 eta lam_i - 1 >= 0
        auto e = eigh(k);
        REQUIRE(r.eta.has_value());
        for (double lam : e.eigenvalues) CHECK(2.0 * *r.eta * lam - 1.0 >= -1e-10);
        std::vector<double> kinv_delta(n, 0.0), kinv_diff(n, 0.0);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double kinv_ij = 0.0;
                for (int c = 0; c < n; ++c) kinv_ij += e.vec_at(i, c) / e.eigenvalues[c] * e.vec_at(j, c);
                kinv_delta[i] += kinv_ij * r.delta[j];
                kinv_diff[i] += kinv_ij * (mu[j] - x[j]);
            }
        double resid = 0.0;
        for (int i = 0; i < n; ++i) {
            const double ri = kinv_delta[i] - 2.0 * *r.eta * r.delta[i] - kinv_diff[i];
            resid += ri * ri;
        }
        CHECK(std::sqrt(resid) <= 1e-8);

        // brute-force optimality
        double brute;
        if (n == 2) {
            const double kk[4] = {k.at(0, 0), k.at(0, 1), k.at(1, 0), k.at(1, 1)};
            brute = oracle::sphere_min_loglik2(mu.data(), kk, x.data(), eps, 100000);
        } else {
            double kk[9];
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) kk[3 * i + j] = k.at(i, j);
            brute = oracle::sphere_min_loglik3(mu.data(), kk, x.data(), eps, 100000);
        }
        const double drop_solver = r.loglik_before - r.loglik_after;
        const double drop_brute = r.loglik_before - brute;
        CHECK(drop_solver >= drop_brute - 1e-3);
        CHECK(std::abs(drop_solver - drop_brute) <= 1e-2);
    }
}

TEST_CASE("optimal_perturbation rejects a non-PD model") {
    SymMatrix k = SymMatrix::zero(2);
    k.at(0, 0) = 1.0;
    k.at(1, 1) = -0.5;
    GaussianParams p{{0.0, 0.0}, k};
    const double x[] = {1.0, 1.0};
    CHECK_THROWS_AS(optimal_perturbation(p, x, 0.5), NumericError);
}

TEST_CASE("spherical_perturbation closed form and consistency with the general solver") {
    auto p = make_params({0, 0}, {1, 0, 0, 1});
    const double x[] = {3.0, 4.0};
    auto r = spherical_perturbation(p, x, 1.0);
    CHECK(r.delta[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(r.delta[1] == doctest::Approx(0.8).epsilon(1e-12));

    auto p2 = make_params({1, 0}, {1, 0, 0, 1});
    const double x2[] = {1.0, 2.0};
    auto r2 = spherical_perturbation(p2, x2, 0.5);
    CHECK(r2.delta[0] == doctest::Approx(0.0));
    CHECK(r2.delta[1] == doctest::Approx(0.5));

    Rng rng(RngState{77});
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + static_cast<int>(rng.next_below(3));
        const double s2 = 0.3 + 3.0 * rng.next_unit();
        GaussianParams ps{std::vector<double>(n), SymMatrix::scaled_identity(n, s2)};
        std::vector<double> xs(n);
        for (int i = 0; i < n; ++i) {
            ps.mu[i] = rng.next_normal();
            xs[i] = ps.mu[i] + rng.next_normal();
        }
        const double eps = 0.1 + rng.next_unit();
        auto a = spherical_perturbation(ps, xs, eps);
        auto b = optimal_perturbation(ps, xs, eps);
        for (int i = 0; i < n; ++i) CHECK(std::abs(a.delta[i] - b.delta[i]) <= 1e-6);
    }

    const double at_mu[] = {1.0, 0.0};
    CHECK_THROWS_AS(spherical_perturbation(p2, at_mu, 0.5), NumericError);
    auto pn = make_params({0, 0}, {2, 0, 0, 1});
    CHECK_THROWS_AS(spherical_perturbation(pn, x, 0.5), NumericError);
}

TEST_CASE("universal_perturbation directions") {
    auto p = make_params({0, 0}, {2, 0, 0, 1});
    auto u = universal_perturbation(p, 0.5);
    CHECK(u[0] == doctest::Approx(0.0));
    CHECK(u[1] == doctest::Approx(0.5));

    auto pi = make_params({0, 0, 0}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    auto ui = universal_perturbation(pi, 1.0);
    CHECK(ui[0] == doctest::Approx(1.0));
    CHECK(ui[1] == doctest::Approx(0.0));
    CHECK(ui[2] == doctest::Approx(0.0));

    auto pc = make_params({0, 0}, {2, 1, 1, 2});
    auto uc = universal_perturbation(pc, 1.0);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(uc[0] == doctest::Approx(s).epsilon(1e-10));
    CHECK(uc[1] == doctest::Approx(-s).epsilon(1e-10));
}

TEST_CASE("alpha_factor values") {
    CHECK(alpha_factor(7, 0.0) == 0.0);
    CHECK(alpha_factor(2, 1.0) == doctest::Approx(std::sqrt(2.0 * M_PI) / 2.0 + 0.5).epsilon(1e-12));
    CHECK(alpha_factor(2, 1.0) == doctest::Approx(1.7533141373155003).epsilon(1e-12));
    CHECK(alpha_factor(1, 1.0) == doctest::Approx(2.0 * std::sqrt(2.0 / M_PI) + 1.0).epsilon(1e-12));
    CHECK(alpha_factor(1, 1.0) == doctest::Approx(2.5957691216057308).epsilon(1e-12));
}

TEST_CASE("alpha_factor Monte Carlo cross-check") {
    // trace of E[(x + eps x/||x||)(x + eps x/||x||)^T]/n minus 1
    for (int n : {1, 2}) {
        auto f = [n](std::span<const double> x, std::span<double> out) {
            double norm = 0.0;
            for (int i = 0; i < n; ++i) norm += x[i] * x[i];
            norm = std::sqrt(norm);
            double tr = 0.0;
            for (int i = 0; i < n; ++i) {
                const double v = x[i] + x[i] / norm;
                tr += v * v;
            }
            out[0] = tr;
        };
        Matrix tr = mc_expect(f, 1, 1, n, 400000, RngState{500 + static_cast<std::uint64_t>(n)});
        const double alpha_mc = tr.data[0] / n - 1.0;
        const double alpha = alpha_factor(n, 1.0);
        CHECK(std::abs(alpha_mc - alpha) <= 0.02 * alpha);
    }
}

TEST_CASE("adv_train_closed_form recursion") {
    auto p = make_params({0.5, -0.5}, {1, 0, 0, 1});
    auto sched0 = AdvTrainSchedule::make(2, 1.0, 0);
    auto r0 = adv_train_closed_form(p, sched0);
    CHECK(r0.cov.at(0, 0) == doctest::Approx(1.0));

    auto sched1 = AdvTrainSchedule::make(2, 1.0, 1);
    auto r1 = adv_train_closed_form(p, sched1);
    CHECK(r1.cov.at(0, 0) == doctest::Approx(2.7533141373155003).epsilon(1e-12));
    CHECK(r1.mu[0] == doctest::Approx(0.5));

    auto sched3 = AdvTrainSchedule::make(2, 1.0, 3);
    auto r3 = adv_train_closed_form(p, sched3);
    CHECK(r3.cov.at(1, 1) == doctest::Approx(std::pow(2.7533141373155003, 3)).epsilon(1e-12));

    auto pn = make_params({0, 0}, {2, 0, 0, 1});
    CHECK_THROWS_AS(adv_train_closed_form(pn, sched1), NumericError);
}

TEST_CASE("adv_train_simulate tracks the closed form") {
    auto p = make_params({0.25, -1.0}, {1, 0, 0, 1});

    // eps = 0: drift only by sampling noise
    auto drift = adv_train_simulate(p, 0.0, 1, 100000, RngState{61});
    CHECK(std::abs(drift.mu[0] - 0.25) <= 5.0 * std::sqrt(2.0) / std::sqrt(100000.0));
    CHECK(std::abs(drift.cov.at(0, 0) - 1.0) <= 0.03);

    // m = 1 at eps = 1: population recursion is exact
    auto sim1 = adv_train_simulate(p, 1.0, 1, 100000, RngState{62});
    auto cf1 = adv_train_closed_form(p, AdvTrainSchedule::make(2, 1.0, 1));
    for (int i = 0; i < 2; ++i)
        CHECK(std::abs(sim1.cov.at(i, i) - cf1.cov.at(i, i)) <= 0.02 * cf1.cov.at(i, i));
    CHECK(std::abs(sim1.mu[0] - 0.25) <= 0.05);

    // m = 2 at small eps: compounding tolerance
    auto sim2 = adv_train_simulate(p, 0.1, 2, 100000, RngState{63});
    auto cf2 = adv_train_closed_form(p, AdvTrainSchedule::make(2, 0.1, 2));
    for (int i = 0; i < 2; ++i)
        CHECK(std::abs(sim2.cov.at(i, i) - cf2.cov.at(i, i)) <= 0.03 * cf2.cov.at(i, i));
}

TEST_CASE("adv_train_simulate is deterministic given the seed") {
    auto p = make_params({0.0, 0.0}, {1, 0, 0, 1});
    auto a = adv_train_simulate(p, 0.5, 1, 20000, RngState{64});
    auto b = adv_train_simulate(p, 0.5, 1, 20000, RngState{64});
    CHECK(a.cov.entries == b.cov.entries);
    CHECK(a.mu == b.mu);
}

TEST_CASE("tradeoff_curve closed forms and monotonicity") {
    auto p = make_params({0, 0}, {1, 0, 0, 1});
    auto pts = tradeoff_curve(p, 1.0, 5);
    CHECK(pts[0].l_nat_drop == 0.0);
    CHECK(pts[0].l_sen == doctest::Approx(1.7533141373155003).epsilon(1e-10));
    // identity: l_sen(0) = alpha * n / 2
    CHECK(pts[0].l_sen == doctest::Approx(alpha_factor(2, 1.0) * 2.0 / 2.0).epsilon(1e-12));

    GaussianParams p10{std::vector<double>(10, 0.3), SymMatrix::scaled_identity(10, 1.7)};
    auto curve = tradeoff_curve(p10, 0.8, 10);
    REQUIRE(curve.size() == 11);
    for (std::size_t i = 1; i < curve.size(); ++i) {
        CHECK(curve[i].l_nat_drop > curve[i - 1].l_nat_drop);
        CHECK(curve[i].l_sen < curve[i - 1].l_sen);
        CHECK(curve[i].l_nat_drop == doctest::Approx(curve[0].l_nat - curve[i].l_nat));
        CHECK(curve[i].l_sen == doctest::Approx(curve[i].l_nat - curve[i].l_adv));
    }
    // closed-form for the drop
    const double alpha = alpha_factor(10, 0.8);
    for (const auto& t : curve) {
        const double infl = std::pow(1.0 + alpha, t.m);
        CHECK(t.l_nat_drop == doctest::Approx(5.0 * (std::log(infl) + 1.0 / infl - 1.0)).epsilon(1e-10));
    }
}

TEST_CASE("robust_steps_bound values and monotonicity") {
    CHECK(robust_steps_bound(1.0, 1.0, 1e9, 0.05, 4) == 0);

    // direct evaluation of the two-term formula
    const double sigma = 1.0, eps = 1.0, delta = 0.1, gamma = 0.05;
    const int n = 4;
    const double alpha = alpha_factor(n, eps);
    const double t1 = std::log((2.0 * sigma * eps * std::sqrt(20.0 * std::log(1.0 / gamma)) + eps * eps) /
                               (2.0 * sigma * sigma * delta));
    const double t2 = std::log((2.0 * sigma * eps * std::sqrt(2.0 * n) + eps * eps) /
                               (2.0 * sigma * sigma * delta));
    const int expect = static_cast<int>(std::ceil(std::max(t1, t2) / std::log(1.0 + alpha)));
    CHECK(robust_steps_bound(sigma, eps, delta, gamma, n) == expect);
    CHECK(expect == 6);

    int prev = 0;
    for (double g : {0.5, 0.2, 0.1, 0.05, 0.01, 0.001}) {
        const int m = robust_steps_bound(1.0, 1.0, 0.1, g, 4);
        CHECK(m >= prev);
        prev = m;
    }
    CHECK_THROWS_AS(robust_steps_bound(1.0, 1.0, 0.1, 1.5, 4), NumericError);
}

TEST_CASE("chi_square_tail_bound") {
    CHECK(chi_square_tail_bound(10, 1.0 + 1e-9) == doctest::Approx(std::exp(-1.0)).epsilon(1e-8));
    CHECK(chi_square_tail_bound(5, 2.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(chi_square_tail_bound(5, 1.0), NumericError);
    CHECK_THROWS_AS(chi_square_tail_bound(5, 0.5), NumericError);
}

TEST_CASE("universal_defense_check certifies the failed defense") {
    auto p = make_params({0.3, -0.7}, {2, 0, 0, 1});
    auto rep = universal_defense_check(p, 0.5);
    CHECK(rep.u_min_clean[0] == doctest::Approx(0.0));
    CHECK(rep.u_min_clean[1] == doctest::Approx(1.0));
    CHECK(rep.same_direction);
    CHECK(std::abs(rep.sensitivity_clean - rep.sensitivity_retrained) <= 1e-12);
    CHECK(rep.mean_shift[1] == doctest::Approx(0.5));
    CHECK(rep.mu_retrained[1] == doctest::Approx(-0.2));
    CHECK(rep.sensitivity_clean == doctest::Approx(0.25 / 2.0).epsilon(1e-12));
}
