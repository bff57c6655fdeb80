#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flowguard/attacks.hpp"
#include "flowguard/errors.hpp"
#include "flowguard/gaussian.hpp"

using namespace flowguard;

namespace {

FlowModel identity_flow(int dim = 2) {
    return build_flow(FlowArchitecture{.dim = dim, .num_blocks = 2, .hidden = {6}}, 1);
}

Matrix row2(double a, double b) {
    Matrix m(1, 2);
    m.at(0, 0) = a;
    m.at(0, 1) = b;
    return m;
}

} // namespace

TEST_CASE("fgsm degenerate and signed-step examples on the identity flow") {
    const FlowModel m = identity_flow();

    AttackConfig cfg;
    cfg.epsilon = 0.0;
    cfg.step_size = 0.0;
    const Matrix x = row2(0.7, -0.3);
    const auto t0 = fgsm(m, x, cfg);
    CHECK(t0.x_adv.data == x.data);

    // NLL gradient of the standard normal is x itself: signed step moves
    // away from the mode
    cfg.epsilon = 0.2;
    cfg.step_size = 0.1;
    const auto t1 = fgsm(m, row2(0.5, -0.5), cfg);
    CHECK(t1.x_adv.at(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(t1.x_adv.at(0, 1) == doctest::Approx(-0.6).epsilon(1e-12));
    CHECK(t1.nll_after[0] > t1.nll_before[0]);
}

TEST_CASE("pgd linf on the identity flow reaches the separable optimum") {
    const FlowModel m = identity_flow();
    Matrix x(2, 2);
    x.at(0, 0) = 0.4;
    x.at(0, 1) = -1.1;
    x.at(1, 0) = 2.0;
    x.at(1, 1) = 0.05;

    AttackConfig cfg;
    cfg.norm = AttackNorm::linf;
    cfg.epsilon = 0.3;
    cfg.iterations = 40;
    const auto tr = pgd(m, x, cfg);

    for (std::int64_t r = 0; r < x.rows; ++r) {
        double expect_gain = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double xi = x.at(r, c);
            const double target = xi + (xi >= 0 ? cfg.epsilon : -cfg.epsilon);
            CHECK(tr.x_adv.at(r, c) == doctest::Approx(target).epsilon(1e-9));
            expect_gain += ((std::abs(xi) + cfg.epsilon) * (std::abs(xi) + cfg.epsilon) - xi * xi) / 2.0;
        }
        CHECK(tr.nll_after[static_cast<std::size_t>(r)] - tr.nll_before[static_cast<std::size_t>(r)] ==
              doctest::Approx(expect_gain).epsilon(1e-6));
    }
}

TEST_CASE("pgd l2 on the identity flow recovers the spherical closed form") {
    const FlowModel m = identity_flow();
    const Matrix x = row2(0.9, -1.4);

    AttackConfig cfg;
    cfg.norm = AttackNorm::l2;
    cfg.epsilon = 0.5;
    cfg.iterations = 64;
    const auto tr = pgd(m, x, cfg);

    GaussianParams std2{{0.0, 0.0}, SymMatrix::identity(2)};
    const double xv[] = {0.9, -1.4};
    const auto closed = spherical_perturbation(std2, xv, cfg.epsilon);
    for (int c = 0; c < 2; ++c)
        CHECK(std::abs((tr.x_adv.at(0, c) - x.at(0, c)) - closed.delta[static_cast<std::size_t>(c)]) <= 1e-6);

    // likelihood drop agrees with the exact theory as well
    const double pgd_drop = tr.nll_after[0] - tr.nll_before[0];
    const double theory_drop = closed.loglik_before - closed.loglik_after;
    CHECK(std::abs(pgd_drop - theory_drop) <= 1e-6);
}

TEST_CASE("pgd direction correctness and projection exactness") {
    const FlowModel m = build_flow(FlowArchitecture{.dim = 3, .num_blocks = 2, .hidden = {8}}, 21, 0.3);
    Rng rng(RngState{22});
    Matrix x(16, 3);
    for (auto& v : x.data) v = 1.5 * rng.next_normal();

    for (const auto norm : {AttackNorm::linf, AttackNorm::l2}) {
        for (const auto dir : {AttackDirection::decrease_likelihood, AttackDirection::increase_likelihood}) {
            AttackConfig cfg;
            cfg.norm = norm;
            cfg.epsilon = 0.25;
            cfg.iterations = 12;
            cfg.direction = dir;
            cfg.clip_min = -4.0;
            cfg.clip_max = 4.0;
            const auto tr = pgd(m, x, cfg);
            for (std::size_t i = 0; i < tr.nll_after.size(); ++i) {
                if (dir == AttackDirection::decrease_likelihood)
                    CHECK(tr.nll_after[i] >= tr.nll_before[i]);
                else
                    CHECK(tr.nll_after[i] <= tr.nll_before[i]);
            }
            for (std::int64_t r = 0; r < x.rows; ++r) {
                double l2 = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double d = tr.x_adv.at(r, c) - x.at(r, c);
                    if (norm == AttackNorm::linf) CHECK(std::abs(d) <= cfg.epsilon * (1.0 + 1e-12));
                    l2 += d * d;
                    CHECK(tr.x_adv.at(r, c) >= -4.0);
                    CHECK(tr.x_adv.at(r, c) <= 4.0);
                }
                if (norm == AttackNorm::l2) CHECK(std::sqrt(l2) <= cfg.epsilon * (1.0 + 1e-12));
            }
        }
    }
}

TEST_CASE("pgd zero-gradient warning at the exact mode") {
    const FlowModel m = identity_flow();
    Matrix x(1, 2); // exactly the mode: gradient vanishes
    AttackConfig cfg;
    cfg.epsilon = 0.5;
    cfg.iterations = 5;
    const auto tr = pgd(m, x, cfg);
    CHECK(tr.zero_grad_warning);
    CHECK(tr.x_adv.data == x.data);
}

TEST_CASE("uniform noise baseline bounds and determinism") {
    Rng rng(RngState{23});
    Matrix x(50, 2);
    for (auto& v : x.data) v = rng.next_normal();

    const Matrix same = uniform_noise_baseline(x, 0.0, std::nullopt, std::nullopt, RngState{5});
    CHECK(same.data == x.data);

    const Matrix a = uniform_noise_baseline(x, 0.3, -1.0, 1.0, RngState{5});
    const Matrix b = uniform_noise_baseline(x, 0.3, -1.0, 1.0, RngState{5});
    CHECK(a.data == b.data);
    for (std::int64_t r = 0; r < x.rows; ++r)
        for (int c = 0; c < 2; ++c) {
            CHECK(std::abs(a.at(r, c) - std::clamp(x.at(r, c), -1.0, 1.0)) <= 0.3 + 1e-12);
            CHECK(a.at(r, c) >= -1.0);
            CHECK(a.at(r, c) <= 1.0);
        }
}

TEST_CASE("ood attack descends the NLL of noise inputs") {
    const FlowModel m = identity_flow();
    Rng rng(RngState{24});
    Matrix noise(32, 2);
    for (auto& v : noise.data) v = rng.next_uniform(-3.0, 3.0);

    AttackConfig cfg;
    cfg.direction = AttackDirection::increase_likelihood;
    cfg.epsilon = 1.0;
    cfg.iterations = 0;
    const auto t0 = ood_attack(m, noise, cfg);
    CHECK(t0.x_adv.data == noise.data);
    CHECK(t0.nll_after == t0.nll_before);

    cfg.iterations = 50;
    const auto t1 = ood_attack(m, noise, cfg);
    double before = 0.0, after = 0.0;
    for (std::size_t i = 0; i < t1.nll_before.size(); ++i) {
        before += t1.nll_before[i];
        after += t1.nll_after[i];
    }
    CHECK(after < before);
}

TEST_CASE("attack config validation") {
    AttackConfig cfg;
    cfg.epsilon = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.epsilon = 0.1;
    cfg.clip_min = 1.0;
    cfg.clip_max = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
