#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "flowguard/errors.hpp"
#include "flowguard/training.hpp"

using namespace flowguard;

namespace {

std::vector<double> all_params(const FlowModel& m) {
    std::vector<double> out;
    for_each_param(m, [&](const std::vector<double>& p) { out.insert(out.end(), p.begin(), p.end()); });
    return out;
}

Dataset gaussian_data(std::uint64_t seed, std::int64_t n = 2048) {
    SyntheticSpec spec;
    spec.kind = GeneratorKind::gaussian;
    spec.dim = 2;
    spec.n = n;
    spec.seed = seed;
    spec.mu = {1.0, -2.0};
    spec.cov = {2.0, 0.5, 0.5, 1.0};
    return generate(spec);
}

FlowArchitecture small_arch() {
    return FlowArchitecture{.dim = 2, .num_blocks = 4, .hidden = {16, 16}};
}

} // namespace

TEST_CASE("zero epochs leaves the model untouched") {
    FlowModel m = build_flow(small_arch(), 3);
    const auto before = all_params(m);
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto report = train_clean(m, gaussian_data(1, 64), cfg);
    CHECK(all_params(m) == before);
    CHECK(report.train_nll_bpd.empty());
}

TEST_CASE("clean training approaches the generator entropy") {
    const Dataset data = gaussian_data(42);
    FlowModel m = build_flow(small_arch(), 7);
    TrainConfig cfg;
    cfg.epochs = 120;
    cfg.seed = 11;
    const auto report = train_clean(m, data, cfg);

    REQUIRE(report.heldout_clean_bpd.size() == 120);
    CHECK(report.heldout_clean_bpd.back() <= report.heldout_clean_bpd.front());

    const double nats_per_dim = report.heldout_clean_bpd.back() * std::log(2.0) ;
    const double entropy_per_dim = *data.truth_entropy_nats / 2.0;
    CHECK(std::abs(nats_per_dim - entropy_per_dim) <= 0.15);
}

TEST_CASE("training is bit-deterministic given the seed") {
    const Dataset data = gaussian_data(8, 512);
    TrainConfig cfg;
    cfg.epochs = 5;
    cfg.seed = 99;

    FlowModel a = build_flow(small_arch(), 4);
    const auto ra = train_clean(a, data, cfg);
    FlowModel b = build_flow(small_arch(), 4);
    const auto rb = train_clean(b, data, cfg);

    CHECK(all_params(a) == all_params(b));
    CHECK(ra.train_nll_bpd == rb.train_nll_bpd);
    CHECK(ra.heldout_clean_bpd == rb.heldout_clean_bpd);
}

TEST_CASE("adversarial training with eps = 0 matches clean training exactly") {
    const Dataset data = gaussian_data(15, 512);

    TrainConfig clean_cfg;
    clean_cfg.epochs = 4;
    clean_cfg.seed = 5;
    FlowModel mc = build_flow(small_arch(), 6);
    train_clean(mc, data, clean_cfg);

    TrainConfig adv_cfg = clean_cfg;
    adv_cfg.mode = TrainMode::adversarial;
    adv_cfg.attack.epsilon = 0.0;
    adv_cfg.attack.iterations = 3;
    FlowModel ma = build_flow(small_arch(), 6);
    train_adversarial(ma, data, adv_cfg);
    CHECK(all_params(mc) == all_params(ma));

    TrainConfig hyb_cfg = clean_cfg;
    hyb_cfg.mode = TrainMode::hybrid;
    hyb_cfg.attack.epsilon = 0.0;
    hyb_cfg.attack.iterations = 3;
    FlowModel mh = build_flow(small_arch(), 6);
    train_hybrid(mh, data, hyb_cfg);
    CHECK(all_params(mc) == all_params(mh));
}

TEST_CASE("adversarial training raises held-out adversarial likelihood pressure") {
    const Dataset data = gaussian_data(25, 1024);
    TrainConfig cfg;
    cfg.mode = TrainMode::adversarial;
    cfg.epochs = 6;
    cfg.seed = 2;
    cfg.attack.epsilon = 0.2;
    cfg.attack.iterations = 5;
    cfg.attack.norm = AttackNorm::linf;
    FlowModel m = build_flow(small_arch(), 8);
    const auto report = train_adversarial(m, data, cfg);
    for (std::size_t e = 0; e < report.heldout_adv_bpd.size(); ++e)
        CHECK(report.heldout_adv_bpd[e] >= report.heldout_clean_bpd[e]);
}

TEST_CASE("two-cluster data: trained model prefers clusters over the void") {
    SyntheticSpec spec;
    spec.kind = GeneratorKind::gaussian_mixture;
    spec.n = 2048;
    spec.seed = 31;
    spec.centers = {{-2.5, 0.0}, {2.5, 0.0}};
    spec.mixture_sigma = 0.6;
    const Dataset data = generate(spec);

    FlowModel m = build_flow(small_arch(), 17);
    TrainConfig cfg;
    cfg.epochs = 80;
    cfg.seed = 3;
    train_clean(m, data, cfg);

    const Matrix test = data.test_matrix();
    const auto cluster_nll = nll(m, test);

    Matrix voids(32, 2);
    Rng rng(RngState{32});
    for (std::int64_t r = 0; r < voids.rows; ++r) {
        voids.at(r, 0) = rng.next_uniform(-0.4, 0.4);
        voids.at(r, 1) = rng.next_uniform(-0.6, 0.6);
    }
    const auto void_nll = nll(m, voids);
    CHECK(void_nll.mean_nats - cluster_nll.mean_nats > 0.0);
}

TEST_CASE("divergence raises TrainingDiverged carrying the last good model") {
    const Dataset data = gaussian_data(55, 256);
    FlowModel m = build_flow(small_arch(), 5);
    const auto before = all_params(m);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.learning_rate = 1e9;
    cfg.seed = 4;
    try {
        train_clean(m, data, cfg);
        FAIL("expected TrainingDiverged");
    } catch (const TrainingDiverged& e) {
        CHECK(std::string(e.what()).find("diverged") != std::string::npos);
        // the carried model is evaluable
        const auto res = nll(e.last_good, data.test_matrix());
        CHECK(std::isfinite(res.mean_bits_per_dim));
    }
}

TEST_CASE("config validation") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    TrainConfig modecheck;
    FlowModel m = build_flow(small_arch(), 1);
    modecheck.mode = TrainMode::adversarial;
    CHECK_THROWS_AS(train_clean(m, gaussian_data(1, 64), modecheck), ConfigError);
    CHECK(train_mode_from_name("hybrid") == TrainMode::hybrid);
    CHECK_THROWS_AS(train_mode_from_name("bogus"), ConfigError);
}
