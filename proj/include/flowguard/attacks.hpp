#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "flowguard/flow.hpp"
#include "flowguard/matrix.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

enum class AttackNorm { linf, l2 };
enum class AttackDirection { decrease_likelihood, increase_likelihood };

struct AttackConfig {
    AttackNorm norm = AttackNorm::linf;
    double epsilon = 0.0;
    double step_size = 0.0; // 0 selects the default 2.5 * epsilon / iterations
    int iterations = 1;
    AttackDirection direction = AttackDirection::decrease_likelihood;
    std::optional<double> clip_min, clip_max;
    bool random_start = false; // off by default so results are seed-stable

    // epsilon and step_size accept 0 (the degenerate no-op attack used by
    // eps-sweeps and training equivalence checks)
    void validate() const;
    double effective_step() const;
};

struct AttackTrace {
    std::vector<double> nll_bpd_per_iter; // batch mean at each evaluation, [0] = clean
    Matrix x_adv;                          // best iterate per sample
    std::vector<double> nll_before;        // per sample, nats
    std::vector<double> nll_after;         // per sample, nats (best objective seen)
    double delta_norm_max = 0.0;           // in the attack norm
    double delta_norm_mean = 0.0;
    bool zero_grad_warning = false;
};

// Single signed-gradient step of size step_size, projected and clipped.
AttackTrace fgsm(const FlowModel& model, const Matrix& x, const AttackConfig& cfg);

// Iterated projected gradient on the NLL. decrease_likelihood ascends the
// NLL, increase_likelihood descends it; the best iterate per sample is
// returned, so the direction invariant holds even for oscillating steps.
AttackTrace pgd(const FlowModel& model, const Matrix& x, const AttackConfig& cfg,
                RngState rng = RngState{0});

// x + u, u ~ Unif[-eps, eps] per coordinate, clipped.
Matrix uniform_noise_baseline(const Matrix& x, double eps, std::optional<double> clip_min,
                              std::optional<double> clip_max, RngState rng);

// PGD with direction=increase_likelihood on a batch drawn uniformly over the
// data range; reports NLL before/after through the trace.
AttackTrace ood_attack(const FlowModel& model, const Matrix& noise_batch, const AttackConfig& cfg);

} // namespace flowguard
