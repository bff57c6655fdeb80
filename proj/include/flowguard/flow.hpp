#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "flowguard/autodiff.hpp"
#include "flowguard/matrix.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

// Dense perceptron with tanh hidden activations and a linear output layer.
// Final layer is zero-initialized so coupling layers start at identity.
struct Mlp {
    std::vector<Matrix> weights;              // weights[i] is [in_i, out_i]
    std::vector<std::vector<double>> biases;  // biases[i] has out_i entries

    int input_width() const { return static_cast<int>(weights.front().rows); }
    int output_width() const { return static_cast<int>(weights.back().cols); }
};

// Affine coupling: coordinates with mask==1 pass through unchanged and feed
// the networks; coordinates with mask==0 get z = x * exp(s) + t. The scale
// output is soft-clamped: s = s_clamp * tanh(raw / s_clamp).
struct CouplingLayer {
    std::vector<std::uint8_t> mask;
    Mlp s_net, t_net;
    double s_clamp = 5.0;
};

// Per-dimension affine with data-dependent initialization:
// z = exp(log_scale) * x + bias.
struct ActNormLayer {
    std::vector<double> log_scale;
    std::vector<double> bias;
    bool initialized = false;
};

// Invertible linear map W = P L U on flat vectors. P is a fixed permutation
// (perm[r] = source index), L is unit lower triangular, U upper triangular
// with its diagonal stored as fixed signs and trainable log magnitudes, so
// log|det W| = sum(log_diag) by construction.
struct InvLinearLayer {
    std::vector<int> perm;
    Matrix lower_strict;  // dim x dim, strict lower part used
    Matrix upper_strict;  // dim x dim, strict upper part used
    std::vector<double> log_diag;
    std::vector<double> diag_sign;
};

using FlowLayer = std::variant<ActNormLayer, InvLinearLayer, CouplingLayer>;

struct DequantConfig {
    bool enabled = false;
    int bins = 0;
};

struct TrainingMeta {
    std::uint64_t seed = 0;
    int epochs = 0;
    std::string mode;
    std::vector<double> loss_curve; // per-epoch mean train NLL, bits/dim
};

struct FlowModel {
    int dim = 0;
    std::vector<FlowLayer> layers;
    DequantConfig dequant;
    TrainingMeta meta;
};

struct FlowArchitecture {
    int dim = 2;
    int num_blocks = 4;                 // each block: actnorm, invlinear, coupling
    std::vector<int> hidden = {64, 64}; // coupling net hidden widths
    double s_clamp = 5.0;
    bool use_actnorm = true;
    bool use_invlinear = true;
};

// Identity-initialized flow (z = x exactly). init_noise > 0 perturbs all
// parameters with seeded Gaussian noise and randomizes the permutations,
// giving a smooth random model for tests.
FlowModel build_flow(const FlowArchitecture& arch, std::uint64_t seed, double init_noise = 0.0);

// Deterministic enumeration of trainable parameter arrays, in layer order.
// Fixed buffers (masks, permutations, diagonal signs) are not visited.
void for_each_param(FlowModel& model, const std::function<void(std::vector<double>&)>& fn);
void for_each_param(const FlowModel& model, const std::function<void(const std::vector<double>&)>& fn);
std::int64_t param_count(const FlowModel& model);

struct FlowForwardResult {
    Matrix z;
    std::vector<double> logdet; // per sample, x -> z direction
};

// Normalizing direction z = f^-1(x). Throws NumericError naming the layer
// index if an intermediate goes non-finite.
FlowForwardResult flow_forward(const FlowModel& model, const Matrix& x);

// Generator direction x = f(z).
Matrix flow_inverse(const FlowModel& model, const Matrix& z);

struct NllResult {
    std::vector<double> nll_nats;     // per sample
    std::vector<double> bits_per_dim; // per sample, incl. dequantization offset
    double mean_bits_per_dim = 0.0;
    double mean_nats = 0.0;
};

NllResult nll(const FlowModel& model, const Matrix& x);

// NLL graph on a tape, for gradients w.r.t. the input batch (attacks),
// the parameters (training), or both.
struct FlowTapeGraph {
    ad::Tape tape;
    ad::Tape::Id x = -1;
    std::vector<ad::Tape::Id> params;
    ad::Tape::Id z = -1;        // [B, n]
    ad::Tape::Id logdet = -1;   // [B], x -> z direction
    ad::Tape::Id nll_vec = -1;  // [B], nats
    ad::Tape::Id mean_nll = -1; // scalar, nats
    ad::Tape::Id sum_nll = -1;  // scalar, nats
};

FlowTapeGraph build_nll_graph(const FlowModel& model, const Matrix& x,
                              bool x_requires_grad, bool params_require_grad);

// z ~ N(0, temperature^2 I) pushed through the generator direction.
Matrix sample_flow(const FlowModel& model, std::int64_t count, double temperature, RngState rng);

// Mean evaluator bits/dim of generator samples.
double cross_evaluate(const FlowModel& generator, const FlowModel& evaluator,
                      std::int64_t count, double temperature, RngState rng);

// Data-dependent actnorm initialization: running the batch through the stack,
// each uninitialized actnorm is set so its outputs have per-dim mean 0, std 1.
void actnorm_init(FlowModel& model, const Matrix& batch);

// Versioned JSON checkpoint; doubles encoded as shortest-round-trip strings.
std::string checkpoint_to_json(const FlowModel& model);
FlowModel checkpoint_from_json(const std::string& json_text);
void save_checkpoint(const FlowModel& model, const std::string& path);
FlowModel load_checkpoint(const std::string& path);

// bits/dim for a batch of nats, including the dequantization offset.
double nats_to_bits_per_dim(const FlowModel& model, double nats);

} // namespace flowguard
