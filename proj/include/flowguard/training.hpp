#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowguard/attacks.hpp"
#include "flowguard/data_io.hpp"
#include "flowguard/errors.hpp"
#include "flowguard/flow.hpp"

namespace flowguard {

enum class TrainMode { clean, adversarial, hybrid };

TrainMode train_mode_from_name(const std::string& name);
std::string train_mode_name(TrainMode m);

struct TrainConfig {
    int epochs = 100;
    int batch_size = 256;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    TrainMode mode = TrainMode::clean;
    AttackConfig attack;            // used by adversarial/hybrid and held-out reporting
    std::uint64_t seed = 0;
    int holdout_eval_cap = 512;     // held-out metrics use at most this many samples
    double divergence_bpd = 1e6;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_nll_bpd;    // per epoch, mean over the batches stepped on
    std::vector<double> heldout_clean_bpd;
    std::vector<double> heldout_adv_bpd;
    double wall_seconds = 0.0;
    std::string checkpoint_path;          // filled by callers that persist the model
};

// Thrown when the train NLL goes non-finite or past divergence_bpd; carries
// the newest checkpoint that was still healthy.
struct TrainingDiverged : NumericError {
    TrainingDiverged(const std::string& msg, FlowModel last_good_model)
        : NumericError(msg), last_good(std::move(last_good_model)) {}
    FlowModel last_good;
};

TrainReport train_clean(FlowModel& model, const Dataset& data, const TrainConfig& cfg);
TrainReport train_adversarial(FlowModel& model, const Dataset& data, const TrainConfig& cfg);
TrainReport train_hybrid(FlowModel& model, const Dataset& data, const TrainConfig& cfg);

} // namespace flowguard
