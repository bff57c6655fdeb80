#include "flowguard/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "flowguard/errors.hpp"

namespace flowguard {

TrainMode train_mode_from_name(const std::string& name) {
    if (name == "clean") return TrainMode::clean;
    if (name == "adversarial") return TrainMode::adversarial;
    if (name == "hybrid") return TrainMode::hybrid;
    throw ConfigError("unknown training mode '" + name + "'");
}

std::string train_mode_name(TrainMode m) {
    switch (m) {
        case TrainMode::clean: return "clean";
        case TrainMode::adversarial: return "adversarial";
        case TrainMode::hybrid: return "hybrid";
    }
    throw ConfigError("unknown training mode");
}

void TrainConfig::validate() const {
    if (epochs < 0) throw ConfigError("TrainConfig: epochs must be >= 0");
    if (batch_size < 2) throw ConfigError("TrainConfig: batch_size must be >= 2");
    if (!(learning_rate > 0.0)) throw ConfigError("TrainConfig: learning_rate must be > 0");
    if (mode == TrainMode::hybrid && attack.epsilon < 0.0)
        throw ConfigError("TrainConfig: hybrid mode requires an attack config");
    attack.validate();
}

namespace {

constexpr std::uint64_t kShuffleStream = 1000000;
constexpr std::uint64_t kDequantStream = 2000000;
constexpr std::uint64_t kHoldoutStream = 3000000;

struct AdamState {
    std::vector<double> m, v;
    std::int64_t t = 0;
};

Matrix gather(const Matrix& src, const std::vector<std::int64_t>& order,
              std::int64_t begin, std::int64_t end) {
    Matrix out(end - begin, src.cols);
    for (std::int64_t r = begin; r < end; ++r)
        for (std::int64_t c = 0; c < src.cols; ++c) out.at(r - begin, c) = src.at(order[static_cast<std::size_t>(r)], c);
    return out;
}

Matrix vstack(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows + b.rows, a.cols);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

TrainReport train_impl(FlowModel& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.train_idx.empty()) throw NumericError("training: empty train split");
    const auto t_start = std::chrono::steady_clock::now();

    const Matrix train_raw = data.train_matrix();
    Matrix holdout_raw = data.test_idx.empty() ? train_raw : data.test_matrix();
    if (holdout_raw.rows > cfg.holdout_eval_cap) {
        Matrix capped(cfg.holdout_eval_cap, holdout_raw.cols);
        std::copy(holdout_raw.data.begin(),
                  holdout_raw.data.begin() + capped.data.size(), capped.data.begin());
        holdout_raw = std::move(capped);
    }
    const RngState master{cfg.seed};
    const Matrix holdout = data.quantized
                               ? dequantize(holdout_raw, data.bins, master.substream(kHoldoutStream))
                               : holdout_raw;

    const std::int64_t N = train_raw.rows;
    const std::int64_t B = std::min<std::int64_t>(cfg.batch_size, N);

    AdamState adam;
    adam.m.assign(static_cast<std::size_t>(param_count(model)), 0.0);
    adam.v.assign(adam.m.size(), 0.0);

    TrainReport report;
    FlowModel last_good = model;
    bool actnorm_done = false;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::int64_t> order(static_cast<std::size_t>(N));
        std::iota(order.begin(), order.end(), 0);
        {
            Rng shuffle_rng(master.substream(kShuffleStream + static_cast<std::uint64_t>(epoch)));
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.next_below(i))]);
        }

        double epoch_nll = 0.0;
        std::int64_t batches = 0;
        for (std::int64_t begin = 0; begin < N; begin += B, ++batches) {
            const std::int64_t end = std::min<std::int64_t>(begin + B, N);
            Matrix batch = gather(train_raw, order, begin, end);
            if (data.quantized)
                batch = dequantize(batch, data.bins,
                                   master.substream(kDequantStream + static_cast<std::uint64_t>(epoch) * 100000 +
                                                    static_cast<std::uint64_t>(batches)));
            if (!actnorm_done) {
                actnorm_init(model, batch);
                actnorm_done = true;
            }

            Matrix step_batch;
            switch (cfg.mode) {
                case TrainMode::clean:
                    step_batch = std::move(batch);
                    break;
                case TrainMode::adversarial:
                    step_batch = pgd(model, batch, cfg.attack).x_adv;
                    break;
                case TrainMode::hybrid: {
                    const std::int64_t half = batch.rows / 2;
                    Matrix clean_half(half, batch.cols);
                    std::copy(batch.data.begin(), batch.data.begin() + clean_half.data.size(),
                              clean_half.data.begin());
                    Matrix attack_half(batch.rows - half, batch.cols);
                    std::copy(batch.data.begin() + clean_half.data.size(), batch.data.end(),
                              attack_half.data.begin());
                    step_batch = vstack(clean_half, pgd(model, attack_half, cfg.attack).x_adv);
                    break;
                }
            }

            FlowTapeGraph g = build_nll_graph(model, step_batch, false, true);
            const double batch_nats = g.tape.value(g.mean_nll).data[0];
            const double batch_bpd = nats_to_bits_per_dim(model, batch_nats);
            if (!std::isfinite(batch_bpd) || batch_bpd > cfg.divergence_bpd)
                throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                           " (batch NLL " + std::to_string(batch_bpd) + " bits/dim)",
                                       std::move(last_good));
            epoch_nll += batch_bpd;

            g.tape.backward(g.mean_nll);
            adam.t += 1;
            const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t));
            std::size_t pi = 0, off = 0;
            for_each_param(model, [&](std::vector<double>& p) {
                const auto& gt = g.tape.grad(g.params[pi]).data;
                for (std::size_t i = 0; i < p.size(); ++i) {
                    double& m = adam.m[off + i];
                    double& v = adam.v[off + i];
                    m = cfg.beta1 * m + (1.0 - cfg.beta1) * gt[i];
                    v = cfg.beta2 * v + (1.0 - cfg.beta2) * gt[i] * gt[i];
                    p[i] -= cfg.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + cfg.adam_eps);
                }
                ++pi;
                off += p.size();
            });
        }

        report.train_nll_bpd.push_back(epoch_nll / static_cast<double>(batches));
        report.heldout_clean_bpd.push_back(nll(model, holdout).mean_bits_per_dim);
        if (cfg.attack.epsilon > 0.0) {
            const auto trace = pgd(model, holdout, cfg.attack);
            double acc = 0.0;
            for (double v : trace.nll_after) acc += v;
            report.heldout_adv_bpd.push_back(
                nats_to_bits_per_dim(model, acc / static_cast<double>(trace.nll_after.size())));
        } else {
            report.heldout_adv_bpd.push_back(report.heldout_clean_bpd.back());
        }
        last_good = model;
    }

    model.meta.seed = cfg.seed;
    model.meta.epochs = cfg.epochs;
    model.meta.mode = train_mode_name(cfg.mode);
    model.meta.loss_curve = report.train_nll_bpd;

    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

} // namespace

TrainReport train_clean(FlowModel& model, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::clean) throw ConfigError("train_clean: cfg.mode must be clean");
    return train_impl(model, data, cfg);
}

TrainReport train_adversarial(FlowModel& model, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::adversarial)
        throw ConfigError("train_adversarial: cfg.mode must be adversarial");
    return train_impl(model, data, cfg);
}

TrainReport train_hybrid(FlowModel& model, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.mode != TrainMode::hybrid) throw ConfigError("train_hybrid: cfg.mode must be hybrid");
    return train_impl(model, data, cfg);
}

} // namespace flowguard
