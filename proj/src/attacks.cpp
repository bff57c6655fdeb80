#include "flowguard/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "flowguard/errors.hpp"
#include "flowguard/parallel.hpp"

namespace flowguard {

void AttackConfig::validate() const {
    if (epsilon < 0.0) throw ConfigError("AttackConfig: epsilon must be >= 0");
    if (step_size < 0.0) throw ConfigError("AttackConfig: step_size must be >= 0");
    if (iterations < 0) throw ConfigError("AttackConfig: iterations must be >= 0");
    if (clip_min && clip_max && *clip_min > *clip_max)
        throw ConfigError("AttackConfig: clip_min > clip_max");
}

double AttackConfig::effective_step() const {
    if (step_size > 0.0) return step_size;
    return iterations > 0 ? 2.5 * epsilon / static_cast<double>(iterations) : 0.0;
}

namespace {

struct BatchNorms {
    double max_norm = 0.0;
    double mean_norm = 0.0;
};

BatchNorms delta_norms(const Matrix& x_adv, const Matrix& x0, AttackNorm norm) {
    BatchNorms out;
    for (std::int64_t r = 0; r < x0.rows; ++r) {
        double v = 0.0;
        for (std::int64_t c = 0; c < x0.cols; ++c) {
            const double d = x_adv.at(r, c) - x0.at(r, c);
            if (norm == AttackNorm::linf)
                v = std::max(v, std::abs(d));
            else
                v += d * d;
        }
        if (norm == AttackNorm::l2) v = std::sqrt(v);
        out.max_norm = std::max(out.max_norm, v);
        out.mean_norm += v;
    }
    out.mean_norm /= static_cast<double>(x0.rows);
    return out;
}

void project_and_clip(Matrix& cur, const Matrix& x0, const AttackConfig& cfg) {
    const std::int64_t B = x0.rows, n = x0.cols;
    par::parallel_for(B, [&](std::int64_t r) {
        if (cfg.norm == AttackNorm::linf) {
            for (std::int64_t c = 0; c < n; ++c) {
                const double lo = x0.at(r, c) - cfg.epsilon;
                const double hi = x0.at(r, c) + cfg.epsilon;
                cur.at(r, c) = std::clamp(cur.at(r, c), lo, hi);
            }
        } else {
            double norm2 = 0.0;
            for (std::int64_t c = 0; c < n; ++c) {
                const double d = cur.at(r, c) - x0.at(r, c);
                norm2 += d * d;
            }
            const double norm = std::sqrt(norm2);
            if (norm > cfg.epsilon && norm > 0.0) {
                const double f = cfg.epsilon / norm;
                for (std::int64_t c = 0; c < n; ++c)
                    cur.at(r, c) = x0.at(r, c) + f * (cur.at(r, c) - x0.at(r, c));
            }
        }
        if (cfg.clip_min || cfg.clip_max) {
            const double lo = cfg.clip_min.value_or(-std::numeric_limits<double>::infinity());
            const double hi = cfg.clip_max.value_or(std::numeric_limits<double>::infinity());
            for (std::int64_t c = 0; c < n; ++c) cur.at(r, c) = std::clamp(cur.at(r, c), lo, hi);
        }
    });
}

// NLL values plus gradient w.r.t. the batch.
struct EvalResult {
    std::vector<double> nll;
    Matrix grad;
};

EvalResult eval_nll_grad(const FlowModel& model, const Matrix& x, bool want_grad) {
    FlowTapeGraph g = build_nll_graph(model, x, want_grad, false);
    EvalResult out;
    out.nll = g.tape.value(g.nll_vec).data;
    if (want_grad) {
        g.tape.backward(g.sum_nll);
        const ad::Tensor& gx = g.tape.grad(g.x);
        out.grad.rows = x.rows;
        out.grad.cols = x.cols;
        out.grad.data = gx.data;
    }
    return out;
}

AttackTrace run_pgd(const FlowModel& model, const Matrix& x, const AttackConfig& cfg, RngState rng) {
    cfg.validate();
    if (static_cast<int>(x.cols) != model.dim) throw NumericError("attack: batch dimension mismatch");
    const std::int64_t B = x.rows, n = x.cols;
    const bool ascend = cfg.direction == AttackDirection::decrease_likelihood;
    const double step = cfg.effective_step();

    AttackTrace trace;
    trace.x_adv = x;
    Matrix cur = x;

    if (cfg.random_start && cfg.epsilon > 0.0) {
        Rng gen(rng);
        for (auto& v : cur.data) v += gen.next_uniform(-cfg.epsilon, cfg.epsilon);
        project_and_clip(cur, x, cfg);
        trace.x_adv = cur;
    }

    std::vector<double> best_nll;
    auto mean_bpd = [&](const std::vector<double>& nll) {
        double acc = 0.0;
        for (double v : nll) acc += v;
        return nats_to_bits_per_dim(model, acc / static_cast<double>(B));
    };

    for (int it = 0; it <= cfg.iterations; ++it) {
        const bool last = it == cfg.iterations;
        EvalResult ev = eval_nll_grad(model, cur, !last);
        if (it == 0) {
            trace.nll_before = (cfg.random_start && cfg.epsilon > 0.0)
                                   ? eval_nll_grad(model, x, false).nll
                                   : ev.nll;
            best_nll = ev.nll;
            trace.x_adv = cur;
        } else {
            for (std::int64_t r = 0; r < B; ++r) {
                const bool better = ascend ? ev.nll[static_cast<std::size_t>(r)] > best_nll[static_cast<std::size_t>(r)]
                                           : ev.nll[static_cast<std::size_t>(r)] < best_nll[static_cast<std::size_t>(r)];
                if (better) {
                    best_nll[static_cast<std::size_t>(r)] = ev.nll[static_cast<std::size_t>(r)];
                    for (std::int64_t c = 0; c < n; ++c) trace.x_adv.at(r, c) = cur.at(r, c);
                }
            }
        }
        trace.nll_bpd_per_iter.push_back(mean_bpd(ev.nll));
        if (last) break;

        // step
        bool any_nonzero = false;
        par::parallel_for(B, [&](std::int64_t r) {
            if (cfg.norm == AttackNorm::linf) {
                for (std::int64_t c = 0; c < n; ++c) {
                    const double g = ev.grad.at(r, c);
                    const double sgn = (g > 0.0) - (g < 0.0);
                    cur.at(r, c) += (ascend ? step : -step) * sgn;
                }
            } else {
                double norm2 = 0.0;
                for (std::int64_t c = 0; c < n; ++c) norm2 += ev.grad.at(r, c) * ev.grad.at(r, c);
                const double norm = std::sqrt(norm2);
                if (norm > 0.0) {
                    const double f = (ascend ? step : -step) / norm;
                    for (std::int64_t c = 0; c < n; ++c) cur.at(r, c) += f * ev.grad.at(r, c);
                }
            }
        });
        for (double g : ev.grad.data)
            if (g != 0.0) {
                any_nonzero = true;
                break;
            }
        if (!any_nonzero) {
            trace.zero_grad_warning = true;
            break;
        }
        project_and_clip(cur, x, cfg);
    }

    trace.nll_after = best_nll;
    const auto norms = delta_norms(trace.x_adv, x, cfg.norm);
    trace.delta_norm_max = norms.max_norm;
    trace.delta_norm_mean = norms.mean_norm;
    return trace;
}

} // namespace

AttackTrace fgsm(const FlowModel& model, const Matrix& x, const AttackConfig& cfg) {
    AttackConfig one = cfg;
    one.iterations = 1;
    if (one.step_size == 0.0) one.step_size = cfg.epsilon;
    return run_pgd(model, x, one, RngState{0});
}

AttackTrace pgd(const FlowModel& model, const Matrix& x, const AttackConfig& cfg, RngState rng) {
    return run_pgd(model, x, cfg, rng);
}

Matrix uniform_noise_baseline(const Matrix& x, double eps, std::optional<double> clip_min,
                              std::optional<double> clip_max, RngState rng) {
    if (eps < 0.0) throw ConfigError("uniform_noise_baseline: eps must be >= 0");
    Matrix out = x;
    constexpr std::int64_t kChunk = 1 << 12;
    const std::int64_t chunks = (x.rows + kChunk - 1) / kChunk;
    par::parallel_for(chunks, [&](std::int64_t j) {
        Rng gen(rng.substream(static_cast<std::uint64_t>(j)));
        const std::int64_t begin = j * kChunk;
        const std::int64_t end = std::min<std::int64_t>(begin + kChunk, x.rows);
        const double lo = clip_min.value_or(-std::numeric_limits<double>::infinity());
        const double hi = clip_max.value_or(std::numeric_limits<double>::infinity());
        for (std::int64_t r = begin; r < end; ++r)
            for (std::int64_t c = 0; c < x.cols; ++c)
                out.at(r, c) = std::clamp(x.at(r, c) + gen.next_uniform(-eps, eps), lo, hi);
    });
    return out;
}

AttackTrace ood_attack(const FlowModel& model, const Matrix& noise_batch, const AttackConfig& cfg) {
    AttackConfig up = cfg;
    up.direction = AttackDirection::increase_likelihood;
    return run_pgd(model, noise_batch, up, RngState{0});
}

} // namespace flowguard
