#include "flowguard/flow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "flowguard/errors.hpp"
#include "flowguard/num_format.hpp"
#include "flowguard/parallel.hpp"

namespace flowguard {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<std::int64_t> mask_indices(const std::vector<std::uint8_t>& mask, std::uint8_t want) {
    std::vector<std::int64_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] == want) idx.push_back(static_cast<std::int64_t>(i));
    return idx;
}

void check_finite(const ad::Tensor& t, std::size_t layer_index, const char* where) {
    for (double v : t.data)
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << where << ": non-finite output at layer " << layer_index;
            throw NumericError(os.str());
        }
}

void check_finite_matrix(const Matrix& m, std::size_t layer_index, const char* where) {
    for (double v : m.data)
        if (!std::isfinite(v)) {
            std::ostringstream os;
            os << where << ": non-finite output at layer " << layer_index;
            throw NumericError(os.str());
        }
}

// plain (non-tape) MLP forward, same kernels as the tape path
Matrix mlp_forward_plain(const Mlp& net, const Matrix& in) {
    Matrix h = in;
    for (std::size_t i = 0; i < net.weights.size(); ++i) {
        const Matrix& w = net.weights[i];
        Matrix out(h.rows, w.cols);
        ad::kernels::matmul(h.data.data(), w.data.data(), out.data.data(), h.rows, h.cols, w.cols);
        const auto& b = net.biases[i];
        for (std::int64_t r = 0; r < out.rows; ++r)
            for (std::int64_t c = 0; c < out.cols; ++c) out.at(r, c) += b[static_cast<std::size_t>(c)];
        if (i + 1 < net.weights.size())
            for (auto& v : out.data) v = std::tanh(v);
        h = std::move(out);
    }
    return h;
}

Mlp build_mlp(int in_width, const std::vector<int>& hidden, int out_width, Rng& rng) {
    Mlp net;
    std::vector<int> widths;
    widths.push_back(in_width);
    for (int h : hidden) widths.push_back(h);
    widths.push_back(out_width);
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        Matrix w(widths[i], widths[i + 1]);
        const bool last = (i + 2 == widths.size());
        if (!last) {
            const double scale = 1.0 / std::sqrt(static_cast<double>(widths[i]));
            for (auto& v : w.data) v = scale * rng.next_normal();
        }
        net.weights.push_back(std::move(w));
        net.biases.emplace_back(static_cast<std::size_t>(widths[i + 1]), 0.0);
    }
    return net;
}

} // namespace

FlowModel build_flow(const FlowArchitecture& arch, std::uint64_t seed, double init_noise) {
    if (arch.dim < 2) throw ConfigError("build_flow: coupling flows need dim >= 2");
    if (arch.num_blocks < 1) throw ConfigError("build_flow: need at least one block");
    FlowModel m;
    m.dim = arch.dim;
    m.meta.seed = seed;
    Rng rng(RngState{seed});

    for (int b = 0; b < arch.num_blocks; ++b) {
        if (arch.use_actnorm) {
            ActNormLayer a;
            a.log_scale.assign(static_cast<std::size_t>(arch.dim), 0.0);
            a.bias.assign(static_cast<std::size_t>(arch.dim), 0.0);
            m.layers.emplace_back(std::move(a));
        }
        if (arch.use_invlinear) {
            InvLinearLayer l;
            l.perm.resize(static_cast<std::size_t>(arch.dim));
            std::iota(l.perm.begin(), l.perm.end(), 0);
            l.lower_strict = Matrix(arch.dim, arch.dim);
            l.upper_strict = Matrix(arch.dim, arch.dim);
            l.log_diag.assign(static_cast<std::size_t>(arch.dim), 0.0);
            l.diag_sign.assign(static_cast<std::size_t>(arch.dim), 1.0);
            m.layers.emplace_back(std::move(l));
        }
        CouplingLayer c;
        c.mask.resize(static_cast<std::size_t>(arch.dim));
        for (int i = 0; i < arch.dim; ++i)
            c.mask[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((i + b) % 2 == 0 ? 1 : 0);
        const int pass = static_cast<int>(mask_indices(c.mask, 1).size());
        const int act = arch.dim - pass;
        c.s_clamp = arch.s_clamp;
        c.s_net = build_mlp(pass, arch.hidden, act, rng);
        c.t_net = build_mlp(pass, arch.hidden, act, rng);
        m.layers.emplace_back(std::move(c));
    }

    if (init_noise > 0.0) {
        for_each_param(m, [&](std::vector<double>& p) {
            for (auto& v : p) v += init_noise * rng.next_normal();
        });
        for (auto& layer : m.layers)
            if (auto* inv = std::get_if<InvLinearLayer>(&layer)) {
                for (std::size_t i = inv->perm.size(); i > 1; --i) {
                    const auto j = rng.next_below(i);
                    std::swap(inv->perm[i - 1], inv->perm[static_cast<std::size_t>(j)]);
                }
            }
    }
    return m;
}

void for_each_param(FlowModel& model, const std::function<void(std::vector<double>&)>& fn) {
    for (auto& layer : model.layers) {
        if (auto* a = std::get_if<ActNormLayer>(&layer)) {
            fn(a->log_scale);
            fn(a->bias);
        } else if (auto* l = std::get_if<InvLinearLayer>(&layer)) {
            fn(l->lower_strict.data);
            fn(l->upper_strict.data);
            fn(l->log_diag);
        } else if (auto* c = std::get_if<CouplingLayer>(&layer)) {
            for (Mlp* net : {&c->s_net, &c->t_net})
                for (std::size_t i = 0; i < net->weights.size(); ++i) {
                    fn(net->weights[i].data);
                    fn(net->biases[i]);
                }
        }
    }
}

void for_each_param(const FlowModel& model, const std::function<void(const std::vector<double>&)>& fn) {
    for_each_param(const_cast<FlowModel&>(model),
                   [&](std::vector<double>& p) { fn(const_cast<const std::vector<double>&>(p)); });
}

std::int64_t param_count(const FlowModel& model) {
    std::int64_t n = 0;
    for_each_param(model, [&](const std::vector<double>& p) { n += static_cast<std::int64_t>(p.size()); });
    return n;
}

FlowTapeGraph build_nll_graph(const FlowModel& model, const Matrix& x,
                              bool x_requires_grad, bool params_require_grad) {
    if (static_cast<int>(x.cols) != model.dim) throw NumericError("flow: batch dimension mismatch");
    if (x.rows < 1) throw NumericError("flow: empty batch");

    FlowTapeGraph g;
    ad::Tape& t = g.tape;
    const std::int64_t B = x.rows;
    const int n = model.dim;

    {
        ad::Tensor tx = ad::Tensor::matrix(x, x_requires_grad);
        g.x = t.leaf(std::move(tx));
    }
    auto param_leaf = [&](const std::vector<double>& values, std::vector<std::int64_t> shape) {
        ad::Tensor p;
        p.shape = std::move(shape);
        p.data = values;
        p.requires_grad = params_require_grad;
        const auto id = t.leaf(std::move(p));
        g.params.push_back(id);
        return id;
    };

    ad::Tape::Id cur = g.x;
    ad::Tape::Id ld = t.leaf(ad::Tensor::zeros({B}));

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        const auto& layer = model.layers[li];
        if (const auto* a = std::get_if<ActNormLayer>(&layer)) {
            const auto ls = param_leaf(a->log_scale, {n});
            const auto bias = param_leaf(a->bias, {n});
            cur = t.add_rowvec(t.mul_rowvec(cur, t.exp(ls)), bias);
            ld = t.add_scalar(ld, t.sum(ls));
        } else if (const auto* l = std::get_if<InvLinearLayer>(&layer)) {
            const auto lo = param_leaf(l->lower_strict.data, {n, n});
            const auto up = param_leaf(l->upper_strict.data, {n, n});
            const auto ldg = param_leaf(l->log_diag, {n});

            ad::Tensor mask_lo = ad::Tensor::zeros({n, n});
            ad::Tensor mask_up = ad::Tensor::zeros({n, n});
            ad::Tensor ident = ad::Tensor::zeros({n, n});
            ad::Tensor pmat = ad::Tensor::zeros({n, n});
            for (int r = 0; r < n; ++r) {
                ident.data[static_cast<std::size_t>(r * n + r)] = 1.0;
                pmat.data[static_cast<std::size_t>(r * n + l->perm[static_cast<std::size_t>(r)])] = 1.0;
                for (int c = 0; c < n; ++c) {
                    if (c < r) mask_lo.data[static_cast<std::size_t>(r * n + c)] = 1.0;
                    if (c > r) mask_up.data[static_cast<std::size_t>(r * n + c)] = 1.0;
                }
            }
            const auto sign = t.leaf(ad::Tensor::vector(l->diag_sign));
            const auto lmat = t.add(t.mul(lo, t.leaf(std::move(mask_lo))), t.leaf(std::move(ident)));
            const auto umat = t.add(t.mul(up, t.leaf(std::move(mask_up))), t.diag(t.mul(t.exp(ldg), sign)));
            const auto w = t.matmul(t.leaf(std::move(pmat)), t.matmul(lmat, umat));
            cur = t.matmul(cur, t.transpose(w));
            ld = t.add_scalar(ld, t.sum(ldg));
        } else if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
            const auto pass_idx = mask_indices(c->mask, 1);
            const auto act_idx = mask_indices(c->mask, 0);
            if (pass_idx.empty() || act_idx.empty())
                throw NumericError("coupling layer: mask must have at least one 0 and one 1");
            const auto xp = t.select_cols(cur, pass_idx);
            const auto xa = t.select_cols(cur, act_idx);

            auto mlp_tape = [&](const Mlp& net, ad::Tape::Id input) {
                ad::Tape::Id h = input;
                for (std::size_t i = 0; i < net.weights.size(); ++i) {
                    const auto w = param_leaf(net.weights[i].data,
                                              {net.weights[i].rows, net.weights[i].cols});
                    const auto b = param_leaf(net.biases[i],
                                              {static_cast<std::int64_t>(net.biases[i].size())});
                    h = t.add_rowvec(t.matmul(h, w), b);
                    if (i + 1 < net.weights.size()) h = t.tanh(h);
                }
                return h;
            };
            const auto s_raw = mlp_tape(c->s_net, xp);
            const auto s = t.smul(t.tanh(t.smul(s_raw, 1.0 / c->s_clamp)), c->s_clamp);
            const auto tt = mlp_tape(c->t_net, xp);
            const auto za = t.add(t.mul(xa, t.exp(s)), tt);
            cur = t.concat_cols(xp, za, pass_idx, act_idx);
            ld = t.add(ld, t.row_sum(s));
        }
        check_finite(t.value(cur), li, "flow_forward");
    }

    g.z = cur;
    g.logdet = ld;
    const auto quad = t.smul(t.row_sum(t.mul(cur, cur)), 0.5);
    g.nll_vec = t.sadd(t.sub(quad, ld), 0.5 * n * kLog2Pi);
    g.mean_nll = t.mean(g.nll_vec);
    g.sum_nll = t.sum(g.nll_vec);
    return g;
}

FlowForwardResult flow_forward(const FlowModel& model, const Matrix& x) {
    FlowTapeGraph g = build_nll_graph(model, x, false, false);
    FlowForwardResult out;
    const ad::Tensor& z = g.tape.value(g.z);
    out.z.rows = x.rows;
    out.z.cols = x.cols;
    out.z.data = z.data;
    out.logdet = g.tape.value(g.logdet).data;
    return out;
}

Matrix flow_inverse(const FlowModel& model, const Matrix& z) {
    if (static_cast<int>(z.cols) != model.dim) throw NumericError("flow_inverse: batch dimension mismatch");
    Matrix cur = z;
    const int n = model.dim;

    for (std::size_t step = 0; step < model.layers.size(); ++step) {
        const std::size_t li = model.layers.size() - 1 - step;
        const auto& layer = model.layers[li];
        if (const auto* a = std::get_if<ActNormLayer>(&layer)) {
            for (std::int64_t r = 0; r < cur.rows; ++r)
                for (int c = 0; c < n; ++c)
                    cur.at(r, c) = (cur.at(r, c) - a->bias[static_cast<std::size_t>(c)]) *
                                   std::exp(-a->log_scale[static_cast<std::size_t>(c)]);
        } else if (const auto* l = std::get_if<InvLinearLayer>(&layer)) {
            // solve P L U x = z row by row with triangular solves
            par::parallel_for(cur.rows, [&](std::int64_t r) {
                std::vector<double> v(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
                for (int i = 0; i < n; ++i)
                    v[static_cast<std::size_t>(l->perm[static_cast<std::size_t>(i)])] = cur.at(r, i);
                for (int i = 0; i < n; ++i) {
                    double acc = v[static_cast<std::size_t>(i)];
                    for (int c = 0; c < i; ++c) acc -= l->lower_strict.at(i, c) * y[static_cast<std::size_t>(c)];
                    y[static_cast<std::size_t>(i)] = acc;
                }
                for (int i = n - 1; i >= 0; --i) {
                    double acc = y[static_cast<std::size_t>(i)];
                    for (int c = i + 1; c < n; ++c) acc -= l->upper_strict.at(i, c) * cur.at(r, c);
                    const double diag = l->diag_sign[static_cast<std::size_t>(i)] *
                                        std::exp(l->log_diag[static_cast<std::size_t>(i)]);
                    cur.at(r, i) = acc / diag;
                }
            });
        } else if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
            const auto pass_idx = mask_indices(c->mask, 1);
            const auto act_idx = mask_indices(c->mask, 0);
            Matrix zp(cur.rows, static_cast<std::int64_t>(pass_idx.size()));
            for (std::int64_t r = 0; r < cur.rows; ++r)
                for (std::size_t j = 0; j < pass_idx.size(); ++j)
                    zp.at(r, static_cast<std::int64_t>(j)) = cur.at(r, pass_idx[j]);
            const Matrix s_raw = mlp_forward_plain(c->s_net, zp);
            const Matrix tmat = mlp_forward_plain(c->t_net, zp);
            const double inv_clamp = 1.0 / c->s_clamp;
            for (std::int64_t r = 0; r < cur.rows; ++r)
                for (std::size_t j = 0; j < act_idx.size(); ++j) {
                    const double s = c->s_clamp * std::tanh(s_raw.at(r, static_cast<std::int64_t>(j)) * inv_clamp);
                    const double za = cur.at(r, act_idx[j]);
                    cur.at(r, act_idx[j]) = (za - tmat.at(r, static_cast<std::int64_t>(j))) * std::exp(-s);
                }
        }
        check_finite_matrix(cur, li, "flow_inverse");
    }
    return cur;
}

NllResult nll(const FlowModel& model, const Matrix& x) {
    FlowTapeGraph g = build_nll_graph(model, x, false, false);
    NllResult out;
    out.nll_nats = g.tape.value(g.nll_vec).data;
    const double offset = model.dequant.enabled ? std::log2(static_cast<double>(model.dequant.bins)) : 0.0;
    const double denom = static_cast<double>(model.dim) * std::log(2.0);
    out.bits_per_dim.resize(out.nll_nats.size());
    double acc_nats = 0.0, acc_bpd = 0.0;
    for (std::size_t i = 0; i < out.nll_nats.size(); ++i) {
        out.bits_per_dim[i] = out.nll_nats[i] / denom + offset;
        acc_nats += out.nll_nats[i];
        acc_bpd += out.bits_per_dim[i];
    }
    out.mean_nats = acc_nats / static_cast<double>(out.nll_nats.size());
    out.mean_bits_per_dim = acc_bpd / static_cast<double>(out.nll_nats.size());
    return out;
}

double nats_to_bits_per_dim(const FlowModel& model, double nats) {
    const double offset = model.dequant.enabled ? std::log2(static_cast<double>(model.dequant.bins)) : 0.0;
    return nats / (static_cast<double>(model.dim) * std::log(2.0)) + offset;
}

Matrix sample_flow(const FlowModel& model, std::int64_t count, double temperature, RngState rng) {
    if (count < 1) throw NumericError("sample_flow: count must be >= 1");
    if (!(temperature > 0.0)) throw NumericError("sample_flow: temperature must be > 0");
    const int n = model.dim;
    Matrix z(count, n);
    constexpr std::int64_t kChunk = 1 << 12;
    const std::int64_t chunks = (count + kChunk - 1) / kChunk;
    par::parallel_for(chunks, [&](std::int64_t j) {
        Rng gen(rng.substream(static_cast<std::uint64_t>(j)));
        const std::int64_t begin = j * kChunk;
        const std::int64_t end = std::min<std::int64_t>(begin + kChunk, count);
        for (std::int64_t r = begin; r < end; ++r)
            for (int c = 0; c < n; ++c) z.at(r, c) = temperature * gen.next_normal();
    });
    return flow_inverse(model, z);
}

double cross_evaluate(const FlowModel& generator, const FlowModel& evaluator,
                      std::int64_t count, double temperature, RngState rng) {
    if (generator.dim != evaluator.dim) throw NumericError("cross_evaluate: dimension mismatch");
    const Matrix samples = sample_flow(generator, count, temperature, rng);
    return nll(evaluator, samples).mean_bits_per_dim;
}

void actnorm_init(FlowModel& model, const Matrix& batch) {
    if (batch.rows < 2) throw NumericError("actnorm_init: need at least 2 samples");
    Matrix cur = batch;
    const int n = model.dim;
    for (auto& layer : model.layers) {
        if (auto* a = std::get_if<ActNormLayer>(&layer)) {
            if (!a->initialized) {
                for (int c = 0; c < n; ++c) {
                    double mean = 0.0;
                    for (std::int64_t r = 0; r < cur.rows; ++r) mean += cur.at(r, c);
                    mean /= static_cast<double>(cur.rows);
                    double var = 0.0;
                    for (std::int64_t r = 0; r < cur.rows; ++r) {
                        const double d = cur.at(r, c) - mean;
                        var += d * d;
                    }
                    var /= static_cast<double>(cur.rows);
                    const double scale = 1.0 / std::max(std::sqrt(var), 1e-7);
                    a->log_scale[static_cast<std::size_t>(c)] = std::log(scale);
                    a->bias[static_cast<std::size_t>(c)] = -mean * scale;
                }
                a->initialized = true;
            }
        }
        // apply this layer and continue; reuse the graph machinery on a
        // single-layer model to avoid duplicating forward logic
        FlowModel one;
        one.dim = model.dim;
        one.layers.push_back(layer);
        cur = flow_forward(one, cur).z;
    }
}

namespace {

using nlohmann::json;

json doubles_to_json(const std::vector<double>& v) {
    json arr = json::array();
    for (double x : v) arr.push_back(format_double(x));
    return arr;
}

std::vector<double> doubles_from_json(const json& arr) {
    std::vector<double> v;
    v.reserve(arr.size());
    for (const auto& s : arr) v.push_back(parse_double(s.get<std::string>()));
    return v;
}

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", doubles_to_json(m.data)}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::int64_t>(), j.at("cols").get<std::int64_t>());
    m.data = doubles_from_json(j.at("data"));
    if (static_cast<std::int64_t>(m.data.size()) != m.rows * m.cols)
        throw IoError("checkpoint: matrix size mismatch");
    return m;
}

json mlp_to_json(const Mlp& net) {
    json weights = json::array(), biases = json::array();
    for (const auto& w : net.weights) weights.push_back(matrix_to_json(w));
    for (const auto& b : net.biases) biases.push_back(doubles_to_json(b));
    return json{{"weights", weights}, {"biases", biases}};
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    for (const auto& w : j.at("weights")) net.weights.push_back(matrix_from_json(w));
    for (const auto& b : j.at("biases")) net.biases.push_back(doubles_from_json(b));
    if (net.weights.size() != net.biases.size() || net.weights.empty())
        throw IoError("checkpoint: malformed mlp");
    return net;
}

} // namespace

std::string checkpoint_to_json(const FlowModel& model) {
    json layers = json::array();
    for (const auto& layer : model.layers) {
        if (const auto* a = std::get_if<ActNormLayer>(&layer)) {
            layers.push_back(json{{"type", "actnorm"},
                                  {"log_scale", doubles_to_json(a->log_scale)},
                                  {"bias", doubles_to_json(a->bias)},
                                  {"initialized", a->initialized}});
        } else if (const auto* l = std::get_if<InvLinearLayer>(&layer)) {
            json signs = json::array();
            for (double s : l->diag_sign) signs.push_back(s > 0 ? 1 : -1);
            layers.push_back(json{{"type", "invlinear"},
                                  {"perm", l->perm},
                                  {"lower_strict", matrix_to_json(l->lower_strict)},
                                  {"upper_strict", matrix_to_json(l->upper_strict)},
                                  {"log_diag", doubles_to_json(l->log_diag)},
                                  {"diag_sign", signs}});
        } else if (const auto* c = std::get_if<CouplingLayer>(&layer)) {
            layers.push_back(json{{"type", "coupling"},
                                  {"mask", c->mask},
                                  {"s_clamp", format_double(c->s_clamp)},
                                  {"s_net", mlp_to_json(c->s_net)},
                                  {"t_net", mlp_to_json(c->t_net)}});
        }
    }
    json doc{{"format_version", 1},
             {"dim", model.dim},
             {"dequantization", json{{"enabled", model.dequant.enabled}, {"bins", model.dequant.bins}}},
             {"layers", layers},
             {"training", json{{"seed", model.meta.seed},
                               {"epochs", model.meta.epochs},
                               {"mode", model.meta.mode},
                               {"loss_curve", doubles_to_json(model.meta.loss_curve)}}}};
    return doc.dump(2) + "\n";
}

FlowModel checkpoint_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        if (doc.at("format_version").get<int>() != 1)
            throw IoError("checkpoint: unsupported format_version");
        FlowModel m;
        m.dim = doc.at("dim").get<int>();
        m.dequant.enabled = doc.at("dequantization").at("enabled").get<bool>();
        m.dequant.bins = doc.at("dequantization").at("bins").get<int>();
        for (const auto& jl : doc.at("layers")) {
            const std::string type = jl.at("type").get<std::string>();
            if (type == "actnorm") {
                ActNormLayer a;
                a.log_scale = doubles_from_json(jl.at("log_scale"));
                a.bias = doubles_from_json(jl.at("bias"));
                a.initialized = jl.at("initialized").get<bool>();
                m.layers.emplace_back(std::move(a));
            } else if (type == "invlinear") {
                InvLinearLayer l;
                l.perm = jl.at("perm").get<std::vector<int>>();
                l.lower_strict = matrix_from_json(jl.at("lower_strict"));
                l.upper_strict = matrix_from_json(jl.at("upper_strict"));
                l.log_diag = doubles_from_json(jl.at("log_diag"));
                for (int s : jl.at("diag_sign").get<std::vector<int>>())
                    l.diag_sign.push_back(s >= 0 ? 1.0 : -1.0);
                m.layers.emplace_back(std::move(l));
            } else if (type == "coupling") {
                CouplingLayer c;
                c.mask = jl.at("mask").get<std::vector<std::uint8_t>>();
                c.s_clamp = parse_double(jl.at("s_clamp").get<std::string>());
                c.s_net = mlp_from_json(jl.at("s_net"));
                c.t_net = mlp_from_json(jl.at("t_net"));
                m.layers.emplace_back(std::move(c));
            } else {
                throw IoError("checkpoint: unknown layer type '" + type + "'");
            }
        }
        m.meta.seed = doc.at("training").at("seed").get<std::uint64_t>();
        m.meta.epochs = doc.at("training").at("epochs").get<int>();
        m.meta.mode = doc.at("training").at("mode").get<std::string>();
        m.meta.loss_curve = doubles_from_json(doc.at("training").at("loss_curve"));
        return m;
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint: missing or malformed field: ") + e.what());
    }
}

void save_checkpoint(const FlowModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_checkpoint: cannot open '" + path + "'");
    out << checkpoint_to_json(model);
    if (!out) throw IoError("save_checkpoint: write failed for '" + path + "'");
}

FlowModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_checkpoint: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

} // namespace flowguard
