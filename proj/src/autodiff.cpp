#include "flowguard/autodiff.hpp"

#include <atomic>
#include <cmath>

#include "flowguard/errors.hpp"
#include "flowguard/parallel.hpp"

namespace flowguard::ad {

namespace {
std::atomic<bool> g_checked{true};

std::int64_t numel_of(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void require(bool cond, const char* msg) {
    if (!cond) throw NumericError(msg);
}
} // namespace

void set_checked(bool on) { g_checked.store(on); }
bool checked() { return g_checked.load(); }

Tensor Tensor::scalar(double v, bool rg) {
    Tensor t;
    t.data = {v};
    t.requires_grad = rg;
    return t;
}

Tensor Tensor::vector(std::span<const double> v, bool rg) {
    Tensor t;
    t.shape = {static_cast<std::int64_t>(v.size())};
    t.data.assign(v.begin(), v.end());
    t.requires_grad = rg;
    return t;
}

Tensor Tensor::matrix(const Matrix& m, bool rg) {
    Tensor t;
    t.shape = {m.rows, m.cols};
    t.data = m.data;
    t.requires_grad = rg;
    return t;
}

Tensor Tensor::zeros(std::vector<std::int64_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(static_cast<std::size_t>(numel_of(t.shape)), 0.0);
    return t;
}

std::int64_t Tensor::numel() const { return numel_of(shape); }

namespace kernels {

void matmul(const double* a, const double* b, double* out,
            std::int64_t rows, std::int64_t inner, std::int64_t cols) {
    par::parallel_for(rows, [&](std::int64_t r) {
        for (std::int64_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::int64_t k = 0; k < inner; ++k) acc += a[r * inner + k] * b[k * cols + c];
            out[r * cols + c] = acc;
        }
    });
}

void matmul_acc_a(const double* g, const double* b, double* ga,
                  std::int64_t rows, std::int64_t inner, std::int64_t cols) {
    // ga[r,k] += sum_c g[r,c] * b[k,c]
    par::parallel_for(rows, [&](std::int64_t r) {
        for (std::int64_t k = 0; k < inner; ++k) {
            double acc = 0.0;
            for (std::int64_t c = 0; c < cols; ++c) acc += g[r * cols + c] * b[k * cols + c];
            ga[r * inner + k] += acc;
        }
    });
}

void matmul_acc_b(const double* a, const double* g, double* gb,
                  std::int64_t rows, std::int64_t inner, std::int64_t cols) {
    // gb[k,c] += sum_r a[r,k] * g[r,c]
    par::parallel_for(inner, [&](std::int64_t k) {
        for (std::int64_t c = 0; c < cols; ++c) {
            double acc = 0.0;
            for (std::int64_t r = 0; r < rows; ++r) acc += a[r * inner + k] * g[r * cols + c];
            gb[k * cols + c] += acc;
        }
    });
}

} // namespace kernels

Tape::Id Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Tensor t) {
    if (checked())
        for (double v : t.data)
            if (!std::isfinite(v)) throw NumericError("Tensor leaf: non-finite entry");
    Node n;
    n.op = Op::Leaf;
    n.needs_grad = t.requires_grad;
    n.val = std::move(t);
    return push(std::move(n));
}

const Tensor& Tape::value(Id id) const { return node(id).val; }

const Tensor& Tape::grad(Id id) const {
    const Node& n = node(id);
    require(!n.grad.data.empty(), "Tape::grad: no gradient recorded; run backward first");
    return n.grad;
}

namespace {
Tensor elementwise_like(const Tensor& a) {
    Tensor t;
    t.shape = a.shape;
    t.data.resize(a.data.size());
    return t;
}
} // namespace

Tape::Id Tape::add(Id a, Id b) {
    const Tensor &va = value(a), &vb = value(b);
    require(va.shape == vb.shape, "add: shape mismatch");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = va.data[i] + vb.data[i];
    return push(std::move(n));
}

Tape::Id Tape::sub(Id a, Id b) {
    const Tensor &va = value(a), &vb = value(b);
    require(va.shape == vb.shape, "sub: shape mismatch");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = va.data[i] - vb.data[i];
    return push(std::move(n));
}

Tape::Id Tape::mul(Id a, Id b) {
    const Tensor &va = value(a), &vb = value(b);
    require(va.shape == vb.shape, "mul: shape mismatch");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = va.data[i] * vb.data[i];
    return push(std::move(n));
}

Tape::Id Tape::smul(Id a, double s) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Smul;
    n.a = a;
    n.s = s;
    n.needs_grad = node(a).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = va.data[i] * s;
    return push(std::move(n));
}

Tape::Id Tape::sadd(Id a, double s) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Sadd;
    n.a = a;
    n.s = s;
    n.needs_grad = node(a).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = va.data[i] + s;
    return push(std::move(n));
}

Tape::Id Tape::matmul(Id a, Id b) {
    const Tensor &va = value(a), &vb = value(b);
    require(va.shape.size() == 2 && vb.shape.size() == 2, "matmul: rank-2 operands required");
    require(va.shape[1] == vb.shape[0], "matmul: inner dimension mismatch");
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.val = Tensor::zeros({va.shape[0], vb.shape[1]});
    kernels::matmul(va.data.data(), vb.data.data(), n.val.data.data(), va.shape[0], va.shape[1], vb.shape[1]);
    return push(std::move(n));
}

Tape::Id Tape::transpose(Id a) {
    const Tensor& va = value(a);
    require(va.shape.size() == 2, "transpose: rank-2 operand required");
    Node n;
    n.op = Op::Transpose;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    n.val = Tensor::zeros({va.shape[1], va.shape[0]});
    for (std::int64_t r = 0; r < va.shape[0]; ++r)
        for (std::int64_t c = 0; c < va.shape[1]; ++c)
            n.val.data[static_cast<std::size_t>(c * va.shape[0] + r)] = va.data[static_cast<std::size_t>(r * va.shape[1] + c)];
    return push(std::move(n));
}

Tape::Id Tape::exp(Id a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Exp;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = std::exp(va.data[i]);
    return push(std::move(n));
}

Tape::Id Tape::log(Id a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Log;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = std::log(va.data[i]);
    return push(std::move(n));
}

Tape::Id Tape::tanh(Id a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    n.val = elementwise_like(va);
    for (std::size_t i = 0; i < va.data.size(); ++i) n.val.data[i] = std::tanh(va.data[i]);
    return push(std::move(n));
}

Tape::Id Tape::sum(Id a) {
    const Tensor& va = value(a);
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    double acc = 0.0;
    for (double v : va.data) acc += v;
    n.val = Tensor::scalar(acc);
    return push(std::move(n));
}

Tape::Id Tape::mean(Id a) {
    const Tensor& va = value(a);
    require(va.numel() > 0, "mean: empty tensor");
    Node n;
    n.op = Op::Mean;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    double acc = 0.0;
    for (double v : va.data) acc += v;
    n.val = Tensor::scalar(acc / static_cast<double>(va.numel()));
    return push(std::move(n));
}

Tape::Id Tape::row_sum(Id a) {
    const Tensor& va = value(a);
    require(va.shape.size() == 2, "row_sum: rank-2 operand required");
    Node n;
    n.op = Op::RowSum;
    n.a = a;
    n.needs_grad = node(a).needs_grad;
    n.val = Tensor::zeros({va.shape[0]});
    for (std::int64_t r = 0; r < va.shape[0]; ++r) {
        double acc = 0.0;
        for (std::int64_t c = 0; c < va.shape[1]; ++c) acc += va.data[static_cast<std::size_t>(r * va.shape[1] + c)];
        n.val.data[static_cast<std::size_t>(r)] = acc;
    }
    return push(std::move(n));
}

Tape::Id Tape::add_rowvec(Id m, Id v) {
    const Tensor &vm = value(m), &vv = value(v);
    require(vm.shape.size() == 2 && vv.shape.size() == 1, "add_rowvec: [R,C] and [C] required");
    require(vm.shape[1] == vv.shape[0], "add_rowvec: width mismatch");
    Node n;
    n.op = Op::AddRowvec;
    n.a = m;
    n.b = v;
    n.needs_grad = node(m).needs_grad || node(v).needs_grad;
    n.val = elementwise_like(vm);
    for (std::int64_t r = 0; r < vm.shape[0]; ++r)
        for (std::int64_t c = 0; c < vm.shape[1]; ++c)
            n.val.data[static_cast<std::size_t>(r * vm.shape[1] + c)] =
                vm.data[static_cast<std::size_t>(r * vm.shape[1] + c)] + vv.data[static_cast<std::size_t>(c)];
    return push(std::move(n));
}

Tape::Id Tape::mul_rowvec(Id m, Id v) {
    const Tensor &vm = value(m), &vv = value(v);
    require(vm.shape.size() == 2 && vv.shape.size() == 1, "mul_rowvec: [R,C] and [C] required");
    require(vm.shape[1] == vv.shape[0], "mul_rowvec: width mismatch");
    Node n;
    n.op = Op::MulRowvec;
    n.a = m;
    n.b = v;
    n.needs_grad = node(m).needs_grad || node(v).needs_grad;
    n.val = elementwise_like(vm);
    for (std::int64_t r = 0; r < vm.shape[0]; ++r)
        for (std::int64_t c = 0; c < vm.shape[1]; ++c)
            n.val.data[static_cast<std::size_t>(r * vm.shape[1] + c)] =
                vm.data[static_cast<std::size_t>(r * vm.shape[1] + c)] * vv.data[static_cast<std::size_t>(c)];
    return push(std::move(n));
}

Tape::Id Tape::scale_shift(Id m, Id s, Id t) { return add_rowvec(mul_rowvec(m, s), t); }

Tape::Id Tape::add_scalar(Id v, Id s) {
    const Tensor &vv = value(v), &vs = value(s);
    require(vs.numel() == 1, "add_scalar: scalar operand required");
    Node n;
    n.op = Op::AddScalar;
    n.a = v;
    n.b = s;
    n.needs_grad = node(v).needs_grad || node(s).needs_grad;
    n.val = elementwise_like(vv);
    for (std::size_t i = 0; i < vv.data.size(); ++i) n.val.data[i] = vv.data[i] + vs.data[0];
    return push(std::move(n));
}

Tape::Id Tape::select_cols(Id m, std::vector<std::int64_t> cols) {
    const Tensor& vm = value(m);
    require(vm.shape.size() == 2, "select_cols: rank-2 operand required");
    for (auto c : cols) require(c >= 0 && c < vm.shape[1], "select_cols: column out of range");
    Node n;
    n.op = Op::SelectCols;
    n.a = m;
    n.needs_grad = node(m).needs_grad;
    const std::int64_t k = static_cast<std::int64_t>(cols.size());
    n.val = Tensor::zeros({vm.shape[0], k});
    for (std::int64_t r = 0; r < vm.shape[0]; ++r)
        for (std::int64_t j = 0; j < k; ++j)
            n.val.data[static_cast<std::size_t>(r * k + j)] =
                vm.data[static_cast<std::size_t>(r * vm.shape[1] + cols[static_cast<std::size_t>(j)])];
    n.cols_a = std::move(cols);
    return push(std::move(n));
}

Tape::Id Tape::concat_cols(Id a, Id b, std::vector<std::int64_t> cols_a, std::vector<std::int64_t> cols_b) {
    const Tensor &va = value(a), &vb = value(b);
    require(va.shape.size() == 2 && vb.shape.size() == 2, "concat_cols: rank-2 operands required");
    require(va.shape[0] == vb.shape[0], "concat_cols: row count mismatch");
    require(va.shape[1] == static_cast<std::int64_t>(cols_a.size()) &&
                vb.shape[1] == static_cast<std::int64_t>(cols_b.size()),
            "concat_cols: column map size mismatch");
    const std::int64_t width = va.shape[1] + vb.shape[1];
    std::vector<bool> seen(static_cast<std::size_t>(width), false);
    for (auto c : cols_a) {
        require(c >= 0 && c < width && !seen[static_cast<std::size_t>(c)], "concat_cols: invalid column map");
        seen[static_cast<std::size_t>(c)] = true;
    }
    for (auto c : cols_b) {
        require(c >= 0 && c < width && !seen[static_cast<std::size_t>(c)], "concat_cols: invalid column map");
        seen[static_cast<std::size_t>(c)] = true;
    }
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.needs_grad = node(a).needs_grad || node(b).needs_grad;
    n.val = Tensor::zeros({va.shape[0], width});
    for (std::int64_t r = 0; r < va.shape[0]; ++r) {
        for (std::size_t j = 0; j < cols_a.size(); ++j)
            n.val.data[static_cast<std::size_t>(r * width + cols_a[j])] =
                va.data[static_cast<std::size_t>(r) * cols_a.size() + j];
        for (std::size_t j = 0; j < cols_b.size(); ++j)
            n.val.data[static_cast<std::size_t>(r * width + cols_b[j])] =
                vb.data[static_cast<std::size_t>(r) * cols_b.size() + j];
    }
    n.cols_a = std::move(cols_a);
    n.cols_b = std::move(cols_b);
    return push(std::move(n));
}

Tape::Id Tape::diag(Id v) {
    const Tensor& vv = value(v);
    require(vv.shape.size() == 1, "diag: rank-1 operand required");
    const std::int64_t n_ = vv.shape[0];
    Node n;
    n.op = Op::Diag;
    n.a = v;
    n.needs_grad = node(v).needs_grad;
    n.val = Tensor::zeros({n_, n_});
    for (std::int64_t i = 0; i < n_; ++i) n.val.data[static_cast<std::size_t>(i * n_ + i)] = vv.data[static_cast<std::size_t>(i)];
    return push(std::move(n));
}

Tensor& Tape::grad_buf(Id id) {
    Node& n = node(id);
    if (n.grad.data.empty()) {
        n.grad.shape = n.val.shape;
        n.grad.data.assign(n.val.data.size(), 0.0);
    }
    return n.grad;
}

void Tape::backward(Id root) {
    require(root >= 0 && root < size(), "backward: invalid root");
    require(node(root).val.numel() == 1, "backward: root must be a scalar");

    for (auto& n : nodes_) n.grad = Tensor{};
    grad_buf(root).data[0] = 1.0;

    for (Id i = root; i >= 0; --i) {
        Node& n = node(i);
        if (!n.needs_grad || n.grad.data.empty()) continue;
        const std::vector<double>& g = n.grad.data;
        const auto push_to = [&](Id target) -> std::vector<double>& { return grad_buf(target).data; };

        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                if (node(n.a).needs_grad) {
                    auto& ga = push_to(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                }
                if (node(n.b).needs_grad) {
                    auto& gb = push_to(n.b);
                    for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k];
                }
                break;
            }
            case Op::Sub: {
                if (node(n.a).needs_grad) {
                    auto& ga = push_to(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                }
                if (node(n.b).needs_grad) {
                    auto& gb = push_to(n.b);
                    for (std::size_t k = 0; k < g.size(); ++k) gb[k] -= g[k];
                }
                break;
            }
            case Op::Mul: {
                const auto& va = node(n.a).val.data;
                const auto& vb = node(n.b).val.data;
                if (node(n.a).needs_grad) {
                    auto& ga = push_to(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vb[k];
                }
                if (node(n.b).needs_grad) {
                    auto& gb = push_to(n.b);
                    for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * va[k];
                }
                break;
            }
            case Op::Smul: {
                auto& ga = push_to(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.s;
                break;
            }
            case Op::Sadd: {
                auto& ga = push_to(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k];
                break;
            }
            case Op::Matmul: {
                const Tensor& va = node(n.a).val;
                const Tensor& vb = node(n.b).val;
                const std::int64_t R = va.shape[0], K = va.shape[1], C = vb.shape[1];
                if (node(n.a).needs_grad)
                    kernels::matmul_acc_a(g.data(), vb.data.data(), push_to(n.a).data(), R, K, C);
                if (node(n.b).needs_grad)
                    kernels::matmul_acc_b(va.data.data(), g.data(), push_to(n.b).data(), R, K, C);
                break;
            }
            case Op::Transpose: {
                const Tensor& va = node(n.a).val;
                auto& ga = push_to(n.a);
                const std::int64_t R = va.shape[0], C = va.shape[1];
                for (std::int64_t r = 0; r < R; ++r)
                    for (std::int64_t c = 0; c < C; ++c)
                        ga[static_cast<std::size_t>(r * C + c)] += g[static_cast<std::size_t>(c * R + r)];
                break;
            }
            case Op::Exp: {
                auto& ga = push_to(n.a);
                const auto& vout = n.val.data;
                for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * vout[k];
                break;
            }
            case Op::Log: {
                auto& ga = push_to(n.a);
                const auto& va = node(n.a).val.data;
                for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] / va[k];
                break;
            }
            case Op::Tanh: {
                auto& ga = push_to(n.a);
                const auto& vout = n.val.data;
                for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * (1.0 - vout[k] * vout[k]);
                break;
            }
            case Op::Sum: {
                auto& ga = push_to(n.a);
                for (auto& v : ga) v += g[0];
                break;
            }
            case Op::Mean: {
                auto& ga = push_to(n.a);
                const double w = g[0] / static_cast<double>(node(n.a).val.numel());
                for (auto& v : ga) v += w;
                break;
            }
            case Op::RowSum: {
                const Tensor& va = node(n.a).val;
                auto& ga = push_to(n.a);
                for (std::int64_t r = 0; r < va.shape[0]; ++r)
                    for (std::int64_t c = 0; c < va.shape[1]; ++c)
                        ga[static_cast<std::size_t>(r * va.shape[1] + c)] += g[static_cast<std::size_t>(r)];
                break;
            }
            case Op::AddRowvec: {
                const Tensor& vm = node(n.a).val;
                const std::int64_t R = vm.shape[0], C = vm.shape[1];
                if (node(n.a).needs_grad) {
                    auto& gm = push_to(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) gm[k] += g[k];
                }
                if (node(n.b).needs_grad) {
                    auto& gv = push_to(n.b);
                    for (std::int64_t c = 0; c < C; ++c) {
                        double acc = 0.0;
                        for (std::int64_t r = 0; r < R; ++r) acc += g[static_cast<std::size_t>(r * C + c)];
                        gv[static_cast<std::size_t>(c)] += acc;
                    }
                }
                break;
            }
            case Op::MulRowvec: {
                const Tensor& vm = node(n.a).val;
                const Tensor& vv = node(n.b).val;
                const std::int64_t R = vm.shape[0], C = vm.shape[1];
                if (node(n.a).needs_grad) {
                    auto& gm = push_to(n.a);
                    for (std::int64_t r = 0; r < R; ++r)
                        for (std::int64_t c = 0; c < C; ++c)
                            gm[static_cast<std::size_t>(r * C + c)] +=
                                g[static_cast<std::size_t>(r * C + c)] * vv.data[static_cast<std::size_t>(c)];
                }
                if (node(n.b).needs_grad) {
                    auto& gv = push_to(n.b);
                    for (std::int64_t c = 0; c < C; ++c) {
                        double acc = 0.0;
                        for (std::int64_t r = 0; r < R; ++r)
                            acc += g[static_cast<std::size_t>(r * C + c)] * vm.data[static_cast<std::size_t>(r * C + c)];
                        gv[static_cast<std::size_t>(c)] += acc;
                    }
                }
                break;
            }
            case Op::AddScalar: {
                if (node(n.a).needs_grad) {
                    auto& gv = push_to(n.a);
                    for (std::size_t k = 0; k < g.size(); ++k) gv[k] += g[k];
                }
                if (node(n.b).needs_grad) {
                    auto& gs = push_to(n.b);
                    double acc = 0.0;
                    for (double v : g) acc += v;
                    gs[0] += acc;
                }
                break;
            }
            case Op::SelectCols: {
                const Tensor& vm = node(n.a).val;
                auto& gm = push_to(n.a);
                const std::int64_t R = vm.shape[0], C = vm.shape[1];
                const std::int64_t k = static_cast<std::int64_t>(n.cols_a.size());
                for (std::int64_t r = 0; r < R; ++r)
                    for (std::int64_t j = 0; j < k; ++j)
                        gm[static_cast<std::size_t>(r * C + n.cols_a[static_cast<std::size_t>(j)])] +=
                            g[static_cast<std::size_t>(r * k + j)];
                break;
            }
            case Op::ConcatCols: {
                const std::int64_t width = n.val.shape[1];
                const std::int64_t R = n.val.shape[0];
                if (node(n.a).needs_grad) {
                    auto& ga = push_to(n.a);
                    const std::int64_t ka = static_cast<std::int64_t>(n.cols_a.size());
                    for (std::int64_t r = 0; r < R; ++r)
                        for (std::int64_t j = 0; j < ka; ++j)
                            ga[static_cast<std::size_t>(r * ka + j)] +=
                                g[static_cast<std::size_t>(r * width + n.cols_a[static_cast<std::size_t>(j)])];
                }
                if (node(n.b).needs_grad) {
                    auto& gb = push_to(n.b);
                    const std::int64_t kb = static_cast<std::int64_t>(n.cols_b.size());
                    for (std::int64_t r = 0; r < R; ++r)
                        for (std::int64_t j = 0; j < kb; ++j)
                            gb[static_cast<std::size_t>(r * kb + j)] +=
                                g[static_cast<std::size_t>(r * width + n.cols_b[static_cast<std::size_t>(j)])];
                }
                break;
            }
            case Op::Diag: {
                const std::int64_t d = node(n.a).val.shape[0];
                auto& gv = push_to(n.a);
                for (std::int64_t i = 0; i < d; ++i) gv[static_cast<std::size_t>(i)] += g[static_cast<std::size_t>(i * d + i)];
                break;
            }
        }
    }
}

} // namespace flowguard::ad
