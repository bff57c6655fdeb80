#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flowguard/matrix.hpp"

namespace flowguard::ad {

// Dense tensor of doubles. Rank 0 (scalar), 1 (vector) or 2 (matrix) is all
// the flow stack needs; no broadcasting beyond the explicit *_rowvec and
// scalar ops below.
struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
    bool requires_grad = false;

    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor vector(std::span<const double> v, bool requires_grad = false);
    static Tensor matrix(const Matrix& m, bool requires_grad = false);
    static Tensor zeros(std::vector<std::int64_t> shape);

    std::int64_t numel() const;
    std::int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

// When true (default), leaf creation rejects non-finite entries.
void set_checked(bool on);
bool checked();

// Recording tape. Nodes are appended in execution order; backward walks the
// record once in reverse with a fixed accumulation order, so adjoints are
// bit-reproducible run to run.
class Tape {
  public:
    using Id = std::int32_t;

    Id leaf(Tensor t);

    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id mul(Id a, Id b);
    Id smul(Id a, double s);
    Id sadd(Id a, double s);
    Id matmul(Id a, Id b);
    Id transpose(Id a);
    Id exp(Id a);
    Id log(Id a);
    Id tanh(Id a);
    Id sum(Id a);
    Id mean(Id a);
    Id row_sum(Id a);                          // [R,C] -> [R]
    Id add_rowvec(Id m, Id v);                 // [R,C] + [C] per row
    Id mul_rowvec(Id m, Id v);                 // [R,C] * [C] per row
    Id scale_shift(Id m, Id s, Id t);          // m * s + t, rowwise
    Id add_scalar(Id v, Id s);                 // [R] + scalar node
    Id select_cols(Id m, std::vector<std::int64_t> cols);
    Id concat_cols(Id a, Id b, std::vector<std::int64_t> cols_a, std::vector<std::int64_t> cols_b);
    Id diag(Id v);

    const Tensor& value(Id id) const;
    std::int64_t size() const { return static_cast<std::int64_t>(nodes_.size()); }

    // Reverse-mode sweep from a scalar root. Clears previous gradients.
    void backward(Id root);
    const Tensor& grad(Id id) const;

  private:
    enum class Op : std::uint8_t {
        Leaf, Add, Sub, Mul, Smul, Sadd, Matmul, Transpose, Exp, Log, Tanh,
        Sum, Mean, RowSum, AddRowvec, MulRowvec, AddScalar, SelectCols,
        ConcatCols, Diag
    };
    struct Node {
        Op op = Op::Leaf;
        Id a = -1, b = -1;
        double s = 0.0;
        std::vector<std::int64_t> cols_a, cols_b;
        Tensor val;
        Tensor grad;
        bool needs_grad = false;
    };

    Id push(Node n);
    Node& node(Id id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Node& node(Id id) const { return nodes_[static_cast<std::size_t>(id)]; }
    Tensor& grad_buf(Id id);

    std::vector<Node> nodes_;
};

// Shared dense kernels. The tape and the flow's plain evaluation path both
// call these, so the two paths produce identical values.
namespace kernels {
void matmul(const double* a, const double* b, double* out,
            std::int64_t rows, std::int64_t inner, std::int64_t cols);
// out += a^T applied patterns used by backward
void matmul_acc_a(const double* g, const double* b, double* ga,
                  std::int64_t rows, std::int64_t inner, std::int64_t cols);
void matmul_acc_b(const double* a, const double* g, double* gb,
                  std::int64_t rows, std::int64_t inner, std::int64_t cols);
} // namespace kernels

} // namespace flowguard::ad
