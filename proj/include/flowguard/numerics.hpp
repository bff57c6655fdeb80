#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "flowguard/matrix.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

// Symmetric real matrix. Construction checks symmetry to 1e-12 relative
// (against the largest absolute entry).
struct SymMatrix {
    int dim = 0;
    std::vector<double> entries; // row-major dim x dim

    SymMatrix() = default;
    static SymMatrix zero(int n);
    static SymMatrix identity(int n);
    static SymMatrix scaled_identity(int n, double s);
    static SymMatrix diag(std::span<const double> d);
    // Validates symmetry; throws NumericError on violation.
    static SymMatrix from_dense(int n, std::span<const double> a);

    double& at(int r, int c) { return entries[static_cast<std::size_t>(r) * dim + c]; }
    double at(int r, int c) const { return entries[static_cast<std::size_t>(r) * dim + c]; }

    double trace() const;
    double max_abs() const;
};

// Eigendecomposition of a SymMatrix: ascending eigenvalues, orthonormal
// eigenvectors stored as columns of u (row-major dim x dim). Sign
// convention: the first component of each eigenvector with magnitude
// above 1e-12 is positive.
struct EigenDecomp {
    int dim = 0;
    std::vector<double> eigenvalues;  // ascending
    std::vector<double> u;            // u[r*dim + c] = component r of eigenvector c

    double vec_at(int r, int c) const { return u[static_cast<std::size_t>(r) * dim + c]; }
    std::vector<double> eigenvector(int c) const;

    // min eigenvalue >= -1e-10 * max eigenvalue
    bool is_psd() const;
    bool is_pd() const { return dim > 0 && eigenvalues.front() > 0.0; }
};

// Cyclic Jacobi rotations; accurate and dependency-free for the small
// symmetric matrices (dim <= ~64) this artifact needs.
EigenDecomp eigh(const SymMatrix& m);

// Root of a strictly decreasing f with f(lo) > 0. If f(hi) >= 0 the
// bracket is expanded by doubling; after 200 doublings without a sign
// change a NumericError is thrown. Stops when |f(mid)| <= tol or the
// bracket width falls below tol * |mid|.
double bisect_decreasing(const std::function<double(double)>& f, double lo, double hi, double tol);

// log Gamma(x) for x > 0, Lanczos approximation (g = 7, 9 terms),
// relative error well under 1e-12 on the domain used here.
double log_gamma(double x);

// Sample mean of f over i.i.d. N(0, I_n) draws. f fills `out` (row-major
// out_rows x out_cols) for one draw x. Sampling is chunked; chunk j uses
// rng.substream(j), and chunk partial sums are combined in index order,
// so the result is bit-identical for any thread count and equal to
// mc_expect_serial.
Matrix mc_expect(const std::function<void(std::span<const double>, std::span<double>)>& f,
                 int out_rows, int out_cols, int n, std::int64_t samples, RngState rng);

// Serial reference implementation (same chunking, plain loop).
Matrix mc_expect_serial(const std::function<void(std::span<const double>, std::span<double>)>& f,
                        int out_rows, int out_cols, int n, std::int64_t samples, RngState rng);

} // namespace flowguard
