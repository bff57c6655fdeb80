#include "flowguard/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flowguard/errors.hpp"
#include "flowguard/parallel.hpp"

namespace flowguard {

SymMatrix SymMatrix::zero(int n) {
    SymMatrix m;
    m.dim = n;
    m.entries.assign(static_cast<std::size_t>(n) * n, 0.0);
    return m;
}

SymMatrix SymMatrix::identity(int n) { return scaled_identity(n, 1.0); }

SymMatrix SymMatrix::scaled_identity(int n, double s) {
    SymMatrix m = zero(n);
    for (int i = 0; i < n; ++i) m.at(i, i) = s;
    return m;
}

SymMatrix SymMatrix::diag(std::span<const double> d) {
    SymMatrix m = zero(static_cast<int>(d.size()));
    for (int i = 0; i < m.dim; ++i) m.at(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

SymMatrix SymMatrix::from_dense(int n, std::span<const double> a) {
    if (static_cast<std::int64_t>(a.size()) != static_cast<std::int64_t>(n) * n)
        throw NumericError("SymMatrix::from_dense: size mismatch");
    double scale = 0.0;
    for (double v : a) scale = std::max(scale, std::abs(v));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = std::abs(a[static_cast<std::size_t>(i) * n + j] -
                                      a[static_cast<std::size_t>(j) * n + i]);
            if (d > 1e-12 * std::max(scale, 1e-300))
                throw NumericError("SymMatrix: input not symmetric");
        }
    SymMatrix m;
    m.dim = n;
    m.entries.assign(a.begin(), a.end());
    // enforce exact symmetry so downstream algebra sees one value per pair
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double v = 0.5 * (m.at(i, j) + m.at(j, i));
            m.at(i, j) = v;
            m.at(j, i) = v;
        }
    return m;
}

double SymMatrix::trace() const {
    double t = 0.0;
    for (int i = 0; i < dim; ++i) t += at(i, i);
    return t;
}

double SymMatrix::max_abs() const {
    double s = 0.0;
    for (double v : entries) s = std::max(s, std::abs(v));
    return s;
}

std::vector<double> EigenDecomp::eigenvector(int c) const {
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int r = 0; r < dim; ++r) v[static_cast<std::size_t>(r)] = vec_at(r, c);
    return v;
}

bool EigenDecomp::is_psd() const {
    if (dim == 0) return true;
    return eigenvalues.front() >= -1e-10 * std::max(std::abs(eigenvalues.back()), 0.0);
}

EigenDecomp eigh(const SymMatrix& m) {
    const int n = m.dim;
    if (n <= 0) throw NumericError("eigh: empty matrix");
    // symmetry re-check on the stored entries (invariant of SymMatrix, but
    // callers can construct the struct directly)
    double scale = m.max_abs();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(m.at(i, j) - m.at(j, i)) > 1e-12 * std::max(scale, 1e-300))
                throw NumericError("eigh: input not symmetric");

    std::vector<double> a = m.entries;
    std::vector<double> u(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) u[static_cast<std::size_t>(i) * n + i] = 1.0;

    auto A = [&](int r, int c) -> double& { return a[static_cast<std::size_t>(r) * n + c]; };
    auto U = [&](int r, int c) -> double& { return u[static_cast<std::size_t>(r) * n + c]; };

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
        if (std::sqrt(off) <= 1e-15 * std::max(scale, 1e-300) * n) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double app = A(p, p), aqq = A(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = A(k, p), akq = A(k, q);
                    A(k, p) = c * akp - s * akq;
                    A(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A(p, k), aqk = A(q, k);
                    A(p, k) = c * apk - s * aqk;
                    A(q, k) = s * apk + c * aqk;
                }
                A(p, q) = 0.0;
                A(q, p) = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double ukp = U(k, p), ukq = U(k, q);
                    U(k, p) = c * ukp - s * ukq;
                    U(k, q) = s * ukp + c * ukq;
                }
            }
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return A(i, i) < A(j, j); });

    EigenDecomp d;
    d.dim = n;
    d.eigenvalues.resize(static_cast<std::size_t>(n));
    d.u.resize(static_cast<std::size_t>(n) * n);
    for (int c = 0; c < n; ++c) {
        const int src = order[static_cast<std::size_t>(c)];
        d.eigenvalues[static_cast<std::size_t>(c)] = A(src, src);
        double sign = 1.0;
        for (int r = 0; r < n; ++r) {
            const double v = U(r, src);
            if (std::abs(v) > 1e-12) {
                sign = (v < 0.0) ? -1.0 : 1.0;
                break;
            }
        }
        for (int r = 0; r < n; ++r) d.u[static_cast<std::size_t>(r) * n + c] = sign * U(r, src);
    }
    return d;
}

double bisect_decreasing(const std::function<double(double)>& f, double lo, double hi, double tol) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    if (flo < 0.0) throw NumericError("bisect_decreasing: f(lo) <= 0, bracket invalid");
    if (hi <= lo) hi = lo + 1.0;
    double fhi = f(hi);
    int doublings = 0;
    while (fhi > 0.0) {
        if (++doublings > 200) throw NumericError("bisect_decreasing: no root after 200 doublings");
        const double width = hi - lo;
        hi = lo + 2.0 * width;
        fhi = f(hi);
    }
    if (fhi == 0.0) return hi;

    double a = lo, b = hi;
    for (;;) {
        const double mid = 0.5 * (a + b);
        if (mid == a || mid == b) return mid; // bracket exhausted at double precision
        const double fm = f(mid);
        if (std::abs(fm) <= tol || (b - a) <= tol * std::abs(mid)) return mid;
        if (fm > 0.0)
            a = mid;
        else
            b = mid;
    }
}

double log_gamma(double x) {
    if (!(x > 0.0)) throw NumericError("log_gamma: domain requires x > 0");
    // Lanczos, g = 7, 9 coefficients (Godfrey / Boost constants).
    static const double coef[9] = {
        0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
        771.32342877765313,   -176.61502916214059,   12.507343278686905,
        -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    if (x < 0.5) {
        // reflection keeps the approximation on its accurate half-line
        return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
    }
    const double z = x - 1.0;
    double acc = coef[0];
    for (int i = 1; i < 9; ++i) acc += coef[i] / (z + i);
    const double t = z + 7.5;
    return 0.5 * std::log(2.0 * M_PI) + (z + 0.5) * std::log(t) - t + std::log(acc);
}

namespace {

constexpr std::int64_t kMcChunk = 1 << 14;

template <bool Parallel>
Matrix mc_expect_impl(const std::function<void(std::span<const double>, std::span<double>)>& f,
                      int out_rows, int out_cols, int n, std::int64_t samples, RngState rng) {
    if (samples < 1) throw NumericError("mc_expect: samples must be >= 1");
    const std::int64_t chunks = (samples + kMcChunk - 1) / kMcChunk;
    const std::size_t out_n = static_cast<std::size_t>(out_rows) * out_cols;
    std::vector<std::vector<double>> partial(static_cast<std::size_t>(chunks));

    auto run_chunk = [&](std::int64_t j) {
        const std::int64_t begin = j * kMcChunk;
        const std::int64_t count = std::min<std::int64_t>(kMcChunk, samples - begin);
        Rng gen(rng.substream(static_cast<std::uint64_t>(j)));
        std::vector<double> x(static_cast<std::size_t>(n));
        std::vector<double> fx(out_n);
        std::vector<double> acc(out_n, 0.0);
        for (std::int64_t s = 0; s < count; ++s) {
            for (auto& xi : x) xi = gen.next_normal();
            std::fill(fx.begin(), fx.end(), 0.0);
            f(x, fx);
            for (std::size_t k = 0; k < out_n; ++k) acc[k] += fx[k];
        }
        partial[static_cast<std::size_t>(j)] = std::move(acc);
    };

    if constexpr (Parallel)
        par::parallel_for(chunks, run_chunk);
    else
        par::serial_for(chunks, run_chunk);

    Matrix out(out_rows, out_cols);
    for (std::int64_t j = 0; j < chunks; ++j)
        for (std::size_t k = 0; k < out_n; ++k) out.data[k] += partial[static_cast<std::size_t>(j)][k];
    const double inv = 1.0 / static_cast<double>(samples);
    for (auto& v : out.data) v *= inv;
    return out;
}

} // namespace

Matrix mc_expect(const std::function<void(std::span<const double>, std::span<double>)>& f,
                 int out_rows, int out_cols, int n, std::int64_t samples, RngState rng) {
    return mc_expect_impl<true>(f, out_rows, out_cols, n, samples, rng);
}

Matrix mc_expect_serial(const std::function<void(std::span<const double>, std::span<double>)>& f,
                        int out_rows, int out_cols, int n, std::int64_t samples, RngState rng) {
    return mc_expect_impl<false>(f, out_rows, out_cols, n, samples, rng);
}

} // namespace flowguard
