#include "flowguard/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "flowguard/errors.hpp"
#include "flowguard/num_format.hpp"
#include "flowguard/parallel.hpp"

namespace flowguard {

namespace {

Matrix gather_rows(const Matrix& m, const std::vector<std::int64_t>& idx) {
    Matrix out(static_cast<std::int64_t>(idx.size()), m.cols);
    for (std::size_t r = 0; r < idx.size(); ++r)
        for (std::int64_t c = 0; c < m.cols; ++c) out.at(static_cast<std::int64_t>(r), c) = m.at(idx[r], c);
    return out;
}

void finalize(Dataset& ds, double train_fraction, Rng& rng) {
    const std::int64_t n = ds.samples.rows;
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<std::size_t>(rng.next_below(i))]);
    const std::int64_t n_train = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(train_fraction * static_cast<double>(n))));
    ds.train_idx.assign(order.begin(), order.begin() + n_train);
    ds.test_idx.assign(order.begin() + n_train, order.end());

    ds.box_lo.assign(static_cast<std::size_t>(ds.dim), 0.0);
    ds.box_hi.assign(static_cast<std::size_t>(ds.dim), 0.0);
    for (int c = 0; c < ds.dim; ++c) {
        double lo = ds.samples.at(0, c), hi = lo;
        for (std::int64_t r = 1; r < n; ++r) {
            lo = std::min(lo, ds.samples.at(r, c));
            hi = std::max(hi, ds.samples.at(r, c));
        }
        ds.box_lo[static_cast<std::size_t>(c)] = lo;
        ds.box_hi[static_cast<std::size_t>(c)] = hi;
    }
}

} // namespace

Matrix Dataset::train_matrix() const { return gather_rows(samples, train_idx); }
Matrix Dataset::test_matrix() const { return gather_rows(samples, test_idx); }

GeneratorKind generator_from_name(const std::string& name) {
    if (name == "gaussian") return GeneratorKind::gaussian;
    if (name == "gaussian_mixture") return GeneratorKind::gaussian_mixture;
    if (name == "two_rings") return GeneratorKind::two_rings;
    if (name == "checkerboard") return GeneratorKind::checkerboard;
    if (name == "tiny_grid_images") return GeneratorKind::tiny_grid_images;
    throw ConfigError("unknown generator '" + name + "'");
}

std::string generator_name(GeneratorKind k) {
    switch (k) {
        case GeneratorKind::gaussian: return "gaussian";
        case GeneratorKind::gaussian_mixture: return "gaussian_mixture";
        case GeneratorKind::two_rings: return "two_rings";
        case GeneratorKind::checkerboard: return "checkerboard";
        case GeneratorKind::tiny_grid_images: return "tiny_grid_images";
    }
    throw ConfigError("unknown generator kind");
}

Dataset generate(const SyntheticSpec& spec) {
    if (spec.n < 10) throw ConfigError("generate: need at least 10 samples");
    if (spec.train_fraction <= 0.0 || spec.train_fraction >= 1.0)
        throw ConfigError("generate: train_fraction must lie in (0,1)");
    Rng rng(RngState{spec.seed});
    Dataset ds;
    ds.name = generator_name(spec.kind);

    switch (spec.kind) {
        case GeneratorKind::gaussian: {
            ds.dim = spec.dim;
            std::vector<double> mu = spec.mu.empty() ? std::vector<double>(static_cast<std::size_t>(spec.dim), 0.0) : spec.mu;
            if (static_cast<int>(mu.size()) != spec.dim) throw ConfigError("gaussian: mu size mismatch");
            SymMatrix cov = spec.cov.empty() ? SymMatrix::identity(spec.dim)
                                             : SymMatrix::from_dense(spec.dim, spec.cov);
            const auto eig = eigh(cov);
            if (!eig.is_pd()) throw ConfigError("gaussian: covariance must be positive-definite");
            std::vector<double> sq(static_cast<std::size_t>(spec.dim));
            double logdet = 0.0;
            for (int i = 0; i < spec.dim; ++i) {
                sq[static_cast<std::size_t>(i)] = std::sqrt(eig.eigenvalues[static_cast<std::size_t>(i)]);
                logdet += std::log(eig.eigenvalues[static_cast<std::size_t>(i)]);
            }
            ds.samples = Matrix(spec.n, spec.dim);
            std::vector<double> xi(static_cast<std::size_t>(spec.dim));
            for (std::int64_t r = 0; r < spec.n; ++r) {
                for (auto& v : xi) v = rng.next_normal();
                for (int i = 0; i < spec.dim; ++i) {
                    double acc = mu[static_cast<std::size_t>(i)];
                    for (int k = 0; k < spec.dim; ++k)
                        acc += eig.vec_at(i, k) * sq[static_cast<std::size_t>(k)] * xi[static_cast<std::size_t>(k)];
                    ds.samples.at(r, i) = acc;
                }
            }
            ds.truth = GaussianParams{mu, cov};
            // 1/2 log((2 pi e)^n |K|)
            ds.truth_entropy_nats = 0.5 * (spec.dim * std::log(2.0 * M_PI * std::exp(1.0)) + logdet);
            break;
        }
        case GeneratorKind::gaussian_mixture: {
            if (spec.centers.empty()) throw ConfigError("gaussian_mixture: centers required");
            ds.dim = static_cast<int>(spec.centers.front().size());
            for (const auto& c : spec.centers)
                if (static_cast<int>(c.size()) != ds.dim) throw ConfigError("gaussian_mixture: ragged centers");
            ds.samples = Matrix(spec.n, ds.dim);
            for (std::int64_t r = 0; r < spec.n; ++r) {
                const auto& c = spec.centers[static_cast<std::size_t>(rng.next_below(spec.centers.size()))];
                for (int i = 0; i < ds.dim; ++i)
                    ds.samples.at(r, i) = c[static_cast<std::size_t>(i)] + spec.mixture_sigma * rng.next_normal();
            }
            break;
        }
        case GeneratorKind::two_rings: {
            if (spec.dim != 2) throw ConfigError("two_rings: dim must be 2");
            ds.dim = 2;
            ds.samples = Matrix(spec.n, 2);
            for (std::int64_t r = 0; r < spec.n; ++r) {
                const double radius = (rng.next_unit() < 0.5 ? spec.r1 : spec.r2) + spec.ring_noise * rng.next_normal();
                const double theta = rng.next_uniform(0.0, 2.0 * M_PI);
                ds.samples.at(r, 0) = radius * std::cos(theta);
                ds.samples.at(r, 1) = radius * std::sin(theta);
            }
            break;
        }
        case GeneratorKind::checkerboard: {
            if (spec.dim != 2) throw ConfigError("checkerboard: dim must be 2");
            ds.dim = 2;
            ds.samples = Matrix(spec.n, 2);
            for (std::int64_t r = 0; r < spec.n; ++r) {
                double x, y;
                do {
                    x = rng.next_uniform(-spec.checker_scale, spec.checker_scale);
                    y = rng.next_uniform(-spec.checker_scale, spec.checker_scale);
                } while ((static_cast<long long>(std::floor(x)) + static_cast<long long>(std::floor(y))) % 2 != 0);
                ds.samples.at(r, 0) = x;
                ds.samples.at(r, 1) = y;
            }
            break;
        }
        case GeneratorKind::tiny_grid_images: {
            // 8x8 two-tone patterns over 16 bins: background/foreground bins
            // plus a random on-rectangle
            ds.dim = 64;
            ds.bins = 16;
            ds.quantized = true;
            ds.samples = Matrix(spec.n, 64);
            for (std::int64_t r = 0; r < spec.n; ++r) {
                const double bg = static_cast<double>(1 + rng.next_below(5));
                const double fg = static_cast<double>(10 + rng.next_below(5));
                const int r0 = static_cast<int>(rng.next_below(6));
                const int r1 = r0 + 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(6 - r0)));
                const int c0 = static_cast<int>(rng.next_below(6));
                const int c1 = c0 + 2 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(6 - c0)));
                for (int i = 0; i < 8; ++i)
                    for (int j = 0; j < 8; ++j) {
                        const bool on = (i >= r0 && i < r1 && j >= c0 && j < c1);
                        ds.samples.at(r, 8 * i + j) = on ? fg : bg;
                    }
            }
            break;
        }
    }

    finalize(ds, spec.train_fraction, rng);
    return ds;
}

Matrix dequantize(const Matrix& raw, int bins, RngState rng) {
    if (bins < 2) throw ConfigError("dequantize: bins must be >= 2");
    Matrix out(raw.rows, raw.cols);
    constexpr std::int64_t kChunk = 1 << 12;
    const std::int64_t chunks = (raw.rows + kChunk - 1) / kChunk;
    const double inv = 1.0 / static_cast<double>(bins);
    par::parallel_for(chunks, [&](std::int64_t j) {
        Rng gen(rng.substream(static_cast<std::uint64_t>(j)));
        const std::int64_t begin = j * kChunk;
        const std::int64_t end = std::min<std::int64_t>(begin + kChunk, raw.rows);
        for (std::int64_t r = begin; r < end; ++r)
            for (std::int64_t c = 0; c < raw.cols; ++c)
                out.at(r, c) = (raw.at(r, c) + gen.next_unit()) * inv;
    });
    return out;
}

void save_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("save_csv: cannot open '" + path + "'");
    out << "# flowguard-dataset v1 dim=" << ds.dim << " quantized=" << (ds.quantized ? 1 : 0)
        << " bins=" << ds.bins << "\n";
    for (std::int64_t r = 0; r < ds.samples.rows; ++r) {
        for (std::int64_t c = 0; c < ds.samples.cols; ++c) {
            if (c) out << ',';
            out << format_double(ds.samples.at(r, c));
        }
        out << '\n';
    }
    if (!out) throw IoError("save_csv: write failed for '" + path + "'");
}

Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("load_csv: cannot open '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw IoError("load_csv: empty file '" + path + "'");
    int dim = 0, quantized = 0, bins = 0;
    if (std::sscanf(header.c_str(), "# flowguard-dataset v1 dim=%d quantized=%d bins=%d",
                    &dim, &quantized, &bins) != 3 ||
        dim < 1)
        throw IoError("load_csv: bad header in '" + path + "'");

    Dataset ds;
    ds.name = std::filesystem::path(path).stem().string();
    ds.dim = dim;
    ds.quantized = quantized != 0;
    ds.bins = bins;

    std::vector<double> values;
    std::string line;
    std::int64_t line_no = 1;
    std::int64_t rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::int64_t fields = 0;
        std::size_t pos = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos) comma = line.size();
            try {
                values.push_back(parse_double(std::string_view(line).substr(pos, comma - pos)));
            } catch (const IoError&) {
                throw IoError("load_csv: parse error at line " + std::to_string(line_no));
            }
            ++fields;
            pos = comma + 1;
            if (comma == line.size()) break;
        }
        if (fields != dim) {
            throw IoError("load_csv: expected " + std::to_string(dim) + " fields but found " +
                          std::to_string(fields) + " at line " + std::to_string(line_no));
        }
        ++rows;
    }
    if (rows == 0) throw IoError("load_csv: insufficient data, no sample rows in '" + path + "'");

    ds.samples = Matrix(rows, dim);
    ds.samples.data = std::move(values);

    // deterministic contiguous split; generators already shuffle at creation
    const std::int64_t n_train = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(0.8 * static_cast<double>(rows))));
    ds.train_idx.resize(static_cast<std::size_t>(std::min(n_train, rows)));
    std::iota(ds.train_idx.begin(), ds.train_idx.end(), 0);
    for (std::int64_t r = n_train; r < rows; ++r) ds.test_idx.push_back(r);

    ds.box_lo.assign(static_cast<std::size_t>(dim), 0.0);
    ds.box_hi.assign(static_cast<std::size_t>(dim), 0.0);
    for (int c = 0; c < dim; ++c) {
        double lo = ds.samples.at(0, c), hi = lo;
        for (std::int64_t r = 1; r < rows; ++r) {
            lo = std::min(lo, ds.samples.at(r, c));
            hi = std::max(hi, ds.samples.at(r, c));
        }
        ds.box_lo[static_cast<std::size_t>(c)] = lo;
        ds.box_hi[static_cast<std::size_t>(c)] = hi;
    }
    if (ds.quantized)
        for (int c = 0; c < dim; ++c)
            if (ds.box_lo[static_cast<std::size_t>(c)] < 0.0 ||
                ds.box_hi[static_cast<std::size_t>(c)] > static_cast<double>(ds.bins - 1))
                throw IoError("load_csv: quantized sample outside [0, bins-1] in '" + path + "'");
    return ds;
}

} // namespace flowguard
