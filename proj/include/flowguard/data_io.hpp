#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flowguard/gaussian.hpp"
#include "flowguard/matrix.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

struct Dataset {
    std::string name;
    int dim = 0;
    Matrix samples;
    std::vector<std::int64_t> train_idx, test_idx; // disjoint, exhaustive
    bool quantized = false;
    int bins = 0;
    std::vector<double> box_lo, box_hi;

    // filled by the gaussian generator for oracle use
    std::optional<GaussianParams> truth;
    std::optional<double> truth_entropy_nats;

    Matrix train_matrix() const;
    Matrix test_matrix() const;
};

enum class GeneratorKind { gaussian, gaussian_mixture, two_rings, checkerboard, tiny_grid_images };

GeneratorKind generator_from_name(const std::string& name); // throws ConfigError
std::string generator_name(GeneratorKind k);

struct SyntheticSpec {
    GeneratorKind kind = GeneratorKind::gaussian;
    int dim = 2;
    std::int64_t n = 1000;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;

    // gaussian: defaults to standard normal when empty
    std::vector<double> mu;
    std::vector<double> cov; // dense dim*dim

    // gaussian_mixture
    std::vector<std::vector<double>> centers;
    double mixture_sigma = 0.5;

    // two_rings (dim 2)
    double r1 = 1.0, r2 = 3.0, ring_noise = 0.1;

    // checkerboard (dim 2)
    double checker_scale = 4.0;
};

Dataset generate(const SyntheticSpec& spec);

// Uniform dequantization for quantized data: (value + u) / bins, u ~ U[0,1).
Matrix dequantize(const Matrix& raw, int bins, RngState rng);

// CSV interchange, header: "# flowguard-dataset v1 dim=<n> quantized=<0|1> bins=<b>".
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

} // namespace flowguard
