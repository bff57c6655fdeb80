// Benchmark comparing the OpenMP kernels against their serial references.
// Every pair must also agree bit-for-bit: the parallel decompositions are
// chunked so results do not depend on the thread count.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "flowguard/attacks.hpp"
#include "flowguard/flow.hpp"
#include "flowguard/gaussian.hpp"
#include "flowguard/numerics.hpp"
#include "flowguard/parallel.hpp"

using namespace flowguard;

namespace {

double time_ms(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

struct Row {
    std::string name;
    double serial_ms;
    double parallel_ms;
    bool identical;
};

void report(const std::vector<Row>& rows) {
    std::printf("%-34s %12s %12s %9s %10s\n", "kernel", "serial ms", "parallel ms", "speedup", "bitwise");
    for (const auto& r : rows)
        std::printf("%-34s %12.2f %12.2f %8.2fx %10s\n", r.name.c_str(), r.serial_ms, r.parallel_ms,
                    r.serial_ms / std::max(r.parallel_ms, 1e-9), r.identical ? "equal" : "DIFFER");
}

} // namespace

int main(int argc, char** argv) {
    const bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    const std::int64_t mc_samples = quick ? 50000 : 2000000;
    const std::int64_t batch = quick ? 512 : 8192;
    const std::int64_t attack_batch = quick ? 64 : 512;
    const std::int64_t sim_samples = quick ? 20000 : 400000;

    std::vector<Row> rows;
    std::printf("flowguard kernel benchmark (%s, %d hardware threads)\n\n", quick ? "quick" : "full",
                par::threads());

    {
        auto f = [](std::span<const double> x, std::span<double> out) {
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) out[4 * i + j] = x[i] * x[j];
        };
        Matrix serial_out, parallel_out;
        const double ts = time_ms([&] { serial_out = mc_expect_serial(f, 4, 4, 4, mc_samples, RngState{1}); });
        const double tp = time_ms([&] { parallel_out = mc_expect(f, 4, 4, 4, mc_samples, RngState{1}); });
        rows.push_back({"mc_expect (outer product, n=4)", ts, tp, serial_out.data == parallel_out.data});
    }

    {
        const FlowModel model = build_flow(FlowArchitecture{.dim = 8, .num_blocks = 4, .hidden = {32, 32}}, 3, 0.2);
        Rng rng(RngState{4});
        Matrix x(batch, 8);
        for (auto& v : x.data) v = rng.next_normal();
        std::vector<double> serial_nll, parallel_nll;
        par::set_threads(1);
        const double ts = time_ms([&] { serial_nll = nll(model, x).nll_nats; });
        par::set_threads(0);
        const double tp = time_ms([&] { parallel_nll = nll(model, x).nll_nats; });
        rows.push_back({"flow nll (batch " + std::to_string(batch) + ", dim 8)", ts, tp,
                        serial_nll == parallel_nll});
    }

    {
        const FlowModel model = build_flow(FlowArchitecture{.dim = 4, .num_blocks = 3, .hidden = {24}}, 5, 0.2);
        Rng rng(RngState{6});
        Matrix x(attack_batch, 4);
        for (auto& v : x.data) v = rng.next_normal();
        AttackConfig cfg;
        cfg.epsilon = 0.25;
        cfg.iterations = 10;
        Matrix serial_adv, parallel_adv;
        par::set_threads(1);
        const double ts = time_ms([&] { serial_adv = pgd(model, x, cfg).x_adv; });
        par::set_threads(0);
        const double tp = time_ms([&] { parallel_adv = pgd(model, x, cfg).x_adv; });
        rows.push_back({"pgd attack (batch " + std::to_string(attack_batch) + ")", ts, tp,
                        serial_adv.data == parallel_adv.data});
    }

    {
        GaussianParams p{{0.0, 0.0, 0.0}, SymMatrix::identity(3)};
        GaussianParams serial_fit, parallel_fit;
        par::set_threads(1);
        const double ts = time_ms([&] { serial_fit = adv_train_simulate(p, 0.5, 1, sim_samples, RngState{7}); });
        par::set_threads(0);
        const double tp = time_ms([&] { parallel_fit = adv_train_simulate(p, 0.5, 1, sim_samples, RngState{7}); });
        rows.push_back({"adv_train_simulate (1 round)", ts, tp,
                        serial_fit.cov.entries == parallel_fit.cov.entries});
    }

    {
        // chi-square tail frequency via the mc_expect machinery
        auto tail = [](std::span<const double> x, std::span<double> out) {
            double s = 0.0;
            for (double v : x) s += v * v;
            out[0] = s >= 2.0 * 2.0 * 8.0 ? 1.0 : 0.0;
        };
        Matrix a, b;
        const double ts = time_ms([&] { a = mc_expect_serial(tail, 1, 1, 8, mc_samples, RngState{8}); });
        const double tp = time_ms([&] { b = mc_expect(tail, 1, 1, 8, mc_samples, RngState{8}); });
        rows.push_back({"chi-square tail frequency (n=8)", ts, tp, a.data == b.data});
    }

    std::printf("\n");
    report(rows);
    for (const auto& r : rows)
        if (!r.identical) {
            std::printf("\nFAIL: %s differs between serial and parallel\n", r.name.c_str());
            return 1;
        }
    return 0;
}
