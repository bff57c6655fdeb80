#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace flowguard::par {

// Thread count used by parallel_for. 0 means "all available".
void set_threads(int n);
int threads();

// Static-schedule loop over [0, n). The body must write only to slots owned
// by iteration i; under that contract results are identical for any thread
// count, which is what keeps every kernel in this library seed-reproducible.
template <class F>
void parallel_for(std::int64_t n, F&& body) {
#ifdef _OPENMP
    const int nt = threads();
    if (nt != 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(nt)
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#endif
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

// Serial reference twin of parallel_for, kept for tests and benchmarks.
template <class F>
void serial_for(std::int64_t n, F&& body) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

} // namespace flowguard::par
