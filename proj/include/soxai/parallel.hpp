#pragma once

#include <cstddef>
#include <omp.h>

namespace soxai {

/// Worker-count knob threaded through every kernel. Kernels only ever write
/// per-index slots inside parallel regions and reduce serially afterwards, so
/// results do not depend on the value chosen here.
struct Exec {
    int threads = 1;

    static Exec serial() { return Exec{1}; }
    static Exec all() { return Exec{omp_get_max_threads()}; }
};

template <typename Body>
void parallel_for(const Exec& exec, std::ptrdiff_t n, Body&& body) {
    if (exec.threads <= 1 || n < 2) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
#pragma omp parallel for schedule(static) num_threads(exec.threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        body(i);
    }
}

/// Dynamic scheduling for loops with uneven per-index cost (tree walks).
template <typename Body>
void parallel_for_dynamic(const Exec& exec, std::ptrdiff_t n, Body&& body) {
    if (exec.threads <= 1 || n < 2) {
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
#pragma omp parallel for schedule(dynamic, 16) num_threads(exec.threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        body(i);
    }
}

} // namespace soxai
