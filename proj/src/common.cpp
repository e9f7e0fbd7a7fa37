#include "aroma/common.hpp"

#include <chrono>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace aroma {

void parallel_for(int64_t n, const std::function<void(int64_t)>& fn, bool parallel) {
    if (!parallel) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) fn(i);
}

void parallel_for_threaded(int64_t n, const std::function<void(int64_t, int)>& fn,
                           bool parallel) {
    if (!parallel) {
        for (int64_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n; ++i) {
#ifdef _OPENMP
        fn(i, omp_get_thread_num());
#else
        fn(i, 0);
#endif
    }
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace aroma
