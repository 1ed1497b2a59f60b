#pragma once

#ifdef AGESL_HAVE_OPENMP
#include <omp.h>
#endif

namespace agesl::parallel {

inline int max_threads() {
#ifdef AGESL_HAVE_OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

inline void set_threads(int n) {
#ifdef AGESL_HAVE_OPENMP
    omp_set_num_threads(n);
#else
    (void)n;
#endif
}

/// Restores the previous thread count on scope exit.
class ThreadScope {
public:
    explicit ThreadScope(int n) : previous_(max_threads()) { set_threads(n); }
    ~ThreadScope() { set_threads(previous_); }
    ThreadScope(const ThreadScope&) = delete;
    ThreadScope& operator=(const ThreadScope&) = delete;

private:
    int previous_;
};

}  // namespace agesl::parallel
