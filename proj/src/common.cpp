#include "mixsing/common.hpp"

#include <cstdlib>
#include <thread>

namespace mixsing {

double pairwise_sum(const std::vector<double>& xs) {
    // Recursive pairwise reduction keeps error O(log n) and is deterministic.
    struct Rec {
        static double go(const double* p, std::size_t n) {
            if (n == 0) return 0.0;
            if (n <= 8) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) s += p[i];
                return s;
            }
            std::size_t h = n / 2;
            return go(p, h) + go(p + h, n - h);
        }
    };
    return Rec::go(xs.data(), xs.size());
}

int effective_jobs(int requested) {
    if (const char* env = std::getenv("MIXSING_JOBS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

}  // namespace mixsing
