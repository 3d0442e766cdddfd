#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixsing {

// All library failures derive from Error so CLI/tests can map them uniformly.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

inline Error make_error(const std::string& code, const std::string& what) {
    return Error(code, what);
}

// 64-bit FNV-1a, used to derive deterministic RNG streams from structured keys.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    return fnv1a(&v, sizeof(v), seed ^ 0x9e3779b97f4a7c15ull);
}

inline std::uint64_t hash_string(const std::string& s, std::uint64_t seed = 0) {
    return fnv1a(s.data(), s.size(), seed ^ 1469598103934665603ull);
}

// Single entry point for randomness: every stochastic task derives its
// generator from (base seed, task key) so results are schedule independent.
inline std::mt19937_64 make_rng(std::uint64_t base_seed, std::uint64_t task_key = 0) {
    std::uint64_t s = hash_combine(base_seed, task_key);
    if (s == 0) s = 0x6a09e667f3bcc908ull;
    return std::mt19937_64(s);
}

// Kahan compensated accumulator for the p_G - p_G0 cancellation-heavy sums.
struct Kahan {
    double sum = 0.0;
    double c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
};

// Deterministic pairwise reduction; independent of chunking used by callers.
double pairwise_sum(const std::vector<double>& xs);

int effective_jobs(int requested);  // respects MIXSING_JOBS, floors at 1

}  // namespace mixsing
