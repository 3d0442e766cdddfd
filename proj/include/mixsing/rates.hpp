#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixsing/estimate.hpp"
#include "mixsing/mixing.hpp"

namespace mixsing {

// One convergence-rate experiment: fit the MLE across an n-grid, measure
// transportation errors against G0, and regress log median-error on log n.
struct RateStudyConfig {
    MixingMeasure g0;
    char setting = 'e';  // 'e': fit_k = k0, 'o': fit_k > k0
    int fit_k = 0;       // defaults to k0 when left at 0
    std::vector<TransportSpec> distances{TransportSpec::order(1)};
    bool per_coordinate = false;  // also record coupling-weighted coordinate errors
    std::vector<int> n_grid{1000, 2000, 4000, 8000};
    int reps = 5;
    std::uint64_t seed = 0;
    FitConfig fit;
    bool allow_slow = false;  // report slopes even when |predicted| < 1/6
    int jobs = 0;             // worker pool size; 0 = hardware concurrency
};

struct SlopeFit {
    double slope = 0.0;
    double stderr_ = 0.0;
    double predicted = 0.0;  // exponent from the singularity report; 0 = none
    bool reported = true;    // false when refused as too slow for a desk study
};

struct RateCell {
    int n = 0;
    int rep = 0;
    std::string distance_name;
    double value = 0.0;
};

struct RateStudy {
    RateStudyConfig config;
    std::vector<RateCell> cells;  // long format, deterministic order
    int dropped = 0;              // cells lost to NoConvergedStart
    std::map<std::string, SlopeFit> slopes;

    std::string to_csv() const;   // columns n, rep, distance_name, value
    std::string to_json() const;  // slope summary with predictions
};

RateStudy run_rate_study(const RateStudyConfig& cfg);

// OLS of log error on log n; points are (n, error) with error > 0.
// Throws DegenerateRegression on a nonpositive error or a single distinct n.
SlopeFit fit_slope(const std::vector<std::pair<double, double>>& points);

// Presets: "s0-gauss" (exact-fitted two-gaussian, W_1), "o-gauss"
// (location-only gaussian with one extra component, W_2), "s1-skew"
// (exact-fitted skew pair with per-coordinate errors).
RateStudyConfig preset_rate_study(const std::string& name);

}  // namespace mixsing
