#pragma once

#include "engine.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ffdn {

// Sequence of delay-line indices (1-based) an impulse visits.
struct EchoPath {
    std::vector<int> indices;
};

struct EchoDensityProfile {
    std::vector<double> density;  // per sample, ~1 for Gaussian noise
    int window = 0;               // analysis window length in samples
    std::optional<long> mixing_time;
};

// System response restricted to one path: gains, main delays and the FFM
// entry filters along the way, convolved.
std::vector<double> echo_path_response(const FfdnConfig& cfg, const EchoPath& path);

// Normalized echo density: fraction of samples above the local standard
// deviation inside a centered sliding window, scaled by the Gaussian
// expectation erfc(1/sqrt(2)). hop > 1 evaluates on a subgrid and
// interpolates, which the smooth profile tolerates.
EchoDensityProfile echo_density(const std::vector<double>& ir, int window, int hop = 1);

// First sample where the moving-average (window/4) smoothed profile
// reaches the threshold.
std::optional<long> mixing_time(const EchoDensityProfile& profile, double threshold = 0.9);

enum class FfmFamily { ebfm, dfm, rdfm, vfm, sfm4, sfm16 };

const char* family_name(FfmFamily f);
std::optional<FfmFamily> family_from_name(const std::string& name);

struct MixingStats {
    double median = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    std::vector<double> values;
};

struct MonteCarloResult {
    int trials = 0;
    // Absolute mixing times in samples and ratios against the SFM-4 baseline.
    std::map<FfmFamily, MixingStats> mixing_samples;
    std::map<FfmFamily, MixingStats> relative_to_sfm4;
};

// Relative mixing-time study: per trial, shared random main delays in
// [1000, 8000] samples and matched seeds across families, with SFM-4 as
// the baseline.
MonteCarloResult monte_carlo_mixing(const std::vector<FfmFamily>& families, int trials,
                                    std::uint64_t seed);

}  // namespace ffdn
