#pragma once

#include "engine.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ffdn {

// Flat key=value FFM description: family, size, stages, density, seed and
// the optional explicit DFM delay vectors.
struct FfmParams {
    std::string family = "sfm";  // identity|sfm|hadamard|dfm|ebfm|rdfm|vfm
    int size = 4;
    int stages = 1;
    double density = 1.0;
    std::uint64_t seed = 1;
    std::optional<std::vector<int>> dfm_m0;
    std::optional<std::vector<int>> dfm_m1;
};

FfmCascade build_ffm(const FfmParams& params);

// Hadamard-transform cost semantics apply to this family?
bool family_is_hadamard(const std::string& family);

struct JobConfig {
    FfmParams ffm_params;
    std::optional<FfdnConfig> config;  // present when delays were given
    AttenuationSpec attenuation;
    double seconds = 1.0;
    EngineKind engine = EngineKind::cascade;
    std::string out_wav;
    std::string out_csv;

    const FfdnConfig& require_config() const;
};

// Parses the flat key=value format; unknown keys and malformed values
// raise std::invalid_argument carrying the line number.
JobConfig parse_job(const std::string& text);
JobConfig load_job(const std::string& path);

}  // namespace ffdn
