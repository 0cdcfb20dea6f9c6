#pragma once

#include <cstdint>
#include <filesystem>

#include <json.hpp>

#include "difftomo/forward.hpp"
#include "difftomo/inverse.hpp"
#include "difftomo/phantom.hpp"

namespace difftomo {

// JSON mappings. Missing keys keep their defaults, unknown keys are rejected
// so a typo in a checked-in config fails loudly.
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);
void to_json(nlohmann::json& j, const AcquisitionGeometry& g);
void from_json(const nlohmann::json& j, AcquisitionGeometry& g);
void to_json(nlohmann::json& j, const Orientation& o);
void from_json(const nlohmann::json& j, Orientation& o);
void to_json(nlohmann::json& j, const PatternParams& p);
void from_json(const nlohmann::json& j, PatternParams& p);
void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

struct DatasetSplits {
    std::size_t train = 50;
    std::size_t validation = 5;
    std::size_t test = 5;

    std::size_t total() const noexcept { return train + validation + test; }
    /// count/12 each for validation and test, the rest for training (60 -> 50/5/5).
    static DatasetSplits for_count(std::size_t count);
};

/// Everything a CLI run needs. Built from defaults, then a JSON config file,
/// then command-line flags.
struct RunConfig {
    AcquisitionGeometry geometry;
    std::size_t layers = 4;
    std::size_t views = 22;
    double max_tilt_deg = 10.0;  // protocol sweep half-range
    SolverConfig approximant = SolverConfig::approximant_k8();
    SolverConfig lt = SolverConfig::learning_tomography();
    PatternParams pattern;
    std::size_t dataset_count = 60;
    DatasetSplits splits;
    std::uint64_t seed = 0;
    std::size_t threads = 0;  // 0 = DIFFTOMO_THREADS or hardware concurrency

    /// Throws std::invalid_argument naming the offending setting.
    void validate() const;
};

void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace difftomo
