#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "difftomo/types.hpp"

namespace difftomo {

/// Multi-layer thin phase object. Layer l transmits exp(alpha_l + j phi_l);
/// absorption is carried for completeness and is always zero here.
class ObjectStack {
public:
    ObjectStack() = default;
    /// `layers` zero-phase layers.
    ObjectStack(const GridSpec& grid, double dz, std::size_t layers);
    ObjectStack(const GridSpec& grid, double dz, std::vector<RealMap> phase);

    const GridSpec& grid() const noexcept { return grid_; }
    double dz() const noexcept { return dz_; }
    std::size_t layer_count() const noexcept { return phase_.size(); }

    RealMap& phase(std::size_t l) { return phase_.at(l); }
    const RealMap& phase(std::size_t l) const { return phase_.at(l); }
    std::vector<RealMap>& phases() noexcept { return phase_; }
    const std::vector<RealMap>& phases() const noexcept { return phase_; }
    const RealMap& absorption(std::size_t l) const { return absorption_.at(l); }

    /// Throws std::invalid_argument if L < 1, grids disagree, dz is not finite
    /// or any phase is non-finite.
    void validate() const;

private:
    GridSpec grid_{};
    double dz_ = 0.0;
    std::vector<RealMap> phase_;
    std::vector<RealMap> absorption_;
};

/// Statistics of the synthetic Manhattan-geometry layers. Lengths in meters.
struct PatternParams {
    std::size_t min_features = 4;
    std::size_t max_features = 10;
    double min_width = 160e-6;
    double max_width = 450e-6;
    double min_length = 160e-6;
    double max_length = 900e-6;
    double trace_probability = 0.3;  // chance that a feature is a long thin trace
    double min_fill = 0.10;          // etched-area fraction bounds (ignored when max_features == 0)
    double max_fill = 0.45;
    double etched_phase = -0.33;     // radians
    std::uint64_t seed = 0;

    void validate() const;
};

/// Phase delay of an etched step of `depth` filled with oil instead of glass:
/// (2 pi / wavelength) * depth * (n_oil - n_glass).
double phase_from_depth(double depth, double n_glass, double n_oil, double wavelength);

/// Two-valued {0, etched_phase} layer built from random axis-aligned
/// rectangles and traces. Deterministic in params.seed.
RealMap synthesize_layer(const GridSpec& grid, const PatternParams& params);

/// `layers` independent synthetic layers; layer l uses a seed derived from params.seed.
ObjectStack synthesize_stack(const GridSpec& grid, std::size_t layers, double dz, const PatternParams& params);

/// Per-layer refractive-index perturbation phi / (k dz).
std::vector<RealMap> refractive_index_map(const ObjectStack& stack, double wavenumber);

/// Binary masks, one per layer: dark pixels become etched_phase, light pixels 0.
/// Images of a different size are nearest-neighbour resampled when `resample`
/// is set and rejected otherwise.
ObjectStack load_layer_images(const std::vector<std::filesystem::path>& paths, double etched_phase,
                              const GridSpec& grid, double dz, bool resample = false);

}  // namespace difftomo
