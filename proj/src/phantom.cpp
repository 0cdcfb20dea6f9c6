#include "difftomo/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "difftomo/image_io.hpp"
#include "difftomo/random.hpp"

namespace difftomo {

ObjectStack::ObjectStack(const GridSpec& grid, double dz, std::size_t layers)
    : ObjectStack(grid, dz, std::vector<RealMap>(layers, RealMap(grid))) {}

ObjectStack::ObjectStack(const GridSpec& grid, double dz, std::vector<RealMap> phase)
    : grid_(grid), dz_(dz), phase_(std::move(phase)), absorption_(phase_.size(), RealMap(grid)) {
    validate();
}

void ObjectStack::validate() const {
    grid_.validate();
    if (phase_.empty()) throw std::invalid_argument("object stack needs at least one layer");
    if (!std::isfinite(dz_) || dz_ < 0.0) throw std::invalid_argument("layer spacing must be finite and >= 0");
    for (const auto& layer : phase_) {
        require_same_grid(layer.grid(), grid_, "object stack layer");
        if (!layer.all_finite()) throw std::invalid_argument("object stack contains non-finite phase");
    }
}

void PatternParams::validate() const {
    auto ordered = [](double lo, double hi) { return lo > 0.0 && hi >= lo && std::isfinite(hi); };
    if (min_features > max_features) throw std::invalid_argument("feature count range is not ordered");
    if (!ordered(min_width, max_width)) throw std::invalid_argument("feature width range must be positive and ordered");
    if (!ordered(min_length, max_length))
        throw std::invalid_argument("feature length range must be positive and ordered");
    if (!(trace_probability >= 0.0 && trace_probability <= 1.0))
        throw std::invalid_argument("trace probability must lie in [0, 1]");
    if (!(min_fill >= 0.0 && max_fill <= 1.0 && min_fill <= max_fill))
        throw std::invalid_argument("fill range must satisfy 0 <= min <= max <= 1");
    if (!(etched_phase > -std::numbers::pi && etched_phase <= std::numbers::pi))
        throw std::invalid_argument("etched phase must lie in (-pi, pi]");
}

double phase_from_depth(double depth, double n_glass, double n_oil, double wavelength) {
    if (!(wavelength > 0.0)) throw std::invalid_argument("wavelength must be positive");
    if (!(depth >= 0.0)) throw std::invalid_argument("depth must be non-negative");
    const double phase = 2.0 * std::numbers::pi / wavelength * depth * (n_oil - n_glass);
    if (!std::isfinite(phase)) throw std::invalid_argument("phase_from_depth: non-finite result");
    return phase;
}

namespace {

struct Rect {
    std::size_t x0, y0, w, h;
};

class LayerPainter {
public:
    LayerPainter(const GridSpec& grid, const PatternParams& p) : grid_(grid), p_(p), mask_(grid.size(), 0), rng_(p.seed) {}

    double fill() const { return static_cast<double>(etched_) / static_cast<double>(mask_.size()); }

    // Draws features until one fits under max_fill or attempts run out.
    void add_feature() {
        for (int attempt = 0; attempt < 32; ++attempt) {
            const Rect r = draw();
            if (fill_after(r) <= p_.max_fill) {
                paint(r);
                return;
            }
        }
    }

    RealMap phase_map() const {
        RealMap out(grid_);
        for (std::size_t i = 0; i < mask_.size(); ++i) out[i] = mask_[i] ? p_.etched_phase : 0.0;
        return out;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::size_t to_pixels(double meters, std::size_t limit) const {
        const auto px = static_cast<std::size_t>(std::llround(meters / grid_.pitch));
        return std::clamp<std::size_t>(px, 1, limit);
    }

    Rect draw() {
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const bool trace = unit(rng_) < p_.trace_probability;
        double width, length;
        if (trace) {
            // Thin routing line spanning a good part of the field.
            width = p_.min_width;
            const double span = static_cast<double>(std::max(grid_.nx, grid_.ny)) * grid_.pitch;
            length = std::uniform_real_distribution<double>(0.4 * span, 0.9 * span)(rng_);
        } else {
            width = std::uniform_real_distribution<double>(p_.min_width, p_.max_width)(rng_);
            length = std::uniform_real_distribution<double>(std::max(p_.min_length, width), std::max(p_.max_length, width))(rng_);
        }
        const bool horizontal = unit(rng_) < 0.5;
        Rect r{};
        r.w = to_pixels(horizontal ? length : width, grid_.nx);
        r.h = to_pixels(horizontal ? width : length, grid_.ny);
        r.x0 = std::uniform_int_distribution<std::size_t>(0, grid_.nx - r.w)(rng_);
        r.y0 = std::uniform_int_distribution<std::size_t>(0, grid_.ny - r.h)(rng_);
        return r;
    }

    double fill_after(const Rect& r) const {
        std::size_t added = 0;
        for (std::size_t y = r.y0; y < r.y0 + r.h; ++y)
            for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) added += mask_[y * grid_.nx + x] ? 0 : 1;
        return static_cast<double>(etched_ + added) / static_cast<double>(mask_.size());
    }

    void paint(const Rect& r) {
        for (std::size_t y = r.y0; y < r.y0 + r.h; ++y) {
            for (std::size_t x = r.x0; x < r.x0 + r.w; ++x) {
                auto& m = mask_[y * grid_.nx + x];
                if (!m) {
                    m = 1;
                    ++etched_;
                }
            }
        }
    }

    GridSpec grid_;
    const PatternParams& p_;
    std::vector<unsigned char> mask_;
    std::size_t etched_ = 0;
    std::mt19937_64 rng_;
};

}  // namespace

RealMap synthesize_layer(const GridSpec& grid, const PatternParams& params) {
    grid.validate();
    params.validate();
    const double extent_x = static_cast<double>(grid.nx) * grid.pitch;
    const double extent_y = static_cast<double>(grid.ny) * grid.pitch;
    if (params.min_width > std::min(extent_x, extent_y) || params.min_length > std::max(extent_x, extent_y))
        throw std::invalid_argument("pattern features are larger than the grid");

    LayerPainter painter(grid, params);
    if (params.max_features == 0) return painter.phase_map();

    const std::size_t count =
        std::uniform_int_distribution<std::size_t>(params.min_features, params.max_features)(painter.rng());
    for (std::size_t i = 0; i < count; ++i) painter.add_feature();
    for (int extra = 0; extra < 256 && painter.fill() < params.min_fill; ++extra) painter.add_feature();
    return painter.phase_map();
}

ObjectStack synthesize_stack(const GridSpec& grid, std::size_t layers, double dz, const PatternParams& params) {
    std::vector<RealMap> phase;
    phase.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        PatternParams p = params;
        p.seed = derive_seed(params.seed, l);
        phase.push_back(synthesize_layer(grid, p));
    }
    return ObjectStack(grid, dz, std::move(phase));
}

std::vector<RealMap> refractive_index_map(const ObjectStack& stack, double wavenumber) {
    if (!(stack.dz() > 0.0)) throw std::invalid_argument("refractive_index_map: layer spacing must be positive");
    if (!(wavenumber > 0.0)) throw std::invalid_argument("refractive_index_map: wavenumber must be positive");
    const double scale = 1.0 / (wavenumber * stack.dz());
    std::vector<RealMap> out;
    out.reserve(stack.layer_count());
    for (const auto& layer : stack.phases()) {
        RealMap n(layer.grid());
        for (std::size_t i = 0; i < layer.size(); ++i) n[i] = layer[i] * scale;
        out.push_back(std::move(n));
    }
    return out;
}

ObjectStack load_layer_images(const std::vector<std::filesystem::path>& paths, double etched_phase,
                              const GridSpec& grid, double dz, bool resample) {
    grid.validate();
    if (paths.empty()) throw std::invalid_argument("load_layer_images: no layer images given");
    std::vector<RealMap> layers;
    for (const auto& path : paths) {
        const GrayImage img = read_gray_image(path);
        std::vector<std::uint16_t> levels(img.pixels);
        std::sort(levels.begin(), levels.end());
        levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
        if (levels.size() > 2) throw std::invalid_argument(path.string() + ": mask is not binary");

        if ((img.width != grid.nx || img.height != grid.ny) && !resample) {
            throw std::invalid_argument(path.string() + ": size " + std::to_string(img.width) + "x" +
                                        std::to_string(img.height) + " does not match grid");
        }
        // With two levels the darker one is etched; a single level is judged
        // against mid-scale.
        const std::uint16_t threshold =
            levels.size() == 2 ? levels[1] : static_cast<std::uint16_t>(img.max_value() / 2 + 1);
        RealMap layer(grid);
        for (std::size_t y = 0; y < grid.ny; ++y) {
            const std::size_t sy = std::min(img.height - 1, y * img.height / grid.ny);
            for (std::size_t x = 0; x < grid.nx; ++x) {
                const std::size_t sx = std::min(img.width - 1, x * img.width / grid.nx);
                layer(x, y) = img.pixels[sy * img.width + sx] < threshold ? etched_phase : 0.0;
            }
        }
        layers.push_back(std::move(layer));
    }
    return ObjectStack(grid, dz, std::move(layers));
}

}  // namespace difftomo
