#include "difftomo/forward.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "difftomo/parallel.hpp"
#include "difftomo/random.hpp"
#include "difftomo/simd.hpp"

namespace difftomo {

namespace {
constexpr double kDegree = std::numbers::pi / 180.0;
}

double AcquisitionGeometry::k0() const noexcept { return 2.0 * std::numbers::pi / wavelength; }
double AcquisitionGeometry::k_medium() const noexcept { return k0() * n_medium; }
double AcquisitionGeometry::k_detector() const noexcept { return k0() * n_detector; }

void AcquisitionGeometry::validate() const {
    grid.validate();
    if (!(wavelength > 0.0) || !std::isfinite(wavelength)) throw std::invalid_argument("wavelength must be positive");
    if (!(n_medium > 0.0) || !(n_detector > 0.0)) throw std::invalid_argument("refractive indices must be positive");
    if (!std::isfinite(d_defocus)) throw std::invalid_argument("defocus distance must be finite");
    if (!(dz >= 0.0) || !std::isfinite(dz)) throw std::invalid_argument("layer spacing must be finite and >= 0");
    if (!(photon_flux >= 0.0) || !std::isfinite(photon_flux)) throw std::invalid_argument("photon flux must be >= 0");
    if (!(read_sigma >= 0.0) || !std::isfinite(read_sigma)) throw std::invalid_argument("read noise sigma must be >= 0");
    if (!std::isfinite(read_mean)) throw std::invalid_argument("read noise mean must be finite");
    if (!(max_tilt_deg >= 0.0 && max_tilt_deg < 90.0)) throw std::invalid_argument("tilt guard must lie in [0, 90)");
}

std::vector<Orientation> default_protocol() { return make_protocol(22, 10.0); }

std::vector<Orientation> make_protocol(std::size_t views, double max_deg) {
    if (views % 2 != 0) throw std::invalid_argument("view count must be even (x sweep + y sweep)");
    std::vector<Orientation> out;
    const std::size_t per_axis = views / 2;
    if (per_axis == 0) return out;
    auto angle = [&](std::size_t i) {
        if (per_axis == 1) return 0.0;
        return -max_deg + 2.0 * max_deg * static_cast<double>(i) / static_cast<double>(per_axis - 1);
    };
    for (std::size_t i = 0; i < per_axis; ++i) out.push_back({angle(i), 0.0});
    for (std::size_t i = 0; i < per_axis; ++i) out.push_back({0.0, angle(i)});
    return out;
}

Carrier illumination_carrier(const AcquisitionGeometry& geom, const Orientation& o) {
    if (!std::isfinite(o.theta_x_deg) || !std::isfinite(o.theta_y_deg) ||
        std::abs(o.theta_x_deg) > geom.max_tilt_deg || std::abs(o.theta_y_deg) > geom.max_tilt_deg) {
        throw std::invalid_argument("orientation (" + std::to_string(o.theta_x_deg) + ", " +
                                    std::to_string(o.theta_y_deg) + ") deg exceeds the tilt guard of " +
                                    std::to_string(geom.max_tilt_deg) + " deg");
    }
    return {geom.k0() * std::sin(o.theta_x_deg * kDegree), geom.k0() * std::sin(o.theta_y_deg * kDegree)};
}

ComplexField2D incident_field(const AcquisitionGeometry& geom, const Orientation& o) {
    geom.validate();
    const Carrier c = illumination_carrier(geom, o);
    ComplexField2D u(geom.grid);
    for (std::size_t iy = 0; iy < geom.grid.ny; ++iy) {
        for (std::size_t ix = 0; ix < geom.grid.nx; ++ix) {
            const double phase = c.kx * geom.grid.x(ix) + c.ky * geom.grid.y(iy);
            u(ix, iy) = {std::cos(phase), std::sin(phase)};
        }
    }
    return u;
}

ViewOperator make_view_operator(const AcquisitionGeometry& geom, const Orientation& o) {
    geom.validate();
    const Carrier c = illumination_carrier(geom, o);
    return ViewOperator{o, make_kernel(geom.grid, geom.dz, geom.k_medium(), c),
                        make_kernel(geom.grid, geom.d_defocus, geom.k_detector(), c)};
}

std::vector<ComplexField2D> layer_transmittance(const ObjectStack& stack) {
    std::vector<ComplexField2D> out;
    out.reserve(stack.layer_count());
    for (std::size_t l = 0; l < stack.layer_count(); ++l) {
        const RealMap& phi = stack.phase(l);
        const RealMap& alpha = stack.absorption(l);
        ComplexField2D f(stack.grid());
        for (std::size_t i = 0; i < f.size(); ++i) f.data()[i] = std::exp(cplx{alpha[i], phi[i]});
        out.push_back(std::move(f));
    }
    return out;
}

ForwardResult bpm_forward(std::span<const ComplexField2D> transmittance, const ViewOperator& view) {
    if (transmittance.empty()) throw std::invalid_argument("bpm_forward: empty object");
    const auto& k = simd::active();
    const GridSpec& grid = view.layer_step.grid();

    ForwardResult result;
    result.cache.layer_fields.reserve(transmittance.size());
    for (std::size_t l = 0; l < transmittance.size(); ++l) {
        require_same_grid(transmittance[l].grid(), grid, "bpm_forward");
        if (l == 0) {
            // Envelope of the incident wave is 1.
            result.cache.layer_fields.push_back(transmittance[0]);
        } else {
            ComplexField2D u = result.cache.layer_fields.back();
            propagate_in_place(u, view.layer_step);
            k.cmul(u.data(), transmittance[l].data(), u.data(), u.size());
            result.cache.layer_fields.push_back(std::move(u));
        }
    }
    result.detector = propagate(result.cache.layer_fields.back(), view.defocus);
    return result;
}

ForwardResult bpm_forward(const ObjectStack& stack, const AcquisitionGeometry& geom, const Orientation& o) {
    stack.validate();
    require_same_grid(stack.grid(), geom.grid, "bpm_forward");
    if (std::abs(stack.dz() - geom.dz) > 1e-12 * std::max(1.0, std::abs(geom.dz)))
        throw std::invalid_argument("bpm_forward: stack layer spacing differs from the geometry");
    const auto masks = layer_transmittance(stack);
    return bpm_forward(masks, make_view_operator(geom, o));
}

RealMap detect_intensity(const ComplexField2D& u_det, double photon_flux) {
    RealMap out(u_det.grid());
    simd::active().abs2(u_det.data(), photon_flux, out.data(), out.size());
    return out;
}

RealMap apply_noise(const RealMap& img, const AcquisitionGeometry& geom, std::mt19937_64& rng) {
    if (!(geom.read_sigma >= 0.0)) throw std::invalid_argument("apply_noise: read sigma must be >= 0");
    RealMap out(img.grid());
    std::normal_distribution<double> read(0.0, 1.0);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double mean = img[i];
        if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("apply_noise: negative or non-finite intensity");
        double photons = 0.0;
        if (mean > 0.0) photons = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
        double v = photons + geom.read_mean + geom.read_sigma * read(rng);
        if (geom.clip_negative && v < 0.0) v = 0.0;
        out[i] = v;
    }
    return out;
}

void MeasurementSet::validate() const {
    geometry.validate();
    if (orientations.size() != images.size())
        throw std::invalid_argument("measurement set: orientation count differs from image count");
    for (const auto& img : images) {
        require_same_grid(img.grid(), geometry.grid, "measurement image");
        if (!img.all_finite()) throw std::invalid_argument("measurement set: non-finite intensity");
        if (!geometry.clip_negative) continue;
        for (double v : img.values())
            if (v < 0.0) throw std::invalid_argument("measurement set: negative intensity with clipping enabled");
    }
}

MeasurementSet simulate_measurements(const ObjectStack& stack, const AcquisitionGeometry& geom,
                                     const std::vector<Orientation>& orientations, bool noise, std::uint64_t seed,
                                     std::size_t threads) {
    geom.validate();
    stack.validate();
    require_same_grid(stack.grid(), geom.grid, "simulate_measurements");

    MeasurementSet set;
    set.geometry = geom;
    set.orientations = orientations;
    set.images.resize(orientations.size());
    const auto masks = layer_transmittance(stack);

    parallel_for(orientations.size(), threads, [&](std::size_t i) {
        const ViewOperator view = make_view_operator(geom, orientations[i]);
        RealMap img = detect_intensity(bpm_forward(masks, view).detector, geom.photon_flux);
        if (noise) {
            std::mt19937_64 rng(derive_seed(seed, i));
            img = apply_noise(img, geom, rng);
        }
        set.images[i] = std::move(img);
    });
    return set;
}

double fresnel_number(double feature_size, double wavelength, double distance) {
    if (!(feature_size > 0.0) || !(wavelength > 0.0) || !(distance > 0.0))
        throw std::invalid_argument("fresnel_number: all inputs must be positive");
    return feature_size * feature_size / (wavelength * distance);
}

}  // namespace difftomo
