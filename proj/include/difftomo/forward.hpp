#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "difftomo/optics.hpp"
#include "difftomo/phantom.hpp"
#include "difftomo/types.hpp"

namespace difftomo {

/// Optical set-up shared by all views of one acquisition. Lengths in meters.
struct AcquisitionGeometry {
    GridSpec grid{128, 128, 16e-6};
    double wavelength = 632.8e-9;
    double n_medium = 1.42875;     // between layers: mean of oil (1.4005) and fused silica (1.457)
    double n_detector = 1.0;       // defocus leg runs in air
    double d_defocus = 58e-3;
    double dz = 0.5e-3;
    double photon_flux = 1e3;      // mean photons per pixel of the object-free beam
    double read_sigma = 13.0;      // counts
    double read_mean = 0.0;        // counts
    bool clip_negative = false;    // clip noisy counts at zero
    double max_tilt_deg = 15.0;

    double k0() const noexcept;
    double k_medium() const noexcept;
    double k_detector() const noexcept;

    void validate() const;
};

/// Sample tilt in degrees about the x and y axes.
struct Orientation {
    double theta_x_deg = 0.0;
    double theta_y_deg = 0.0;
    bool operator==(const Orientation&) const = default;
};

/// 22 views: theta_x from -10 to +10 in steps of 2 with theta_y = 0, then
/// theta_y over the same range with theta_x = 0. (0, 0) appears twice.
std::vector<Orientation> default_protocol();

/// `views` (even) orientations split evenly between an x sweep and a y sweep
/// over [-max_deg, +max_deg]. make_protocol(22, 10) == default_protocol().
std::vector<Orientation> make_protocol(std::size_t views, double max_deg = 10.0);

/// Transverse wavevector k0 * (sin theta_x, sin theta_y) of the tilted
/// illumination. Transverse momentum is conserved across the air/oil
/// interfaces, so the same carrier holds inside the sample and on the
/// detector leg. Throws if the tilt exceeds geom.max_tilt_deg.
Carrier illumination_carrier(const AcquisitionGeometry& geom, const Orientation& o);

/// Lab-frame plane wave exp(j k0 (x sin theta_x + y sin theta_y)) sampled on
/// the grid. The cascade itself works on the envelope relative to this
/// carrier (which is identically 1 at the input) because tilts of a few
/// degrees are far above the grid's Nyquist limit.
ComplexField2D incident_field(const AcquisitionGeometry& geom, const Orientation& o);

/// Per-view propagators: one inter-layer step and the defocus leg, both
/// evaluated around the view's illumination carrier.
struct ViewOperator {
    Orientation orientation;
    PropagationKernel layer_step;
    PropagationKernel defocus;
};

ViewOperator make_view_operator(const AcquisitionGeometry& geom, const Orientation& o);

/// Fields u_1..u_L just after each layer, kept for the adjoint pass.
struct ForwardCache {
    std::vector<ComplexField2D> layer_fields;
};

struct ForwardResult {
    ComplexField2D detector;
    ForwardCache cache;
};

/// exp(j phi_l) for every layer.
std::vector<ComplexField2D> layer_transmittance(const ObjectStack& stack);

/// u_1 = f_1 u_inc, u_l = f_l F_dz u_{l-1}, u_det = F_d u_L.
ForwardResult bpm_forward(const ObjectStack& stack, const AcquisitionGeometry& geom, const Orientation& o);
ForwardResult bpm_forward(std::span<const ComplexField2D> transmittance, const ViewOperator& view);

/// photon_flux * |u|^2. The object-free field has |u| = 1, so its mean maps to photon_flux.
RealMap detect_intensity(const ComplexField2D& u_det, double photon_flux);

/// Poisson(img) + Normal(read_mean, read_sigma), per pixel. Throws on negative input.
RealMap apply_noise(const RealMap& img, const AcquisitionGeometry& geom, std::mt19937_64& rng);

/// One tomographic acquisition: an intensity image (counts) per orientation.
struct MeasurementSet {
    AcquisitionGeometry geometry;
    std::vector<Orientation> orientations;
    std::vector<RealMap> images;

    std::size_t view_count() const noexcept { return images.size(); }
    void validate() const;
};

/// Views run in parallel on `threads` workers (0 = default); view i draws its
/// noise from a stream seeded with derive_seed(seed, i), so the output does
/// not depend on the thread count.
MeasurementSet simulate_measurements(const ObjectStack& stack, const AcquisitionGeometry& geom,
                                     const std::vector<Orientation>& orientations, bool noise, std::uint64_t seed,
                                     std::size_t threads = 1);

/// a^2 / (lambda d).
double fresnel_number(double feature_size, double wavelength, double distance);

}  // namespace difftomo
