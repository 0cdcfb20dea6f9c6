#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "difftomo/forward.hpp"
#include "oracles.hpp"

using namespace difftomo;

namespace {

AcquisitionGeometry small_geometry(std::size_t n = 32) {
    AcquisitionGeometry g;
    g.grid = {n, n, 16e-6};
    return g;
}

double max_rel(const ComplexField2D& u, const oracle::Field& ref) {
    return static_cast<double>(oracle::max_abs_diff(oracle::from(u), ref) /
                               (oracle::norm(ref) / std::sqrt(static_cast<long double>(ref.size()))));
}

}  // namespace

TEST_CASE("default protocol is an x sweep then a y sweep over +-10 degrees") {
    const auto p = default_protocol();
    REQUIRE(p.size() == 22);
    for (std::size_t i = 0; i < 11; ++i) {
        CHECK(p[i].theta_x_deg == doctest::Approx(-10.0 + 2.0 * i));
        CHECK(p[i].theta_y_deg == 0.0);
        CHECK(p[11 + i].theta_x_deg == 0.0);
        CHECK(p[11 + i].theta_y_deg == doctest::Approx(-10.0 + 2.0 * i));
    }
    CHECK(make_protocol(22, 10.0) == p);
    CHECK(make_protocol(0).empty());
    CHECK(make_protocol(2, 10.0).size() == 2);
    CHECK_THROWS_AS(make_protocol(21), std::invalid_argument);
}

TEST_CASE("tilts beyond the guard are rejected") {
    AcquisitionGeometry g;
    CHECK_NOTHROW(illumination_carrier(g, {15.0, 0.0}));
    CHECK_THROWS_AS(illumination_carrier(g, {15.5, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(make_view_operator(g, {0.0, -20.0}), std::invalid_argument);
    CHECK_THROWS_AS(illumination_carrier(g, {std::nan(""), 0.0}), std::invalid_argument);
    const Carrier c = illumination_carrier(g, {10.0, -4.0});
    CHECK(c.kx == doctest::Approx(g.k0() * std::sin(10.0 * std::numbers::pi / 180.0)));
    CHECK(c.ky == doctest::Approx(g.k0() * std::sin(-4.0 * std::numbers::pi / 180.0)));
}

TEST_CASE("incident field samples the tilted plane wave") {
    const AcquisitionGeometry g = small_geometry(16);
    const Orientation o{3.0, -2.0};
    const ComplexField2D u = incident_field(g, o);
    const double sx = std::sin(3.0 * std::numbers::pi / 180.0), sy = std::sin(-2.0 * std::numbers::pi / 180.0);
    for (std::size_t iy = 0; iy < 16; ++iy)
        for (std::size_t ix = 0; ix < 16; ++ix) {
            const double ph = g.k0() * (sx * g.grid.x(ix) + sy * g.grid.y(iy));
            CHECK(std::abs(u(ix, iy) - cplx(std::cos(ph), std::sin(ph))) < 1e-12);
        }
    CHECK(std::abs(incident_field(g, {})(8, 8) - cplx(1.0, 0.0)) == 0.0);
}

TEST_CASE("two-layer cascade equals an independently composed oracle") {
    std::mt19937_64 rng(8);
    const AcquisitionGeometry g = small_geometry(32);
    ObjectStack s(g.grid, g.dz, {oracle::random_map(g.grid, rng, 1.0), oracle::random_map(g.grid, rng, 1.0)});
    std::vector<std::vector<double>> phases;
    for (const auto& l : s.phases()) phases.emplace_back(l.values().begin(), l.values().end());
    for (const Orientation o : {Orientation{}, Orientation{10.0, 0.0}, Orientation{0.0, -6.0}}) {
        CAPTURE(o.theta_x_deg);
        CAPTURE(o.theta_y_deg);
        const auto res = bpm_forward(s, g, o);
        const Carrier c = illumination_carrier(g, o);
        const auto ref = oracle::compose_bpm(phases, g.grid, g.dz, g.k_medium(), g.d_defocus, g.k_detector(), c.kx, c.ky);
        CHECK(max_rel(res.detector, ref) < 1e-12);
        REQUIRE(res.cache.layer_fields.size() == 2);
    }
}

TEST_CASE("object-free stack gives the flat beam") {
    const AcquisitionGeometry g = small_geometry(32);
    const ObjectStack empty(g.grid, g.dz, 4);
    for (const Orientation o : default_protocol()) {
        const RealMap img = detect_intensity(bpm_forward(empty, g, o).detector, g.photon_flux);
        for (double v : img.values()) CHECK(std::abs(v - g.photon_flux) < 1e-9);
    }
}

TEST_CASE("carrier-frame intensities equal lab-frame propagation for an on-grid tilt") {
    // The tilt equals DFT bin 3, so the lab-frame wave is periodic and the
    // smooth object keeps every component away from wrap-around.
    AcquisitionGeometry g = small_geometry(64);
    const double kx0 = 2.0 * std::numbers::pi * 3.0 / (64 * g.grid.pitch);
    const Orientation o{std::asin(kx0 / g.k0()) * 180.0 / std::numbers::pi, 0.0};
    ObjectStack s(g.grid, g.dz, 2);
    for (std::size_t iy = 0; iy < 64; ++iy)
        for (std::size_t ix = 0; ix < 64; ++ix) {
            s.phase(0)(ix, iy) = 0.3 * std::cos(2.0 * std::numbers::pi * 2.0 * ix / 64.0);
            s.phase(1)(ix, iy) = -0.2 * std::sin(2.0 * std::numbers::pi * 1.0 * iy / 64.0);
        }
    const RealMap envelope = detect_intensity(bpm_forward(s, g, o).detector, 1.0);

    ComplexField2D u = incident_field(g, o);
    const auto masks = layer_transmittance(s);
    const auto step = make_kernel(g.grid, g.dz, g.k_medium()), defocus = make_kernel(g.grid, g.d_defocus, g.k_detector());
    for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] *= masks[0].data()[i];
    u = propagate(u, step);
    for (std::size_t i = 0; i < u.size(); ++i) u.data()[i] *= masks[1].data()[i];
    const RealMap lab = detect_intensity(propagate(u, defocus), 1.0);
    for (std::size_t i = 0; i < lab.size(); ++i) CHECK(std::abs(lab[i] - envelope[i]) < 1e-12);
}

TEST_CASE("layer spacing and grid must match the geometry") {
    const AcquisitionGeometry g = small_geometry(16);
    CHECK_THROWS_AS(bpm_forward(ObjectStack(g.grid, 1e-3, 2), g, {}), std::invalid_argument);
    CHECK_THROWS_AS(bpm_forward(ObjectStack(GridSpec{8, 8, 16e-6}, g.dz, 2), g, {}), std::invalid_argument);
}

TEST_CASE("noise model") {
    AcquisitionGeometry g = small_geometry(16);
    SUBCASE("zero intensity yields read noise only") {
        g.read_sigma = 0.0;
        g.read_mean = 5.0;
        std::mt19937_64 rng(1);
        const RealMap out = apply_noise(RealMap(g.grid, 0.0), g, rng);
        for (double v : out.values()) CHECK(v == 5.0);
    }
    SUBCASE("photon counts are integers without read noise") {
        g.read_sigma = 0.0;
        std::mt19937_64 rng(2);
        const RealMap out = apply_noise(RealMap(g.grid, 3.5), g, rng);
        for (double v : out.values()) CHECK(v == std::floor(v));
    }
    SUBCASE("clipping removes negative counts") {
        g.clip_negative = true;
        g.read_sigma = 50.0;
        std::mt19937_64 rng(3);
        const RealMap out = apply_noise(RealMap(g.grid, 1.0), g, rng);
        for (double v : out.values()) CHECK(v >= 0.0);
    }
    SUBCASE("negative intensity is an error") {
        std::mt19937_64 rng(4);
        RealMap img(g.grid, 1.0);
        img[7] = -1e-3;
        CHECK_THROWS_AS(apply_noise(img, g, rng), std::invalid_argument);
    }
    SUBCASE("moments at a modest sample size") {
        std::mt19937_64 rng(5);
        const GridSpec big{256, 256, 16e-6};
        const RealMap out = apply_noise(RealMap(big, 1000.0), g, rng);
        double m = 0.0, v = 0.0;
        for (double x : out.values()) m += x;
        m /= out.size();
        for (double x : out.values()) v += (x - m) * (x - m);
        v /= (out.size() - 1);
        CHECK(m == doctest::Approx(1000.0).epsilon(0.01));
        CHECK(v == doctest::Approx(1000.0 + 169.0).epsilon(0.05));
    }
}

TEST_CASE("simulated measurements do not depend on the thread count") {
    const AcquisitionGeometry g = small_geometry(32);
    PatternParams p;
    p.min_width = p.min_length = 48e-6;
    p.max_width = 96e-6;
    p.max_length = 200e-6;
    p.seed = 4;
    const ObjectStack s = synthesize_stack(g.grid, 3, g.dz, p);
    const auto a = simulate_measurements(s, g, default_protocol(), true, 77, 1);
    const auto b = simulate_measurements(s, g, default_protocol(), true, 77, 4);
    const auto c = simulate_measurements(s, g, default_protocol(), true, 78, 1);
    REQUIRE(a.view_count() == 22);
    bool differs = false;
    for (std::size_t i = 0; i < 22; ++i) {
        CHECK(std::equal(a.images[i].values().begin(), a.images[i].values().end(), b.images[i].values().begin()));
        differs |= !std::equal(a.images[i].values().begin(), a.images[i].values().end(), c.images[i].values().begin());
    }
    CHECK(differs);

    const auto clean = simulate_measurements(s, g, default_protocol(), false, 0, 2);
    const RealMap direct = detect_intensity(bpm_forward(s, g, default_protocol()[5]).detector, g.photon_flux);
    CHECK(std::equal(direct.values().begin(), direct.values().end(), clean.images[5].values().begin()));
}

TEST_CASE("measurement set validation") {
    const AcquisitionGeometry g = small_geometry(8);
    MeasurementSet m{g, {{}, {}}, {RealMap(g.grid, 1.0)}};
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m.images.push_back(RealMap(GridSpec{4, 4, 16e-6}));
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m.images.back() = RealMap(g.grid, -1.0);
    CHECK_NOTHROW(m.validate());
    m.geometry.clip_negative = true;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("geometry validation") {
    AcquisitionGeometry g;
    CHECK_NOTHROW(g.validate());
    g.wavelength = 0.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = {};
    g.n_medium = -1.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = {};
    g.photon_flux = -5.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = {};
    g.read_sigma = -1.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    CHECK(AcquisitionGeometry{}.k_medium() == doctest::Approx(AcquisitionGeometry{}.k0() * 1.42875));
}

TEST_CASE("Fresnel number") {
    CHECK(fresnel_number(160e-6, 632.8e-9, 58e-3) == doctest::Approx(0.6975).epsilon(1e-3));
    CHECK(fresnel_number(449e-6, 632.8e-9, 58e-3) == doctest::Approx(5.4925).epsilon(1e-3));
    CHECK_THROWS_AS(fresnel_number(0.0, 632.8e-9, 58e-3), std::invalid_argument);
}
