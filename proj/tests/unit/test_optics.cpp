#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <thread>

#include "difftomo/fft.hpp"
#include "difftomo/optics.hpp"
#include "difftomo/parallel.hpp"
#include "oracles.hpp"

using namespace difftomo;

namespace {
constexpr double kLambda = 632.8e-9;
const double k0 = 2.0 * std::numbers::pi / kLambda;

double rel_err(const ComplexField2D& u, const oracle::Field& ref) {
    return static_cast<double>(oracle::max_abs_diff(oracle::from(u), ref) / oracle::norm(ref) *
                               std::sqrt(static_cast<long double>(ref.size())));
}
}  // namespace

TEST_CASE("grid frequencies follow the DFT bin layout") {
    GridSpec g{8, 5, 2e-6};
    const double base_x = 2.0 * std::numbers::pi / (8 * 2e-6);
    CHECK(g.kx(0) == 0.0);
    CHECK(g.kx(3) == doctest::Approx(3 * base_x));
    CHECK(g.kx(4) == doctest::Approx(-4 * base_x));  // Nyquist bin is negative
    CHECK(g.kx(7) == doctest::Approx(-1 * base_x));
    const double base_y = 2.0 * std::numbers::pi / (5 * 2e-6);
    CHECK(g.ky(2) == doctest::Approx(2 * base_y));
    CHECK(g.ky(3) == doctest::Approx(-2 * base_y));
    CHECK(g.x(4) == 0.0);
    CHECK(g.x(0) == doctest::Approx(-8e-6));
    CHECK_THROWS_AS(GridSpec({1, 4, 1e-6}).validate(), std::invalid_argument);
    CHECK_THROWS_AS(GridSpec({4, 4, 0.0}).validate(), std::invalid_argument);
}

TEST_CASE("unitary FFT matches direct summation") {
    std::mt19937_64 rng(5);
    for (auto [nx, ny] : {std::pair<std::size_t, std::size_t>{8, 6}, {5, 7}, {16, 16}}) {
        GridSpec g{nx, ny, 1e-6};
        ComplexField2D u = oracle::random_field(g, rng);
        const oracle::Field ref_f = oracle::dft(oracle::from(u), nx, ny, -1);
        ComplexField2D f = u;
        fft::forward(f);
        CHECK(rel_err(f, ref_f) < 1e-13);
        const oracle::Field ref_i = oracle::dft(oracle::from(u), nx, ny, +1);
        ComplexField2D b = u;
        fft::inverse(b);
        CHECK(rel_err(b, ref_i) < 1e-13);
        fft::inverse(f);
        CHECK(rel_err(f, oracle::from(u)) < 1e-14);
    }
}

TEST_CASE("transfer function matches the textbook form evaluated in extended precision") {
    GridSpec g{16, 12, 16e-6};
    const Carrier c{k0 * std::sin(0.1), -k0 * std::sin(0.05)};
    for (double d : {0.5e-3, 58e-3, -3e-3}) {
        const auto kern = make_kernel(g, d, k0 * 1.42875, c);
        const long double k = static_cast<long double>(k0) * 1.42875L;
        for (std::size_t iy = 0; iy < g.ny; ++iy) {
            for (std::size_t ix = 0; ix < g.nx; ++ix) {
                const long double kx = oracle::frequency(ix, g.nx, g.pitch) + c.kx;
                const long double ky = oracle::frequency(iy, g.ny, g.pitch) + c.ky;
                const long double phase = (std::sqrt(k * k - kx * kx - ky * ky) - k) * d;
                const cplx expect{static_cast<double>(std::cos(phase)), static_cast<double>(std::sin(phase))};
                CHECK(std::abs(kern.at(ix, iy) - expect) < 1e-12);
            }
        }
    }
}

TEST_CASE("propagation equals the direct-sum angular spectrum oracle") {
    std::mt19937_64 rng(11);
    GridSpec g{16, 12, 16e-6};
    const ComplexField2D u = oracle::random_field(g, rng);
    for (const Carrier c : {Carrier{}, Carrier{k0 * std::sin(10.0 * std::numbers::pi / 180.0), 0.0},
                            Carrier{0.0, -k0 * std::sin(6.0 * std::numbers::pi / 180.0)}}) {
        const auto kern = make_kernel(g, 58e-3, k0, c);
        const ComplexField2D out = propagate(u, kern);
        const auto ref = oracle::angular_spectrum(oracle::from(u), g, 58e-3, k0, c.kx, c.ky);
        CHECK(rel_err(out, ref) < 1e-12);
    }
}

TEST_CASE("propagation preserves the L2 norm when no component is evanescent") {
    std::mt19937_64 rng(3);
    GridSpec g{128, 128, 16e-6};
    const Carrier c{k0 * std::sin(10.0 * std::numbers::pi / 180.0), 0.0};
    const auto kern = make_kernel(g, 58e-3, k0, c);
    for (int rep = 0; rep < 5; ++rep) {
        const ComplexField2D u = oracle::random_field(g, rng);
        const double n0 = l2_norm(u);
        CHECK(std::abs(l2_norm(propagate(u, kern)) - n0) <= 1e-10 * n0);
        CHECK(std::abs(l2_norm(adjoint_propagate(u, kern)) - n0) <= 1e-10 * n0);
    }
}

TEST_CASE("adjoint identity <Fx, y> = <x, F^H y>") {
    std::mt19937_64 rng(17);
    GridSpec g{32, 24, 16e-6};
    const auto kern = make_kernel(g, 0.5e-3, k0 * 1.42875, Carrier{k0 * 0.1, k0 * 0.05});
    for (int rep = 0; rep < 20; ++rep) {
        const ComplexField2D x = oracle::random_field(g, rng), y = oracle::random_field(g, rng);
        const cplx lhs = inner_product(propagate(x, kern), y);
        const cplx rhs = inner_product(x, adjoint_propagate(y, kern));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * l2_norm(x) * l2_norm(y));
    }
}

TEST_CASE("evanescent band is removed") {
    // Half-wavelength pitch puts the outer bins beyond k.
    GridSpec g{16, 16, 0.25e-6};
    const auto kern = make_kernel(g, 1e-6, k0);
    std::size_t zeros = 0;
    for (std::size_t iy = 0; iy < g.ny; ++iy)
        for (std::size_t ix = 0; ix < g.nx; ++ix) {
            const double kt2 = g.kx(ix) * g.kx(ix) + g.ky(iy) * g.ky(iy);
            if (kt2 > k0 * k0) {
                CHECK(kern.at(ix, iy) == cplx{0.0, 0.0});
                ++zeros;
            } else {
                CHECK(std::abs(std::abs(kern.at(ix, iy)) - 1.0) < 1e-15);
            }
        }
    CHECK(zeros > 0);
    std::mt19937_64 rng(1);
    const ComplexField2D u = oracle::random_field(g, rng);
    CHECK(l2_norm(propagate(u, kern)) < l2_norm(u));
}

TEST_CASE("distances compose and negative distance inverts") {
    std::mt19937_64 rng(23);
    GridSpec g{32, 32, 16e-6};
    const Carrier c{k0 * 0.12, 0.0};
    const ComplexField2D u = oracle::random_field(g, rng);
    const auto a = make_kernel(g, 20e-3, k0, c), b = make_kernel(g, 38e-3, k0, c), ab = make_kernel(g, 58e-3, k0, c);
    const auto two_step = propagate(propagate(u, a), b);
    CHECK(rel_err(two_step, oracle::from(propagate(u, ab))) < 1e-12);
    const auto back = propagate(propagate(u, ab), make_kernel(g, -58e-3, k0, c));
    CHECK(rel_err(back, oracle::from(u)) < 1e-12);
    const auto zero = propagate(u, make_kernel(g, 0.0, k0, c));
    CHECK(rel_err(zero, oracle::from(u)) < 1e-14);
}

TEST_CASE("a plane wave on a DFT frequency is an eigenfunction") {
    GridSpec g{32, 16, 16e-6};
    const std::size_t mx = 3, my = 14;  // my wraps to a negative frequency
    ComplexField2D u(g);
    for (std::size_t iy = 0; iy < g.ny; ++iy)
        for (std::size_t ix = 0; ix < g.nx; ++ix) {
            const double ph = 2.0 * std::numbers::pi * (double(mx * ix) / g.nx + double(my * iy) / g.ny);
            u(ix, iy) = {std::cos(ph), std::sin(ph)};
        }
    const auto kern = make_kernel(g, 58e-3, k0);
    const auto out = propagate(u, kern);
    const cplx h = kern.at(mx, my);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(out.data()[i] - h * u.data()[i]) < 1e-12);
}

TEST_CASE("kernel rejects invalid input") {
    GridSpec g{8, 8, 1e-6};
    CHECK_THROWS_AS(make_kernel(g, 1e-3, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(make_kernel(g, std::nan(""), k0), std::invalid_argument);
    CHECK_THROWS_AS(make_kernel(GridSpec{8, 8, -1.0}, 1e-3, k0), std::invalid_argument);
    ComplexField2D u(GridSpec{4, 4, 1e-6});
    CHECK_THROWS_AS(propagate(u, make_kernel(g, 1e-3, k0)), std::invalid_argument);
}

TEST_CASE("concurrent transforms give the same result as sequential ones") {
    std::mt19937_64 rng(29);
    GridSpec g{48, 40, 1e-6};
    std::vector<ComplexField2D> in, seq, par;
    for (int i = 0; i < 8; ++i) in.push_back(oracle::random_field(g, rng));
    seq = in;
    par = in;
    for (auto& f : seq) fft::forward(f);
    parallel_for(par.size(), 4, [&](std::size_t i) { fft::forward(par[i]); });
    for (std::size_t i = 0; i < in.size(); ++i)
        CHECK(std::equal(seq[i].values().begin(), seq[i].values().end(), par[i].values().begin()));
}
