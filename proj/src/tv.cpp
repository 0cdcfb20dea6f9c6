#include "difftomo/tv.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace difftomo {
namespace {

// Dual field (px, py) on the grid; px vanishes on the last column and py on
// the last row, matching the forward-difference operator D.
struct Dual {
    std::vector<double> px, py;
    explicit Dual(std::size_t n) : px(n, 0.0), py(n, 0.0) {}
};

// x = b - w D^T p, with (D^T p)_i = p_{i-1} - p_i along each axis.
void primal_from_dual(const RealMap& b, double w, const Dual& p, std::vector<double>& x) {
    const std::size_t nx = b.grid().nx, ny = b.grid().ny;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const std::size_t i = iy * nx + ix;
            double dtp = -p.px[i] - p.py[i];
            if (ix > 0) dtp += p.px[i - 1];
            if (iy > 0) dtp += p.py[i - nx];
            x[i] = b[i] - w * dtp;
        }
    }
}

}  // namespace

double total_variation(const RealMap& x) {
    const std::size_t nx = x.grid().nx, ny = x.grid().ny;
    double tv = 0.0;
    for (std::size_t iy = 0; iy < ny; ++iy) {
        for (std::size_t ix = 0; ix < nx; ++ix) {
            const double gx = ix + 1 < nx ? x(ix + 1, iy) - x(ix, iy) : 0.0;
            const double gy = iy + 1 < ny ? x(ix, iy + 1) - x(ix, iy) : 0.0;
            tv += std::sqrt(gx * gx + gy * gy);
        }
    }
    return tv;
}

RealMap tv_denoise(const RealMap& b, double weight, std::size_t iterations) {
    if (!(weight >= 0.0) || !std::isfinite(weight)) throw std::invalid_argument("tv weight must be finite and >= 0");
    if (weight == 0.0 || iterations == 0) return b;

    const std::size_t nx = b.grid().nx, ny = b.grid().ny, n = b.size();
    const double tau = 1.0 / (8.0 * weight);  // 1 / (w^2 ||D||^2) times w

    Dual r(n), p(n), p_prev(n);
    std::vector<double> x(n);
    double t = 1.0;

    for (std::size_t it = 0; it < iterations; ++it) {
        primal_from_dual(b, weight, r, x);
        for (std::size_t iy = 0; iy < ny; ++iy) {
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const std::size_t i = iy * nx + ix;
                double qx = ix + 1 < nx ? r.px[i] + tau * (x[i + 1] - x[i]) : 0.0;
                double qy = iy + 1 < ny ? r.py[i] + tau * (x[i + nx] - x[i]) : 0.0;
                const double norm = std::sqrt(qx * qx + qy * qy);
                if (norm > 1.0) {
                    qx /= norm;
                    qy /= norm;
                }
                p.px[i] = qx;
                p.py[i] = qy;
            }
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;
        for (std::size_t i = 0; i < n; ++i) {
            r.px[i] = p.px[i] + beta * (p.px[i] - p_prev.px[i]);
            r.py[i] = p.py[i] + beta * (p.py[i] - p_prev.py[i]);
        }
        std::swap(p, p_prev);
        t = t_next;
    }

    primal_from_dual(b, weight, p_prev, x);
    RealMap out(b.grid());
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i];
    return out;
}

}  // namespace difftomo
