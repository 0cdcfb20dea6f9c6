#include "difftomo/inverse.hpp"

#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "difftomo/parallel.hpp"
#include "difftomo/simd.hpp"
#include "difftomo/tv.hpp"

namespace difftomo {

void SolverConfig::validate() const {
    if (iterations < 1) throw std::invalid_argument("solver needs at least one iteration");
    if (!(step > 0.0) || !std::isfinite(step)) throw std::invalid_argument("step size must be positive");
    if (!(tv_alpha >= 0.0) || !std::isfinite(tv_alpha)) throw std::invalid_argument("tv_alpha must be >= 0");
    if (tv_inner_iters < 1) throw std::invalid_argument("tv_inner_iters must be >= 1");
    if (layers < 1) throw std::invalid_argument("reconstruction needs at least one layer");
    if (!(divergence_factor > 1.0)) throw std::invalid_argument("divergence factor must exceed 1");
}

SolverConfig SolverConfig::approximant_k8() { return SolverConfig{}; }

SolverConfig SolverConfig::approximant_k1() {
    SolverConfig c;
    c.iterations = 1;
    c.step = 0.1;
    return c;
}

SolverConfig SolverConfig::approximant_k8_tv() {
    SolverConfig c;
    c.tv_alpha = 0.04;
    return c;
}

SolverConfig SolverConfig::approximant_k1_tv() {
    SolverConfig c = approximant_k1();
    c.tv_alpha = 0.1;
    return c;
}

SolverConfig SolverConfig::learning_tomography() {
    SolverConfig c;
    c.iterations = 30;
    c.step = 0.05;
    c.tv_alpha = 0.04;
    c.tv_inner_iters = 20;
    return c;
}

GradientStack& GradientStack::operator+=(const GradientStack& other) {
    if (other.layers.size() != layers.size()) throw std::invalid_argument("gradient layer count mismatch");
    const auto& k = simd::active();
    for (std::size_t l = 0; l < layers.size(); ++l) k.axpy(1.0, other.layers[l].data(), layers[l].data(), layers[l].size());
    return *this;
}

RealMap normalized_measurement(const RealMap& counts, const AcquisitionGeometry& geom) {
    const double scale = geom.photon_flux > 0.0 ? 1.0 / geom.photon_flux : 1.0;
    RealMap out(counts.grid());
    for (std::size_t i = 0; i < counts.size(); ++i) out[i] = (counts[i] - geom.read_mean) * scale;
    return out;
}

namespace {

// Backpropagates one view's residual and adds its phase gradient into `grad`.
void adjoint_pass(std::span<const ComplexField2D> masks, const ViewOperator& view, const ForwardResult& fwd,
                  const RealMap& residual, GradientStack& grad) {
    const auto& k = simd::active();
    const std::size_t L = masks.size();
    if (fwd.cache.layer_fields.size() != L) throw std::invalid_argument("adjoint pass: forward cache does not match the stack");
    if (grad.layers.size() != L) throw std::invalid_argument("adjoint pass: gradient layer count mismatch");
    require_same_grid(residual.grid(), fwd.detector.grid(), "adjoint pass residual");

    ComplexField2D rp(fwd.detector.grid());
    k.cmul_real(fwd.detector.data(), residual.data(), rp.data(), rp.size());
    adjoint_propagate_in_place(rp, view.defocus);

    for (std::size_t l = L; l-- > 0;) {
        const ComplexField2D& u = fwd.cache.layer_fields[l];
        k.phase_gradient(u.data(), rp.data(), grad.layers[l].data(), rp.size());
        if (l == 0) break;
        k.cmul_conj(rp.data(), masks[l].data(), rp.data(), rp.size());
        adjoint_propagate_in_place(rp, view.layer_step);
    }
}

// Pairwise in-place reduction over a fixed tree; independent of thread count.
template <class T, class Add>
T pairwise_reduce(std::vector<T>& items, Add add) {
    const std::size_t n = items.size();
    for (std::size_t stride = 1; stride < n; stride *= 2)
        for (std::size_t i = 0; i + stride < n; i += 2 * stride) add(items[i], items[i + stride]);
    return std::move(items.front());
}

void check_stack_against(const ObjectStack& stack, const AcquisitionGeometry& geom) {
    stack.validate();
    require_same_grid(stack.grid(), geom.grid, "object stack vs measurements");
}

}  // namespace

CostResult cost(const ObjectStack& stack, const MeasurementSet& measurements) {
    measurements.validate();
    check_stack_against(stack, measurements.geometry);
    const auto masks = layer_transmittance(stack);
    CostResult out;
    std::vector<double> partial(measurements.view_count(), 0.0);
    out.residuals.resize(measurements.view_count());
    for (std::size_t i = 0; i < measurements.view_count(); ++i) {
        const ViewOperator view = make_view_operator(measurements.geometry, measurements.orientations[i]);
        const ForwardResult fwd = bpm_forward(masks, view);
        const RealMap target = normalized_measurement(measurements.images[i], measurements.geometry);
        RealMap r(target.grid());
        partial[i] = simd::active().residual(fwd.detector.data(), target.data(), r.data(), r.size());
        out.residuals[i] = std::move(r);
    }
    if (!partial.empty())
        out.cost = 0.5 * pairwise_reduce(partial, [](double& a, double b) { a += b; }) /
                   static_cast<double>(measurements.view_count());
    return out;
}

GradientStack gradient_single_view(const ObjectStack& stack, const AcquisitionGeometry& geom, const Orientation& o,
                                   const RealMap& residual, const ForwardResult& forward) {
    check_stack_against(stack, geom);
    const auto masks = layer_transmittance(stack);
    GradientStack grad(stack.grid(), stack.layer_count());
    adjoint_pass(masks, make_view_operator(geom, o), forward, residual, grad);
    return grad;
}

GradientStack total_gradient(const ObjectStack& stack, const MeasurementSet& measurements, std::size_t threads) {
    return TomographyProblem(measurements, threads).evaluate(stack, true).gradient;
}

TomographyProblem::TomographyProblem(const MeasurementSet& measurements, std::size_t threads)
    : geometry_(measurements.geometry), threads_(threads) {
    measurements.validate();
    views_.reserve(measurements.view_count());
    targets_.reserve(measurements.view_count());
    for (std::size_t i = 0; i < measurements.view_count(); ++i) {
        views_.push_back(make_view_operator(geometry_, measurements.orientations[i]));
        targets_.push_back(normalized_measurement(measurements.images[i], geometry_));
    }
}

TomographyProblem::Evaluation TomographyProblem::evaluate(const ObjectStack& stack, bool with_gradient) const {
    check_stack_against(stack, geometry_);
    const auto masks = layer_transmittance(stack);
    const std::size_t n = views_.size();

    Evaluation out;
    if (n == 0) {
        if (with_gradient) out.gradient = GradientStack(stack.grid(), stack.layer_count());
        return out;
    }

    std::vector<double> partial(n, 0.0);
    std::vector<GradientStack> grads(with_gradient ? n : 0);
    parallel_for(n, threads_, [&](std::size_t i) {
        const ForwardResult fwd = bpm_forward(masks, views_[i]);
        RealMap r(targets_[i].grid());
        partial[i] = simd::active().residual(fwd.detector.data(), targets_[i].data(), r.data(), r.size());
        if (with_gradient) {
            grads[i] = GradientStack(stack.grid(), stack.layer_count());
            adjoint_pass(masks, views_[i], fwd, r, grads[i]);
        }
    });

    const double inv_views = 1.0 / static_cast<double>(n);
    out.cost = 0.5 * pairwise_reduce(partial, [](double& a, double b) { a += b; }) * inv_views;
    if (with_gradient) {
        out.gradient = pairwise_reduce(grads, [](GradientStack& a, const GradientStack& b) { a += b; });
        for (auto& layer : out.gradient.layers)
            for (double& v : layer.values()) v *= inv_views;
    }
    return out;
}

ObjectStack tv_prox(const ObjectStack& stack, double weight, std::size_t inner_iters) {
    if (!(weight >= 0.0)) throw std::invalid_argument("tv_prox: weight must be >= 0");
    if (weight == 0.0) return stack;
    std::vector<RealMap> layers;
    layers.reserve(stack.layer_count());
    for (const auto& layer : stack.phases()) layers.push_back(tv_denoise(layer, weight, inner_iters));
    return ObjectStack(stack.grid(), stack.dz(), std::move(layers));
}

namespace {

class CostGuard {
public:
    explicit CostGuard(double factor) : factor_(factor) {}

    void check(double cost, std::size_t iteration) {
        if (!std::isfinite(cost)) fail("non-finite cost", cost, iteration);
        if (have_prev_ && cost > factor_ * prev_) fail("cost diverged", cost, iteration);
        prev_ = cost;
        have_prev_ = true;
    }

private:
    [[noreturn]] void fail(const char* what, double cost, std::size_t iteration) const {
        std::ostringstream msg;
        msg << what << " at iteration " << iteration << ": J = " << cost;
        if (have_prev_) msg << " (previous " << prev_ << "); reduce the step size";
        throw std::runtime_error(msg.str());
    }

    double factor_;
    double prev_ = 0.0;
    bool have_prev_ = false;
};

void descend(ObjectStack& x, const GradientStack& g, double step) {
    const auto& k = simd::active();
    for (std::size_t l = 0; l < x.layer_count(); ++l)
        k.axpy(-step, g.layers[l].data(), x.phase(l).data(), x.phase(l).size());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

SolverResult approximant(const MeasurementSet& measurements, const SolverConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const TomographyProblem problem(measurements, cfg.threads);
    const auto& geom = problem.geometry();

    ObjectStack x(geom.grid, geom.dz, cfg.layers);
    SolverResult result;
    CostGuard guard(cfg.divergence_factor);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const auto ev = problem.evaluate(x, true);
        guard.check(ev.cost, it);
        if (cfg.record_cost) result.cost_history.push_back(ev.cost);
        descend(x, ev.gradient, cfg.step);
        if (cfg.tv_alpha > 0.0) x = tv_prox(x, cfg.step * cfg.tv_alpha, cfg.tv_inner_iters);
    }
    if (cfg.record_cost) {
        const double final_cost = problem.cost(x);
        guard.check(final_cost, cfg.iterations);
        result.cost_history.push_back(final_cost);
    }
    result.estimate = std::move(x);
    result.seconds = seconds_since(t0);
    return result;
}

SolverResult lt_reconstruct(const MeasurementSet& measurements, const SolverConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    const TomographyProblem problem(measurements, cfg.threads);
    const auto& geom = problem.geometry();

    ObjectStack x(geom.grid, geom.dz, cfg.layers);
    ObjectStack y = x;
    double t = 1.0;
    SolverResult result;
    CostGuard guard(cfg.divergence_factor);

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const auto ev = problem.evaluate(y, true);
        guard.check(ev.cost, it);
        // Without extrapolation y == x, so this is J(x^(it)).
        if (cfg.record_cost && (it == 0 || !cfg.momentum)) result.cost_history.push_back(ev.cost);

        ObjectStack next = y;
        descend(next, ev.gradient, cfg.step);
        if (cfg.tv_alpha > 0.0) next = tv_prox(next, cfg.step * cfg.tv_alpha, cfg.tv_inner_iters);

        if (cfg.momentum) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            const double beta = (t - 1.0) / t_next;
            y = next;
            for (std::size_t l = 0; l < y.layer_count(); ++l) {
                auto& yl = y.phase(l);
                const auto& xn = next.phase(l);
                const auto& xp = x.phase(l);
                for (std::size_t i = 0; i < yl.size(); ++i) yl[i] = xn[i] + beta * (xn[i] - xp[i]);
            }
            t = t_next;
            if (cfg.record_cost) result.cost_history.push_back(problem.cost(next));
        } else {
            y = next;
        }
        x = std::move(next);
    }
    if (cfg.record_cost && !cfg.momentum) result.cost_history.push_back(problem.cost(x));
    result.estimate = std::move(x);
    result.seconds = seconds_since(t0);
    return result;
}

}  // namespace difftomo
