#pragma once

#include <cstddef>
#include <vector>

#include "difftomo/forward.hpp"
#include "difftomo/phantom.hpp"

namespace difftomo {

/// Fixed-step solver settings. `tv_alpha` is the weight of TV in the
/// objective J + tv_alpha * TV, so each proximal step uses step * tv_alpha.
struct SolverConfig {
    std::size_t iterations = 8;
    double step = 0.05;
    double tv_alpha = 0.0;
    std::size_t tv_inner_iters = 20;
    bool record_cost = true;
    bool momentum = true;           // FISTA extrapolation (lt_reconstruct only)
    std::size_t layers = 4;         // layers of the reconstructed stack
    std::size_t threads = 1;        // view-level parallelism, 0 = default
    double divergence_factor = 10;  // abort when J grows by more than this between iterations

    void validate() const;

    static SolverConfig approximant_k8();      // K=8, s=0.05
    static SolverConfig approximant_k1();      // K=1, s=0.1
    static SolverConfig approximant_k8_tv();   // K=8, s=0.05, alpha=0.04
    static SolverConfig approximant_k1_tv();   // K=1, s=0.1, alpha=0.1
    static SolverConfig learning_tomography(); // K=30, s=0.05, alpha=0.04, 20 inner
};

/// dJ/dphi_l for every layer.
struct GradientStack {
    std::vector<RealMap> layers;

    GradientStack() = default;
    GradientStack(const GridSpec& grid, std::size_t count) : layers(count, RealMap(grid)) {}

    GradientStack& operator+=(const GradientStack& other);
};

/// Cost and the per-view residuals r_i = H_i(f) - g_i in normalized units.
struct CostResult {
    double cost = 0.0;
    std::vector<RealMap> residuals;
};

/// Measurements are compared in flux-normalized units:
/// g_i -> (g_i - read_mean) / photon_flux and H_i(f) = |u_det|^2, so the
/// object-free beam has unit intensity. (A zero flux leaves counts unscaled.)
RealMap normalized_measurement(const RealMap& counts, const AcquisitionGeometry& geom);

/// J = 1/(2 N_v) sum_i ||H_i(f) - g_i||^2, the data misfit averaged over the
/// N_v views so that step sizes do not depend on how many views were taken.
CostResult cost(const ObjectStack& stack, const MeasurementSet& measurements);

/// Gradient of 1/2 ||H_i(f) - g_i||^2 for a single view (no 1/N_v factor).
/// Adjoint pass: r' = u_det r, r'_L = F_d^H r',
/// r'_{l-1} = F_dz^H conj(f_l) r'_l, dJ/dphi_l = 2 Im{conj(u_l) r'_l}.
/// `forward` must come from bpm_forward on the same stack and orientation.
GradientStack gradient_single_view(const ObjectStack& stack, const AcquisitionGeometry& geom, const Orientation& o,
                                   const RealMap& residual, const ForwardResult& forward);

/// Gradient of J: the mean of the per-view gradients. Views are combined by a
/// fixed pairwise tree, so the result is bit-identical for any thread count.
GradientStack total_gradient(const ObjectStack& stack, const MeasurementSet& measurements, std::size_t threads = 1);

/// Precomputed per-view operators and normalized targets for repeated
/// cost/gradient evaluations.
class TomographyProblem {
public:
    explicit TomographyProblem(const MeasurementSet& measurements, std::size_t threads = 1);

    struct Evaluation {
        double cost = 0.0;
        GradientStack gradient;  // empty when not requested
    };

    Evaluation evaluate(const ObjectStack& stack, bool with_gradient) const;
    double cost(const ObjectStack& stack) const { return evaluate(stack, false).cost; }

    const AcquisitionGeometry& geometry() const noexcept { return geometry_; }
    std::size_t view_count() const noexcept { return views_.size(); }

private:
    AcquisitionGeometry geometry_;
    std::vector<ViewOperator> views_;
    std::vector<RealMap> targets_;
    std::size_t threads_;
};

struct SolverResult {
    ObjectStack estimate;
    std::vector<double> cost_history;  // J(f^(0)) .. J(f^(K)) when recorded
    double seconds = 0.0;
};

/// argmin_x 1/2 ||x - b||^2 + weight TV(x) applied to each layer separately.
ObjectStack tv_prox(const ObjectStack& stack, double weight, std::size_t inner_iters);

/// f^(k+1) = f^(k) - s grad J(f^(k)) from f^(0) = 0, followed by a TV prox
/// step when cfg.tv_alpha > 0.
SolverResult approximant(const MeasurementSet& measurements, const SolverConfig& cfg);

/// FISTA with TV proximal steps (the Learning Tomography baseline).
SolverResult lt_reconstruct(const MeasurementSet& measurements, const SolverConfig& cfg);

}  // namespace difftomo
