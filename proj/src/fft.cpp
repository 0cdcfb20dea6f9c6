#include "difftomo/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "difftomo/simd.hpp"

namespace difftomo::fft {
namespace {

class PlanCache {
public:
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    fftw_plan get(std::size_t nx, std::size_t ny, int sign) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_tuple(nx, ny, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;

        // In-place plan on an aligned scratch buffer; callers' buffers share
        // the same 64-byte alignment so the plan is valid for them.
        AlignedVector<cplx> scratch(nx * ny);
        auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(ny), static_cast<int>(nx), p, p, sign, FFTW_ESTIMATE);
        if (!plan) throw std::runtime_error("FFTW plan creation failed");
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& cache() {
    static PlanCache instance;
    return instance;
}

void transform(ComplexField2D& u, int sign) {
    const auto& g = u.grid();
    fftw_plan plan = cache().get(g.nx, g.ny, sign);
    auto* p = reinterpret_cast<fftw_complex*>(u.data());
    fftw_execute_dft(plan, p, p);
    simd::active().cscale(u.data(), 1.0 / std::sqrt(static_cast<double>(g.size())), u.size());
}

}  // namespace

void forward(ComplexField2D& u) { transform(u, FFTW_FORWARD); }
void inverse(ComplexField2D& u) { transform(u, FFTW_BACKWARD); }

}  // namespace difftomo::fft
