#pragma once

#include <complex>
#include <cstddef>
#include <cstdlib>
#include <limits>
#include <new>
#include <span>
#include <vector>

namespace difftomo {

using cplx = std::complex<double>;

/// Allocator returning 64-byte aligned storage. Every buffer handed to the
/// FFT backend comes from here so plans built on scratch arrays stay valid.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) {
        if (n > std::numeric_limits<std::size_t>::max() / sizeof(T)) throw std::bad_array_new_length();
        std::size_t bytes = (n * sizeof(T) + alignment - 1) / alignment * alignment;
        if (bytes == 0) bytes = alignment;
        void* p = std::aligned_alloc(alignment, bytes);
        if (!p) throw std::bad_alloc();
        return static_cast<T*>(p);
    }
    void deallocate(T* p, std::size_t) noexcept { std::free(p); }

    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

template <class T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// Regular sampling grid with the optical axis at pixel (nx/2, ny/2).
/// Storage is row-major: index = iy * nx + ix.
struct GridSpec {
    std::size_t nx = 0;
    std::size_t ny = 0;
    double pitch = 0.0;  // meters per pixel

    std::size_t size() const noexcept { return nx * ny; }
    double x(std::size_t ix) const noexcept { return (static_cast<double>(ix) - static_cast<double>(nx / 2)) * pitch; }
    double y(std::size_t iy) const noexcept { return (static_cast<double>(iy) - static_cast<double>(ny / 2)) * pitch; }

    /// Angular spatial frequency (rad/m) of DFT bin `i` out of `n`, zero at index 0.
    double kx(std::size_t i) const noexcept { return angular_frequency(i, nx); }
    double ky(std::size_t i) const noexcept { return angular_frequency(i, ny); }

    /// Throws std::invalid_argument when nx, ny < 2 or pitch is not a positive finite number.
    void validate() const;

    bool operator==(const GridSpec&) const = default;

private:
    double angular_frequency(std::size_t i, std::size_t n) const noexcept;
};

/// Sampled scalar field u(x, y).
class ComplexField2D {
public:
    ComplexField2D() = default;
    explicit ComplexField2D(const GridSpec& grid, cplx fill = {0.0, 0.0});

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<cplx> values() noexcept { return values_; }
    std::span<const cplx> values() const noexcept { return values_; }
    cplx* data() noexcept { return values_.data(); }
    const cplx* data() const noexcept { return values_.data(); }

    cplx& operator()(std::size_t ix, std::size_t iy) noexcept { return values_[iy * grid_.nx + ix]; }
    const cplx& operator()(std::size_t ix, std::size_t iy) const noexcept { return values_[iy * grid_.nx + ix]; }

    bool all_finite() const noexcept;

private:
    GridSpec grid_{};
    AlignedVector<cplx> values_;
};

/// Real-valued map on a grid: a phase layer, an intensity image, a gradient.
class RealMap {
public:
    RealMap() = default;
    explicit RealMap(const GridSpec& grid, double fill = 0.0);

    const GridSpec& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }

    double& operator()(std::size_t ix, std::size_t iy) noexcept { return values_[iy * grid_.nx + ix]; }
    double operator()(std::size_t ix, std::size_t iy) const noexcept { return values_[iy * grid_.nx + ix]; }
    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    bool all_finite() const noexcept;

private:
    GridSpec grid_{};
    AlignedVector<double> values_;
};

/// Throws std::invalid_argument naming `what` unless a and b share a grid.
void require_same_grid(const GridSpec& a, const GridSpec& b, const char* what);

}  // namespace difftomo
