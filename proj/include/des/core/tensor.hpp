#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace des {

using Shape = std::vector<std::size_t>;

/// Cache-line aligned storage. Vectorized kernels then see the same
/// alignment for every buffer, so their summation order (and result bits)
/// never depends on where the allocator happened to place the data.
template <typename T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <typename U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align))); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t(Align)); }

    template <typename U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept {
        return true;
    }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array of doubles. Feature maps are C x H x W.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, const std::vector<double>& data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor from(std::initializer_list<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    double* raw() noexcept { return data_.data(); }
    const double* raw() const noexcept { return data_.data(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // C x H x W accessors; no bounds checks beyond the debug assert.
    double& at(std::size_t c, std::size_t h, std::size_t w) noexcept;
    double at(std::size_t c, std::size_t h, std::size_t w) const noexcept;

    double item() const;
    bool all_finite() const noexcept;

    /// Same data, new shape of equal element count.
    Tensor reshaped(Shape shape) const;

    void fill(double v) noexcept;
    Tensor& operator+=(const Tensor& other);

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    AlignedBuffer data_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace des
