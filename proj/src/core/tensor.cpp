#include "des/core/tensor.hpp"

#include <cassert>
#include <cmath>
#include <sstream>

#include "des/core/error.hpp"

namespace des {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
void check_extents(const Shape& shape) {
    if (shape.empty()) throw InvalidInput("tensor rank must be at least 1");
    for (std::size_t e : shape) {
        if (e == 0) throw InvalidInput("tensor extents must be positive, got " + shape_str(shape));
    }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, const std::vector<double>& data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    check_extents(shape_);
    if (shape_numel(shape_) != data_.size()) {
        throw InvalidInput("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_str(shape_));
    }
}

Tensor Tensor::from(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

double& Tensor::at(std::size_t c, std::size_t h, std::size_t w) noexcept {
    assert(shape_.size() == 3);
    return data_[(c * shape_[1] + h) * shape_[2] + w];
}

double Tensor::at(std::size_t c, std::size_t h, std::size_t w) const noexcept {
    assert(shape_.size() == 3);
    return data_[(c * shape_[1] + h) * shape_[2] + w];
}

double Tensor::item() const {
    if (data_.size() != 1) throw InvalidInput("item() on non-scalar tensor " + shape_str(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
        throw InvalidInput("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
    }
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = data_;
    return t;
}

void Tensor::fill(double v) noexcept {
    std::fill(data_.begin(), data_.end(), v);
}

Tensor& Tensor::operator+=(const Tensor& other) {
    if (other.shape_ != shape_) {
        throw InvalidInput("cannot accumulate " + shape_str(other.shape_) + " into " + shape_str(shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw InvalidInput("max_abs_diff shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace des
