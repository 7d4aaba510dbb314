#pragma once

#include <vector>

#include "des/core/graph.hpp"

namespace des {

/// out = a * b. `b` must have a's shape, or be C x 1 x 1 against a C x H x W
/// `a` (per-channel broadcast). Output has a's shape.
Var elementwise_mul(Var a, Var b);
Var add(Var a, Var b);
Var scale(Var x, double factor);

/// Mean over `axes`, keeping reduced axes with extent 1 so the result
/// broadcasts back against the input (C x H x W over {1,2} gives C x 1 x 1).
Var reduce_mean(Var x, const std::vector<std::size_t>& axes);
Var reduce_sum(Var x, const std::vector<std::size_t>& axes);
/// Sum of every element, as a scalar.
Var sum(Var x);
Var reshape(Var x, Shape shape);

// Eager versions on plain tensors, sharing the kernels above.
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
Tensor reduce_mean(const Tensor& x, const std::vector<std::size_t>& axes);
Tensor reduce_sum(const Tensor& x, const std::vector<std::size_t>& axes);

}  // namespace des
