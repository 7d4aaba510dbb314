#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "des/core/graph.hpp"

namespace des {

/// Builds a scalar loss from differentiable leaves bound to the inputs.
using ScalarFn = std::function<Var(Graph&, const std::vector<Var>&)>;

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t worst_input = 0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t coords_checked = 0;
};

struct GradCheckOptions {
    double eps = 1e-5;
    /// Coordinates sampled per input; 0 checks every coordinate.
    std::size_t max_coords = 0;
    std::uint64_t seed = 0;
};

/// Central differences against the tape gradient. The error at a coordinate is
/// |analytic - numeric| / max(1, |numeric|); the maximum is returned.
/// Throws NumericError naming the coordinate when f is non-finite there.
GradCheckResult finite_difference_check(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                        const GradCheckOptions& opts = {});

double finite_difference_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double eps);

/// Same check over Parameters that `f` binds with Graph::param. Values are
/// perturbed in place and restored before returning.
GradCheckResult finite_difference_check(const std::function<Var(Graph&)>& f, const std::vector<Parameter*>& params,
                                        const GradCheckOptions& opts = {});

}  // namespace des
