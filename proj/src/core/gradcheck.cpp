#include "des/core/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "des/core/error.hpp"

namespace des {

namespace {

double evaluate(const ScalarFn& f, const std::vector<Tensor>& inputs) {
    Graph g;
    std::vector<Var> leaves;
    leaves.reserve(inputs.size());
    for (const Tensor& t : inputs) leaves.push_back(g.leaf(t));
    return f(g, leaves).value().item();
}

}  // namespace

GradCheckResult finite_difference_check(const ScalarFn& f, const std::vector<Tensor>& inputs,
                                        const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw InvalidInput("finite_difference_check: eps must be positive");

    Graph g;
    std::vector<Var> leaves;
    for (const Tensor& t : inputs) leaves.push_back(g.leaf(t));
    Var loss = f(g, leaves);
    if (!std::isfinite(loss.value().item())) throw NumericError("finite_difference_check: f is non-finite at x");
    g.backward(loss);

    GradCheckResult result;
    std::mt19937_64 rng(opts.seed);
    std::vector<Tensor> probe = inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor analytic = g.grad(leaves[k]);
        std::vector<std::size_t> coords(inputs[k].size());
        std::iota(coords.begin(), coords.end(), 0);
        if (opts.max_coords && opts.max_coords < coords.size()) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_coords);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            const double x0 = inputs[k][i];
            probe[k][i] = x0 + opts.eps;
            const double fp = evaluate(f, probe);
            probe[k][i] = x0 - opts.eps;
            const double fm = evaluate(f, probe);
            probe[k][i] = x0;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw NumericError("finite_difference_check: f is non-finite when perturbing input " +
                                   std::to_string(k) + " coordinate " + std::to_string(i));
            }
            const double numeric = (fp - fm) / (2.0 * opts.eps);
            const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
            ++result.coords_checked;
            if (err >= result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_input = k;
                result.worst_index = i;
                result.analytic = analytic[i];
                result.numeric = numeric;
            }
        }
    }
    return result;
}

double finite_difference_check(const std::function<Var(Graph&, Var)>& f, const Tensor& x, double eps) {
    ScalarFn wrapped = [&f](Graph& g, const std::vector<Var>& v) { return f(g, v[0]); };
    GradCheckOptions opts;
    opts.eps = eps;
    return finite_difference_check(wrapped, {x}, opts).max_rel_error;
}

GradCheckResult finite_difference_check(const std::function<Var(Graph&)>& f, const std::vector<Parameter*>& params,
                                        const GradCheckOptions& opts) {
    if (!(opts.eps > 0.0)) throw InvalidInput("finite_difference_check: eps must be positive");
    auto eval = [&f] {
        Graph g(false);
        return f(g).value().item();
    };

    std::vector<Tensor> analytic;
    {
        Graph g;
        Var loss = f(g);
        if (!std::isfinite(loss.value().item())) throw NumericError("finite_difference_check: f is non-finite at x");
        g.backward(loss);
        for (const Parameter* p : params) analytic.push_back(g.param_grad(*p));
    }

    GradCheckResult result;
    std::mt19937_64 rng(opts.seed);
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& value = params[k]->value;
        std::vector<std::size_t> coords(value.size());
        std::iota(coords.begin(), coords.end(), 0);
        if (opts.max_coords && opts.max_coords < coords.size()) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_coords);
            std::sort(coords.begin(), coords.end());
        }
        for (std::size_t i : coords) {
            const double x0 = value[i];
            value[i] = x0 + opts.eps;
            const double fp = eval();
            value[i] = x0 - opts.eps;
            const double fm = eval();
            value[i] = x0;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw NumericError("finite_difference_check: f is non-finite when perturbing " + params[k]->name +
                                   " coordinate " + std::to_string(i));
            }
            const double numeric = (fp - fm) / (2.0 * opts.eps);
            const double err = std::abs(analytic[k][i] - numeric) / std::max(1.0, std::abs(numeric));
            ++result.coords_checked;
            if (err >= result.max_rel_error) {
                result.max_rel_error = err;
                result.worst_input = k;
                result.worst_index = i;
                result.analytic = analytic[k][i];
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace des
