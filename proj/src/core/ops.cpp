#include "des/core/ops.hpp"

#include <algorithm>
#include <memory>

#include "des/core/error.hpp"

namespace des {

namespace {

bool is_channel_broadcast(const Shape& a, const Shape& b) {
    return a.size() == 3 && b.size() == 3 && b[0] == a[0] && b[1] == 1 && b[2] == 1;
}

void check_mul_shapes(const Shape& a, const Shape& b) {
    if (a == b || is_channel_broadcast(a, b)) return;
    throw InvalidInput("elementwise_mul: cannot broadcast " + shape_str(b) + " against " + shape_str(a));
}

Tensor mul_kernel(const Tensor& a, const Tensor& b) {
    check_mul_shapes(a.shape(), b.shape());
    Tensor out(a.shape());
    if (a.shape() == b.shape()) {
        for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
        return out;
    }
    const std::size_t plane = a.dim(1) * a.dim(2);
    for (std::size_t c = 0; c < a.dim(0); ++c) {
        const double s = b[c];
        const double* src = a.raw() + c * plane;
        double* dst = out.raw() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * s;
    }
    return out;
}

struct ReducePlan {
    Shape out_shape;
    std::size_t count = 1;  // elements folded into each output
    std::vector<std::size_t> out_index;  // input flat index -> output flat index
};

ReducePlan plan_reduce(const Shape& in, const std::vector<std::size_t>& axes) {
    ReducePlan plan;
    plan.out_shape = in;
    std::vector<bool> reduced(in.size(), false);
    for (std::size_t ax : axes) {
        if (ax >= in.size()) {
            throw InvalidInput("reduce: axis " + std::to_string(ax) + " invalid for shape " + shape_str(in));
        }
        if (reduced[ax]) throw InvalidInput("reduce: axis " + std::to_string(ax) + " listed twice");
        reduced[ax] = true;
        plan.count *= in[ax];
        plan.out_shape[ax] = 1;
    }
    if (axes.empty()) throw InvalidInput("reduce: empty reduction extent (no axes)");

    const std::size_t n = shape_numel(in);
    plan.out_index.resize(n);
    std::vector<std::size_t> idx(in.size(), 0);
    for (std::size_t flat = 0; flat < n; ++flat) {
        std::size_t o = 0;
        for (std::size_t d = 0; d < in.size(); ++d) {
            o = o * plan.out_shape[d] + (reduced[d] ? 0 : idx[d]);
        }
        plan.out_index[flat] = o;
        for (std::size_t d = in.size(); d-- > 0;) {
            if (++idx[d] < in[d]) break;
            idx[d] = 0;
        }
    }
    return plan;
}

Tensor reduce_kernel(const Tensor& x, const ReducePlan& plan, double factor) {
    Tensor out(plan.out_shape, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) out[plan.out_index[i]] += x[i];
    if (factor != 1.0) {
        for (double& v : out.data()) v *= factor;
    }
    return out;
}

Var reduce_impl(Var x, const std::vector<std::size_t>& axes, bool mean) {
    auto plan = std::make_shared<ReducePlan>(plan_reduce(x.shape(), axes));
    const double factor = mean ? 1.0 / static_cast<double>(plan->count) : 1.0;
    Tensor out = reduce_kernel(x.value(), *plan, factor);
    return x.graph().record(mean ? "reduce_mean" : "reduce_sum", std::move(out), {x},
                            [plan, factor](BackwardContext& ctx) {
                                Tensor* gx = ctx.grad_input(0);
                                if (!gx) return;
                                const Tensor& go = ctx.grad_output();
                                for (std::size_t i = 0; i < gx->size(); ++i) {
                                    (*gx)[i] += go[plan->out_index[i]] * factor;
                                }
                            });
}

}  // namespace

Tensor elementwise_mul(const Tensor& a, const Tensor& b) { return mul_kernel(a, b); }

Var elementwise_mul(Var a, Var b) {
    Tensor out = mul_kernel(a.value(), b.value());
    return a.graph().record("elementwise_mul", std::move(out), {a, b}, [](BackwardContext& ctx) {
        const Tensor& av = ctx.input(0);
        const Tensor& bv = ctx.input(1);
        const Tensor& go = ctx.grad_output();
        if (Tensor* ga = ctx.grad_input(0)) {
            Tensor t = mul_kernel(go, bv);
            *ga += t;
        }
        if (Tensor* gb = ctx.grad_input(1)) {
            if (av.shape() == bv.shape()) {
                for (std::size_t i = 0; i < go.size(); ++i) (*gb)[i] += go[i] * av[i];
            } else {
                const std::size_t plane = av.dim(1) * av.dim(2);
                for (std::size_t c = 0; c < av.dim(0); ++c) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < plane; ++i) acc += go[c * plane + i] * av[c * plane + i];
                    (*gb)[c] += acc;
                }
            }
        }
    });
}

Var add(Var a, Var b) {
    if (a.shape() != b.shape()) {
        throw InvalidInput("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    Tensor out = a.value();
    out += b.value();
    return a.graph().record("add", std::move(out), {a, b}, [](BackwardContext& ctx) {
        for (std::size_t i = 0; i < 2; ++i) {
            if (Tensor* g = ctx.grad_input(i)) *g += ctx.grad_output();
        }
    });
}

Var scale(Var x, double factor) {
    Tensor out = x.value();
    for (double& v : out.data()) v *= factor;
    return x.graph().record("scale", std::move(out), {x}, [factor](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const Tensor& go = ctx.grad_output();
            for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += go[i] * factor;
        }
    });
}

Tensor reduce_mean(const Tensor& x, const std::vector<std::size_t>& axes) {
    ReducePlan plan = plan_reduce(x.shape(), axes);
    return reduce_kernel(x, plan, 1.0 / static_cast<double>(plan.count));
}

Tensor reduce_sum(const Tensor& x, const std::vector<std::size_t>& axes) {
    return reduce_kernel(x, plan_reduce(x.shape(), axes), 1.0);
}

Var reduce_mean(Var x, const std::vector<std::size_t>& axes) { return reduce_impl(x, axes, true); }
Var reduce_sum(Var x, const std::vector<std::size_t>& axes) { return reduce_impl(x, axes, false); }

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data()) s += v;
    return x.graph().record("sum", Tensor::scalar(s), {x}, [](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const double go = ctx.grad_output()[0];
            for (double& v : g->data()) v += go;
        }
    });
}

Var reshape(Var x, Shape shape) {
    Tensor out = x.value().reshaped(std::move(shape));
    return x.graph().record("reshape", std::move(out), {x}, [](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const Tensor& go = ctx.grad_output();
            for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += go[i];
        }
    });
}

}  // namespace des
