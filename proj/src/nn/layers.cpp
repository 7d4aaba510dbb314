#include "des/nn/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "des/core/error.hpp"

namespace des::nn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

void check_conv_inputs(const Shape& x, const Shape& w, const Shape& b, const ConvSpec& spec) {
    if (x.size() != 3) throw InvalidInput("conv2d: input must be C x H x W, got " + shape_str(x));
    if (x[0] != spec.in_channels) {
        throw InvalidInput("conv2d: input has " + std::to_string(x[0]) + " channels, spec expects " +
                           std::to_string(spec.in_channels));
    }
    if (w != spec.weight_shape()) {
        throw InvalidInput("conv2d: weight shape " + shape_str(w) + " != " + shape_str(spec.weight_shape()));
    }
    if (b != spec.bias_shape()) throw InvalidInput("conv2d: bias shape " + shape_str(b));
}

struct ConvGeometry {
    std::size_t c, h, w, ho, wo, k, s, p, d;
    std::size_t rows() const { return c * k * k; }
    std::size_t cols() const { return ho * wo; }
};

ConvGeometry geometry(const Shape& x, const ConvSpec& spec) {
    return {x[0], x[1], x[2], spec.output_extent(x[1]), spec.output_extent(x[2]),
            spec.kernel, spec.stride, spec.padding, spec.dilation};
}

// cols[(c*k + i)*k + j, oh*wo + ow] = x[c, oh*s - p + i*d, ow*s - p + j*d] (0 outside).
void im2col(const double* x, const ConvGeometry& g, double* cols) {
    const auto H = static_cast<long>(g.h);
    const auto W = static_cast<long>(g.w);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c) {
        const double* plane = x + c * g.h * g.w;
        for (std::size_t i = 0; i < g.k; ++i) {
            for (std::size_t j = 0; j < g.k; ++j, ++row) {
                double* dst = cols + row * g.cols();
                for (std::size_t oh = 0; oh < g.ho; ++oh) {
                    const long ih = static_cast<long>(oh * g.s + i * g.d) - static_cast<long>(g.p);
                    double* line = dst + oh * g.wo;
                    if (ih < 0 || ih >= H) {
                        std::fill(line, line + g.wo, 0.0);
                        continue;
                    }
                    const double* src = plane + ih * W;
                    for (std::size_t ow = 0; ow < g.wo; ++ow) {
                        const long iw = static_cast<long>(ow * g.s + j * g.d) - static_cast<long>(g.p);
                        line[ow] = (iw < 0 || iw >= W) ? 0.0 : src[iw];
                    }
                }
            }
        }
    }
}

void col2im_add(const double* cols, const ConvGeometry& g, double* dx) {
    const auto H = static_cast<long>(g.h);
    const auto W = static_cast<long>(g.w);
    std::size_t row = 0;
    for (std::size_t c = 0; c < g.c; ++c) {
        double* plane = dx + c * g.h * g.w;
        for (std::size_t i = 0; i < g.k; ++i) {
            for (std::size_t j = 0; j < g.k; ++j, ++row) {
                const double* src = cols + row * g.cols();
                for (std::size_t oh = 0; oh < g.ho; ++oh) {
                    const long ih = static_cast<long>(oh * g.s + i * g.d) - static_cast<long>(g.p);
                    if (ih < 0 || ih >= H) continue;
                    double* line = plane + ih * W;
                    for (std::size_t ow = 0; ow < g.wo; ++ow) {
                        const long iw = static_cast<long>(ow * g.s + j * g.d) - static_cast<long>(g.p);
                        if (iw >= 0 && iw < W) line[iw] += src[oh * g.wo + ow];
                    }
                }
            }
        }
    }
}

Tensor conv_forward(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvGeometry& g,
                    const AlignedBuffer& cols, std::size_t out_channels) {
    Tensor out({out_channels, g.ho, g.wo});
    MatMap o(out.raw(), static_cast<long>(out_channels), static_cast<long>(g.cols()));
    ConstMatMap wm(weight.raw(), static_cast<long>(out_channels), static_cast<long>(g.rows()));
    ConstMatMap cm(cols.data(), static_cast<long>(g.rows()), static_cast<long>(g.cols()));
    o.noalias() = wm * cm;
    o.colwise() += ConstVecMap(bias.raw(), static_cast<long>(out_channels));
    (void)x;
    return out;
}

}  // namespace

std::size_t ConvSpec::output_extent(std::size_t n) const {
    if (kernel == 0 || stride == 0 || dilation == 0) throw InvalidInput("conv spec: kernel/stride/dilation must be positive");
    const long span = static_cast<long>(dilation * (kernel - 1) + 1);
    const long padded = static_cast<long>(n + 2 * padding);
    if (padded < span) {
        throw InvalidInput("conv spec: degenerate output extent for input extent " + std::to_string(n));
    }
    return static_cast<std::size_t>((padded - span) / static_cast<long>(stride)) + 1;
}

ConvSpec same_conv3(std::size_t in, std::size_t out, std::size_t dilation) {
    return ConvSpec{in, out, 3, 1, dilation, dilation};
}

ConvSpec conv1x1(std::size_t in, std::size_t out) { return ConvSpec{in, out, 1, 1, 0, 1}; }

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, const ConvSpec& spec) {
    check_conv_inputs(x.shape(), weight.shape(), bias.shape(), spec);
    const ConvGeometry g = geometry(x.shape(), spec);
    AlignedBuffer cols(g.rows() * g.cols());
    im2col(x.raw(), g, cols.data());
    return conv_forward(x, weight, bias, g, cols, spec.out_channels);
}

Var conv2d(Var x, Var weight, Var bias, const ConvSpec& spec) {
    check_conv_inputs(x.shape(), weight.shape(), bias.shape(), spec);
    const ConvGeometry g = geometry(x.shape(), spec);
    auto cols = std::make_shared<AlignedBuffer>(g.rows() * g.cols());
    im2col(x.value().raw(), g, cols->data());
    Tensor out = conv_forward(x.value(), weight.value(), bias.value(), g, *cols, spec.out_channels);
    const std::size_t oc = spec.out_channels;
    if (!x.requires_grad() && !weight.requires_grad() && !bias.requires_grad()) {
        return x.graph().record("conv2d", std::move(out), {x, weight, bias}, {});
    }

    return x.graph().record("conv2d", std::move(out), {x, weight, bias}, [g, cols, oc](BackwardContext& ctx) {
        const auto O = static_cast<long>(oc);
        const auto R = static_cast<long>(g.rows());
        const auto P = static_cast<long>(g.cols());
        ConstMatMap go(ctx.grad_output().raw(), O, P);
        if (Tensor* gw = ctx.grad_input(1)) {
            MatMap(gw->raw(), O, R).noalias() += go * ConstMatMap(cols->data(), R, P).transpose();
        }
        if (Tensor* gb = ctx.grad_input(2)) {
            Eigen::Map<Eigen::VectorXd>(gb->raw(), O) += go.rowwise().sum();
        }
        if (Tensor* gx = ctx.grad_input(0)) {
            AlignedBuffer dcols(g.rows() * g.cols());
            MatMap(dcols.data(), R, P).noalias() = ConstMatMap(ctx.input(1).raw(), O, R).transpose() * go;
            col2im_add(dcols.data(), g, gx->raw());
        }
    });
}

Var linear(Var x, Var weight, Var bias) {
    const Shape& ws = weight.shape();
    if (ws.size() != 2) throw InvalidInput("linear: weight must be out x in, got " + shape_str(ws));
    const std::size_t out_dim = ws[0], in_dim = ws[1];
    if (x.value().size() != in_dim) {
        throw InvalidInput("linear: input has " + std::to_string(x.value().size()) + " elements, weight expects " +
                           std::to_string(in_dim));
    }
    if (bias.shape() != Shape{out_dim}) throw InvalidInput("linear: bias shape " + shape_str(bias.shape()));
    Shape out_shape = x.shape().size() == 3 ? Shape{out_dim, 1, 1} : Shape{out_dim};
    if (x.shape().size() != 3 && x.shape().size() != 1) {
        throw InvalidInput("linear: input must be a vector or C x 1 x 1, got " + shape_str(x.shape()));
    }
    Tensor out(out_shape);
    const Tensor& w = weight.value();
    const Tensor& xv = x.value();
    for (std::size_t o = 0; o < out_dim; ++o) {
        double acc = bias.value()[o];
        for (std::size_t i = 0; i < in_dim; ++i) acc += w[o * in_dim + i] * xv[i];
        out[o] = acc;
    }
    return x.graph().record("linear", std::move(out), {x, weight, bias}, [out_dim, in_dim](BackwardContext& ctx) {
        const Tensor& go = ctx.grad_output();
        const Tensor& xv = ctx.input(0);
        const Tensor& w = ctx.input(1);
        if (Tensor* gx = ctx.grad_input(0)) {
            for (std::size_t o = 0; o < out_dim; ++o) {
                for (std::size_t i = 0; i < in_dim; ++i) (*gx)[i] += w[o * in_dim + i] * go[o];
            }
        }
        if (Tensor* gw = ctx.grad_input(1)) {
            for (std::size_t o = 0; o < out_dim; ++o) {
                for (std::size_t i = 0; i < in_dim; ++i) (*gw)[o * in_dim + i] += go[o] * xv[i];
            }
        }
        if (Tensor* gb = ctx.grad_input(2)) {
            for (std::size_t o = 0; o < out_dim; ++o) (*gb)[o] += go[o];
        }
    });
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.data()) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Var relu(Var x) {
    return x.graph().record("relu", relu(x.value()), {x}, [](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const Tensor& xv = ctx.input(0);
            const Tensor& go = ctx.grad_output();
            for (std::size_t i = 0; i < go.size(); ++i) {
                if (xv[i] > 0.0) (*g)[i] += go[i];
            }
        }
    });
}

Var sigmoid(Var x) {
    return x.graph().record("sigmoid", sigmoid(x.value()), {x}, [](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const Tensor& y = ctx.output();
            const Tensor& go = ctx.grad_output();
            for (std::size_t i = 0; i < go.size(); ++i) (*g)[i] += go[i] * y[i] * (1.0 - y[i]);
        }
    });
}

Tensor softmax_channels(const Tensor& x) {
    if (x.rank() != 3 || x.dim(0) < 2) {
        throw InvalidInput("softmax_channels: need C x H x W with C >= 2, got " + shape_str(x.shape()));
    }
    const std::size_t C = x.dim(0), plane = x.dim(1) * x.dim(2);
    Tensor out(x.shape());
    for (std::size_t p = 0; p < plane; ++p) {
        double m = x[p];
        for (std::size_t c = 1; c < C; ++c) m = std::max(m, x[c * plane + p]);
        double z = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
            const double e = std::exp(x[c * plane + p] - m);
            out[c * plane + p] = e;
            z += e;
        }
        for (std::size_t c = 0; c < C; ++c) out[c * plane + p] /= z;
    }
    return out;
}

Var softmax_channels(Var x) {
    return x.graph().record("softmax_channels", softmax_channels(x.value()), {x}, [](BackwardContext& ctx) {
        Tensor* g = ctx.grad_input(0);
        if (!g) return;
        const Tensor& y = ctx.output();
        const Tensor& go = ctx.grad_output();
        const std::size_t C = y.dim(0), plane = y.dim(1) * y.dim(2);
        for (std::size_t p = 0; p < plane; ++p) {
            double dot = 0.0;
            for (std::size_t c = 0; c < C; ++c) dot += go[c * plane + p] * y[c * plane + p];
            for (std::size_t c = 0; c < C; ++c) {
                (*g)[c * plane + p] += y[c * plane + p] * (go[c * plane + p] - dot);
            }
        }
    });
}

namespace {

// Returns the pooled map and, per output element, the flat input index of the
// chosen maximum (first in row-major window order on ties).
std::pair<Tensor, std::vector<std::size_t>> maxpool_kernel(const Tensor& x) {
    if (x.rank() != 3) throw InvalidInput("maxpool2: input must be C x H x W");
    const std::size_t C = x.dim(0), H = x.dim(1), W = x.dim(2);
    if (H % 2 || W % 2) throw InvalidInput("maxpool2: odd spatial extent " + shape_str(x.shape()));
    const std::size_t Ho = H / 2, Wo = W / 2;
    Tensor out({C, Ho, Wo});
    std::vector<std::size_t> arg(out.size());
    for (std::size_t c = 0; c < C; ++c) {
        for (std::size_t h = 0; h < Ho; ++h) {
            for (std::size_t w = 0; w < Wo; ++w) {
                std::size_t best = (c * H + 2 * h) * W + 2 * w;
                for (std::size_t dh = 0; dh < 2; ++dh) {
                    for (std::size_t dw = 0; dw < 2; ++dw) {
                        const std::size_t idx = (c * H + 2 * h + dh) * W + 2 * w + dw;
                        if (x[idx] > x[best]) best = idx;
                    }
                }
                const std::size_t o = (c * Ho + h) * Wo + w;
                out[o] = x[best];
                arg[o] = best;
            }
        }
    }
    return {std::move(out), std::move(arg)};
}

}  // namespace

Tensor maxpool2(const Tensor& x) { return maxpool_kernel(x).first; }

Var maxpool2(Var x) {
    auto [out, arg] = maxpool_kernel(x.value());
    auto argmax = std::make_shared<std::vector<std::size_t>>(std::move(arg));
    return x.graph().record("maxpool2", std::move(out), {x}, [argmax](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const Tensor& go = ctx.grad_output();
            for (std::size_t o = 0; o < go.size(); ++o) (*g)[(*argmax)[o]] += go[o];
        }
    });
}

double smooth_l1(const Tensor& pred, const Tensor& target) {
    if (pred.shape() != target.shape()) {
        throw InvalidInput("smooth_l1: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        total += std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
    }
    return total;
}

Var smooth_l1(Var pred, const Tensor& target) {
    const double loss = smooth_l1(pred.value(), target);
    auto tgt = std::make_shared<Tensor>(target);
    return pred.graph().record("smooth_l1", Tensor::scalar(loss), {pred}, [tgt](BackwardContext& ctx) {
        Tensor* g = ctx.grad_input(0);
        if (!g) return;
        const Tensor& p = ctx.input(0);
        const double go = ctx.grad_output()[0];
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double d = p[i] - (*tgt)[i];
            (*g)[i] += go * (std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0));
        }
    });
}

Var gather_rows(Var x, std::span<const std::size_t> rows) {
    const Shape& s = x.shape();
    if (s.size() != 2) throw InvalidInput("gather_rows: input must be M x D, got " + shape_str(s));
    const std::size_t D = s[1];
    if (rows.empty()) throw InvalidInput("gather_rows: empty row selection");
    auto idx = std::make_shared<std::vector<std::size_t>>(rows.begin(), rows.end());
    Tensor out({idx->size(), D});
    for (std::size_t r = 0; r < idx->size(); ++r) {
        if ((*idx)[r] >= s[0]) throw InvalidInput("gather_rows: row index out of range");
        std::copy_n(x.value().raw() + (*idx)[r] * D, D, out.raw() + r * D);
    }
    return x.graph().record("gather_rows", std::move(out), {x}, [idx, D](BackwardContext& ctx) {
        if (Tensor* g = ctx.grad_input(0)) {
            const Tensor& go = ctx.grad_output();
            for (std::size_t r = 0; r < idx->size(); ++r) {
                for (std::size_t d = 0; d < D; ++d) (*g)[(*idx)[r] * D + d] += go[r * D + d];
            }
        }
    });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const Shape& s = logits.shape();
    if (s.size() != 2) throw InvalidInput("softmax_cross_entropy: logits must be M x K, got " + shape_str(s));
    const std::size_t M = s[0], K = s[1];
    if (labels.size() != M) throw InvalidInput("softmax_cross_entropy: label count != row count");
    auto lab = std::make_shared<std::vector<int>>(labels.begin(), labels.end());
    for (int l : *lab) {
        if (l >= static_cast<int>(K)) throw InvalidInput("softmax_cross_entropy: label " + std::to_string(l) + " out of range");
    }
    const Tensor& x = logits.value();
    double total = 0.0;
    for (std::size_t r = 0; r < M; ++r) {
        if ((*lab)[r] < 0) continue;
        const double* row = x.raw() + r * K;
        const double m = *std::max_element(row, row + K);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
        total += m + std::log(z) - row[(*lab)[r]];
    }
    return logits.graph().record("softmax_cross_entropy", Tensor::scalar(total), {logits},
                                 [lab, M, K](BackwardContext& ctx) {
                                     Tensor* g = ctx.grad_input(0);
                                     if (!g) return;
                                     const Tensor& x = ctx.input(0);
                                     const double go = ctx.grad_output()[0];
                                     for (std::size_t r = 0; r < M; ++r) {
                                         const int label = (*lab)[r];
                                         if (label < 0) continue;
                                         const double* row = x.raw() + r * K;
                                         const double m = *std::max_element(row, row + K);
                                         double z = 0.0;
                                         for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
                                         for (std::size_t k = 0; k < K; ++k) {
                                             const double p = std::exp(row[k] - m) / z;
                                             (*g)[r * K + k] += go * (p - (static_cast<int>(k) == label ? 1.0 : 0.0));
                                         }
                                     }
                                 });
}

void xavier_uniform(Tensor& w, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data()) v = rng.uniform(-limit, limit);
}

}  // namespace des::nn
