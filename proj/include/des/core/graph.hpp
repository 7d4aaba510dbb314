#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "des/core/tensor.hpp"

namespace des {

/// A named trainable tensor. Lives outside any Graph; a Graph refers to it
/// through a leaf node for the duration of one forward/backward pass.
struct Parameter {
    std::string name;
    Tensor value;
};

class Graph;

/// Handle to a node in a Graph. Cheap to copy; valid while its Graph lives.
class Var {
public:
    Var() = default;
    Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

    Graph& graph() const { return *graph_; }
    std::size_t id() const noexcept { return id_; }
    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
    bool requires_grad() const;

private:
    Graph* graph_ = nullptr;
    std::size_t id_ = 0;
};

/// What a node's backward function sees. Input gradients are allocated
/// (zero-filled) only for inputs that require a gradient; others are null.
class BackwardContext {
public:
    BackwardContext(const Graph& g, std::size_t node) : graph_(g), node_(node) {}

    const Tensor& input(std::size_t i) const;
    const Tensor& output() const;
    const Tensor& grad_output() const;
    Tensor* grad_input(std::size_t i);

private:
    friend class Graph;
    const Graph& graph_;
    std::size_t node_;
    std::vector<Tensor*> grad_inputs_;
};

using BackwardFn = std::function<void(BackwardContext&)>;

/// Tape for reverse-mode differentiation. Nodes are appended in evaluation
/// order, so node ids are already a topological order; backward walks them in
/// reverse and accumulates gradients on fan-out.
class Graph {
public:
    /// With gradients disabled, parameters enter as constants and ops keep no
    /// backward state (inference mode).
    explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var constant(Tensor value, std::string name = "input");
    /// Differentiable leaf not tied to a Parameter (used by gradient checks).
    Var leaf(Tensor value, std::string name = "leaf");
    Var param(const Parameter& p);

    /// Records an op. `fn` may be empty for ops that are not differentiable.
    Var record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn fn);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }
    bool grad_enabled() const noexcept { return grad_enabled_; }

    /// Seeds d(loss)/d(loss) = 1 and propagates. Throws InvalidInput for a
    /// non-scalar loss.
    void backward(Var loss);

    /// Gradient of the last backward pass w.r.t. a node; zeros if unreached.
    Tensor grad(Var v) const;
    /// Summed gradient over every leaf bound to `p`; zeros if `p` is
    /// unreachable or absent from this graph.
    Tensor param_grad(const Parameter& p) const;

    /// First node (in evaluation order) whose value holds a NaN/Inf.
    std::optional<std::size_t> first_non_finite() const;

private:
    friend class BackwardContext;

    struct Node {
        std::string op;
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        std::optional<Tensor> grad;
    };

    bool grad_enabled_ = true;
    std::vector<Node> nodes_;
    std::unordered_map<const Parameter*, std::vector<std::size_t>> param_nodes_;
};

}  // namespace des
