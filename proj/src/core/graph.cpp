#include "des/core/graph.hpp"

#include "des/core/error.hpp"

namespace des {

const Tensor& Var::value() const { return graph_->value(id_); }
bool Var::requires_grad() const { return graph_->requires_grad(id_); }

const Tensor& BackwardContext::input(std::size_t i) const {
    return graph_.nodes_[graph_.nodes_[node_].inputs.at(i)].value;
}

const Tensor& BackwardContext::output() const { return graph_.nodes_[node_].value; }

const Tensor& BackwardContext::grad_output() const { return *graph_.nodes_[node_].grad; }

Tensor* BackwardContext::grad_input(std::size_t i) { return grad_inputs_.at(i); }

Var Graph::constant(Tensor value, std::string name) {
    nodes_.push_back(Node{std::move(name), std::move(value), {}, {}, false, std::nullopt});
    return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value, std::string name) {
    nodes_.push_back(Node{std::move(name), std::move(value), {}, {}, true, std::nullopt});
    return Var(this, nodes_.size() - 1);
}

Var Graph::param(const Parameter& p) {
    if (!grad_enabled_) return constant(p.value, p.name);
    Var v = leaf(p.value, p.name);
    param_nodes_[&p].push_back(v.id());
    return v;
}

Var Graph::record(std::string op, Tensor value, std::vector<Var> inputs, BackwardFn fn) {
    Node node;
    node.op = std::move(op);
    node.value = std::move(value);
    node.inputs.reserve(inputs.size());
    for (const Var& in : inputs) {
        if (&in.graph() != this) throw InvalidInput("op '" + node.op + "' mixes variables from different graphs");
        node.inputs.push_back(in.id());
        node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
    }
    if (!fn) node.requires_grad = false;
    node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

void Graph::backward(Var loss) {
    if (&loss.graph() != this) throw InvalidInput("backward: loss belongs to another graph");
    const std::size_t root = loss.id();
    if (nodes_[root].value.size() != 1) {
        throw InvalidInput("backward: loss must be scalar, got " + shape_str(nodes_[root].value.shape()));
    }
    for (Node& n : nodes_) n.grad.reset();
    nodes_[root].grad = Tensor(nodes_[root].value.shape(), 1.0);

    for (std::size_t id = root + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.grad || !node.backward || !node.requires_grad) continue;
        BackwardContext ctx(*this, id);
        ctx.grad_inputs_.reserve(node.inputs.size());
        for (std::size_t in : node.inputs) {
            Node& src = nodes_[in];
            if (!src.requires_grad) {
                ctx.grad_inputs_.push_back(nullptr);
                continue;
            }
            if (!src.grad) src.grad = Tensor(src.value.shape(), 0.0);
            ctx.grad_inputs_.push_back(&*src.grad);
        }
        node.backward(ctx);
    }
}

Tensor Graph::grad(Var v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad) return *n.grad;
    return Tensor(n.value.shape(), 0.0);
}

Tensor Graph::param_grad(const Parameter& p) const {
    Tensor total(p.value.shape(), 0.0);
    auto it = param_nodes_.find(&p);
    if (it == param_nodes_.end()) return total;
    for (std::size_t id : it->second) {
        if (nodes_[id].grad) total += *nodes_[id].grad;
    }
    return total;
}

std::optional<std::size_t> Graph::first_non_finite() const {
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (!nodes_[id].value.all_finite()) return id;
    }
    return std::nullopt;
}

}  // namespace des
