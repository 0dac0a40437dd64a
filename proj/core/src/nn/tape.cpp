#include "streamvae/nn/tape.hpp"

#include <string>

#include "streamvae/errors.hpp"

namespace streamvae::nn {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, requires_grad});
    return Var(this, id);
}

Var Tape::push(std::string_view op, Tensor value, bool requires_grad, BackwardFn backward) {
    if (!value.all_finite()) {
        throw NumericalError("non-finite value produced by op '" + std::string(op) + "' with shape " +
                             shape_str(value.shape()));
    }
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad ? std::move(backward) : nullptr,
                          requires_grad});
    return Var(this, id);
}

Tensor& Tape::grad_buffer(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor(n.value.shape(), 0.0);
    return n.grad;
}

void Tape::backward(Var root, double seed) {
    if (root.value().size() != 1) {
        throw ShapeError("backward root must hold a single element, got " + shape_str(root.shape()));
    }
    grad_buffer(root.id())[0] += seed;
    for (std::int64_t i = root.id(); i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.backward && !n.grad.empty()) n.backward(*this, n.grad);
    }
}

}  // namespace streamvae::nn
