#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "streamvae/nn/tensor.hpp"

namespace streamvae::nn {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t id) noexcept : tape_(tape), id_(id) {}

    [[nodiscard]] const Tensor& value() const;
    [[nodiscard]] const Tensor& grad() const;
    [[nodiscard]] const Shape& shape() const { return value().shape(); }
    [[nodiscard]] bool requires_grad() const;
    [[nodiscard]] Tape& tape() const noexcept { return *tape_; }
    [[nodiscard]] std::uint32_t id() const noexcept { return id_; }
    [[nodiscard]] bool valid() const noexcept { return tape_ != nullptr; }

private:
    Tape* tape_ = nullptr;
    std::uint32_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in topological order as operations
/// execute, so backward is a single reverse sweep.
///
/// A node records a backward closure only when at least one input requires a
/// gradient; graphs built from constant parameters (inference) carry no
/// closures at all.
class Tape {
public:
    /// Receives the node's accumulated output gradient and must add into the
    /// gradients of its inputs via `accumulate`.
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var leaf(Tensor value, bool requires_grad);
    Var constant(Tensor value) { return leaf(std::move(value), false); }

    /// Appends an op output. Throws NumericalError naming `op` when the value
    /// has a non-finite entry.
    Var push(std::string_view op, Tensor value, bool requires_grad, BackwardFn backward);

    /// Seeds d(root)/d(root) = seed (root must hold one element) and sweeps.
    void backward(Var root, double seed = 1.0);

    [[nodiscard]] const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
    /// Gradient of a node; empty tensor when nothing flowed into it.
    [[nodiscard]] const Tensor& grad(std::uint32_t id) const { return nodes_[id].grad; }
    [[nodiscard]] bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
    /// Lazily zero-initialized gradient buffer of `id`, for backward closures.
    Tensor& grad_buffer(std::uint32_t id);

    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    void clear() noexcept { nodes_.clear(); }
    /// Drops every node with id >= n, keeping earlier nodes (e.g. bound
    /// parameters) valid for reuse across inference passes.
    void truncate(std::size_t n) {
        if (n < nodes_.size()) nodes_.erase(nodes_.begin() + static_cast<std::ptrdiff_t>(n), nodes_.end());
    }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        BackwardFn backward;
        bool requires_grad = false;
    };
    std::vector<Node> nodes_;
};

}  // namespace streamvae::nn
