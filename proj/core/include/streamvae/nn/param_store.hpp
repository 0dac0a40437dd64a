#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "streamvae/nn/tape.hpp"
#include "streamvae/nn/tensor.hpp"

namespace streamvae::nn {

/// Named trainable tensors with insertion-order iteration.
class ParamStore {
public:
    struct Entry {
        std::string name;
        Tensor value;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    /// Throws ConfigError on a duplicate name.
    Tensor& add(std::string name, Tensor value);
    [[nodiscard]] bool contains(const std::string& name) const;
    [[nodiscard]] Tensor& get(const std::string& name);
    [[nodiscard]] const Tensor& get(const std::string& name) const;

    [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
    [[nodiscard]] std::size_t total_elements() const noexcept;
    [[nodiscard]] std::vector<Entry>& entries() noexcept { return entries_; }
    [[nodiscard]] const std::vector<Entry>& entries() const noexcept { return entries_; }

    /// Same names and shapes, all zeros.
    [[nodiscard]] ParamStore zeros_like() const;
    void set_zero() noexcept;

    friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.entries_ == b.entries_; }

private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

/// Parameters placed on a tape as leaves, addressable by name.
class BoundParams {
public:
    BoundParams(Tape& tape, const ParamStore& store, bool requires_grad);

    [[nodiscard]] Var operator[](const std::string& name) const;
    /// Adds each leaf's gradient into the matching entry of `grads`.
    void accumulate_grads(ParamStore& grads, double weight = 1.0) const;

private:
    Tape* tape_;
    std::vector<std::string> names_;
    std::vector<Var> vars_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace streamvae::nn
