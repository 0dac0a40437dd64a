#include "streamvae/nn/param_store.hpp"

#include "streamvae/errors.hpp"

namespace streamvae::nn {

Tensor& ParamStore::add(std::string name, Tensor value) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.push_back(Entry{std::move(name), std::move(value)});
    return entries_.back().value;
}

bool ParamStore::contains(const std::string& name) const { return index_.contains(name); }

Tensor& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second].value;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return entries_[it->second].value;
}

std::size_t ParamStore::total_elements() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

ParamStore ParamStore::zeros_like() const {
    ParamStore z;
    for (const auto& e : entries_) z.add(e.name, Tensor(e.value.shape(), 0.0));
    return z;
}

void ParamStore::set_zero() noexcept {
    for (auto& e : entries_) e.value.fill(0.0);
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store, bool requires_grad) : tape_(&tape) {
    names_.reserve(store.size());
    vars_.reserve(store.size());
    for (const auto& e : store.entries()) {
        index_.emplace(e.name, vars_.size());
        names_.push_back(e.name);
        vars_.push_back(tape.leaf(e.value, requires_grad));
    }
}

Var BoundParams::operator[](const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return vars_[it->second];
}

void BoundParams::accumulate_grads(ParamStore& grads, double weight) const {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        const Tensor& g = tape_->grad(vars_[i].id());
        if (g.empty()) continue;
        Tensor& dst = grads.get(names_[i]);
        for (std::size_t k = 0; k < g.size(); ++k) dst[k] += weight * g[k];
    }
}

}  // namespace streamvae::nn
