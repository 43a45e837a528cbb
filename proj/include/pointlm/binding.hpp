#pragma once
// Glue between a ParamStore and a Tape: parameters are bound into a graph as
// leaves on first use, and their gradients are summed back into the store
// after backward(). One binding per tape; a batch accumulates over several.

#include <map>
#include <string>

#include "pointlm/autodiff.hpp"
#include "pointlm/params.hpp"

namespace pointlm {

template <typename S>
class TapeBinding {
 public:
  TapeBinding(Tape<S>& tape, ParamStore<S>& store)
      : tape_(&tape), store_(&store) {}

  // Leaf for the named parameter, created once and reused.
  Value<S> operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Value<S> v = tape_->leaf(store_->at(name).value);
    bound_.emplace(name, v);
    return v;
  }

  // Sum tape gradients of every bound parameter into the store. Call after
  // tape.backward().
  void accumulate_grads() {
    for (const auto& [name, v] : bound_) store_->at(name).grad += tape_->grad(v);
  }

  Tape<S>& tape() { return *tape_; }
  ParamStore<S>& store() { return *store_; }

 private:
  Tape<S>* tape_;
  ParamStore<S>* store_;
  std::map<std::string, Value<S>> bound_;
};

}  // namespace pointlm
