#pragma once
// Named parameter tensors with their gradient accumulators and optimizer
// moments. One store owns every learnable matrix in the model; tapes bind
// values in at graph build time and their gradients are summed back here, so
// a batch is N backward passes followed by one optimizer step.

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "pointlm/common.hpp"

namespace pointlm {

template <typename S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
  Mat<S> m;  // Adam first moment
  Mat<S> v;  // Adam second moment
  bool decay = true;      // weight decay applies to this tensor
  bool trainable = true;  // optimizer updates this tensor
  // When non-empty and trainable, only these rows are updated (used to train
  // a handful of embedding rows while the rest of the table stays frozen).
  std::vector<int> trainable_rows;
};

template <typename S>
class ParamStore {
 public:
  Param<S>& add(const std::string& name, Mat<S> value, bool decay) {
    require(index_.find(name) == index_.end(),
            "ParamStore: duplicate parameter '" + name + "'");
    Param<S> p;
    p.name = name;
    p.decay = decay;
    p.grad = Mat<S>::Zero(value.rows(), value.cols());
    p.m = Mat<S>::Zero(value.rows(), value.cols());
    p.v = Mat<S>::Zero(value.rows(), value.cols());
    p.value = std::move(value);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back();
  }

  bool has(const std::string& name) const {
    return index_.find(name) != index_.end();
  }

  Param<S>& at(const std::string& name) {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return params_[it->second];
  }

  const Param<S>& at(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "ParamStore: unknown parameter '" + name + "'");
    return params_[it->second];
  }

  std::deque<Param<S>>& params() { return params_; }
  const std::deque<Param<S>>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  void zero_grad() {
    for (auto& p : params_) p.grad.setZero();
  }

  void set_all_trainable() {
    for (auto& p : params_) {
      p.trainable = true;
      p.trainable_rows.clear();
    }
  }

  long long total_elements() const {
    long long n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  // Throws if any accumulated gradient is non-finite, naming the tensor.
  void check_grads_finite() const {
    for (const auto& p : params_)
      if (!p.grad.allFinite())
        throw numeric_error("non-finite gradient in parameter '" + p.name +
                            "'");
  }

 private:
  // deque: references handed out by add()/at() stay valid as the store grows.
  std::deque<Param<S>> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace pointlm
