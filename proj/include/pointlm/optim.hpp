#pragma once
// AdamW with decoupled weight decay, plus the warmup->cosine learning-rate
// schedule shared by all training stages.

#include <cmath>

#include "pointlm/params.hpp"

namespace pointlm {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Linear ramp from 0 to the base rate over the warmup fraction, then a cosine
// decay to exactly 0 at total_steps.
struct WarmupCosineSchedule {
  double base_lr = 0.0;
  long long total_steps = 0;
  long long warmup_steps = 0;

  static WarmupCosineSchedule make(double base_lr, long long total_steps,
                                   double warmup_ratio) {
    require(total_steps > 0, "WarmupCosineSchedule: total_steps must be > 0");
    require(warmup_ratio >= 0.0 && warmup_ratio <= 1.0,
            "WarmupCosineSchedule: warmup_ratio outside [0,1]");
    WarmupCosineSchedule s;
    s.base_lr = base_lr;
    s.total_steps = total_steps;
    s.warmup_steps = llround(warmup_ratio * double(total_steps));
    if (s.warmup_steps < 1) s.warmup_steps = 1;
    if (s.warmup_steps > total_steps) s.warmup_steps = total_steps;
    return s;
  }

  double at(long long step) const {
    if (step < 0) step = 0;
    if (step > total_steps) step = total_steps;
    if (step <= warmup_steps)
      return base_lr * double(step) / double(warmup_steps);
    const double t =
        double(step - warmup_steps) / double(total_steps - warmup_steps);
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * t));
  }
};

template <typename S>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  long long step_count() const { return t_; }
  void set_step_count(long long t) { t_ = t; }

  // One update over every trainable tensor using the accumulated gradients.
  // Decay is decoupled: applied to the value directly, never to the gradient.
  void step(ParamStore<S>& store, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    for (auto& p : store.params()) {
      if (!p.trainable) continue;
      if (p.trainable_rows.empty()) {
        update_rows(p, lr, bc1, bc2, 0, p.value.rows());
      } else {
        for (int r : p.trainable_rows) {
          require(r >= 0 && r < p.value.rows(),
                  "AdamW: trainable row " + std::to_string(r) +
                      " out of range for '" + p.name + "'");
          update_rows(p, lr, bc1, bc2, r, 1);
        }
      }
    }
  }

 private:
  void update_rows(Param<S>& p, double lr, double bc1, double bc2,
                   Eigen::Index r0, Eigen::Index nr) {
    auto g = p.grad.middleRows(r0, nr);
    auto m = p.m.middleRows(r0, nr);
    auto v = p.v.middleRows(r0, nr);
    auto w = p.value.middleRows(r0, nr);
    m = S(cfg_.beta1) * m + S(1.0 - cfg_.beta1) * g;
    v = (S(cfg_.beta2) * v.array() +
         S(1.0 - cfg_.beta2) * g.array().square())
            .matrix();
    // Decay and Adam step both read the pre-update value.
    if (p.decay) w.array() -= S(lr * cfg_.weight_decay) * w.array();
    w.array() -= S(lr) * (m.array() / S(bc1)) /
                 ((v.array() / S(bc2)).sqrt() + S(cfg_.eps));
  }

  AdamWConfig cfg_;
  long long t_ = 0;
};

}  // namespace pointlm
