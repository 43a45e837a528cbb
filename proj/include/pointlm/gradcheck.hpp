#pragma once
// Central finite-difference verification of analytic gradients. Meant to run
// in double precision: epsilon 1e-5 against float32 round-off would drown the
// signal.

#include <functional>
#include <string>
#include <vector>

#include "pointlm/params.hpp"

namespace pointlm {

struct GradCheckEntry {
  std::string param;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  long long entries_checked = 0;
  GradCheckEntry worst;
};

// denom_floor is an absolute deadband: when both sides are below it, the
// comparison reads as agreement. Parameters with structurally zero gradient
// (an attention key bias, an unused embedding row) otherwise divide pure
// finite-difference round-off by a vanishing denominator.
inline double grad_rel_err(double analytic, double numeric,
                           double denom_floor = 1e-8) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), denom_floor});
  return std::abs(analytic - numeric) / denom;
}

// loss_fn(need_grad): evaluates the loss from the store's current values;
// when need_grad it must also leave accumulated gradients in the store.
// Every element of every tensor is checked (stride can thin that out for
// quick smoke runs). The analytic pass runs once; each element then costs two
// forward evaluations.
template <typename LossFn>
GradCheckReport check_gradients(ParamStore<double>& store, LossFn&& loss_fn,
                                double epsilon = 1e-5,
                                Eigen::Index stride = 1,
                                double denom_floor = 1e-8) {
  require(epsilon > 0.0, "check_gradients: epsilon must be positive");
  require(stride >= 1, "check_gradients: stride must be >= 1");

  store.zero_grad();
  (void)loss_fn(true);
  std::vector<Matd> analytic;
  analytic.reserve(store.size());
  for (const auto& p : store.params()) analytic.push_back(p.grad);

  GradCheckReport report;
  for (std::size_t pi = 0; pi < store.size(); ++pi) {
    auto& p = store.params()[pi];
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
        if ((i * p.value.cols() + j) % stride != 0) continue;
        const double orig = p.value(i, j);
        p.value(i, j) = orig + epsilon;
        const double lp = loss_fn(false);
        p.value(i, j) = orig - epsilon;
        const double lm = loss_fn(false);
        p.value(i, j) = orig;
        const double numeric = (lp - lm) / (2.0 * epsilon);
        const double a = analytic[pi](i, j);
        const double rel = grad_rel_err(a, numeric, denom_floor);
        ++report.entries_checked;
        if (rel >= report.max_rel_err) {
          report.max_rel_err = rel;
          report.worst = {p.name, i, j, a, numeric, rel};
        }
      }
    }
  }
  return report;
}

}  // namespace pointlm
