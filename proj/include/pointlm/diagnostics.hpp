#pragma once
// Numerical self-checks. The headline one verifies the analytic gradient of
// the complete training loss — tokenizer MLPs, relative-position lift,
// projection, codebook (both penalty terms), and the language model — against
// central finite differences in double precision.

#include "pointlm/gradcheck.hpp"
#include "pointlm/model.hpp"

namespace pointlm {

struct FullGradCheck {
  GradCheckReport report;
  double seconds = 0.0;
};

// A deliberately small model so exhaustive finite differences stay cheap:
// every parameter element costs two forward passes. Attention pooling is on
// so the pooling weights are covered too.
ModelConfig grad_check_model();

// Builds a fresh double-precision model from `seed`, evaluates the training
// loss (next-token + weighted quantizer penalty) on one random cloud with a
// short fixed instruction/response pair, and compares every analytic gradient
// entry (thinned by `stride`) against central differences. The quantizer runs
// with exact-local gradients and its stop-gradient operands pinned at the
// linearization point, so the probed function is smooth.
FullGradCheck full_loss_grad_check(const ModelConfig& mc, int n_points,
                                   std::uint64_t seed, double epsilon = 1e-5,
                                   Eigen::Index stride = 1);

}  // namespace pointlm
