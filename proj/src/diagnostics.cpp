#include "pointlm/diagnostics.hpp"

#include <chrono>

namespace pointlm {

ModelConfig grad_check_model() {
  ModelConfig mc;
  mc.tok.n_groups = 4;
  mc.tok.group_size = 4;
  mc.tok.d_group = 8;
  mc.tok.d_model = 16;
  mc.tok.codebook_size = 8;
  mc.tok.pooling = Pooling::kAttn;
  mc.lm.d_model = 16;
  mc.lm.n_layers = 2;
  mc.lm.n_heads = 2;
  mc.lm.d_ff = 32;
  mc.lm.max_ctx = 24;
  mc.lm.vocab_size = 12;
  return mc;
}

FullGradCheck full_loss_grad_check(const ModelConfig& mc, int n_points,
                                   std::uint64_t seed, double epsilon,
                                   Eigen::Index stride) {
  mc.validate();
  require(n_points >= mc.tok.n_groups,
          "full_loss_grad_check: need at least one point per group");
  require(mc.lm.vocab_size >= Vocab::kNumSpecial + 6,
          "full_loss_grad_check: vocab too small for the probe sequence");

  ModelConfig probe = mc;
  probe.tok.gradient_mode = QuantGradientMode::kExactLocal;

  const std::vector<int> instr = {Vocab::kNumSpecial + 0,
                                  Vocab::kNumSpecial + 1,
                                  Vocab::kNumSpecial + 2};
  const std::vector<int> resp = {Vocab::kNumSpecial + 3,
                                 Vocab::kNumSpecial + 4,
                                 Vocab::kNumSpecial + 5};

  ParamStore<double> store;
  init_model_params(store, probe, seed);

  Rng rng(derive_seed(seed, "gradcheck/cloud"));
  Matd cloud(n_points, probe.cloud_dim);
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    for (Eigen::Index j = 0; j < cloud.cols(); ++j)
      cloud(i, j) = j < 3 ? rng.normal() : rng.uniform();
  }

  // Pin the quantizer's stop-gradient operands once; the finite-difference
  // probes then differentiate the same frozen function the tape saw. The
  // continuous variant is smooth end to end and needs no pin.
  QuantPin<double> pin;
  if (probe.tok.quantize) {
    Tape<double> t;
    TapeBinding<double> bind(t, store);
    pin = capture_quant_pin(tokenize_cloud(bind, probe.tok, cloud), store);
  }

  auto loss_fn = [&](bool need_grad) {
    Tape<double> t;
    TapeBinding<double> bind(t, store);
    auto out = forward_sample(bind, probe, cloud, instr, resp, 0,
                              probe.tok.quantize ? &pin : nullptr);
    if (need_grad) {
      store.zero_grad();
      t.backward(out.total_loss);
      bind.accumulate_grads();
    }
    return double(out.total_loss.item());
  };

  // Deadband 1e-5: the LM has parameters whose true gradient is exactly zero
  // (key-projection biases cancel inside softmax), where the probe measures
  // only round-off. Gradients that matter here are orders of magnitude above.
  const auto t0 = std::chrono::steady_clock::now();
  FullGradCheck out;
  out.report = check_gradients(store, loss_fn, epsilon, stride, 1e-5);
  out.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return out;
}

}  // namespace pointlm
