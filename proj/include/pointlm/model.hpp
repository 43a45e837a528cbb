#pragma once
// The full model: point tokenizer feeding the language model, trained under
// next-token prediction plus the weighted quantizer penalty.

#include "pointlm/lm.hpp"
#include "pointlm/tokenizer.hpp"

namespace pointlm {

struct ModelConfig {
  TokenizerConfig tok;
  LmConfig lm;
  double vq_weight = 0.50;  // weight of the quantizer penalty in the total
  int cloud_dim = 6;        // xyz + rgb

  void validate() const {
    lm.validate();
    require(tok.d_model == lm.d_model,
            "model config: tokenizer d_model " + std::to_string(tok.d_model) +
                " != lm d_model " + std::to_string(lm.d_model));
    require(cloud_dim >= 3, "model config: cloud_dim must be >= 3");
    require(vq_weight >= 0.0, "model config: vq_weight must be >= 0");
    require(tok.n_groups + 5 <= lm.max_ctx,
            "model config: point tokens alone would overflow max_ctx");
  }
};

template <typename S>
void init_model_params(ParamStore<S>& store, const ModelConfig& mc,
                       std::uint64_t master_seed) {
  mc.validate();
  init_tokenizer_params(store, mc.tok, mc.cloud_dim, master_seed);
  init_lm_params(store, mc.lm, master_seed);
}

template <typename S>
struct SampleForward {
  Value<S> logits;
  Value<S> ntp_loss;
  Value<S> vq_loss;
  Value<S> total_loss;
  std::vector<int> codes;
  SequenceLayout seq;
};

// One labelled sample end to end: cloud -> point tokens -> mixed sequence ->
// losses. total = ntp + vq_weight * vq.
template <typename S>
SampleForward<S> forward_sample(TapeBinding<S>& bind, const ModelConfig& mc,
                                const Mat<S>& cloud,
                                const std::vector<int>& instr_ids,
                                const std::vector<int>& resp_ids,
                                int fps_start = 0,
                                const QuantPin<S>* pin = nullptr) {
  Tape<S>& t = bind.tape();
  SampleForward<S> out;
  TokenizerOut<S> tok = tokenize_cloud(bind, mc.tok, cloud, fps_start, pin);
  out.codes = tok.codes;
  out.seq = build_sequence(mc.tok.n_groups, instr_ids, resp_ids,
                           mc.lm.max_ctx);
  out.logits = lm_forward(bind, mc.lm, tok.tokens, out.seq);
  out.ntp_loss = t.cross_entropy(out.logits, out.seq.targets, out.seq.loss_mask);
  out.vq_loss = tok.vq_loss;
  out.total_loss = t.add(out.ntp_loss, t.scale(out.vq_loss, S(mc.vq_weight)));
  return out;
}

// Point tokens for inference: same pipeline, no gradients. A throwaway tape
// keeps this on the exact same code path as training.
template <typename S>
std::pair<Mat<S>, std::vector<int>> tokenize_for_inference(
    ParamStore<S>& store, const TokenizerConfig& cfg, const Mat<S>& cloud,
    int fps_start = 0) {
  Tape<S> t;
  TapeBinding<S> bind(t, store);
  TokenizerOut<S> out = tokenize_cloud(bind, cfg, cloud, fps_start);
  return {out.tokens.value(), out.codes};
}

// Stage-1 trainable set: the tokenizer (codebook included), the first
// k_layers transformer blocks, and the control-token embedding rows. The
// rest of the LM stays frozen.
template <typename S>
void apply_stage1_freeze(ParamStore<S>& store, const ModelConfig& mc,
                         int k_layers) {
  require(k_layers >= 0 && k_layers <= mc.lm.n_layers,
          "apply_stage1_freeze: k_layers " + std::to_string(k_layers) +
              " outside [0, " + std::to_string(mc.lm.n_layers) + "]");
  for (auto& p : store.params()) {
    p.trainable = false;
    p.trainable_rows.clear();
  }
  for (auto& p : store.params())
    if (p.name.rfind("tok.", 0) == 0) p.trainable = true;
  for (int i = 0; i < k_layers; ++i) {
    const std::string prefix = "lm.L" + std::to_string(i) + ".";
    for (auto& p : store.params())
      if (p.name.rfind(prefix, 0) == 0) p.trainable = true;
  }
  auto& embed = store.at(lm_names::kEmbed);
  embed.trainable = true;
  embed.trainable_rows = {Vocab::kBos, Vocab::kEos, Vocab::kPad,
                          Vocab::kPStart, Vocab::kPEnd};
}

}  // namespace pointlm
