#pragma once
// Point-cloud tokenizer: a cloud becomes a short sequence of embeddings in
// the language model's space. Pipeline per cloud:
//
//   normalize -> farthest point sample M centers -> k-NN groups
//   -> per-neighbor MLP + relative-position lift, pooled per group  (Z [M,d_g])
//   -> linear projection                                            (H [M,d])
//   -> nearest-codebook quantization with a straight-through bridge (Hq [M,d])
//
// The quantizer contributes the usual two-term penalty: a codebook term
// pulling codes toward the (frozen) encoder output and a commitment term
// pulling the encoder toward its (frozen) code, weighted by beta.
//
// gradient_mode picks how downstream gradients cross the quantizer:
//   kStraightThrough  copy dL/dHq onto H (training default; biased but dense)
//   kExactLocal       feed the code rows through as-is, so every parameter
//                     gets its true local gradient (the argmin is locally
//                     constant). Used by finite-difference verification.

#include <string>
#include <vector>

#include "pointlm/binding.hpp"
#include "pointlm/geometry.hpp"
#include "pointlm/rng.hpp"

namespace pointlm {

enum class Pooling { kMax, kAvg, kAttn };

enum class QuantGradientMode { kStraightThrough, kExactLocal };

struct TokenizerConfig {
  int n_groups = 32;       // point tokens per cloud
  int group_size = 8;      // neighbors per group, center included
  int d_group = 64;        // per-group feature width
  int d_model = 128;       // LM embedding width
  int codebook_size = 256;
  Pooling pooling = Pooling::kMax;
  double commitment_beta = 0.25;
  bool quantize = true;  // false: continuous variant, H flows through directly
  QuantGradientMode gradient_mode = QuantGradientMode::kStraightThrough;
  // Let the codebook see next-token-prediction gradients in addition to its
  // own loss term (straight-through mode only; exact-local implies it).
  bool codebook_from_downstream = false;
};

inline Pooling pooling_from_string(const std::string& s) {
  if (s == "max") return Pooling::kMax;
  if (s == "avg") return Pooling::kAvg;
  if (s == "attn") return Pooling::kAttn;
  throw config_error("unknown pooling '" + s + "', expected max|avg|attn");
}

inline std::string to_string(Pooling p) {
  switch (p) {
    case Pooling::kMax: return "max";
    case Pooling::kAvg: return "avg";
    case Pooling::kAttn: return "attn";
  }
  return "?";
}

// Nearest codebook row per input row, squared Euclidean distance, lowest
// index on ties.
template <typename S>
std::vector<int> nearest_codes(const Mat<S>& h, const Mat<S>& codebook) {
  require(h.cols() == codebook.cols(),
          "nearest_codes: width mismatch, h " + shape_str(h.rows(), h.cols()) +
              " vs codebook " + shape_str(codebook.rows(), codebook.cols()));
  require(codebook.rows() > 0, "nearest_codes: empty codebook");
  std::vector<int> codes(std::size_t(h.rows()));
  for (Eigen::Index r = 0; r < h.rows(); ++r) {
    int best = 0;
    S best_d = (h.row(r) - codebook.row(0)).squaredNorm();
    for (Eigen::Index c = 1; c < codebook.rows(); ++c) {
      const S d = (h.row(r) - codebook.row(c)).squaredNorm();
      if (d < best_d) {
        best = int(c);
        best_d = d;
      }
    }
    codes[std::size_t(r)] = best;
  }
  return codes;
}

// Fraction of the codebook referenced by `codes` (distinct / size).
inline double codebook_utilization(const std::vector<int>& codes,
                                   int codebook_size) {
  require(codebook_size > 0, "codebook_utilization: empty codebook");
  std::vector<char> seen(std::size_t(codebook_size), 0);
  int distinct = 0;
  for (int c : codes) {
    require(c >= 0 && c < codebook_size,
            "codebook_utilization: code " + std::to_string(c) +
                " out of range");
    if (!seen[std::size_t(c)]) {
      seen[std::size_t(c)] = 1;
      ++distinct;
    }
  }
  return double(distinct) / double(codebook_size);
}

// Parameter names, grouped here so init / binding / freezing agree on them.
namespace tok_names {
inline const char* kFeat1W = "tok.feat1.w";
inline const char* kFeat1B = "tok.feat1.b";
inline const char* kFeat2W = "tok.feat2.w";
inline const char* kFeat2B = "tok.feat2.b";
inline const char* kRelW = "tok.relpos.w";
inline const char* kRelB = "tok.relpos.b";
inline const char* kAttnW = "tok.attn.w";
inline const char* kProjW = "tok.proj.w";
inline const char* kCodebook = "tok.codebook";
}  // namespace tok_names

// Registers all tokenizer tensors. d_in is the cloud width (xyz + extras).
// Each tensor draws from its own derived stream so adding or removing one
// never shifts another's initial values.
template <typename S>
void init_tokenizer_params(ParamStore<S>& store, const TokenizerConfig& cfg,
                           int d_in, std::uint64_t master_seed) {
  require(cfg.n_groups >= 1 && cfg.group_size >= 1,
          "tokenizer config: group counts must be positive");
  require(cfg.d_group >= 1 && cfg.d_model >= 1 && cfg.codebook_size >= 1,
          "tokenizer config: widths must be positive");
  auto mk = [&](const char* name, int r, int c, double stddev, bool decay) {
    Mat<S> m(r, c);
    Rng rng(derive_seed(master_seed, std::string("init/") + name));
    fill_normal(m, rng, 0.0, stddev);
    store.add(name, std::move(m), decay);
  };
  using namespace tok_names;
  mk(kFeat1W, d_in, cfg.d_group, 1.0 / std::sqrt(double(d_in)), true);
  store.add(kFeat1B, Mat<S>::Zero(1, cfg.d_group), false);
  mk(kFeat2W, cfg.d_group, cfg.d_group, 1.0 / std::sqrt(double(cfg.d_group)),
     true);
  store.add(kFeat2B, Mat<S>::Zero(1, cfg.d_group), false);
  mk(kRelW, 3, cfg.d_group, 1.0 / std::sqrt(3.0), true);
  store.add(kRelB, Mat<S>::Zero(1, cfg.d_group), false);
  if (cfg.pooling == Pooling::kAttn)
    mk(kAttnW, cfg.d_group, 1, 1.0 / std::sqrt(double(cfg.d_group)), true);
  mk(kProjW, cfg.d_group, cfg.d_model, 1.0 / std::sqrt(double(cfg.d_group)),
     true);
  mk(kCodebook, cfg.codebook_size, cfg.d_model,
     1.0 / std::sqrt(double(cfg.d_model)), false);
}

template <typename S>
struct TokenizerOut {
  Value<S> tokens;     // [M, d_model] — the LM's point-token rows
  Value<S> vq_loss;    // [1,1]; zero leaf in continuous mode
  Value<S> pre_quant;  // H, before quantization
  std::vector<int> codes;  // chosen codebook rows; empty in continuous mode
};

// Frozen snapshot of the quantizer's stop-gradient operands. The two penalty
// terms hold one side constant each; differentiating the loss as a plain
// function of the parameters therefore requires evaluating against the
// captures from the linearization point, not re-captured ones. Verification
// runs pass a pin for exactly that reason (the code assignment is locally
// constant anyway, so pinning it changes nothing at the point itself).
template <typename S>
struct QuantPin {
  std::vector<int> codes;
  Mat<S> h0;  // sg[H]: codebook term's target
  Mat<S> q0;  // sg[Hq]: commitment term's target
};

template <typename S>
QuantPin<S> capture_quant_pin(const TokenizerOut<S>& out,
                              const ParamStore<S>& store) {
  require(!out.codes.empty(), "capture_quant_pin: no quantization to pin");
  QuantPin<S> pin;
  pin.codes = out.codes;
  pin.h0 = out.pre_quant.value();
  const Mat<S>& cb = store.at(tok_names::kCodebook).value;
  pin.q0.resize(pin.h0.rows(), pin.h0.cols());
  for (Eigen::Index r = 0; r < pin.h0.rows(); ++r)
    pin.q0.row(r) = cb.row(pin.codes[std::size_t(r)]);
  return pin;
}

// Builds the tokenizer graph for one cloud. The cloud is normalized here;
// fps_start picks the sampling start point (fixed for determinism, drawn by
// the caller for variety). `pin`, when given, freezes the code assignment and
// both stop-gradient targets (see QuantPin).
template <typename S>
TokenizerOut<S> tokenize_cloud(TapeBinding<S>& bind, const TokenizerConfig& cfg,
                               const Mat<S>& cloud, int fps_start = 0,
                               const QuantPin<S>* pin = nullptr) {
  using namespace tok_names;
  Tape<S>& t = bind.tape();
  check_cloud(cloud, "tokenize_cloud");
  require(cloud.cols() == bind.store().at(kFeat1W).value.rows(),
          "tokenize_cloud: cloud width " + std::to_string(cloud.cols()) +
              " does not match tokenizer input width " +
              std::to_string(bind.store().at(kFeat1W).value.rows()));

  const Mat<S> norm = normalize_cloud(cloud);
  const auto centers =
      farthest_point_sample(norm, cfg.n_groups, fps_start % int(norm.rows()));
  const auto groups = knn_group(norm, centers, cfg.group_size);
  const auto gf = gather_groups(norm, groups, cfg.group_size);

  // Shared per-neighbor features: MLP on the raw row plus a linear lift of
  // the offset from the group center.
  Value<S> feats = t.leaf(gf.features);
  Value<S> rel = t.leaf(gf.rel_xyz);
  Value<S> h1 = t.relu(
      t.add_row_vec(t.matmul(feats, bind(kFeat1W)), bind(kFeat1B)));
  Value<S> h2 = t.add_row_vec(t.matmul(h1, bind(kFeat2W)), bind(kFeat2B));
  Value<S> lift = t.add_row_vec(t.matmul(rel, bind(kRelW)), bind(kRelB));
  Value<S> unit = t.add(h2, lift);

  std::vector<Value<S>> pooled;
  pooled.reserve(std::size_t(cfg.n_groups));
  for (int g = 0; g < cfg.n_groups; ++g) {
    Value<S> rows =
        t.slice_rows(unit, Eigen::Index(g) * cfg.group_size, cfg.group_size);
    switch (cfg.pooling) {
      case Pooling::kMax:
        pooled.push_back(t.max_pool_rows(rows));
        break;
      case Pooling::kAvg:
        pooled.push_back(t.mean_pool_rows(rows));
        break;
      case Pooling::kAttn: {
        Value<S> scores = t.transpose(t.matmul(rows, bind(kAttnW)));
        Value<S> weights = t.softmax_rows(scores);  // [1, K]
        pooled.push_back(t.matmul(weights, rows));
        break;
      }
    }
  }
  Value<S> z = t.concat_rows(pooled);
  Value<S> h = t.matmul(z, bind(kProjW));

  TokenizerOut<S> out;
  out.pre_quant = h;
  if (!cfg.quantize) {
    out.tokens = h;
    out.vq_loss = t.leaf(Mat<S>::Zero(1, 1));
    return out;
  }

  Value<S> cb = bind(kCodebook);
  out.codes = pin ? pin->codes : nearest_codes(h.value(), cb.value());
  Value<S> code_rows = t.gather_rows(cb, out.codes);

  // Codebook term sees H as a constant; commitment term sees the codes as
  // constants. Each side only moves its own operand.
  Value<S> codebook_term =
      t.mse_vs_const(code_rows, pin ? pin->h0 : h.value());
  Value<S> commit_term =
      t.mse_vs_const(h, pin ? pin->q0 : code_rows.value());
  out.vq_loss =
      t.add(codebook_term, t.scale(commit_term, S(cfg.commitment_beta)));

  switch (cfg.gradient_mode) {
    case QuantGradientMode::kStraightThrough:
      out.tokens = cfg.codebook_from_downstream
                       ? t.straight_through(h, code_rows.value(), cb, out.codes)
                       : t.straight_through(h, code_rows.value());
      break;
    case QuantGradientMode::kExactLocal:
      out.tokens = code_rows;
      break;
  }
  return out;
}

}  // namespace pointlm
