#pragma once
// Decoder-only transformer over a mixed sequence of word tokens and point
// tokens. Pre-norm blocks, learned absolute positions (added to point tokens
// too), causal attention, untied output head.
//
// A sample is laid out as
//   <bos> <p_start> p_1 .. p_M <p_end> instruction... response... <eos>
// and the loss mask covers exactly the positions whose next token is part of
// the response (the closing <eos> included): the model is graded on what it
// should say, not on echoing the prompt.
//
// Two forward paths exist on purpose:
//   lm_forward       tape graph, for training and gradient checks
//   DecoderState     cache-based incremental forward, for generation
// They compute the same function; the second just never materializes the
// full attention matrix.

#include <string>
#include <vector>

#include "pointlm/binding.hpp"
#include "pointlm/rng.hpp"
#include "pointlm/vocab.hpp"

namespace pointlm {

struct LmConfig {
  int d_model = 128;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 512;
  int max_ctx = 256;
  int vocab_size = 0;  // set from the vocabulary

  void validate() const {
    require(d_model >= 1 && n_layers >= 1 && n_heads >= 1 && d_ff >= 1,
            "lm config: sizes must be positive");
    require(d_model % n_heads == 0,
            "lm config: d_model " + std::to_string(d_model) +
                " not divisible by n_heads " + std::to_string(n_heads));
    require(max_ctx >= 8, "lm config: max_ctx too small");
    require(vocab_size > Vocab::kNumSpecial,
            "lm config: vocab_size must exceed the control-token block");
  }
};

namespace lm_names {
inline const char* kEmbed = "lm.embed";
inline const char* kPos = "lm.pos";
inline const char* kLnFG = "lm.lnf.g";
inline const char* kLnFB = "lm.lnf.b";
inline const char* kHeadW = "lm.head.w";
inline const char* kHeadB = "lm.head.b";
inline std::string layer(int i, const char* leaf) {
  return "lm.L" + std::to_string(i) + "." + leaf;
}
}  // namespace lm_names

template <typename S>
void init_lm_params(ParamStore<S>& store, const LmConfig& cfg,
                    std::uint64_t master_seed) {
  cfg.validate();
  auto mk = [&](const std::string& name, int r, int c, double stddev,
                bool decay) {
    Mat<S> m(r, c);
    Rng rng(derive_seed(master_seed, "init/" + name));
    fill_normal(m, rng, 0.0, stddev);
    store.add(name, std::move(m), decay);
  };
  using namespace lm_names;
  const double wscale = 1.0 / std::sqrt(double(cfg.d_model));
  mk(kEmbed, cfg.vocab_size, cfg.d_model, 0.02, false);
  mk(kPos, cfg.max_ctx, cfg.d_model, 0.01, false);
  for (int i = 0; i < cfg.n_layers; ++i) {
    store.add(layer(i, "ln1.g"), Mat<S>::Ones(1, cfg.d_model), false);
    store.add(layer(i, "ln1.b"), Mat<S>::Zero(1, cfg.d_model), false);
    for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"})
      mk(layer(i, w), cfg.d_model, cfg.d_model, wscale, true);
    for (const char* b : {"attn.bq", "attn.bk", "attn.bv", "attn.bo"})
      store.add(layer(i, b), Mat<S>::Zero(1, cfg.d_model), false);
    store.add(layer(i, "ln2.g"), Mat<S>::Ones(1, cfg.d_model), false);
    store.add(layer(i, "ln2.b"), Mat<S>::Zero(1, cfg.d_model), false);
    mk(layer(i, "ffn.w1"), cfg.d_model, cfg.d_ff, wscale, true);
    store.add(layer(i, "ffn.b1"), Mat<S>::Zero(1, cfg.d_ff), false);
    mk(layer(i, "ffn.w2"), cfg.d_ff, cfg.d_model,
       1.0 / std::sqrt(double(cfg.d_ff)), true);
    store.add(layer(i, "ffn.b2"), Mat<S>::Zero(1, cfg.d_model), false);
  }
  store.add(kLnFG, Mat<S>::Ones(1, cfg.d_model), false);
  store.add(kLnFB, Mat<S>::Zero(1, cfg.d_model), false);
  mk(kHeadW, cfg.d_model, cfg.vocab_size, wscale, true);
  store.add(kHeadB, Mat<S>::Zero(1, cfg.vocab_size), false);
}

// ---- sequence layout ------------------------------------------------------

struct SequenceLayout {
  std::vector<int> pre_ids;   // <bos> <p_start>
  std::vector<int> post_ids;  // <p_end> instruction response <eos>
  int n_points = 0;
  int length = 0;
  // Per input position: id of the next token (kPad where the next slot is a
  // point token or does not exist) and whether it counts toward the loss.
  std::vector<int> targets;
  std::vector<std::uint8_t> loss_mask;
  // Whole input sequence with kPad standing in for point slots.
  std::vector<int> full_ids;
};

// allow_empty_response is for scoring sampled rollouts, where a policy may
// answer with <eos> right away; the loss mask then covers just that position.
// Supervised data keeps the strict contract.
inline SequenceLayout build_sequence(int n_points,
                                     const std::vector<int>& instr_ids,
                                     const std::vector<int>& resp_ids,
                                     int max_ctx,
                                     bool allow_empty_response = false) {
  require(n_points >= 1, "build_sequence: need at least one point token");
  require(allow_empty_response || !resp_ids.empty(),
          "build_sequence: empty response");
  const int m = n_points;
  const int ni = int(instr_ids.size());
  const int nr = int(resp_ids.size());
  const int total = m + ni + nr + 4;
  if (total > max_ctx)
    throw shape_error(
        "build_sequence: sequence of " + std::to_string(total) +
        " tokens (points " + std::to_string(m) + ", instruction " +
        std::to_string(ni) + ", response " + std::to_string(nr) +
        " + 4 control) exceeds max_ctx " + std::to_string(max_ctx));

  SequenceLayout seq;
  seq.n_points = m;
  seq.length = total;
  seq.pre_ids = {Vocab::kBos, Vocab::kPStart};
  seq.post_ids.push_back(Vocab::kPEnd);
  seq.post_ids.insert(seq.post_ids.end(), instr_ids.begin(), instr_ids.end());
  seq.post_ids.insert(seq.post_ids.end(), resp_ids.begin(), resp_ids.end());
  seq.post_ids.push_back(Vocab::kEos);

  seq.full_ids = seq.pre_ids;
  seq.full_ids.insert(seq.full_ids.end(), std::size_t(m), Vocab::kPad);
  seq.full_ids.insert(seq.full_ids.end(), seq.post_ids.begin(),
                      seq.post_ids.end());

  // Positions m+3+ni .. m+2+ni+nr hold the response; m+3+ni+nr holds <eos>.
  // A position is graded when its next token is one of those.
  const int resp_begin = m + 3 + ni;
  const int eos_pos = m + 3 + ni + nr;
  seq.targets.assign(std::size_t(total), Vocab::kPad);
  seq.loss_mask.assign(std::size_t(total), 0);
  for (int t = 0; t + 1 < total; ++t) {
    const int next_pos = t + 1;
    const bool next_is_point = next_pos >= 2 && next_pos < 2 + m;
    seq.targets[std::size_t(t)] =
        next_is_point ? Vocab::kPad : seq.full_ids[std::size_t(next_pos)];
    seq.loss_mask[std::size_t(t)] =
        (next_pos >= resp_begin && next_pos <= eos_pos) ? 1 : 0;
  }
  return seq;
}

// ---- tape forward ---------------------------------------------------------

namespace detail {

template <typename S>
Value<S> lm_block(TapeBinding<S>& bind, const LmConfig& cfg, int layer_idx,
                  Value<S> x) {
  using lm_names::layer;
  Tape<S>& t = bind.tape();
  const int dh = cfg.d_model / cfg.n_heads;

  Value<S> xn = t.layer_norm(x, bind(layer(layer_idx, "ln1.g")),
                             bind(layer(layer_idx, "ln1.b")));
  Value<S> q = t.add_row_vec(t.matmul(xn, bind(layer(layer_idx, "attn.wq"))),
                             bind(layer(layer_idx, "attn.bq")));
  Value<S> k = t.add_row_vec(t.matmul(xn, bind(layer(layer_idx, "attn.wk"))),
                             bind(layer(layer_idx, "attn.bk")));
  Value<S> v = t.add_row_vec(t.matmul(xn, bind(layer(layer_idx, "attn.wv"))),
                             bind(layer(layer_idx, "attn.bv")));
  std::vector<Value<S>> heads;
  heads.reserve(std::size_t(cfg.n_heads));
  for (int h = 0; h < cfg.n_heads; ++h) {
    Value<S> qh = t.slice_cols(q, Eigen::Index(h) * dh, dh);
    Value<S> kh = t.slice_cols(k, Eigen::Index(h) * dh, dh);
    Value<S> vh = t.slice_cols(v, Eigen::Index(h) * dh, dh);
    Value<S> scores =
        t.scale(t.matmul(qh, t.transpose(kh)), S(1.0 / std::sqrt(double(dh))));
    Value<S> attn = t.causal_softmax_rows(scores);
    heads.push_back(t.matmul(attn, vh));
  }
  Value<S> ctx = cfg.n_heads == 1 ? heads[0] : t.concat_cols(heads);
  Value<S> attn_out =
      t.add_row_vec(t.matmul(ctx, bind(layer(layer_idx, "attn.wo"))),
                    bind(layer(layer_idx, "attn.bo")));
  Value<S> h1 = t.add(x, attn_out);

  Value<S> hn = t.layer_norm(h1, bind(layer(layer_idx, "ln2.g")),
                             bind(layer(layer_idx, "ln2.b")));
  Value<S> f1 = t.relu(t.add_row_vec(t.matmul(hn, bind(layer(layer_idx, "ffn.w1"))),
                                     bind(layer(layer_idx, "ffn.b1"))));
  Value<S> f2 = t.add_row_vec(t.matmul(f1, bind(layer(layer_idx, "ffn.w2"))),
                              bind(layer(layer_idx, "ffn.b2")));
  return t.add(h1, f2);
}

}  // namespace detail

// Logits [T, vocab] for one mixed sequence. point_tokens must be
// [seq.n_points, d_model], usually the tokenizer output.
template <typename S>
Value<S> lm_forward(TapeBinding<S>& bind, const LmConfig& cfg,
                    Value<S> point_tokens, const SequenceLayout& seq) {
  using namespace lm_names;
  Tape<S>& t = bind.tape();
  require(point_tokens.rows() == seq.n_points &&
              point_tokens.cols() == cfg.d_model,
          "lm_forward: point tokens " +
              shape_str(point_tokens.rows(), point_tokens.cols()) +
              " do not fit layout (" + std::to_string(seq.n_points) + " x " +
              std::to_string(cfg.d_model) + ")");
  require(seq.length <= cfg.max_ctx,
          "lm_forward: sequence longer than max_ctx");

  Value<S> embed = bind(kEmbed);
  Value<S> pre = t.gather_rows(embed, seq.pre_ids);
  Value<S> post = t.gather_rows(embed, seq.post_ids);
  Value<S> x = t.concat_rows({pre, point_tokens, post});
  x = t.add(x, t.slice_rows(bind(kPos), 0, seq.length));

  for (int i = 0; i < cfg.n_layers; ++i) x = detail::lm_block(bind, cfg, i, x);
  Value<S> xf = t.layer_norm(x, bind(kLnFG), bind(kLnFB));
  return t.add_row_vec(t.matmul(xf, bind(kHeadW)), bind(kHeadB));
}

// ---- incremental inference ------------------------------------------------

// Plain (tape-free) forward with per-layer KV caches. Rows are fed in
// sequence order; logits come back for the newest position.
template <typename S>
class DecoderState {
 public:
  DecoderState(const ParamStore<S>& store, const LmConfig& cfg)
      : store_(&store), cfg_(cfg) {
    cfg_.validate();
    k_.resize(std::size_t(cfg.n_layers));
    v_.resize(std::size_t(cfg.n_layers));
    for (int i = 0; i < cfg.n_layers; ++i) {
      k_[std::size_t(i)].resize(0, cfg.d_model);
      v_[std::size_t(i)].resize(0, cfg.d_model);
    }
  }

  int length() const { return length_; }

  // Feed one embedding row (token or point embedding, position added here).
  // Returns the logits row for this position.
  Mat<S> feed_row(const Mat<S>& emb) {
    require(emb.rows() == 1 && emb.cols() == cfg_.d_model,
            "DecoderState::feed_row: expected [1," +
                std::to_string(cfg_.d_model) + "], got " +
                shape_str(emb.rows(), emb.cols()));
    require(length_ < cfg_.max_ctx,
            "DecoderState: context limit " + std::to_string(cfg_.max_ctx) +
                " reached");
    using namespace lm_names;
    const int dh = cfg_.d_model / cfg_.n_heads;
    Mat<S> x = emb + p(kPos).middleRows(length_, 1);

    for (int i = 0; i < cfg_.n_layers; ++i) {
      const Mat<S> xn = layer_norm_rows(x, p(layer(i, "ln1.g")), p(layer(i, "ln1.b")));
      const Mat<S> q = xn * p(layer(i, "attn.wq")) + p(layer(i, "attn.bq"));
      Mat<S> kr = xn * p(layer(i, "attn.wk")) + p(layer(i, "attn.bk"));
      Mat<S> vr = xn * p(layer(i, "attn.wv")) + p(layer(i, "attn.bv"));
      auto& K = k_[std::size_t(i)];
      auto& V = v_[std::size_t(i)];
      K.conservativeResize(K.rows() + 1, Eigen::NoChange);
      V.conservativeResize(V.rows() + 1, Eigen::NoChange);
      K.row(K.rows() - 1) = kr;
      V.row(V.rows() - 1) = vr;

      Mat<S> ctx(1, cfg_.d_model);
      for (int h = 0; h < cfg_.n_heads; ++h) {
        const auto qh = q.middleCols(Eigen::Index(h) * dh, dh);
        const auto kh = K.middleCols(Eigen::Index(h) * dh, dh);
        const auto vh = V.middleCols(Eigen::Index(h) * dh, dh);
        Eigen::Array<S, 1, Eigen::Dynamic> scores =
            (qh * kh.transpose()).array() / S(std::sqrt(double(dh)));
        const S mx = scores.maxCoeff();
        Eigen::Array<S, 1, Eigen::Dynamic> e = (scores - mx).exp();
        e /= e.sum();
        ctx.middleCols(Eigen::Index(h) * dh, dh) = e.matrix() * vh;
      }
      const Mat<S> attn_out =
          ctx * p(layer(i, "attn.wo")) + p(layer(i, "attn.bo"));
      const Mat<S> h1 = x + attn_out;
      const Mat<S> hn =
          layer_norm_rows(h1, p(layer(i, "ln2.g")), p(layer(i, "ln2.b")));
      const Mat<S> f1 =
          (hn * p(layer(i, "ffn.w1")) + p(layer(i, "ffn.b1"))).cwiseMax(S(0));
      const Mat<S> f2 = f1 * p(layer(i, "ffn.w2")) + p(layer(i, "ffn.b2"));
      x = h1 + f2;
    }
    ++length_;
    const Mat<S> xf = layer_norm_rows(x, p(kLnFG), p(kLnFB));
    return xf * p(kHeadW) + p(kHeadB);
  }

  // Feed several embedding rows; logits of the last one.
  Mat<S> feed(const Mat<S>& emb_rows) {
    require(emb_rows.rows() >= 1, "DecoderState::feed: no rows");
    Mat<S> logits;
    for (Eigen::Index r = 0; r < emb_rows.rows(); ++r)
      logits = feed_row(emb_rows.middleRows(r, 1));
    return logits;
  }

 private:
  const Mat<S>& p(const std::string& name) const {
    return store_->at(name).value;
  }

  static Mat<S> layer_norm_rows(const Mat<S>& x, const Mat<S>& g,
                                const Mat<S>& b) {
    Mat<S> out(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const S mu = x.row(r).mean();
      const S var = (x.row(r).array() - mu).square().mean();
      const S inv = S(1) / std::sqrt(var + ln_eps_of<S>::value);
      out.row(r) =
          (((x.row(r).array() - mu) * inv).matrix()).cwiseProduct(g.row(0)) +
          b.row(0);
    }
    return out;
  }

  const ParamStore<S>* store_;
  LmConfig cfg_;
  int length_ = 0;
  std::vector<Mat<S>> k_, v_;
};

// ---- generation -----------------------------------------------------------

struct GenerateOptions {
  int max_new_tokens = 24;
  double temperature = 1.0;
  bool greedy = true;   // argmax (lowest index on ties); otherwise sample
  Rng* rng = nullptr;   // required when sampling
};

// Embedding rows for the prompt part of a mixed sequence:
// <bos> <p_start> points <p_end> instruction.
template <typename S>
Mat<S> prompt_embeddings(const ParamStore<S>& store, const Mat<S>& point_tokens,
                         const std::vector<int>& instr_ids) {
  const Mat<S>& embed = store.at(lm_names::kEmbed).value;
  const Eigen::Index m = point_tokens.rows();
  Mat<S> rows(3 + m + Eigen::Index(instr_ids.size()), embed.cols());
  rows.row(0) = embed.row(Vocab::kBos);
  rows.row(1) = embed.row(Vocab::kPStart);
  rows.middleRows(2, m) = point_tokens;
  rows.row(2 + m) = embed.row(Vocab::kPEnd);
  for (std::size_t i = 0; i < instr_ids.size(); ++i)
    rows.row(3 + m + Eigen::Index(i)) = embed.row(instr_ids[i]);
  return rows;
}

template <typename S>
int pick_token(const Mat<S>& logits, const GenerateOptions& opts) {
  require(logits.rows() == 1, "pick_token: expected one logits row");
  if (opts.greedy) {
    int best = 0;
    for (Eigen::Index j = 1; j < logits.cols(); ++j)
      if (logits(0, j) > logits(0, best)) best = int(j);
    return best;
  }
  require(opts.rng != nullptr, "pick_token: sampling needs an rng");
  require(opts.temperature > 0.0, "pick_token: temperature must be positive");
  Eigen::Array<double, 1, Eigen::Dynamic> l =
      logits.row(0).template cast<double>().array() / opts.temperature;
  const double mx = l.maxCoeff();
  Eigen::Array<double, 1, Eigen::Dynamic> probs = (l - mx).exp();
  probs /= probs.sum();
  const double u = opts.rng->uniform();
  double acc = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    acc += probs(j);
    if (u < acc) return int(j);
  }
  return int(probs.size()) - 1;  // numerical leftovers land on the last token
}

// Decodes a response for one prompt. Stops at <eos>, at max_new_tokens, or
// when the context fills. The returned ids exclude <eos>.
template <typename S>
std::vector<int> generate_response(const ParamStore<S>& store,
                                   const LmConfig& cfg,
                                   const Mat<S>& point_tokens,
                                   const std::vector<int>& instr_ids,
                                   const GenerateOptions& opts) {
  DecoderState<S> dec(store, cfg);
  Mat<S> logits = dec.feed(prompt_embeddings(store, point_tokens, instr_ids));
  const Mat<S>& embed = store.at(lm_names::kEmbed).value;
  std::vector<int> out;
  for (int step = 0; step < opts.max_new_tokens; ++step) {
    const int tok = pick_token(logits, opts);
    if (tok == Vocab::kEos) break;
    out.push_back(tok);
    if (dec.length() >= cfg.max_ctx) break;
    logits = dec.feed(embed.middleRows(tok, 1));
  }
  return out;
}

}  // namespace pointlm
