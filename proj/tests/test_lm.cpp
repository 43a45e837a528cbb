#include <doctest.h>

#include "pointlm/model.hpp"

using namespace pointlm;

namespace {

LmConfig tiny_lm(int vocab) {
  LmConfig cfg;
  cfg.d_model = 12;
  cfg.n_layers = 2;
  cfg.n_heads = 3;
  cfg.d_ff = 24;
  cfg.max_ctx = 32;
  cfg.vocab_size = vocab;
  return cfg;
}

Matd random_points(Rng& rng, int m, int d) {
  Matd p(m, d);
  fill_normal(p, rng, 0.0, 1.0);
  return p;
}

}  // namespace

TEST_CASE("sequence layout: prompt is masked out, response and <eos> are in") {
  // 2 point tokens, 3 instruction words, 4 response words.
  const std::vector<int> instr = {7, 8, 9};
  const std::vector<int> resp = {10, 11, 12, 13};
  const auto seq = build_sequence(2, instr, resp, 64);

  CHECK(seq.length == 13);
  REQUIRE(seq.full_ids.size() == 13);
  CHECK(seq.full_ids[0] == Vocab::kBos);
  CHECK(seq.full_ids[1] == Vocab::kPStart);
  CHECK(seq.full_ids[2] == Vocab::kPad);  // point slot placeholder
  CHECK(seq.full_ids[4] == Vocab::kPEnd);
  CHECK(seq.full_ids[5] == 7);
  CHECK(seq.full_ids[8] == 10);
  CHECK(seq.full_ids[12] == Vocab::kEos);

  int ones = 0;
  for (auto m : seq.loss_mask) ones += m;
  CHECK(ones == 5);  // 4 response tokens + <eos>
  for (int t = 0; t < 7; ++t) CHECK(seq.loss_mask[std::size_t(t)] == 0);
  for (int t = 7; t <= 11; ++t) CHECK(seq.loss_mask[std::size_t(t)] == 1);
  CHECK(seq.loss_mask[12] == 0);

  CHECK(seq.targets[7] == 10);   // predicts first response word
  CHECK(seq.targets[10] == 13);  // predicts last response word
  CHECK(seq.targets[11] == Vocab::kEos);
  // Position 1's next token is a point slot: no word target there.
  CHECK(seq.targets[1] == Vocab::kPad);
  CHECK(seq.loss_mask[1] == 0);
}

TEST_CASE("sequence overflow reports every length involved") {
  try {
    (void)build_sequence(30, std::vector<int>(5, 7), std::vector<int>(4, 8),
                         32);
    FAIL("expected shape_error");
  } catch (const shape_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("43") != std::string::npos);   // total
    CHECK(msg.find("30") != std::string::npos);   // points
    CHECK(msg.find("32") != std::string::npos);   // max_ctx
  }
  CHECK_THROWS_AS((void)build_sequence(2, {7}, {}, 64), error);
}

TEST_CASE("lm parameter inventory and decay flags") {
  ParamStore<double> store;
  auto cfg = tiny_lm(20);
  init_lm_params(store, cfg, 123);
  CHECK(store.has("lm.embed"));
  CHECK(store.has("lm.pos"));
  CHECK(store.has("lm.L0.attn.wq"));
  CHECK(store.has("lm.L1.ffn.w2"));
  CHECK(store.has("lm.head.w"));
  CHECK(store.at("lm.embed").value.rows() == 20);
  CHECK(store.at("lm.pos").value.rows() == cfg.max_ctx);
  CHECK(store.at("lm.head.w").value.cols() == 20);
  CHECK_FALSE(store.at("lm.embed").decay);
  CHECK_FALSE(store.at("lm.L0.ln1.g").decay);
  CHECK(store.at("lm.L0.attn.wq").decay);
  CHECK(store.at("lm.L1.ffn.w1").decay);

  // Head is its own tensor, not the embedding transposed.
  CHECK(store.at("lm.head.w").value.data() != store.at("lm.embed").value.data());
  CHECK_THROWS_AS(tiny_lm(3).validate(), error);  // vocab too small
}

TEST_CASE("forward logits cover the sequence; later tokens cannot leak back") {
  Rng rng(91);
  auto cfg = tiny_lm(20);
  ParamStore<double> store;
  init_lm_params(store, cfg, 321);
  Matd pts = random_points(rng, 3, cfg.d_model);

  const std::vector<int> instr = {6, 7};
  const std::vector<int> resp_a = {8, 9, 10};
  std::vector<int> resp_b = resp_a;
  resp_b.back() = 11;  // differ only in the final response word

  Tape<double> ta;
  TapeBinding<double> ba(ta, store);
  auto seq_a = build_sequence(3, instr, resp_a, cfg.max_ctx);
  auto la = lm_forward(ba, cfg, ta.leaf(pts), seq_a);

  Tape<double> tb;
  TapeBinding<double> bb(tb, store);
  auto seq_b = build_sequence(3, instr, resp_b, cfg.max_ctx);
  auto lb = lm_forward(bb, cfg, tb.leaf(pts), seq_b);

  REQUIRE(la.rows() == seq_a.length);
  REQUIRE(la.cols() == 20);
  // The two sequences first differ at the last response position; everything
  // strictly before it must be identical under a causal model.
  const int diff_pos = seq_a.length - 2;  // last response word's position
  for (int t = 0; t < diff_pos; ++t)
    CHECK((la.value().row(t) - lb.value().row(t)).cwiseAbs().maxCoeff() <
          1e-12);
  CHECK((la.value().row(diff_pos + 1) - lb.value().row(diff_pos + 1))
            .cwiseAbs()
            .maxCoeff() > 1e-9);
}

TEST_CASE("incremental decoder reproduces the tape forward exactly") {
  Rng rng(92);
  auto cfg = tiny_lm(24);
  ParamStore<double> store;
  init_lm_params(store, cfg, 555);
  Matd pts = random_points(rng, 4, cfg.d_model);
  const std::vector<int> instr = {9, 10, 11};
  const std::vector<int> resp = {12, 13};
  const auto seq = build_sequence(4, instr, resp, cfg.max_ctx);

  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto logits = lm_forward(bind, cfg, t.leaf(pts), seq);

  DecoderState<double> dec(store, cfg);
  const Matd& embed = store.at(lm_names::kEmbed).value;
  Matd dec_logits(seq.length, cfg.vocab_size);
  Matd prompt = prompt_embeddings(store, pts, instr);
  for (Eigen::Index r = 0; r < prompt.rows(); ++r)
    dec_logits.row(r) = dec.feed_row(prompt.middleRows(r, 1));
  // Continue with response tokens and <eos> exactly as the tape sees them.
  std::vector<int> rest = resp;
  rest.push_back(Vocab::kEos);
  for (std::size_t i = 0; i < rest.size(); ++i)
    dec_logits.row(prompt.rows() + Eigen::Index(i)) =
        dec.feed_row(embed.middleRows(rest[i], 1));

  CHECK((dec_logits - logits.value()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("generation is deterministic and respects its budget") {
  Rng rng(93);
  auto cfg = tiny_lm(18);
  ParamStore<double> store;
  init_lm_params(store, cfg, 777);
  Matd pts = random_points(rng, 2, cfg.d_model);

  GenerateOptions greedy;
  greedy.max_new_tokens = 6;
  const auto a = generate_response(store, cfg, pts, {7, 8}, greedy);
  const auto b = generate_response(store, cfg, pts, {7, 8}, greedy);
  CHECK(a == b);
  CHECK(a.size() <= 6);

  Rng s1(42), s2(42), s3(43);
  GenerateOptions sample;
  sample.greedy = false;
  sample.max_new_tokens = 6;
  sample.rng = &s1;
  const auto c = generate_response(store, cfg, pts, {7, 8}, sample);
  sample.rng = &s2;
  const auto d = generate_response(store, cfg, pts, {7, 8}, sample);
  CHECK(c == d);
  sample.rng = &s3;
  (void)generate_response(store, cfg, pts, {7, 8}, sample);  // just must run
}

TEST_CASE("stage-1 freeze: tokenizer, early blocks, control-token rows") {
  ModelConfig mc;
  mc.tok = TokenizerConfig{};
  mc.tok.n_groups = 4;
  mc.tok.group_size = 3;
  mc.tok.d_group = 8;
  mc.tok.d_model = 12;
  mc.tok.codebook_size = 16;
  mc.lm = tiny_lm(20);
  ParamStore<double> store;
  init_model_params(store, mc, 999);

  apply_stage1_freeze(store, mc, 1);
  CHECK(store.at("tok.proj.w").trainable);
  CHECK(store.at("tok.codebook").trainable);
  CHECK(store.at("lm.L0.attn.wq").trainable);
  CHECK_FALSE(store.at("lm.L1.attn.wq").trainable);
  CHECK_FALSE(store.at("lm.head.w").trainable);
  CHECK_FALSE(store.at("lm.pos").trainable);
  CHECK(store.at("lm.embed").trainable);
  CHECK(store.at("lm.embed").trainable_rows ==
        std::vector<int>{Vocab::kBos, Vocab::kEos, Vocab::kPad, Vocab::kPStart,
                         Vocab::kPEnd});

  store.set_all_trainable();
  CHECK(store.at("lm.head.w").trainable);
  CHECK(store.at("lm.embed").trainable_rows.empty());
  CHECK_THROWS_AS(apply_stage1_freeze(store, mc, 7), error);
}

TEST_CASE("full model forward wires losses together") {
  Rng rng(94);
  ModelConfig mc;
  mc.tok.n_groups = 4;
  mc.tok.group_size = 3;
  mc.tok.d_group = 8;
  mc.tok.d_model = 12;
  mc.tok.codebook_size = 16;
  mc.lm = tiny_lm(20);
  mc.vq_weight = 0.5;
  ParamStore<double> store;
  init_model_params(store, mc, 1234);

  Matd cloud(30, 6);
  fill_normal(cloud, rng, 0.0, 1.0);
  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto fw = forward_sample(bind, mc, cloud, {6, 7}, {8, 9, 10});
  CHECK(fw.logits.rows() == fw.seq.length);
  CHECK(fw.total_loss.item() ==
        doctest::Approx(fw.ntp_loss.item() + 0.5 * fw.vq_loss.item())
            .epsilon(1e-12));
  CHECK(fw.codes.size() == 4);

  // Backward reaches both ends of the model.
  store.zero_grad();
  t.backward(fw.total_loss);
  bind.accumulate_grads();
  CHECK(store.at("tok.feat1.w").grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(store.at("lm.head.w").grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(store.at("tok.codebook").grad.cwiseAbs().maxCoeff() > 0.0);
  store.check_grads_finite();
}
