#include <doctest.h>

#include "oracles.hpp"
#include "pointlm/gradcheck.hpp"
#include "pointlm/model.hpp"

using namespace pointlm;

namespace {

Matd random_cloud(Rng& rng, int n) {
  Matd c(n, 6);
  fill_normal(c, rng, 0.0, 1.0);
  c.rightCols(3) = c.rightCols(3).cwiseAbs();
  return c;
}

TokenizerConfig tiny_cfg() {
  TokenizerConfig cfg;
  cfg.n_groups = 4;
  cfg.group_size = 3;
  cfg.d_group = 8;
  cfg.d_model = 10;
  cfg.codebook_size = 16;
  return cfg;
}

}  // namespace

TEST_CASE("nearest code search matches the exhaustive reference") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    Matd h(5 + Eigen::Index(rng.uniform_index(10)), 7);
    fill_normal(h, rng, 0.0, 1.0);
    Matd cb(1 + Eigen::Index(rng.uniform_index(64)), 7);
    fill_normal(cb, rng, 0.0, 1.0);
    REQUIRE(nearest_codes(h, cb) == oracles::nearest_code_reference(h, cb));
  }
}

TEST_CASE("nearest code ties resolve to the lowest index") {
  Matd h(1, 2);
  h << 0.0, 0.0;
  Matd cb(3, 2);
  cb << 1.0, 0.0, -1.0, 0.0, 1.0, 0.0;  // rows 0 and 2 identical
  const auto codes = nearest_codes(h, cb);
  CHECK(codes == std::vector<int>{0});
  CHECK(nearest_codes(h, cb) == oracles::nearest_code_reference(h, cb));
}

TEST_CASE("codebook utilization is distinct over size") {
  CHECK(codebook_utilization({3, 3, 3, 3}, 256) == doctest::Approx(1.0 / 256));
  CHECK(codebook_utilization({0, 1, 2, 1}, 4) == doctest::Approx(0.75));
  CHECK_THROWS_AS((void)codebook_utilization({9}, 4), error);
}

TEST_CASE("quantizer penalty: (1+beta) * mean squared gap, split gradients") {
  Rng rng(62);
  auto cfg = tiny_cfg();
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 77);
  Matd cloud = random_cloud(rng, 24);

  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto out = tokenize_cloud(bind, cfg, cloud);

  // Both penalty terms measure the same squared gap; only the gradient
  // routing differs. So the value collapses to (1 + beta) * mse.
  const Matd& h = out.pre_quant.value();
  Matd q(h.rows(), h.cols());
  for (Eigen::Index r = 0; r < h.rows(); ++r)
    q.row(r) = store.at(tok_names::kCodebook)
                   .value.row(out.codes[std::size_t(r)]);
  const double gap = (h - q).array().square().mean();
  CHECK(out.vq_loss.item() ==
        doctest::Approx((1.0 + cfg.commitment_beta) * gap).epsilon(1e-12));

  // Backward of the penalty alone: the encoder side arrives scaled by beta,
  // the codebook side unscaled.
  store.zero_grad();
  t.backward(out.vq_loss);
  bind.accumulate_grads();
  const Matd dH = t.grad(out.pre_quant);
  const Matd want_dH = cfg.commitment_beta * 2.0 / double(h.size()) * (h - q);
  CHECK((dH - want_dH).cwiseAbs().maxCoeff() < 1e-14);

  Matd want_dCB = Matd::Zero(cfg.codebook_size, cfg.d_model);
  for (Eigen::Index r = 0; r < h.rows(); ++r)
    want_dCB.row(out.codes[std::size_t(r)]) +=
        2.0 / double(h.size()) * (q.row(r) - h.row(r));
  CHECK((store.at(tok_names::kCodebook).grad - want_dCB).cwiseAbs().maxCoeff() <
        1e-14);
}

TEST_CASE("straight-through routes downstream gradients to the encoder") {
  Rng rng(63);
  auto cfg = tiny_cfg();
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 78);
  Matd cloud = random_cloud(rng, 20);
  Matd target(cfg.n_groups, cfg.d_model);
  fill_normal(target, rng, 0.0, 1.0);

  // Downstream loss only (the penalty is left out of backward on purpose).
  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto out = tokenize_cloud(bind, cfg, cloud);
  auto loss = t.mse_vs_const(out.tokens, target);
  store.zero_grad();
  t.backward(loss);
  bind.accumulate_grads();

  CHECK(store.at(tok_names::kProjW).grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(store.at(tok_names::kCodebook).grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("straight-through can optionally feed the codebook too") {
  Rng rng(64);
  auto cfg = tiny_cfg();
  cfg.codebook_from_downstream = true;
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 78);
  Matd cloud = random_cloud(rng, 20);
  Matd target(cfg.n_groups, cfg.d_model);
  fill_normal(target, rng, 0.0, 1.0);

  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto out = tokenize_cloud(bind, cfg, cloud);
  auto loss = t.mse_vs_const(out.tokens, target);
  store.zero_grad();
  t.backward(loss);
  bind.accumulate_grads();

  CHECK(store.at(tok_names::kProjW).grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(store.at(tok_names::kCodebook).grad.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("exact-local mode sends downstream gradients into the codebook only") {
  Rng rng(65);
  auto cfg = tiny_cfg();
  cfg.gradient_mode = QuantGradientMode::kExactLocal;
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 79);
  Matd cloud = random_cloud(rng, 20);
  Matd target(cfg.n_groups, cfg.d_model);
  fill_normal(target, rng, 0.0, 1.0);

  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto out = tokenize_cloud(bind, cfg, cloud);
  auto loss = t.mse_vs_const(out.tokens, target);
  store.zero_grad();
  t.backward(loss);
  bind.accumulate_grads();

  CHECK(store.at(tok_names::kCodebook).grad.cwiseAbs().maxCoeff() > 0.0);
  CHECK(store.at(tok_names::kProjW).grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tokens come out [n_groups, d_model] for every pooling") {
  Rng rng(66);
  Matd cloud = random_cloud(rng, 30);
  for (Pooling p : {Pooling::kMax, Pooling::kAvg, Pooling::kAttn}) {
    auto cfg = tiny_cfg();
    cfg.pooling = p;
    ParamStore<double> store;
    init_tokenizer_params(store, cfg, 6, 80);
    Tape<double> t;
    TapeBinding<double> bind(t, store);
    auto out = tokenize_cloud(bind, cfg, cloud);
    CHECK(out.tokens.rows() == cfg.n_groups);
    CHECK(out.tokens.cols() == cfg.d_model);
    CHECK(out.codes.size() == std::size_t(cfg.n_groups));
  }
}

TEST_CASE("tokenization is deterministic for a fixed start") {
  Rng rng(67);
  auto cfg = tiny_cfg();
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 81);
  Matd cloud = random_cloud(rng, 40);

  Tape<double> t1, t2;
  TapeBinding<double> b1(t1, store), b2(t2, store);
  auto o1 = tokenize_cloud(b1, cfg, cloud, 3);
  auto o2 = tokenize_cloud(b2, cfg, cloud, 3);
  CHECK(o1.codes == o2.codes);
  CHECK((o1.tokens.value() - o2.tokens.value()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("continuous variant: raw projections, zero penalty, no codes") {
  Rng rng(68);
  auto cfg = tiny_cfg();
  cfg.quantize = false;
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 82);
  Matd cloud = random_cloud(rng, 25);

  Tape<double> t;
  TapeBinding<double> bind(t, store);
  auto out = tokenize_cloud(bind, cfg, cloud);
  CHECK(out.codes.empty());
  CHECK(out.vq_loss.item() == 0.0);
  CHECK((out.tokens.value() - out.pre_quant.value()).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("tokenizer gradients agree with finite differences (exact-local)") {
  Rng rng(69);
  auto cfg = tiny_cfg();
  cfg.gradient_mode = QuantGradientMode::kExactLocal;
  cfg.pooling = Pooling::kAttn;  // exercise the extra parameter too
  ParamStore<double> store;
  init_tokenizer_params(store, cfg, 6, 83);
  Matd cloud = random_cloud(rng, 18);
  Matd target(cfg.n_groups, cfg.d_model);
  fill_normal(target, rng, 0.0, 1.0);

  // Capture the stop-gradient operands once at the linearization point; the
  // FD probes then differentiate the same frozen function the tape does.
  QuantPin<double> pin;
  {
    Tape<double> t;
    TapeBinding<double> bind(t, store);
    pin = capture_quant_pin(tokenize_cloud(bind, cfg, cloud), store);
  }

  auto loss_fn = [&](bool need_grad) {
    Tape<double> t;
    TapeBinding<double> bind(t, store);
    auto out = tokenize_cloud(bind, cfg, cloud, 0, &pin);
    auto loss =
        t.add(t.mse_vs_const(out.tokens, target), t.scale(out.vq_loss, 0.5));
    if (need_grad) {
      store.zero_grad();
      t.backward(loss);
      bind.accumulate_grads();
    }
    return double(loss.item());
  };
  auto report = check_gradients(store, loss_fn, 1e-5);
  CHECK(report.max_rel_err < 1e-4);
}
