#include <doctest.h>

#include "pointlm/optim.hpp"
#include "pointlm/rng.hpp"

using namespace pointlm;

TEST_CASE("warmup-cosine schedule hits its anchor points exactly") {
  auto s = WarmupCosineSchedule::make(4e-4, 1000, 0.03);
  CHECK(s.warmup_steps == 30);
  CHECK(s.at(0) == 0.0);
  CHECK(s.at(30) == doctest::Approx(4e-4).epsilon(1e-15));
  CHECK(std::abs(s.at(1000)) < 1e-19);
  // Linear through warmup, monotone non-increasing after it.
  CHECK(s.at(15) == doctest::Approx(2e-4).epsilon(1e-12));
  for (long long t = 31; t <= 1000; ++t) CHECK(s.at(t) <= s.at(t - 1) + 1e-18);
  // Clamps outside the schedule.
  CHECK(s.at(-5) == 0.0);
  CHECK(s.at(2000) == s.at(1000));
}

TEST_CASE("schedule degenerate cases") {
  auto all_warmup = WarmupCosineSchedule::make(1e-3, 10, 1.0);
  CHECK(all_warmup.at(10) == doctest::Approx(1e-3));
  auto tiny = WarmupCosineSchedule::make(1e-3, 1, 0.0);
  CHECK(tiny.warmup_steps == 1);  // floor of one step keeps at() finite
  CHECK_THROWS_AS(WarmupCosineSchedule::make(1e-3, 0, 0.03), error);
}

TEST_CASE("single AdamW step matches hand-computed values") {
  // One 1x2 parameter, g = [1, -2], all state zero. With lr=0.1, beta1=0.9,
  // beta2=0.999, eps=1e-8, decay off:
  //   m = 0.1*g, v = 0.001*g^2, mhat = g, vhat = g^2
  //   w -= lr * g / (|g| + eps)  ->  w0 = 1 - 0.1*(1/(1+1e-8))
  ParamStore<double> store;
  Matd w(1, 2);
  w << 1.0, 1.0;
  auto& p = store.add("w", w, /*decay=*/false);
  p.grad << 1.0, -2.0;

  AdamWConfig cfg;
  AdamW<double> opt(cfg);
  opt.step(store, 0.1);

  CHECK(p.value(0, 0) == doctest::Approx(1.0 - 0.1 * (1.0 / (1.0 + 1e-8)))
                             .epsilon(1e-14));
  CHECK(p.value(0, 1) == doctest::Approx(1.0 + 0.1 * (2.0 / (2.0 + 1e-8)))
                             .epsilon(1e-14));
  CHECK(p.m(0, 0) == doctest::Approx(0.1).epsilon(1e-14));
  CHECK(p.v(0, 1) == doctest::Approx(0.004).epsilon(1e-14));
}

TEST_CASE("decoupled decay shrinks the value before the Adam step") {
  ParamStore<double> store;
  Matd w(1, 1);
  w << 2.0;
  auto& p = store.add("w", w, /*decay=*/true);
  p.grad << 0.0;  // isolate the decay term

  AdamWConfig cfg;
  cfg.weight_decay = 0.05;
  AdamW<double> opt(cfg);
  opt.step(store, 0.1);
  // Zero gradient -> pure decay: w *= (1 - lr*wd)
  CHECK(p.value(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.05)));
}

TEST_CASE("frozen tensors and row-restricted tensors update as configured") {
  ParamStore<double> store;
  auto& frozen = store.add("frozen", Matd::Ones(2, 2), true);
  frozen.trainable = false;
  frozen.grad.setConstant(5.0);

  auto& partial = store.add("partial", Matd::Ones(4, 2), false);
  partial.trainable_rows = {1, 3};
  partial.grad.setConstant(1.0);

  AdamW<double> opt;
  opt.step(store, 0.01);

  CHECK((frozen.value.array() == 1.0).all());
  CHECK(partial.value(0, 0) == 1.0);
  CHECK(partial.value(2, 1) == 1.0);
  CHECK(partial.value(1, 0) < 1.0);
  CHECK(partial.value(3, 1) < 1.0);
}

TEST_CASE("gradient accumulation across tapes then one step is a batch") {
  // Two "samples" contribute grads 1 and 3; after the step the moment state
  // must reflect their sum, not either alone.
  ParamStore<double> store;
  auto& p = store.add("w", Matd::Zero(1, 1), false);
  store.zero_grad();
  p.grad(0, 0) += 1.0;
  p.grad(0, 0) += 3.0;
  AdamW<double> opt;
  opt.step(store, 0.1);
  CHECK(p.m(0, 0) == doctest::Approx(0.4));
  CHECK(store.params()[0].grad(0, 0) == 4.0);  // step does not clear grads
}

TEST_CASE("non-finite gradients are reported with the tensor name") {
  ParamStore<double> store;
  auto& p = store.add("w", Matd::Zero(1, 1), false);
  p.grad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    store.check_grads_finite();
    FAIL("expected numeric_error");
  } catch (const numeric_error& e) {
    CHECK(std::string(e.what()).find("'w'") != std::string::npos);
  }
}
