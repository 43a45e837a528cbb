#include <doctest.h>

#include "pointlm/diagnostics.hpp"

using namespace pointlm;

TEST_CASE("full-loss gradients agree with finite differences") {
  ModelConfig mc = grad_check_model();
  const FullGradCheck out = full_loss_grad_check(mc, 16, 5, 1e-5, 7);
  CHECK(out.report.entries_checked > 100);
  CHECK(out.report.max_rel_err < 1e-4);
  CHECK(out.seconds > 0.0);

  SUBCASE("continuous variant is just as clean") {
    mc.tok.quantize = false;
    const FullGradCheck c = full_loss_grad_check(mc, 16, 5, 1e-5, 7);
    CHECK(c.report.max_rel_err < 1e-4);
  }

  SUBCASE("validation rejects a starved cloud") {
    CHECK_THROWS_AS((void)full_loss_grad_check(mc, 2, 5), error);
  }
}
