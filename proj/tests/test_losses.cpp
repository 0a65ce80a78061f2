#include <gtest/gtest.h>

#include <cmath>

#include "rainsr/error.hpp"
#include "rainsr/losses.hpp"
#include "support.hpp"

using namespace rainsr;
using rainsr::testing::random_tensor;

TEST(LossAdvLs, Examples) {
  EXPECT_EQ(loss_adv_ls(Tensor<float>({2, 1, 3, 3}, 1.0f), Target::real).value, 0.0);
  EXPECT_EQ(loss_adv_ls(Tensor<float>({2, 1, 3, 3}, 0.0f), Target::real).value, 1.0);
  EXPECT_EQ(loss_adv_ls(Tensor<float>({1, 1, 4, 4}, 0.5f), Target::real).value, 0.25);
  EXPECT_EQ(loss_adv_ls(Tensor<float>({1, 1, 4, 4}, 0.0f), Target::fake).value, 0.0);
}

TEST(LossAdvLs, MatchesDirectSumAndGradient) {
  const auto d = random_tensor<float>({2, 1, 3, 5}, 1, -2.0, 2.0);
  double acc = 0.0;
  for (float v : d.values()) acc += (double(v) - 1.0) * (double(v) - 1.0);
  const LossValue l = loss_adv_ls(d, Target::real);
  EXPECT_NEAR(l.value, acc / d.size(), 1e-12);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_NEAR(l.grad[i], 2.0 * (d[i] - 1.0) / d.size(), 1e-7);
}

TEST(LossL1, Examples) {
  const auto a = random_tensor<float>({1, 3, 4, 4}, 2);
  EXPECT_EQ(loss_l1(a, a).value, 0.0);
  const LossValue same = loss_l1(a, a);
  for (float g : same.grad.values()) EXPECT_EQ(g, 0.0f);
  EXPECT_EQ(loss_l1(Tensor<float>({1, 3, 2, 2}, 0.0f), Tensor<float>({1, 3, 2, 2}, 1.0f)).value, 1.0);
  Tensor<float> x({1, 1, 1, 2});
  Tensor<float> y({1, 1, 1, 2});
  x[0] = 0.0f;
  x[1] = 0.5f;
  y[0] = 1.0f;
  y[1] = 0.5f;
  const LossValue l = loss_l1(x, y);
  EXPECT_EQ(l.value, 0.5);
  EXPECT_EQ(l.grad[0], -0.5f);
  EXPECT_EQ(l.grad[1], 0.0f);
}

TEST(LossL1, ShapeMismatchThrows) {
  EXPECT_THROW(loss_l1(Tensor<float>({1, 3, 2, 2}), Tensor<float>({1, 3, 2, 3})), DimensionError);
}

TEST(LossL1, SymmetricAndNonNegative) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto a = random_tensor<float>({2, 3, 5, 4}, 10 + s);
    const auto b = random_tensor<float>({2, 3, 5, 4}, 50 + s);
    EXPECT_EQ(loss_l1(a, b).value, loss_l1(b, a).value);
    EXPECT_GE(loss_l1(a, b).value, 0.0);
  }
}

TEST(LossRecord, OrderAndLookup) {
  LossRecord r;
  r.set("b", 2.0);
  r.set("a", 1.0);
  r.set("b", 3.0);
  ASSERT_EQ(r.terms().size(), 2u);
  EXPECT_EQ(r.terms()[0].first, "b");
  EXPECT_EQ(r.get("b"), 3.0);
  EXPECT_TRUE(r.has("a"));
  EXPECT_FALSE(r.has("c"));
  EXPECT_THROW(r.get("c"), Error);
}

TEST(LossRecord, NonFiniteTermIsNamed) {
  LossRecord r;
  r.set("loss_ok", 0.5);
  r.set("loss_bad", std::nan(""));
  try {
    r.require_finite("stage");
    FAIL();
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("loss_bad"), std::string::npos);
  }
}
