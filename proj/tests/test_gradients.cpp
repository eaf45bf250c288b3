#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tartan/error.hpp"

namespace tartan {
namespace {

constexpr double kTol = 1e-4;

struct Shape {
  std::size_t items;
  std::size_t negatives;
};

class GradientShapes : public ::testing::TestWithParam<Shape> {};

TEST_P(GradientShapes, DualMatchesCentralDifferences) {
  const auto shape = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(seed, "grad.dual"));
    const auto params = DualParams::init(4096, 8, 0.05, seed);
    const auto batch = oracle::random_dual_batch(rng, shape.items, shape.negatives);
    const auto check = oracle::check_dual_gradient(params, batch, seed);
    EXPECT_GT(check.checked, 0u);
    EXPECT_LT(check.worst, kTol) << "seed " << seed;
  }
}

TEST_P(GradientShapes, CrossMatchesCentralDifferences) {
  const auto shape = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(seed, "grad.cross"));
    const auto params = CrossParams::init(4096, 8, 6, seed);
    const auto batch = oracle::random_cross_batch(rng, shape.items * (shape.negatives + 1));
    const auto check = oracle::check_cross_gradient(params, batch, seed);
    EXPECT_GT(check.checked, 0u);
    EXPECT_LT(check.worst, kTol) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, GradientShapes,
                         ::testing::Values(Shape{1, 1}, Shape{3, 2}, Shape{6, 4}));

TEST(DualLoss, SingleItemMatchesHandSoftmax) {
  const auto params = DualParams::init(1024, 4, 0.5, 7);
  DualBatch batch;
  const Document pos{"p", std::nullopt, "alpha beta", "c"};
  const Document neg{"n", std::nullopt, "gamma", "c"};
  const Query q{"q", "alpha", "t"};
  batch.items.push_back({NoInstruction{}, q, pos, {neg}});
  const double sp = score_dual(params, NoInstruction{}, q, pos) / 0.5;
  const double sn = score_dual(params, NoInstruction{}, q, neg) / 0.5;
  const double expected = -sp + std::log(std::exp(sp) + std::exp(sn));
  EXPECT_NEAR(dual_loss_grad(params, batch).loss, expected, 1e-10);
}

TEST(DualLoss, PositiveListedAsNegativeIsRejected) {
  const auto params = DualParams::init(1024, 4, 0.05, 1);
  DualBatch batch;
  const Document pos{"p", std::nullopt, "alpha", "c"};
  batch.items.push_back({NoInstruction{}, Query{"q", "alpha", "t"}, pos, {pos}});
  try {
    dual_loss_grad(params, batch);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "conflicting_labels");
  }
}

TEST(CrossLoss, MatchesHandBinaryCrossEntropy) {
  const auto params = CrossParams::init(1024, 4, 3, 3);
  CrossBatch batch;
  const Query q{"q", "alpha", "t"};
  const Document d1{"a", std::nullopt, "alpha beta", "c"};
  const Document d2{"b", std::nullopt, "delta", "c"};
  batch.items.push_back({NoInstruction{}, q, d1, 1});
  batch.items.push_back({NoInstruction{}, q, d2, 0});
  const double p1 = score_cross(params, NoInstruction{}, q, d1);
  const double p2 = score_cross(params, NoInstruction{}, q, d2);
  const double expected = -(std::log(p1) + std::log(1.0 - p2)) / 2.0;
  EXPECT_NEAR(cross_loss_grad(params, batch).loss, expected, 1e-10);
}

}  // namespace
}  // namespace tartan
