#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace eans;
using eans::testing::kAllModels;
using eans::testing::random_batch;
using eans::testing::random_params;

namespace {

const std::vector<std::uint8_t> kNoLabels1 = {0};

LossConfig plain(double gamma = 9.0) {
  LossConfig c;
  c.gamma = gamma;
  c.lambda1 = 0;
  c.use_substitution = false;
  return c;
}

// -log s(g - f_pos) - sum_i w_i log s(f_neg_i - g), evaluated directly.
double direct_logsigmoid_loss(double f_pos, const std::vector<double>& f_neg,
                              const std::vector<double>& w, double g) {
  auto logsig = [](double x) { return -std::log1p(std::exp(-x)); };
  double l = -logsig(g - f_pos);
  for (std::size_t i = 0; i < f_neg.size(); ++i) l -= w[i] * logsig(f_neg[i] - g);
  return l;
}

}  // namespace

TEST(KgLoss, WorkedScalars) {
  const std::vector<double> fneg = {12}, fsub = {0}, w = {1};
  const std::vector<std::uint8_t> y0 = {0}, y1 = {1};
  const auto a = kg_loss(1, fneg, fsub, y0, w, plain());
  EXPECT_NEAR(a.value, 0.048923, 1e-6);
  EXPECT_NEAR(a.value, softplus(-8) + softplus(-3), 1e-15);
  const auto b = kg_loss(1, fneg, fsub, y1, w, plain());
  EXPECT_NEAR(b.value, 0.000335, 1e-6);
  EXPECT_EQ(b.d_neg[0], 0.0);
}

TEST(KgLoss, ReducesToPlainLogsigmoidLoss) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(8, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const double f_pos = g(rng);
    std::vector<double> fneg(7), fsub(7, 123.0), w(7, 1.0 / 7);
    for (auto& f : fneg) f = g(rng);
    const std::vector<std::uint8_t> y(7, 0);
    const double direct = direct_logsigmoid_loss(f_pos, fneg, w, 9.0);
    const double got = kg_loss(f_pos, fneg, fsub, y, w, plain()).value;
    EXPECT_LE(std::abs(got - direct), 1e-12 * std::abs(direct));
  }
}

TEST(KgLoss, SubstitutionDownWeight) {
  LossConfig c;
  c.gamma = 9;
  c.lambda1 = 0.5;
  const std::vector<double> fneg = {12}, fsub = {4}, w = {1};
  const auto l = kg_loss(1, fneg, fsub, kNoLabels1, w, c);
  EXPECT_NEAR(l.value, softplus(-8) + softplus(-(12 - 0.5 * 4 - 9)), 1e-15);
  EXPECT_NEAR(l.d_sub[0], -0.5 * l.d_neg[0], 1e-15);
}

TEST(KgLoss, LabelsMaskWithSubstitutionOff) {
  const std::vector<double> fneg = {12, 5}, fsub = {0, 0}, w = {0.5, 0.5};
  const std::vector<std::uint8_t> y = {1, 0};
  const auto l = kg_loss(1, fneg, fsub, y, w, plain());
  EXPECT_NEAR(l.value, softplus(-8) + 0.5 * softplus(4), 1e-15);
}

TEST(KgLoss, StableForLargeScores) {
  for (double big : {1e4, -1e4}) {
    const std::vector<double> fneg = {big, -big}, fsub = {big, -big}, w = {0.5, 0.5};
    const std::vector<std::uint8_t> y = {0, 0};
    LossConfig c;
    const auto l = kg_loss(big, fneg, fsub, y, w, c);
    EXPECT_TRUE(std::isfinite(l.value));
    EXPECT_TRUE(std::isfinite(l.d_pos));
    for (double d : l.d_neg) EXPECT_TRUE(std::isfinite(d));
    const auto s = sub_loss(fsub, y, c);
    EXPECT_TRUE(std::isfinite(s.value));
  }
}

TEST(KgLoss, NonFiniteInputRejected) {
  const std::vector<double> fneg = {std::nan("")}, fsub = {0}, w = {1};
  EXPECT_THROW(kg_loss(1, fneg, fsub, kNoLabels1, w, plain()), NumericError);
}

TEST(SubLoss, WorkedScalars) {
  LossConfig c;
  c.lambda1 = 0.1;
  c.lambda2 = 1;
  const std::vector<double> zero = {0};
  const std::vector<std::uint8_t> y1 = {1};
  EXPECT_NEAR(sub_loss(zero, y1, c).value, std::log(2.0), 1e-12);
  EXPECT_NEAR(sub_loss(zero, y1, c).value, 0.693147, 1e-6);

  const std::vector<double> zeros = {0, 0, 0};
  const std::vector<std::uint8_t> y0(3, 0);
  EXPECT_EQ(sub_loss(zeros, y0, c).value, 0.0);

  const std::vector<double> cancel = {1, -1};
  const std::vector<std::uint8_t> y00(2, 0);
  EXPECT_EQ(sub_loss(cancel, y00, c).value, 0.0);
  c.reg_mode = SubRegMode::kSumOfAbs;
  EXPECT_NEAR(sub_loss(cancel, y00, c).value, 0.2, 1e-15);
}

TEST(SubLoss, SeparateRegularizerWeight) {
  LossConfig c;
  c.lambda1 = 0.1;
  c.lambda1_reg = 0.001;
  c.lambda2 = 0;
  const std::vector<double> f = {2, 3};
  const std::vector<std::uint8_t> y(2, 0);
  EXPECT_NEAR(sub_loss(f, y, c).value, 0.005, 1e-15);
}

TEST(BatchLoss, BreakdownAndFlags) {
  std::mt19937_64 rng(1);
  const auto p = random_params(ModelKind::kTransE, 8, 5, 2, 3);
  const std::vector<Triple> pos = {{0, 0, 1}, {2, 1, 3}, {4, 0, 0}};
  const auto nb = random_batch(3, 4, 5, Side::kTail, rng);
  LossConfig c;
  c.gamma = 2;
  c.lambda1 = 0.1;
  c.lambda2 = 0.5;
  const auto on = batch_loss(p, std::span<const Triple>(pos), nb, c, nullptr);
  EXPECT_NEAR(on.total, on.kg_part + on.sub_part, 1e-12 * std::abs(on.total));
  EXPECT_GT(on.sub_part, 0.0);
  c.use_substitution = false;
  const auto off = batch_loss(p, std::span<const Triple>(pos), nb, c, nullptr);
  EXPECT_EQ(off.sub_part, 0.0);
  EXPECT_EQ(off.total, off.kg_part);
}

TEST(BatchLoss, MeanOverPositives) {
  std::mt19937_64 rng(2);
  const auto p = random_params(ModelKind::kDistMult, 4, 5, 2, 3);
  const std::vector<Triple> one = {{0, 0, 1}};
  const std::vector<Triple> two = {{0, 0, 1}, {0, 0, 1}};
  auto nb1 = random_batch(1, 3, 5, Side::kHead, rng);
  auto nb2 = nb1;
  nb2.entities.insert(nb2.entities.end(), nb1.entities.begin(), nb1.entities.end());
  nb2.labels.insert(nb2.labels.end(), nb1.labels.begin(), nb1.labels.end());
  LossConfig c;
  const auto a = batch_loss(p, std::span<const Triple>(one), nb1, c, nullptr);
  const auto b = batch_loss(p, std::span<const Triple>(two), nb2, c, nullptr);
  EXPECT_NEAR(a.total, b.total, 1e-12);
}

TEST(BatchLoss, FiniteDifferencesFullLossEveryModel) {
  for (ModelKind k : kAllModels)
    for (bool self_adv : {false, true})
      for (Side side : {Side::kHead, Side::kTail}) {
        const auto r = eans::testing::full_loss_fd_check(k, self_adv, side);
        EXPECT_LE(r.error, 1e-4) << model_name(k) << (self_adv ? " self-adv" : "");
        EXPECT_TRUE(r.substitution_touched) << model_name(k);
      }
}

TEST(BatchLoss, MaskedNegativeOnlyFeedsSubstitutionTerm) {
  const auto p = random_params(ModelKind::kTransE, 4, 5, 1, 3);
  const std::vector<Triple> pos = {{0, 0, 1}};
  NegativeBatch nb;
  nb.side = Side::kTail;
  nb.n = 1;
  nb.entities = {3};
  nb.labels = {1};
  LossConfig c;
  c.lambda1 = 0.1;
  c.lambda2 = 1.0;
  c.lambda1_reg = 0.0;
  GradAccumulator acc(p);
  batch_loss(p, std::span<const Triple>(pos), nb, c, &acc);
  // f_neg = f(0, r0, 3) shares no row with the positive except head 0 and r0;
  // the relation row r0 must only see the positive's gradient.
  GradAccumulator pos_only(p);
  const auto kg = kg_loss(score(p, pos[0]), std::vector<double>{0.0},
                          std::vector<double>{0.0}, nb.labels, std::vector<double>{1.0}, c);
  accumulate_score_grad(p, pos[0], kg.d_pos, pos_only);
  const auto a = acc.get(1, 0), b = pos_only.get(1, 0);
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-15);
  EXPECT_TRUE(acc.touched(1, 1));  // r_sub
  c.use_substitution = false;
  GradAccumulator off(p);
  batch_loss(p, std::span<const Triple>(pos), nb, c, &off);
  EXPECT_FALSE(off.touched(0, 3));  // masked negative contributes nothing
}

TEST(BatchLoss, SelfAdversarialWeightsCarryNoGradient) {
  std::mt19937_64 rng(8);
  auto p = random_params(ModelKind::kRotatE, 4, 6, 2, 5);
  const std::vector<Triple> pos = {{0, 0, 1}, {2, 1, 3}};
  const auto nb = random_batch(2, 5, 6, Side::kTail, rng, 0.0);
  LossConfig c;
  c.use_self_adv = true;
  c.use_substitution = false;
  c.gamma = 3;
  GradAccumulator live(p), frozen_acc(p);
  batch_loss(p, std::span<const Triple>(pos), nb, c, &live);
  std::vector<double> frozen;
  for (std::size_t j = 0; j < pos.size(); ++j) {
    std::vector<double> f;
    for (EntityId e : nb.row(j)) f.push_back(score(p, corrupt(pos[j], nb.side, e)));
    const auto w = self_adv_weights(f, c.alpha);
    frozen.insert(frozen.end(), w.begin(), w.end());
  }
  batch_loss(p, std::span<const Triple>(pos), nb, c, &frozen_acc, {&frozen});
  for (int tb = 0; tb < 2; ++tb)
    for (auto r : live.touched_rows(tb)) {
      const auto a = live.get(tb, r), b = frozen_acc.get(tb, r);
      for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[j], b[j]);
    }
}
