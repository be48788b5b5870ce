#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace eans;
using eans::testing::make_dataset;

TEST(SampleUniform, TwoEntitiesForced) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_uniform(2, 0, rng), 1);
}

TEST(SampleUniform, NeverPositive) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 100000; ++i) ASSERT_NE(sample_uniform(14541, 77, rng), 77);
}

TEST(SampleUniform, RejectsSingleEntity) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(sample_uniform(1, 0, rng), ConfigError);
}

TEST(SampleUniform, ChiSquareUniformity) {
  EXPECT_GT(eans::testing::uniform_p_value(14541, 1000000, 100, 11), 0.01);
}

TEST(SampleEans, ChiSquareWrappedRoundedGaussian) {
  EXPECT_GT(eans::testing::eans_offset_p_value(14541, 290.82, 1000000, 50, 12), 0.01);
}

TEST(SampleEans, ChiSquareDetectsWrongSigma) {
  // the same test must reject a sampler that is off by 10% in sigma
  const std::int32_t n = 14541;
  auto map = VirtualIndexMap::identity(n);
  std::mt19937_64 rng(3);
  std::vector<double> offsets;
  boost::math::normal unit;
  std::vector<double> observed(50, 0), expected(50, 1000000.0 / 50);
  for (int i = 0; i < 1000000; ++i) {
    const double o = map.real_to_virt[sample_eans(map, 5000, 290.82 * 1.1, rng)] - 5000.0;
    const double u = boost::math::cdf(unit, (o + 0.5) / 290.82);
    observed[std::min(49, static_cast<int>(u * 50))] += 1;
  }
  EXPECT_LT(eans::testing::chi_square_p(observed, expected), 0.01);
}

TEST(NegativeBatch, ForcedFalseNegativeLabelled) {
  // two entities, (0, r, 1) and (1, r, 1) in train: corrupting the head of
  // (0, r, 1) can only produce (1, r, 1), a train triple
  const auto ds = make_dataset(2, 1, {{0, 0, 1}, {1, 0, 1}});
  std::mt19937_64 rng(1);
  const std::vector<Triple> pos = {{0, 0, 1}};
  const auto nb = build_negative_batch(std::span<const Triple>(pos), 0,
                                       {Strategy::kUniform, 1, 0}, nullptr, 2,
                                       ds.filter, rng);
  EXPECT_EQ(nb.side, Side::kHead);
  EXPECT_EQ(nb.entities, (std::vector<EntityId>{1}));
  EXPECT_EQ(nb.labels, (std::vector<std::uint8_t>{1}));
}

TEST(NegativeBatch, AlternatesSides) {
  EXPECT_EQ(corruption_side(0), Side::kHead);
  EXPECT_EQ(corruption_side(1), Side::kTail);
  EXPECT_EQ(corruption_side(1000), Side::kHead);
}

TEST(NegativeBatch, LabelsAgreeWithMembershipRecheck) {
  const auto ds = load_dataset(EANS_TOY_DIR);
  std::mt19937_64 rng(5);
  std::vector<Triple> pos(ds.train.begin(), ds.train.begin() + 256);
  const auto map = VirtualIndexMap::identity(ds.num_entities());
  for (Strategy s : {Strategy::kUniform, Strategy::kEans})
    for (int b = 0; b < 2; ++b) {
      const auto nb = build_negative_batch(std::span<const Triple>(pos), b,
                                           {s, 16, 5.0}, &map, ds.num_entities(),
                                           ds.filter, rng);
      std::set<std::tuple<int, int, int>> train;
      for (const auto& t : ds.train) train.insert({t.head, t.relation, t.tail});
      std::size_t fn = 0;
      for (std::size_t j = 0; j < pos.size(); ++j)
        for (int i = 0; i < 16; ++i) {
          const EntityId e = nb.row(j)[i];
          const Triple c = corrupt(pos[j], nb.side, e);
          // exactly the corrupted slot differs
          EXPECT_NE(e, corrupted_slot(pos[j], nb.side));
          EXPECT_EQ(c.relation, pos[j].relation);
          if (nb.side == Side::kHead) EXPECT_EQ(c.tail, pos[j].tail);
          else EXPECT_EQ(c.head, pos[j].head);
          const bool member = train.contains({c.head, c.relation, c.tail});
          EXPECT_EQ(nb.row_labels(j)[i], member ? 1 : 0);
          fn += member;
        }
      if (s == Strategy::kEans) EXPECT_GT(fn, 0u);
    }
}

TEST(NegativeBatch, StrategyIsolation) {
  const auto ds = load_dataset(EANS_TOY_DIR);
  std::vector<Triple> pos(ds.train.begin(), ds.train.begin() + 64);
  const auto id = VirtualIndexMap::identity(ds.num_entities());
  std::vector<EntityId> order(id.virt_to_real.rbegin(), id.virt_to_real.rend());
  const auto rev = VirtualIndexMap::from_order(order);
  auto draw = [&](Strategy s, const VirtualIndexMap& m) {
    std::mt19937_64 rng(9);
    return build_negative_batch(std::span<const Triple>(pos), 1, {s, 8, 4.0}, &m,
                                ds.num_entities(), ds.filter, rng)
        .entities;
  };
  EXPECT_EQ(draw(Strategy::kUniform, id), draw(Strategy::kUniform, rev));
  EXPECT_NE(draw(Strategy::kEans, id), draw(Strategy::kEans, rev));
}

TEST(NegativeBatch, EansRequiresMapAndSigma) {
  const auto ds = make_dataset(3, 1, {{0, 0, 1}});
  std::mt19937_64 rng(1);
  const std::vector<Triple> pos = {{0, 0, 1}};
  EXPECT_THROW(build_negative_batch(std::span<const Triple>(pos), 0,
                                    {Strategy::kEans, 1, 1.0}, nullptr, 3, ds.filter, rng),
               ConfigError);
  const auto m = VirtualIndexMap::identity(3);
  EXPECT_THROW(build_negative_batch(std::span<const Triple>(pos), 0,
                                    {Strategy::kEans, 1, 0.0}, &m, 3, ds.filter, rng),
               ConfigError);
  EXPECT_THROW(build_negative_batch(std::span<const Triple>(pos), 0,
                                    {Strategy::kUniform, 0, 0.0}, nullptr, 3, ds.filter, rng),
               ConfigError);
}

TEST(NegativeBatch, FullScaleShape) {
  // b = 1024, n = 256 over a 14541-entity index space
  const std::int32_t n_ent = 14541;
  std::mt19937_64 trng(1);
  auto triples = eans::testing::random_triples(n_ent, 237, 1024, trng);
  const auto ds = make_dataset(n_ent, 237, triples);
  const auto map = VirtualIndexMap::identity(n_ent);
  std::mt19937_64 rng(2);
  const auto nb = build_negative_batch(std::span<const Triple>(triples), 0,
                                       {Strategy::kEans, 256, 290.82}, &map, n_ent,
                                       ds.filter, rng);
  EXPECT_EQ(nb.entities.size(), 1024u * 256u);
  EXPECT_EQ(nb.labels.size(), 1024u * 256u);
}

TEST(SelfAdvWeights, Examples) {
  const std::vector<double> same = {1, 1};
  EXPECT_EQ(self_adv_weights(same, 2.5), (std::vector<double>{0.5, 0.5}));
  const std::vector<double> f = {0, std::log(3.0)};
  const auto w = self_adv_weights(f, 1.0);
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
  const std::vector<double> g = {3, -2, 7};
  for (double x : self_adv_weights(g, 0.0)) EXPECT_DOUBLE_EQ(x, 1.0 / 3);
}

TEST(SelfAdvWeights, SumToOneInUnitInterval) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> big(0, 1e3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> f(17);
    for (auto& v : f) v = big(rng);
    const auto w = self_adv_weights(f, 0.7);
    double s = 0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}
