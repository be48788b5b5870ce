#include <gtest/gtest.h>

#include <cstring>

#include "test_util.hpp"

using namespace eans;
using eans::testing::flatten;
using eans::testing::scratch_dir;

namespace {

struct Saved {
  ModelParams<float> params;
  OptimizerState<float> opt;
  VirtualIndexMap map;
};

// A model a few Adam steps in, so the moments are non-trivial.
Saved stepped_model(ModelKind kind) {
  Saved s;
  s.params = eans::testing::random_params<float>(kind, 4, 12, 3, 21);
  s.opt = OptimizerState<float>(s.params, AdamConfig{0.01});
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int step = 0; step < 3; ++step) {
    GradAccumulator acc(s.params);
    for (int tb = 0; tb < acc.num_tables(); ++tb)
      for (std::int32_t r = 0; r < 3; ++r)
        for (auto& v : acc.row(tb, r)) v = g(rng);
    adam_step(s.opt, s.params, acc);
  }
  std::vector<EntityId> order(12);
  std::iota(order.rbegin(), order.rend(), 0);
  s.map = VirtualIndexMap::from_order(order);
  return s;
}

bool same_bits(const std::vector<float>& a, const std::vector<float>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitwise) {
  for (ModelKind k : eans::testing::kAllModels) {
    const auto s = stepped_model(k);
    const auto dir = scratch_dir("ck_roundtrip");
    CheckpointMeta meta{42, "abcdef", true, {{"best_step", "7"}}};
    save_checkpoint(dir, s.params, s.opt, meta, &s.map);
    const auto ck = load_checkpoint(dir, s.params.spec);
    EXPECT_EQ(ck.params.spec, s.params.spec);
    for (std::size_t t = 0; t < s.params.tables.size(); ++t) {
      EXPECT_TRUE(same_bits(ck.params.tables[t].data, s.params.tables[t].data));
      EXPECT_TRUE(same_bits(ck.optimizer.m[t], s.opt.m[t]));
      EXPECT_TRUE(same_bits(ck.optimizer.v[t], s.opt.v[t]));
    }
    EXPECT_EQ(ck.optimizer.step, 3);
    EXPECT_EQ(ck.optimizer.cfg.lr, 0.01);
    EXPECT_EQ(ck.meta.seed, 42u);
    EXPECT_EQ(ck.meta.config_digest, "abcdef");
    EXPECT_TRUE(ck.meta.use_substitution);
    EXPECT_EQ(ck.meta.extra.at("best_step"), "7");
    ASSERT_TRUE(ck.index_map.has_value());
    EXPECT_EQ(*ck.index_map, s.map);
  }
}

TEST(Checkpoint, NoIndexMapForUniformRuns) {
  const auto s = stepped_model(ModelKind::kDistMult);
  const auto dir = scratch_dir("ck_nomap");
  save_checkpoint(dir, s.params, s.opt, {});
  EXPECT_FALSE(load_checkpoint(dir).index_map.has_value());
  EXPECT_FALSE(std::filesystem::exists(dir / "index_map.tsv"));
}

TEST(Checkpoint, TruncatedPayloadRejected) {
  const auto s = stepped_model(ModelKind::kTransE);
  const auto dir = scratch_dir("ck_trunc");
  save_checkpoint(dir, s.params, s.opt, {});
  const auto size = std::filesystem::file_size(dir / "payload.bin");
  std::filesystem::resize_file(dir / "payload.bin", size - 4);
  try {
    load_checkpoint(dir);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("payload length mismatch"), std::string::npos);
  }
}

TEST(Checkpoint, ModelKindMismatchRejected) {
  const auto s = stepped_model(ModelKind::kTransE);
  const auto dir = scratch_dir("ck_kind");
  save_checkpoint(dir, s.params, s.opt, {});
  ModelSpec want = s.params.spec;
  want.kind = ModelKind::kRotatE;
  try {
    load_checkpoint(dir, want);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("model kind mismatch"), std::string::npos);
  }
  want = s.params.spec;
  want.num_entities += 1;
  EXPECT_THROW(load_checkpoint(dir, want), CheckpointError);
}

TEST(Checkpoint, MissingManifestRejected) {
  const auto dir = scratch_dir("ck_missing");
  EXPECT_THROW(load_checkpoint(dir), CheckpointError);
}

TEST(Config, UnknownKeyNamed) {
  RunConfig c;
  try {
    apply_config_text(c, "dim = 8\nsigma_scale = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("sigma_scale"), std::string::npos);
  }
}

TEST(Config, MalformedValuesRejected) {
  RunConfig c;
  EXPECT_THROW(apply_config_text(c, "dim = eight"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "model = hole"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "just a line"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "use_substitution = maybe"), ConfigError);
}

TEST(Config, CommentsAndWhitespace) {
  RunConfig c;
  apply_config_text(c, "# header\n  dim=  32   # trailing\n\nlr = 0.25\n");
  EXPECT_EQ(c.train.dim, 32);
  EXPECT_EQ(c.train.lr, 0.25);
}

TEST(Config, ResolvedTextReparsesIdentically) {
  RunConfig c;
  apply_preset(c, "toy-rotate");
  apply_config_text(c, "lr = 0.0123456789012345\nn_values = 2,3\nstrategies = uniform,eans\n");
  const auto text = run_config_text(c);
  RunConfig back;
  apply_config_text(back, text);
  EXPECT_EQ(run_config_text(back), text);
  EXPECT_EQ(config_digest(back.train), config_digest(c.train));
  EXPECT_EQ(back.n_values, (std::vector<int>{2, 3}));
}

TEST(Config, DigestTracksTrainingKeysOnly) {
  RunConfig a, b;
  b.out = "elsewhere";
  b.jobs = 4;
  EXPECT_EQ(config_digest(a.train), config_digest(b.train));
  b.train.seed = 1;
  EXPECT_NE(config_digest(a.train), config_digest(b.train));
}

TEST(Config, EveryDocumentedKeyIsAccepted) {
  RunConfig c;
  const auto text = run_config_text(c);
  for (const auto& k : config_keys())
    EXPECT_NE(text.find("\n" + std::string(k.key) + " = "), std::string::npos) << k.key;
}

TEST(Preset, Fb15k237TransE) {
  RunConfig c;
  apply_preset(c, "fb15k237-transe");
  const auto& t = c.train;
  EXPECT_EQ(t.model, ModelKind::kTransE);
  EXPECT_EQ(t.dim, 1000);
  EXPECT_EQ(t.batch_size, 1024);
  EXPECT_EQ(t.negatives, 256);
  EXPECT_EQ(t.lr, 5e-5);
  EXPECT_EQ(t.gamma, 9.0);
  EXPECT_EQ(t.alpha, 1.0);
  EXPECT_EQ(t.lambda1, 0.1);
  EXPECT_EQ(t.lambda2, 1.0);
  EXPECT_EQ(t.max_steps, 100000);
  EXPECT_EQ(t.strategy, Strategy::kEans);
  EXPECT_TRUE(t.use_substitution);
}

TEST(Preset, AllNamesApplyAndValidate) {
  for (const auto& name : preset_names()) {
    RunConfig c;
    apply_preset(c, name);
    EXPECT_NO_THROW(c.train.validate()) << name;
  }
  RunConfig c;
  EXPECT_THROW(apply_preset(c, "umls-transe"), ConfigError);
  EXPECT_THROW(apply_preset(c, "toy"), ConfigError);
}

TEST(Preset, TogglesResetBetweenPresets) {
  RunConfig c;
  apply_preset(c, "toy-transe");
  EXPECT_EQ(c.train.lambda1_reg, 0.001);
  apply_preset(c, "fb15k237-transe");
  EXPECT_LT(c.train.lambda1_reg, 0.0);
}
