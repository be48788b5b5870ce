#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"

using namespace eans;
using eans::testing::scratch_dir;
using eans::testing::write_lines;

namespace {

std::filesystem::path toy_kg(const std::string& name,
                             const std::vector<std::string>& train,
                             const std::vector<std::string>& valid = {},
                             const std::vector<std::string>& test = {}) {
  auto dir = scratch_dir(name);
  write_lines(dir / "train.txt", train);
  write_lines(dir / "valid.txt", valid);
  write_lines(dir / "test.txt", test);
  return dir;
}

}  // namespace

TEST(LoadDataset, ThreeLineToy) {
  auto dir = toy_kg("three_line", {"a\tr\tb", "b\tr\tc", "a\tr\tc"});
  const auto ds = load_dataset(dir);
  EXPECT_EQ(ds.num_entities(), 3);
  EXPECT_EQ(ds.num_relations(), 1);
  EXPECT_EQ(ds.train.size(), 3u);
  // first-appearance order
  EXPECT_EQ(ds.entities.find("a"), 0);
  EXPECT_EQ(ds.entities.find("b"), 1);
  EXPECT_EQ(ds.entities.find("c"), 2);
}

TEST(LoadDataset, TrimsSurroundingWhitespace) {
  auto dir = toy_kg("trim", {"  a \t r\t b  ", "", "b\tr\tc\r"});
  const auto ds = load_dataset(dir);
  EXPECT_EQ(ds.train.size(), 2u);
  EXPECT_GE(ds.entities.find("a"), 0);
  EXPECT_GE(ds.entities.find("c"), 0);
}

TEST(LoadDataset, EmptyTrainIsAnError) {
  auto dir = toy_kg("empty_train", {});
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty split"), std::string::npos);
  }
}

TEST(LoadDataset, MalformedLineNamesTheLine) {
  auto dir = toy_kg("malformed", {"a\tr\tb", "a r c"});
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(LoadDataset, DuplicateLineRejected) {
  auto dir = toy_kg("dup", {"a\tr\tb", "b\tr\tc", "a\tr\tb"});
  try {
    load_dataset(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate triple on line 3"),
              std::string::npos);
  }
}

TEST(LoadDataset, MissingDirectoryAndFile) {
  EXPECT_THROW(load_dataset("/nonexistent/kg"), DataError);
  auto dir = scratch_dir("missing_file");
  write_lines(dir / "train.txt", {"a\tr\tb"});
  EXPECT_THROW(load_dataset(dir), DataError);
  SplitSelection only_train{true, false, false};
  EXPECT_NO_THROW(load_dataset(dir, only_train));
}

TEST(LoadDataset, DictionaryFilesOverrideOrder) {
  auto dir = toy_kg("dict", {"a\tr\tb", "b\ts\tc"});
  write_lines(dir / "entities.dict", {"0\tc", "1\tb", "2\ta"});
  write_lines(dir / "relations.dict", {"0\ts", "1\tr"});
  const auto ds = load_dataset(dir);
  EXPECT_EQ(ds.entities.find("c"), 0);
  EXPECT_EQ(ds.entities.find("a"), 2);
  EXPECT_EQ(ds.relations.find("r"), 1);
  EXPECT_EQ(ds.train[0], (Triple{2, 1, 1}));
  EXPECT_TRUE(ds.report.entity_dict_used);
}

TEST(LoadDataset, EvalOnlyEntitiesLoadedAndReported) {
  auto dir = toy_kg("eval_only", {"a\tr\tb"}, {"a\tr\tz"}, {"q\tr2\tb"});
  const auto ds = load_dataset(dir);
  EXPECT_EQ(ds.num_entities(), 4);
  EXPECT_EQ(ds.num_relations(), 2);
  EXPECT_EQ(ds.report.eval_only_entities, (std::vector<std::string>{"z", "q"}));
  EXPECT_EQ(ds.report.eval_only_relations, (std::vector<std::string>{"r2"}));
  const auto text = ds.report.to_text();
  EXPECT_NE(text.find("eval_only_entities: 2"), std::string::npos);
  EXPECT_NE(text.find("train_triples: 1"), std::string::npos);
}

TEST(LoadDataset, RoundTripThroughNames) {
  const auto ds = load_dataset(EANS_TOY_DIR);
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest})
    for (const auto& t : ds.split(s)) {
      Triple again{ds.entities.find(ds.entities.name(t.head)),
                   ds.relations.find(ds.relations.name(t.relation)),
                   ds.entities.find(ds.entities.name(t.tail))};
      EXPECT_EQ(again, t);
    }
}

TEST(FilterIndex, Membership) {
  auto dir = toy_kg("membership", {"a\tr\tb", "a\tr\tc"}, {}, {"b\tr\tc"});
  const auto ds = load_dataset(dir);
  const EntityId a = ds.entities.find("a"), b = ds.entities.find("b"),
                 c = ds.entities.find("c");
  const RelationId r = 0;
  EXPECT_TRUE(ds.filter.contains({a, r, b}, FilterScope::kTrainOnly));
  EXPECT_FALSE(ds.filter.contains({b, r, c}, FilterScope::kTrainOnly));
  EXPECT_TRUE(ds.filter.contains({b, r, c}, FilterScope::kAllSplits));
  EXPECT_FALSE(ds.filter.contains({c, r, a}, FilterScope::kTrainOnly));
  EXPECT_FALSE(ds.filter.contains({c, r, a}, FilterScope::kAllSplits));
}

TEST(FilterIndex, CandidateViews) {
  auto dir = toy_kg("candidates", {"a\tr\tb", "a\tr\tc"});
  const auto ds = load_dataset(dir);
  const EntityId a = ds.entities.find("a"), b = ds.entities.find("b"),
                 c = ds.entities.find("c");
  auto tails = ds.filter.known_tails(a, 0);
  EXPECT_EQ(std::set<EntityId>(tails.begin(), tails.end()), (std::set<EntityId>{b, c}));
  EXPECT_TRUE(ds.filter.known_tails(c, 0).empty());
  auto heads = ds.filter.known_heads(0, c);
  EXPECT_EQ(std::set<EntityId>(heads.begin(), heads.end()), (std::set<EntityId>{a}));
}

TEST(FilterIndex, ConsistentWithSplitsOnToy) {
  const auto ds = load_dataset(EANS_TOY_DIR);
  std::size_t total = 0;
  for (Split s : {Split::kTrain, Split::kValid, Split::kTest}) {
    total += ds.split(s).size();
    for (const auto& t : ds.split(s)) {
      EXPECT_TRUE(ds.filter.contains(t, FilterScope::kAllSplits));
      EXPECT_EQ(ds.filter.contains(t, FilterScope::kTrainOnly), s == Split::kTrain);
    }
  }
  std::size_t grouped = 0;
  for (EntityId h = 0; h < ds.num_entities(); ++h)
    for (RelationId r = 0; r < ds.num_relations(); ++r)
      grouped += ds.filter.known_tails(h, r).size();
  EXPECT_EQ(grouped, total);
  EXPECT_EQ(ds.filter.size(FilterScope::kAllSplits), total);
}

TEST(ToyDataset, ShapeMatchesDeskScale) {
  const auto ds = load_dataset(EANS_TOY_DIR);
  EXPECT_GE(ds.num_entities(), 100);
  EXPECT_LE(ds.num_entities(), 150);
  EXPECT_GE(ds.train.size(), 4000u);
  EXPECT_TRUE(ds.report.eval_only_entities.empty());
}
