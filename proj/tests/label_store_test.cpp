#include <gtest/gtest.h>

#include <sstream>

#include "plud/label_store.hpp"
#include "plud/rng.hpp"

using namespace plud;

namespace {

LabelStore store_with(std::initializer_list<const char*> ids) {
  LabelStore s;
  for (const char* id : ids) s.add_item(id);
  return s;
}

}  // namespace

TEST(LabelStore, ExpertLabelShadowsLaterMachineLabels) {
  auto s = store_with({"a"});
  s.assign("a", "arm", Provenance::kManual, 1.0, 0);
  const auto& rec = s.assign("a", "hand", Provenance::kSelfTrained, 0.97, 1);
  EXPECT_TRUE(rec.shadowed);
  EXPECT_EQ(s.active("a")->label, "arm");
  EXPECT_EQ(s.history().size(), 2u);
}

TEST(LabelStore, MachineLabelIsReplacedByExpertLabel) {
  auto s = store_with({"a"});
  s.assign("a", "hand", Provenance::kPredicted, 0.4, 1);
  s.assign("a", "arm", Provenance::kClusterMajority, 1.0, 1);
  EXPECT_EQ(s.active("a")->label, "arm");
  EXPECT_EQ(s.active("a")->provenance, Provenance::kClusterMajority);
}

TEST(LabelStore, LaterExpertLabelWins) {
  auto s = store_with({"a"});
  s.assign("a", "arm", Provenance::kClusterMajority, 1.0, 0);
  s.assign("a", "hand", Provenance::kManual, 1.0, 2);
  EXPECT_EQ(s.active("a")->label, "hand");
}

TEST(LabelStore, RejectsInvalidAssignments) {
  auto s = store_with({"a"});
  EXPECT_THROW(s.assign("zzz", "arm", Provenance::kManual, 1.0, 0), NotFound);
  EXPECT_THROW(s.assign("a", "", Provenance::kManual, 1.0, 0), InvalidArgument);
  EXPECT_THROW(s.assign("a", "arm", Provenance::kSelfTrained, 1.5, 0), InvalidArgument);
  EXPECT_THROW(s.assign("a", "arm", Provenance::kManual, 0.9, 0), InvalidArgument);
  EXPECT_TRUE(s.history().empty());
}

TEST(LabelStore, RegistryGrowsInFirstSeenOrder) {
  auto s = store_with({"a", "b", "c"});
  s.assign("a", "torso", Provenance::kManual, 1.0, 0);
  s.assign("b", "arm", Provenance::kManual, 1.0, 0);
  s.assign("c", "torso", Provenance::kManual, 1.0, 0);
  EXPECT_EQ(s.registry().names(), (std::vector<std::string>{"torso", "arm"}));
  EXPECT_EQ(s.registry().index_of("arm"), 1u);
}

TEST(LabelStore, FiltersActiveLabels) {
  auto s = store_with({"a", "b", "c"});
  s.assign("a", "arm", Provenance::kManual, 1.0, 0);
  s.assign("b", "arm", Provenance::kSelfTrained, 0.95, 1);
  s.assign("c", "leg", Provenance::kSelfTrained, 0.92, 2);
  EXPECT_EQ(s.active_labels().size(), 3u);
  EXPECT_EQ(s.active_labels(std::set<Provenance>{Provenance::kSelfTrained}).size(), 2u);
  EXPECT_EQ(s.active_labels(std::nullopt, IterationRange{1, 1}).size(), 1u);
  EXPECT_EQ(s.active_labels(std::set<Provenance>{Provenance::kSelfTrained}, IterationRange{2, 5}).front().item_id, "c");
}

// Randomized operation sequences: no machine label is ever active over an
// expert label, and the active label always equals the last non-shadowed
// record computed independently from the history.
TEST(LabelStore, PrecedenceHoldsOverRandomOperationSequences) {
  const std::vector<std::string> ids{"i0", "i1", "i2", "i3", "i4"};
  const std::vector<std::string> labels{"arm", "hand", "foot"};
  const Provenance provs[] = {Provenance::kManual, Provenance::kClusterMajority, Provenance::kSelfTrained,
                              Provenance::kPredicted};
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    LabelStore s;
    for (const auto& id : ids) s.add_item(id);
    std::map<std::string, bool> has_expert;
    auto rng = make_rng(seed, "ops");
    for (int step = 0; step < 40; ++step) {
      const auto& id = ids[uniform_index(rng, ids.size())];
      const auto prov = provs[uniform_index(rng, 4)];
      const double conf = is_expert(prov) ? 1.0 : uniform01(rng);
      s.assign(id, labels[uniform_index(rng, labels.size())], prov, conf, static_cast<std::uint32_t>(step));
      has_expert[id] = has_expert[id] || is_expert(prov);
      const auto active = s.active(id);
      ASSERT_TRUE(active);
      if (has_expert[id]) {
        ASSERT_TRUE(is_expert(active->provenance)) << "seed " << seed << " step " << step;
      }
    }
    for (const auto& id : ids) {
      std::optional<LabelAssignment> expected;
      for (const auto& rec : s.history()) {
        if (rec.item_id == id && !rec.shadowed) expected = rec;
      }
      const auto active = s.active(id);
      ASSERT_EQ(active.has_value(), expected.has_value());
      if (active) {
        EXPECT_EQ(active->label, expected->label);
        EXPECT_EQ(active->provenance, expected->provenance);
      }
    }
  }
}

TEST(LabelStore, ExportImportRoundTripIsExact) {
  auto s = store_with({"a", "b", "c"});
  s.assign("a", "arm", Provenance::kManual, 1.0, 0);
  s.assign("b", "hand", Provenance::kSelfTrained, 0.9312345678901234, 3);
  s.assign("c", "foot", Provenance::kClusterMajority, 1.0, 1);
  std::stringstream first;
  EXPECT_EQ(s.export_labels(first), 3u);

  auto t = store_with({"a", "b", "c"});
  std::istringstream in(first.str());
  EXPECT_EQ(t.import_labels(in), 3u);
  std::stringstream second;
  t.export_labels(second);
  EXPECT_EQ(first.str(), second.str());
  EXPECT_EQ(t.active("b")->confidence, 0.9312345678901234);
}

TEST(LabelStore, ExportIsOneOrderedJsonObjectPerLine) {
  auto s = store_with({"b", "a"});
  s.assign("b", "hand", Provenance::kManual, 1.0, 0);
  s.assign("a", "arm", Provenance::kManual, 1.0, 0);
  std::stringstream out;
  s.export_labels(out);
  std::string line;
  std::getline(out, line);
  EXPECT_EQ(line, R"({"item_id":"a","label":"arm","provenance":"MANUAL","confidence":1.0,"iteration":0})");
}

TEST(LabelStore, ImportRejectsMalformedLines) {
  auto s = store_with({"a"});
  std::istringstream bad("{\"item_id\": \"a\", \"label\": \"arm\"\n");
  EXPECT_THROW(s.import_labels(bad), FormatError);
}
