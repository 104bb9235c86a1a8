#include <gtest/gtest.h>

#include <map>
#include <set>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/dataset.hpp"
#include "dmgwatch/corpus/fetch.hpp"
#include "dmgwatch/corpus/manifest.hpp"
#include "dmgwatch/synth/synth.hpp"
#include "test_support.hpp"

using namespace dmgwatch;
using namespace dmgwatch::corpus;
using dmgwatch::testing::TempDir;

namespace {

Bytes png_of(int w, int h, std::uint8_t shade) { return encode_png(Image(w, h, 3, shade)); }

Timestamp at_ms(std::int64_t ms) { return Timestamp(std::chrono::milliseconds(ms)); }

}  // namespace

TEST(Manifest, ParsesAndRoundTrips) {
  const auto m = parse_manifest("image_id,url,label\na,https://x.org/a.jpg,damage\n\"b,1\",b.png,non_damage\n");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[1].image_id, "b,1");
  EXPECT_EQ(m.counts.damage, 1u);
  EXPECT_EQ(m.counts.non_damage, 1u);
  const auto again = parse_manifest(format_manifest(m));
  EXPECT_EQ(again.entries.size(), 2u);
  EXPECT_EQ(again.entries[1].image_id, "b,1");
  EXPECT_EQ(again.entries[0].url, "https://x.org/a.jpg");
}

TEST(Manifest, RejectsDuplicateIdsAndBadLabels) {
  try {
    parse_manifest("image_id,url,label\na,u1,damage\na,u2,damage\n");
    FAIL() << "expected a duplicate id error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::duplicate_id);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
  EXPECT_THROW(parse_manifest("image_id,url,label\na,u1,excluded\n"), Error);
  EXPECT_THROW(parse_manifest("id,url,label\na,u1,damage\n"), Error);
  EXPECT_THROW(parse_manifest("image_id,url,label\na,u1\n"), Error);
}

TEST(Manifest, MalformedUrlsAreKeptAsIssues) {
  const auto m = parse_manifest("image_id,url,label\na,ftp://x/y,damage\nb,http://,non_damage\nc,ok.png,damage\n");
  EXPECT_EQ(m.entries.size(), 3u);
  ASSERT_EQ(m.issues.size(), 2u);
  EXPECT_EQ(m.issues[0].row, 1u);
  EXPECT_EQ(m.issues[1].image_id, "b");
}

TEST(Labels, ExclusionNeedsRationale) {
  EXPECT_THROW(Label::make(LabelValue::excluded, std::nullopt), Error);
  EXPECT_THROW(Label::make(LabelValue::damage, ExclusionRationale::other), Error);
  EXPECT_EQ(label_by_damage_fraction(0.3).value(), LabelValue::damage);
  EXPECT_EQ(label_by_damage_fraction(0.1).rationale(), ExclusionRationale::under_20_percent);
  EXPECT_EQ(label_by_damage_fraction(0.0).value(), LabelValue::non_damage);
  EXPECT_EQ(label_by_damage_fraction(0.5, false).value(), LabelValue::excluded);
  EXPECT_EQ(label_by_damage_fraction(0.5, true, true).rationale(), ExclusionRationale::composite_or_overlay);
}

TEST(ClassWeights, BalancedFormulaAgainstOracle) {
  const auto w = compute_class_weights(3684, 2872);
  EXPECT_NEAR(w.non_damage, 0.8897, 1e-4);
  EXPECT_NEAR(w.damage, 1.1414, 1e-4);
  for (std::size_t a : {1u, 7u, 100u, 5000u}) {
    for (std::size_t b : {1u, 3u, 999u}) {
      const auto got = compute_class_weights(a, b);
      const auto [on, od] = dmgwatch::testing::oracle::balanced_weights(a, b);
      EXPECT_DOUBLE_EQ(got.non_damage, on);
      EXPECT_DOUBLE_EQ(got.damage, od);
      // Each class contributes the same total weight.
      EXPECT_NEAR(got.non_damage * a, got.damage * b, 1e-9 * (a + b));
    }
  }
  EXPECT_THROW(compute_class_weights(0, 5), Error);
}

TEST(Split, StratifiedDisjointAndSeeded) {
  std::vector<LabeledExample> ex;
  for (int i = 0; i < 70; ++i) ex.push_back({"d" + std::to_string(i), Label::damage(), "t", {}});
  for (int i = 0; i < 130; ++i) ex.push_back({"n" + std::to_string(i), Label::non_damage(), "t", {}});
  const auto a = split_assign(ex, {0.8, 0.1, 0.1}, 9);
  const auto b = split_assign(ex, {0.8, 0.1, 0.1}, 9);
  const auto c = split_assign(ex, {0.8, 0.1, 0.1}, 10);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  std::set<std::string> all;
  std::size_t total = 0;
  for (const auto& part : a) {
    total += part.size();
    all.insert(part.begin(), part.end());
  }
  EXPECT_EQ(total, 200u);
  EXPECT_EQ(all.size(), 200u);
  auto damage_in = [](const std::vector<std::string>& ids) {
    return std::count_if(ids.begin(), ids.end(), [](const auto& s) { return s[0] == 'd'; });
  };
  EXPECT_EQ(damage_in(a[0]), 56);
  EXPECT_EQ(damage_in(a[1]), 7);
  EXPECT_EQ(damage_in(a[2]), 7);
  EXPECT_THROW(split_assign(ex, {0.5, 0.4}, 1), Error);
}

TEST(Fetch, LocalRemoteAndFailures) {
  TempDir dir("fetch");
  write_file(dir / "a.png", png_of(200, 180, 10));
  write_text(dir / "broken.jpg", "not an image");
  DatasetManifest m;
  m.entries = {{"a", "a.png", LabelValue::damage},
               {"r", "https://pbs.twimg.com/media/r.jpg", LabelValue::non_damage},
               {"g", "https://media.gettyimages.com/g.jpg", LabelValue::damage},
               {"dup", "a.png", LabelValue::damage},
               {"bad", "ftp://nowhere", LabelValue::damage},
               {"gone", "https://example.org/404.jpg", LabelValue::damage},
               {"junk", "broken.jpg", LabelValue::non_damage},
               {"missing", "nope.png", LabelValue::non_damage}};
  FetchOptions opt;
  opt.base_dir = dir.path();
  opt.clock = [] { return at_ms(1000); };
  opt.transport = [](const std::string& url) -> Bytes {
    if (url.find("404") != std::string::npos) throw Error(ErrorCode::fetch, "HTTP status 404", "http_status");
    return png_of(160, 160, url.find("getty") != std::string::npos ? 200 : 100);
  };
  const auto report = fetch_images(m, dir / "out", opt);
  std::map<std::string, ImageRecord> recs;
  for (const auto& r : report.records) recs[r.image_id] = r;
  std::map<std::string, FetchFailureKind> fails;
  for (const auto& f : report.failures) fails[f.image_id] = f.kind;

  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs["a"].width, 200);
  EXPECT_EQ(recs["a"].height, 180);
  EXPECT_EQ(recs["a"].content_digest, md5(read_file(dir / "a.png")));
  EXPECT_EQ(recs["r"].source, Source::twitter);
  EXPECT_EQ(recs["g"].source, Source::getty);
  EXPECT_EQ(recs["a"].fetched_at, at_ms(1000));
  EXPECT_TRUE(std::filesystem::exists(recs["a"].local_ref));
  EXPECT_EQ(fails["dup"], FetchFailureKind::duplicate_url);
  EXPECT_EQ(fails["bad"], FetchFailureKind::malformed_url);
  EXPECT_EQ(fails["gone"], FetchFailureKind::http_status);
  EXPECT_EQ(fails["junk"], FetchFailureKind::decode);
  EXPECT_EQ(fails["missing"], FetchFailureKind::unreachable);

  save_fetch_report(dir / "out", report);
  const auto loaded = load_records(dir / "out" / "records.jsonl");
  EXPECT_EQ(loaded.size(), 3u);
  for (const auto& r : loaded) EXPECT_EQ(r, recs[r.image_id]);
}

TEST(Fetch, UnwritableDestinationIsAnError) {
  TempDir dir("fetch_dest");
  write_text(dir / "file", "x");
  DatasetManifest m;
  m.entries = {{"a", "a.png", LabelValue::damage}};
  EXPECT_THROW(fetch_images(m, dir / "file" / "sub"), Error);
}

TEST(MinSize, BothSidesMustReachThreshold) {
  ImageRecord r;
  r.image_id = "x";
  r.width = 150;
  r.height = 150;
  EXPECT_TRUE(validate_min_size(r));
  r.height = 149;
  EXPECT_FALSE(validate_min_size(r));
  EXPECT_TRUE(validate_min_size(r, 100));
  r.width = 0;
  EXPECT_THROW(validate_min_size(r), Error);
}

TEST(LabelJournal, AppendsAndReads) {
  TempDir dir("journal");
  LabelJournal j(dir / "labels.jsonl");
  j.append({"a", Label::damage(), "alice", at_ms(5)});
  j.append({"a", Label::excluded(ExclusionRationale::other), "bob", at_ms(6)});
  const auto all = j.read_all();
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].label, Label::damage());
  EXPECT_EQ(all[1].label.rationale(), ExclusionRationale::other);
  EXPECT_EQ(all[1].labeled_at, at_ms(6));
}
