#include <gtest/gtest.h>

#include <atomic>
#include <map>
#include <set>
#include <thread>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/manifest.hpp"
#include "dmgwatch/dedup/dedup.hpp"
#include "dmgwatch/monitor/adapters.hpp"
#include "dmgwatch/monitor/pipeline.hpp"
#include "dmgwatch/monitor/store.hpp"
#include "dmgwatch/monitor/stream_dedup.hpp"
#include "dmgwatch/synth/synth.hpp"
#include "test_support.hpp"

using namespace dmgwatch;
using namespace dmgwatch::monitor;
using corpus::LabelValue;
using dmgwatch::testing::TempDir;
namespace support = dmgwatch::testing;
using namespace std::chrono_literals;

namespace {

Timestamp at_s(std::int64_t s) { return Timestamp(std::chrono::seconds(s)); }

dedup::PerceptualSignature sig(std::uint64_t bits) { return {bits, std::string(dedup::kDifferenceHashTag)}; }

ClassifiedItem make_item(const std::string& id, double p_damage, std::int64_t processed_s,
                         const std::string& post = "p") {
  ClassifiedItem it;
  it.image_id = id;
  it.post_id = post;
  it.probs = {1.0 - p_damage, p_damage};
  it.predicted = p_damage >= 0.5 ? LabelValue::damage : LabelValue::non_damage;
  it.processed_at = at_s(processed_s);
  it.source_ref = "https://img.example/" + id + ".jpg";
  it.content_digest = md5(id).hex();
  return it;
}

ReviewRequest confirm(const std::string& who) { return {Verdict::confirm, std::nullopt, who}; }
ReviewRequest override_to(LabelValue v, const std::string& who) { return {Verdict::override_label, v, who}; }

// Writes distinct scene images and a feed of posts referencing them.
struct FeedBuilder {
  std::filesystem::path dir;
  std::vector<FeedItem> posts;

  std::string image(std::uint64_t seed) {
    const std::string name = "img_" + std::to_string(seed) + ".png";
    if (!std::filesystem::exists(dir / name)) {
      write_file(dir / name, encode_png(synth::make_scene(seed % 2 == 0, 96, 80, seed)));
    }
    return name;
  }
  void post(const std::string& id, std::int64_t t, const std::string& text, std::vector<std::string> refs) {
    posts.push_back({id, at_s(t), text, std::move(refs), "replay"});
  }
  std::filesystem::path write() const {
    std::string out;
    for (const auto& p : posts) out += to_json(p).dump() + "\n";
    write_text(dir / "feed.jsonl", out);
    return dir / "feed.jsonl";
  }
};

MonitorConfig quick_config() {
  MonitorConfig c;
  c.workers = 2;
  c.queue_capacity = 4;
  return c;
}

MonitorOptions no_sleep(std::vector<std::chrono::milliseconds>* delays = nullptr) {
  MonitorOptions o;
  o.sleep = [delays](std::chrono::milliseconds d) {
    if (delays) delays->push_back(d);
  };
  o.clock = [] { return at_s(1000); };
  return o;
}

}  // namespace

// ---------------------------------------------------------------- stream dedup

TEST(StreamDedup, ExactDuplicatesSuppressedForWholeRun) {
  StreamDedup d({DedupWindow::Kind::count, 1}, false, 0.5);
  EXPECT_TRUE(d.decide("a", md5("x"), sig(1), at_s(0)).keep);
  EXPECT_TRUE(d.decide("b", md5("y"), sig(2), at_s(1)).keep);
  EXPECT_TRUE(d.decide("c", md5("z"), sig(3), at_s(2)).keep);
  const auto dup = d.decide("d", md5("x"), sig(1), at_s(100000));
  EXPECT_FALSE(dup.keep);
  EXPECT_EQ(dup.reason, SuppressReason::exact);
  EXPECT_EQ(dup.matched_image_id, "a");
}

TEST(StreamDedup, NearDuplicatesRespectCountWindow) {
  StreamDedup d({DedupWindow::Kind::count, 2}, true, 0.5);
  EXPECT_TRUE(d.decide("a", md5("1"), sig(0), at_s(0)).keep);
  const auto near = d.decide("a2", md5("2"), sig(0xFF), at_s(1));
  EXPECT_FALSE(near.keep);
  EXPECT_EQ(near.reason, SuppressReason::near);
  EXPECT_EQ(near.matched_image_id, "a");
  EXPECT_TRUE(d.decide("b", md5("3"), sig(0xFFFFFFFF00000000ull), at_s(2)).keep);
  EXPECT_TRUE(d.decide("c", md5("4"), sig(0x00000000FFFFFFFFull), at_s(3)).keep);
  // "a" has left the two-entry window.
  EXPECT_TRUE(d.decide("a3", md5("5"), sig(0x3), at_s(4)).keep);
}

TEST(StreamDedup, NearDuplicatesRespectDurationWindow) {
  DedupWindow w;
  w.kind = DedupWindow::Kind::duration;
  w.duration = 60s;
  StreamDedup d(w, true, 0.5);
  EXPECT_TRUE(d.decide("a", md5("1"), sig(0), at_s(0)).keep);
  EXPECT_FALSE(d.decide("b", md5("2"), sig(1), at_s(59)).keep);
  EXPECT_TRUE(d.decide("c", md5("3"), sig(1), at_s(61)).keep);
}

TEST(StreamDedup, NearDisabledOrMissingSignatureKeeps) {
  StreamDedup off({}, false, 0.5);
  EXPECT_TRUE(off.decide("a", md5("1"), sig(0), at_s(0)).keep);
  EXPECT_TRUE(off.decide("b", md5("2"), sig(0), at_s(0)).keep);
  StreamDedup on({}, true, 0.5);
  EXPECT_TRUE(on.decide("a", md5("1"), sig(0), at_s(0)).keep);
  EXPECT_TRUE(on.decide("b", md5("2"), std::nullopt, at_s(0)).keep);
  EXPECT_EQ(on.kept(), 2u);
  EXPECT_THROW(StreamDedup({}, true, 1.2), Error);
  EXPECT_THROW(StreamDedup({DedupWindow::Kind::count, 0}, true, 0.5), Error);
}

// ---------------------------------------------------------------- config & types

TEST(ReconnectPolicy, ExponentialWithJitterAndCap) {
  ReconnectPolicy p;
  Rng rng(3);
  for (int attempt = 1; attempt <= 12; ++attempt) {
    for (int k = 0; k < 20; ++k) {
      const auto d = p.delay(attempt, rng).count();
      const double base = std::min(500.0 * std::pow(2.0, attempt - 1), 30000.0);
      EXPECT_GE(d, std::floor(base * 0.8));
      EXPECT_LE(d, std::min(30000.0, std::ceil(base * 1.2)));
    }
  }
}

TEST(Keyword, CaseInsensitiveSubstring) {
  EXPECT_TRUE(matches_keyword("Big EARTHQUAKE today", "earthquake"));
  EXPECT_FALSE(matches_keyword("quake", "earthquake"));
  EXPECT_TRUE(matches_keyword("anything", ""));
}

TEST(Types, JsonRoundTrips) {
  FeedItem f{"p1", at_s(5), "text", {"a.png", "b.png"}, "replay"};
  EXPECT_EQ(feed_item_from_json(to_json(f)), f);
  auto it = make_item("x_0", 0.7, 10);
  it.review_state = ReviewState::overridden;
  it.reviewer_label = LabelValue::non_damage;
  it.reviewer = "r";
  it.reviewed_at = at_s(11);
  it.heatmap_refs = {{"damage", "heatmaps/x_0_damage_overlay.png"}};
  EXPECT_EQ(classified_item_from_json(to_json(it)), it);
  EXPECT_EQ(it.final_label(), LabelValue::non_damage);
  EXPECT_THROW(feed_item_from_json(nlohmann::json{{"post_id", 3}}), Error);
}

TEST(MonitorConfig, JsonRoundTripAndValidation) {
  MonitorConfig c;
  c.keyword = "quake";
  c.dedup_window = {DedupWindow::Kind::duration, 0, 3600s};
  c.workers = 3;
  const auto back = MonitorConfig::from_json(c.to_json());
  EXPECT_EQ(back.keyword, "quake");
  EXPECT_EQ(back.dedup_window.kind, DedupWindow::Kind::duration);
  EXPECT_EQ(back.dedup_window.duration, 3600s);
  EXPECT_EQ(back.workers, 3);
  c.workers = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(BoundedQueue, BlocksWhenFullAndDrainsAfterClose) {
  BoundedQueue<int> q(2);
  EXPECT_FALSE(q.push(1));
  EXPECT_FALSE(q.push(2));
  std::atomic<bool> pushed{false};
  bool waited = false;
  std::thread producer([&] {
    waited = q.push(3);
    pushed = true;
  });
  std::this_thread::sleep_for(50ms);
  EXPECT_FALSE(pushed.load());
  EXPECT_EQ(q.pop(), 1);
  producer.join();
  EXPECT_TRUE(waited);
  q.close();
  EXPECT_EQ(q.pop(), 2);
  EXPECT_EQ(q.pop(), 3);
  EXPECT_EQ(q.pop(), std::nullopt);
}

// ---------------------------------------------------------------- store

TEST(ItemStore, PutGetAndDuplicateConflict) {
  TempDir dir("store_put");
  ItemStore s(dir.path());
  s.put(make_item("a", 0.9, 1));
  EXPECT_TRUE(s.contains("a"));
  EXPECT_EQ(s.get("a")->probs.p_damage, 0.9);
  EXPECT_FALSE(s.get("zz").has_value());
  try {
    s.put(make_item("a", 0.1, 2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::conflict);
  }
}

TEST(ItemStore, QueueFiltersOrderingAndPaging) {
  TempDir dir("store_query");
  ItemStore s(dir.path());
  for (int i = 0; i < 7; ++i) s.put(make_item("i" + std::to_string(i), i / 10.0 + 0.2, 100 + i % 3, "p" + std::to_string(i)));
  s.submit_review("i6", confirm("r"), at_s(500));

  const auto all = s.query({}, 1, 50);
  ASSERT_EQ(all.total, 7u);
  for (std::size_t k = 1; k < all.items.size(); ++k) {
    const auto& a = all.items[k - 1];
    const auto& b = all.items[k];
    EXPECT_TRUE(a.processed_at > b.processed_at || (a.processed_at == b.processed_at && a.post_id <= b.post_id));
  }
  QueueFilter pending;
  pending.state = ReviewState::pending;
  EXPECT_EQ(s.query(pending).total, 6u);
  QueueFilter hot;
  hot.min_p_damage = 0.55;
  EXPECT_EQ(s.query(hot).total, 3u);
  QueueFilter recent;
  recent.since = at_s(102);
  EXPECT_EQ(s.query(recent).total, 2u);

  std::set<std::string> seen;
  for (std::size_t page = 1; page <= 3; ++page) {
    const auto p = s.query({}, page, 3);
    EXPECT_EQ(p.total, 7u);
    EXPECT_EQ(p.items.size(), page < 3 ? 3u : 1u);
    for (const auto& it : p.items) EXPECT_TRUE(seen.insert(it.image_id).second);
  }
  EXPECT_TRUE(s.query({}, 4, 3).items.empty());
  EXPECT_THROW(s.query({}, 0, 3), Error);
  EXPECT_THROW(s.query({}, 1, 0), Error);
}

TEST(ItemStore, ReviewRules) {
  TempDir dir("store_review");
  ItemStore s(dir.path());
  s.put(make_item("d", 0.8, 1));
  auto failed = make_item("f", 0.5, 1);
  failed.failure = "fetch: gone";
  s.put(failed);

  auto code_of = [&](const std::string& id, const ReviewRequest& r) {
    try {
      s.submit_review(id, r, at_s(2));
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io;  // sentinel: no error
  };
  EXPECT_EQ(code_of("d", override_to(LabelValue::damage, "r")), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of("d", override_to(LabelValue::excluded, "r")), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of("d", {Verdict::override_label, std::nullopt, "r"}), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of("d", confirm("")), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of("nope", confirm("r")), ErrorCode::not_found);
  EXPECT_EQ(code_of("f", confirm("r")), ErrorCode::conflict);

  const auto first = s.submit_review("d", confirm("ann"), at_s(3));
  EXPECT_TRUE(first.changed);
  EXPECT_EQ(first.item.review_state, ReviewState::confirmed);
  const auto repeat = s.submit_review("d", confirm("ann"), at_s(4));
  EXPECT_FALSE(repeat.changed);
  EXPECT_EQ(repeat.item.reviewed_at, at_s(3));

  const auto flip = s.submit_review("d", override_to(LabelValue::non_damage, "bob"), at_s(5));
  EXPECT_TRUE(flip.changed);
  EXPECT_EQ(flip.item.review_state, ReviewState::overridden);
  EXPECT_EQ(flip.item.final_label(), LabelValue::non_damage);
  EXPECT_EQ(flip.item.reviewer, "bob");

  const auto reviews = read_json_lines(dir / "reviews.jsonl");
  ASSERT_EQ(reviews.size(), 2u);
  EXPECT_EQ(reviews[1]["previous"]["review_state"], "confirmed");
  EXPECT_EQ(reviews[1]["previous"]["reviewer"], "ann");
  const auto journal = s.journal().read_all();
  ASSERT_EQ(journal.size(), 2u);
  EXPECT_EQ(journal[0].label, corpus::Label::damage());
  EXPECT_EQ(journal[1].label, corpus::Label::non_damage());
  EXPECT_EQ(journal[1].labeler, "bob");
}

TEST(ItemStore, RereviewCanBeDisabled) {
  TempDir dir("store_norereview");
  ItemStore s(dir.path(), false);
  s.put(make_item("d", 0.8, 1));
  s.submit_review("d", confirm("ann"), at_s(2));
  EXPECT_FALSE(s.submit_review("d", confirm("ann"), at_s(3)).changed);
  try {
    s.submit_review("d", override_to(LabelValue::non_damage, "bob"), at_s(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::conflict);
  }
}

TEST(ItemStore, ReloadReplaysEvents) {
  TempDir dir("store_reload");
  {
    ItemStore s(dir.path());
    s.put(make_item("a", 0.8, 1));
    s.put(make_item("b", 0.2, 2));
    s.submit_review("a", override_to(LabelValue::non_damage, "r"), at_s(3));
    s.submit_review("b", confirm("r"), at_s(4));
    s.record_suppressed({"c", "p", SuppressReason::exact, "a", "ref", "dig", at_s(5)});
    s.record_overflow("p", 4, at_s(6));
  }
  ItemStore again(dir.path());
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again.get("a")->review_state, ReviewState::overridden);
  EXPECT_EQ(again.get("a")->reviewed_at, at_s(3));
  EXPECT_EQ(again.get("b")->review_state, ReviewState::confirmed);
  EXPECT_EQ(again.suppressed_count(), 1u);
  EXPECT_EQ(again.overflow_count(), 1u);
}

TEST(ItemStore, ExportCorrectionsRoundTripsAsManifest) {
  TempDir dir("store_export");
  ItemStore s(dir.path());
  s.put(make_item("z", 0.8, 1));
  s.put(make_item("m", 0.3, 1));
  s.put(make_item("a", 0.6, 1));
  s.submit_review("z", override_to(LabelValue::non_damage, "r"), at_s(10));
  s.submit_review("m", confirm("r"), at_s(20));
  const auto m = s.export_corrections();
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].image_id, "m");
  EXPECT_EQ(m.entries[1].label, LabelValue::non_damage);
  EXPECT_EQ(m.entries[1].url, "https://img.example/z.jpg");
  write_text(dir / "c.csv", corpus::format_manifest(m));
  const auto loaded = corpus::load_manifest(dir / "c.csv");
  EXPECT_EQ(loaded.entries.size(), 2u);
  EXPECT_EQ(loaded.counts.non_damage, 2u);
  EXPECT_EQ(s.export_corrections(at_s(15)).entries.size(), 1u);
}

TEST(ItemStore, ConcurrentReviewsAreSerialized) {
  TempDir dir("store_threads");
  ItemStore s(dir.path());
  for (int i = 0; i < 20; ++i) s.put(make_item("i" + std::to_string(i), 0.9, i));
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t) {
    ts.emplace_back([&, t] {
      for (int i = 0; i < 20; ++i) {
        s.submit_review("i" + std::to_string(i), t % 2 ? confirm("c" + std::to_string(t))
                                                       : override_to(LabelValue::non_damage, "o" + std::to_string(t)),
                        at_s(100 + t));
        s.query({}, 1, 5);
      }
    });
  }
  for (auto& t : ts) t.join();
  ItemStore again(dir.path());
  for (int i = 0; i < 20; ++i) {
    const auto id = "i" + std::to_string(i);
    EXPECT_EQ(again.get(id)->reviewer, s.get(id)->reviewer);
    EXPECT_EQ(again.get(id)->review_state, s.get(id)->review_state);
  }
}

// ---------------------------------------------------------------- pipeline

TEST(Pipeline, FiltersPostsWithoutImagesAndOffKeyword) {
  TempDir dir("pipe_filter");
  FeedBuilder fb{dir.path()};
  for (int i = 0; i < 10; ++i) {
    std::vector<std::string> refs;
    if (i % 3 != 1) refs.push_back(fb.image(100 + i));  // posts 1, 4, 7 carry no images
    fb.post("post" + std::to_string(i), i, "earthquake report " + std::to_string(i), refs);
  }
  fb.post("other", 20, "nice weather", {fb.image(500)});
  const auto feed = fb.write();

  ItemStore store(dir / "store");
  ReplayAdapter adapter(feed);
  std::vector<std::string> order;
  auto opts = no_sleep();
  opts.on_item = [&](const ClassifiedItem& it) { order.push_back(it.image_id); };
  const auto model = support::tiny_model(1);
  const auto summary = run_monitor(adapter, quick_config(), model, store, opts);
  EXPECT_EQ(summary.posts_seen, 11u);
  EXPECT_EQ(summary.posts_off_keyword, 1u);
  EXPECT_EQ(summary.posts_without_images, 3u);
  EXPECT_EQ(summary.classified, 7u);
  EXPECT_EQ(store.size(), 7u);
  std::vector<std::string> want;
  for (int i = 0; i < 10; ++i) {
    if (i % 3 != 1) want.push_back("post" + std::to_string(i) + "_0");
  }
  EXPECT_EQ(order, want);
  for (const auto& it : store.all()) {
    EXPECT_EQ(it.processed_at, at_s(1000));
    EXPECT_EQ(it.review_state, ReviewState::pending);
    EXPECT_NEAR(it.probs.p_damage + it.probs.p_non_damage, 1.0, 1e-6);
    EXPECT_EQ(it.predicted, it.probs.p_damage >= 0.5 ? LabelValue::damage : LabelValue::non_damage);
    EXPECT_TRUE(std::filesystem::exists(it.source_ref));
  }
}

TEST(Pipeline, RepeatedImageBecomesOneItem) {
  TempDir dir("pipe_dup");
  FeedBuilder fb{dir.path()};
  const auto shared = fb.image(7);
  for (int i = 0; i < 4; ++i) fb.post("p" + std::to_string(i), i, "earthquake", {shared});
  // Same picture re-encoded: different bytes, same perceptual signature.
  write_file(dir / "reencoded.jpg", encode_jpeg(decode_image(read_file(dir / shared)), 80));
  fb.post("p4", 5, "earthquake", {"reencoded.jpg", fb.image(8)});
  ItemStore store(dir / "store");
  ReplayAdapter adapter(fb.write());
  const auto summary = run_monitor(adapter, quick_config(), support::tiny_model(2), store, no_sleep());
  EXPECT_EQ(store.size(), 2u);
  EXPECT_TRUE(store.contains("p0_0"));
  EXPECT_TRUE(store.contains("p4_1"));
  EXPECT_EQ(summary.suppressed_exact, 3u);
  EXPECT_EQ(summary.suppressed_near, 1u);
  EXPECT_EQ(store.suppressed_count(), 4u);
  const auto rows = read_json_lines(dir / "store" / "suppressed.jsonl");
  for (const auto& r : rows) EXPECT_EQ(r["matched_image_id"], "p0_0");
}

TEST(Pipeline, UnreadableImagesBecomeFailedItems) {
  TempDir dir("pipe_fail");
  FeedBuilder fb{dir.path()};
  write_text(dir / "garbage.png", "not a png");
  fb.post("p0", 0, "earthquake", {"missing.png", "garbage.png", fb.image(3)});
  ItemStore store(dir / "store");
  ReplayAdapter adapter(fb.write());
  const auto summary = run_monitor(adapter, quick_config(), support::tiny_model(2), store, no_sleep());
  EXPECT_EQ(summary.classified, 3u);
  EXPECT_EQ(summary.failed, 2u);
  EXPECT_TRUE(store.get("p0_0")->failure->starts_with("fetch"));
  EXPECT_TRUE(store.get("p0_1")->failure->starts_with("decode"));
  EXPECT_FALSE(store.get("p0_2")->failure.has_value());
}

TEST(Pipeline, ReconnectsResumeFromCursorWithoutLoss) {
  TempDir dir("pipe_reconnect");
  FeedBuilder fb{dir.path()};
  for (int i = 0; i < 12; ++i) fb.post("p" + std::to_string(i), i, "earthquake", {fb.image(40 + i)});
  const auto feed = fb.write();

  ItemStore clean(dir / "clean");
  ReplayAdapter a(feed);
  run_monitor(a, quick_config(), support::tiny_model(3), clean, no_sleep());

  ItemStore dropped(dir / "dropped");
  ReplayAdapter b(feed, {0, 5, 6, 11});
  std::vector<std::chrono::milliseconds> delays;
  const auto summary = run_monitor(b, quick_config(), support::tiny_model(3), dropped, no_sleep(&delays));
  EXPECT_EQ(summary.reconnects, 4u);
  EXPECT_EQ(delays.size(), 4u);
  for (auto d : delays) {
    EXPECT_GE(d, 400ms);
    EXPECT_LE(d, 600ms);
  }
  ASSERT_EQ(dropped.size(), clean.size());
  for (const auto& it : clean.all()) EXPECT_EQ(dropped.get(it.image_id)->probs, it.probs);
}

namespace {

class DeadAdapter : public FeedAdapter {
 public:
  void connect(const std::optional<std::string>&) override { throw Disconnected("down"); }
  std::optional<FeedItem> next() override { throw Disconnected("down"); }
  std::string cursor() const override { return ""; }
  Bytes load_image(const std::string&) const override { return {}; }
  std::string resolve(const std::string& r) const override { return r; }
};

}  // namespace

TEST(Pipeline, GivesUpAfterMaxAttemptsWithGrowingBackoff) {
  TempDir dir("pipe_dead");
  ItemStore store(dir.path());
  DeadAdapter dead;
  auto cfg = quick_config();
  cfg.reconnect.max_attempts = 5;
  cfg.reconnect.jitter = 0.0;
  std::vector<std::chrono::milliseconds> delays;
  try {
    run_monitor(dead, cfg, support::tiny_model(1), store, no_sleep(&delays));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::fetch);
  }
  EXPECT_EQ(delays, (std::vector<std::chrono::milliseconds>{500ms, 1000ms, 2000ms, 4000ms, 8000ms}));
}

TEST(Pipeline, TinyQueueStillDeliversEverything) {
  TempDir dir("pipe_queue");
  FeedBuilder fb{dir.path()};
  for (int i = 0; i < 15; ++i) fb.post("p" + std::to_string(i), i, "earthquake", {fb.image(200 + i)});
  ItemStore store(dir / "store");
  ReplayAdapter adapter(fb.write());
  auto cfg = quick_config();
  cfg.queue_capacity = 1;
  cfg.workers = 1;
  const auto summary = run_monitor(adapter, cfg, support::tiny_model(5), store, no_sleep());
  EXPECT_EQ(store.size(), 15u);
  EXPECT_EQ(store.overflow_count(), summary.overflow_events);
}

TEST(Pipeline, ExplainWritesHeatmapsAndOutputLog) {
  TempDir dir("pipe_explain");
  FeedBuilder fb{dir.path()};
  fb.post("p0", 0, "earthquake", {fb.image(1)});
  ItemStore store(dir / "store");
  ReplayAdapter adapter(fb.write());
  auto cfg = quick_config();
  cfg.explain = true;
  cfg.output_jsonl = dir / "out.jsonl";
  run_monitor(adapter, cfg, support::tiny_model(5), store, no_sleep());
  const auto item = store.get("p0_0");
  ASSERT_TRUE(item);
  EXPECT_EQ(item->heatmap_refs.size(), 2u);
  const auto path = store.heatmap_path("p0_0", "damage");
  ASSERT_TRUE(path);
  EXPECT_TRUE(std::filesystem::exists(*path));
  EXPECT_EQ(read_json_lines(dir / "out.jsonl").size(), 1u);
}

// ---------------------------------------------------------------- http polling

TEST(HttpPollingAdapter, PagesCursorsResumeAndIdleEnd) {
  std::vector<std::string> urls;
  auto page = [](std::vector<std::string> ids, const std::string& cursor) {
    nlohmann::json items = nlohmann::json::array();
    for (const auto& id : ids) items.push_back(to_json(FeedItem{id, at_s(1), "earthquake", {}, "http"}));
    const std::string body = nlohmann::json{{"items", items}, {"cursor", cursor}}.dump();
    return HttpResponse{200, "application/json", Bytes(body.begin(), body.end())};
  };
  int failures_left = 1;
  HttpPollingAdapter::Options o;
  o.endpoint = "http://feed.local/poll";
  o.idle_polls_before_end = 2;
  o.sleep = [](std::chrono::milliseconds) {};
  o.get = [&](const std::string& url) {
    urls.push_back(url);
    if (url.ends_with("cursor=")) return page({"a", "b", "c"}, "c1");
    if (url.ends_with("cursor=c1")) {
      if (failures_left-- > 0) return HttpResponse{503, "text/plain", {}};
      return page({"d"}, "c2");
    }
    return page({}, "c2");
  };
  HttpPollingAdapter ad(o);
  ad.connect(std::nullopt);
  EXPECT_EQ(ad.next()->post_id, "a");
  EXPECT_EQ(ad.cursor(), "#1");
  EXPECT_EQ(ad.next()->post_id, "b");

  // Resume mid-page from a saved cursor.
  HttpPollingAdapter resumed(o);
  resumed.connect(ad.cursor());
  EXPECT_EQ(resumed.next()->post_id, "c");
  EXPECT_EQ(resumed.cursor(), "c1");
  EXPECT_THROW(resumed.next(), Disconnected);
  resumed.connect(resumed.cursor());
  EXPECT_EQ(resumed.next()->post_id, "d");
  EXPECT_EQ(resumed.next(), std::nullopt);
  EXPECT_EQ(urls.front(), "http://feed.local/poll?cursor=");
}

TEST(HttpPollingAdapter, TransportErrorsBecomeDisconnects) {
  HttpPollingAdapter::Options o;
  o.endpoint = "http://feed.local/poll?x=1";
  o.get = [](const std::string& url) -> HttpResponse {
    EXPECT_NE(url.find("?x=1&cursor="), std::string::npos);
    throw Error(ErrorCode::fetch, "refused");
  };
  HttpPollingAdapter ad(o);
  ad.connect(std::nullopt);
  EXPECT_THROW(ad.next(), Disconnected);
  EXPECT_THROW(HttpPollingAdapter(HttpPollingAdapter::Options{}), Error);
}

TEST(ReplayAdapter, CursorAndInjectedDrops) {
  TempDir dir("replay");
  FeedBuilder fb{dir.path()};
  for (int i = 0; i < 3; ++i) fb.post("p" + std::to_string(i), i, "earthquake", {});
  ReplayAdapter ad(fb.write(), {1});
  EXPECT_THROW(ad.next(), Disconnected);
  ad.connect(std::nullopt);
  EXPECT_EQ(ad.next()->post_id, "p0");
  EXPECT_THROW(ad.next(), Disconnected);
  ad.connect(ad.cursor());
  EXPECT_EQ(ad.next()->post_id, "p1");
  EXPECT_EQ(ad.next()->post_id, "p2");
  EXPECT_EQ(ad.next(), std::nullopt);
  EXPECT_EQ(ad.connects(), 2u);
  EXPECT_THROW(ad.connect(std::string("99")), Error);
}
