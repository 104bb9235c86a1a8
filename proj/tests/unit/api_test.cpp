#include <gtest/gtest.h>

#include <httplib.h>

#include "dmgwatch/core/http.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/corpus/manifest.hpp"
#include "dmgwatch/monitor/api.hpp"
#include "dmgwatch/monitor/store.hpp"
#include "test_support.hpp"

using namespace dmgwatch;
using namespace dmgwatch::monitor;
using corpus::LabelValue;
using dmgwatch::testing::TempDir;
using nlohmann::json;

namespace {

Timestamp at_s(std::int64_t s) { return Timestamp(std::chrono::seconds(s)); }

ClassifiedItem item(const std::string& id, double p_damage, std::int64_t t) {
  ClassifiedItem it;
  it.image_id = id;
  it.post_id = "post_" + id;
  it.probs = {1.0 - p_damage, p_damage};
  it.predicted = p_damage >= 0.5 ? LabelValue::damage : LabelValue::non_damage;
  it.processed_at = at_s(t);
  it.source_ref = "https://img.example/" + id;
  it.content_digest = md5(id).hex();
  return it;
}

struct Fixture {
  TempDir dir{"api"};
  ItemStore store{dir.path()};
  ApiHandler api{store, [] { return at_s(5000); }};

  Fixture() {
    store.put(item("a", 0.9, 100));
    store.put(item("b", 0.2, 200));
    auto c = item("c", 0.6, 300);
    std::filesystem::create_directories(store.heatmap_dir());
    write_file(store.heatmap_dir() / "c_damage_overlay.png", encode_png(Image(4, 4, 3, 90)));
    c.heatmap_refs["damage"] = "heatmaps/c_damage_overlay.png";
    store.put(c);
  }

  ApiResponse get(const std::string& path, QueryParams q = {}) { return api.handle("GET", path, q, ""); }
  ApiResponse post(const std::string& path, const std::string& body) { return api.handle("POST", path, {}, body); }
};

}  // namespace

TEST(ApiHandler, QueueFiltersAndPages) {
  Fixture f;
  auto r = f.get("/api/queue");
  ASSERT_EQ(r.status, 200);
  auto j = json::parse(r.body);
  EXPECT_EQ(j["total"], 3);
  EXPECT_EQ(j["items"][0]["image_id"], "c");
  j = json::parse(f.get("/api/queue", {{"min_p_damage", "0.5"}, {"page_size", "1"}, {"page", "2"}}).body);
  EXPECT_EQ(j["total"], 2);
  ASSERT_EQ(j["items"].size(), 1u);
  EXPECT_EQ(j["items"][0]["image_id"], "a");
  j = json::parse(f.get("/api/queue", {{"since", format_rfc3339(at_s(200))}, {"state", ""}}).body);
  EXPECT_EQ(j["total"], 2);
  EXPECT_EQ(json::parse(f.get("/api/queue", {{"state", "confirmed"}}).body)["total"], 0);
}

TEST(ApiHandler, RejectsBadQueryValues) {
  Fixture f;
  for (const QueryParams& q : std::vector<QueryParams>{{{"state", "done"}},
                                                       {{"min_p_damage", "1.5"}},
                                                       {{"min_p_damage", "abc"}},
                                                       {{"page", "0"}},
                                                       {{"page_size", "-3"}},
                                                       {{"since", "yesterday"}}}) {
    const auto r = f.get("/api/queue", q);
    EXPECT_EQ(r.status, 400) << q.begin()->first;
    EXPECT_EQ(json::parse(r.body)["error"], "invalid_argument");
  }
}

TEST(ApiHandler, ItemAndHeatmap) {
  Fixture f;
  const auto r = f.get("/api/items/a");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(classified_item_from_json(json::parse(r.body)), *f.store.get("a"));
  EXPECT_EQ(f.get("/api/items/zzz").status, 404);

  const auto png = f.get("/api/items/c/heatmap");
  ASSERT_EQ(png.status, 200);
  EXPECT_EQ(png.content_type, "image/png");
  EXPECT_EQ(decode_image(Bytes(png.body.begin(), png.body.end())), Image(4, 4, 3, 90));
  EXPECT_EQ(f.get("/api/items/c/heatmap", {{"class", "non_damage"}}).status, 404);
  EXPECT_EQ(f.get("/api/items/c/heatmap", {{"class", "excluded"}}).status, 400);
  EXPECT_EQ(f.get("/api/items/a/heatmap").status, 404);
}

TEST(ApiHandler, ReviewStatusCodes) {
  Fixture f;
  auto r = f.post("/api/items/a/review", R"({"verdict":"confirm","reviewer":"ann"})");
  ASSERT_EQ(r.status, 200);
  auto j = json::parse(r.body);
  EXPECT_EQ(j["review_state"], "confirmed");
  EXPECT_EQ(j["changed"], true);
  EXPECT_EQ(j["reviewed_at"], format_rfc3339(at_s(5000)));
  EXPECT_EQ(json::parse(f.post("/api/items/a/review", R"({"verdict":"confirm","reviewer":"ann"})").body)["changed"],
            false);

  r = f.post("/api/items/b/review", R"({"verdict":"override","label":"damage","reviewer":"bob"})");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(json::parse(r.body)["reviewer_label"], "damage");

  EXPECT_EQ(f.post("/api/items/b/review", "not json").status, 400);
  EXPECT_EQ(f.post("/api/items/b/review", R"({"verdict":"maybe","reviewer":"x"})").status, 400);
  EXPECT_EQ(f.post("/api/items/b/review", R"({"verdict":"confirm"})").status, 400);
  EXPECT_EQ(f.post("/api/items/c/review", R"({"verdict":"override","reviewer":"x"})").status, 400);
  EXPECT_EQ(f.post("/api/items/c/review", R"({"verdict":"override","label":"damage","reviewer":"x"})").status, 400);
  EXPECT_EQ(f.post("/api/items/nope/review", R"({"verdict":"confirm","reviewer":"x"})").status, 404);
}

TEST(ApiHandler, ReviewConflictWhenRereviewDisabled) {
  TempDir dir("api_conflict");
  ItemStore store(dir.path(), false);
  store.put(item("a", 0.9, 1));
  ApiHandler api(store, [] { return at_s(10); });
  EXPECT_EQ(api.handle("POST", "/api/items/a/review", {}, R"({"verdict":"confirm","reviewer":"x"})").status, 200);
  const auto r = api.handle("POST", "/api/items/a/review", {}, R"({"verdict":"override","label":"non_damage","reviewer":"y"})");
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(json::parse(r.body)["error"], "conflict");
}

TEST(ApiHandler, ExportIsManifestCsv) {
  Fixture f;
  f.post("/api/items/b/review", R"({"verdict":"override","label":"damage","reviewer":"bob"})");
  const auto r = f.get("/api/export");
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "text/csv");
  const auto m = corpus::parse_manifest(r.body);
  ASSERT_EQ(m.entries.size(), 1u);
  EXPECT_EQ(m.entries[0].image_id, "b");
  EXPECT_EQ(m.entries[0].label, LabelValue::damage);
  EXPECT_EQ(f.get("/api/export", {{"since", format_rfc3339(at_s(6000))}}).body, corpus::format_manifest({}));
  EXPECT_EQ(f.get("/api/export", {{"since", "x"}}).status, 400);
}

TEST(ApiHandler, UnknownRoutesAndMethods) {
  Fixture f;
  EXPECT_EQ(f.get("/api/nothing").status, 404);
  EXPECT_EQ(f.get("/api/items/").status, 404);
  EXPECT_EQ(f.get("/api/items/a/bogus").status, 404);
  EXPECT_EQ(f.api.handle("POST", "/api/queue", {}, "").status, 405);
  EXPECT_EQ(f.api.handle("DELETE", "/api/items/a", {}, "").status, 405);
  EXPECT_EQ(f.get("/api/items/a/review").status, 405);
}

TEST(ApiServer, ServesHandlerOverHttp) {
  Fixture f;
  ApiServer server(f.store, [] { return at_s(7000); });
  const int port = server.start("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  const std::string base = "http://127.0.0.1:" + std::to_string(port);

  const auto q = http_get(base + "/api/queue?min_p_damage=0.5");
  EXPECT_EQ(q.status, 200);
  EXPECT_EQ(json::parse(std::string(q.body.begin(), q.body.end()))["total"], 2);
  EXPECT_EQ(http_get(base + "/api/items/zzz").status, 404);

  httplib::Client client("127.0.0.1", port);
  auto res = client.Post("/api/items/a/review", R"({"verdict":"override","label":"non_damage","reviewer":"web"})",
                         "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(f.store.get("a")->review_state, ReviewState::overridden);
  EXPECT_EQ(f.store.get("a")->reviewed_at, at_s(7000));
  res = client.Delete("/api/items/a");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 405);
  const auto csv = http_get(base + "/api/export");
  EXPECT_EQ(csv.content_type.rfind("text/csv", 0), 0u);
  server.stop();
}
