// Copyright 2026 The dmgwatch Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dmgwatch/monitor/pipeline.hpp"

#include <exception>
#include <map>
#include <thread>
#include <vector>

#include "dmgwatch/core/error.hpp"
#include "dmgwatch/core/io.hpp"
#include "dmgwatch/core/random.hpp"
#include "dmgwatch/dedup/dedup.hpp"
#include "dmgwatch/gradcam/gradcam.hpp"
#include "dmgwatch/monitor/stream_dedup.hpp"
#include "dmgwatch/vision/tensor.hpp"

namespace dmgwatch::monitor {

using nlohmann::json;

json MonitorSummary::to_json() const {
  return {{"posts_seen", posts_seen},
          {"posts_off_keyword", posts_off_keyword},
          {"posts_without_images", posts_without_images},
          {"images_seen", images_seen},
          {"classified", classified},
          {"failed", failed},
          {"suppressed_exact", suppressed_exact},
          {"suppressed_near", suppressed_near},
          {"reconnects", reconnects},
          {"overflow_events", overflow_events}};
}

namespace {

struct Job {
  std::uint64_t seq = 0;
  std::string image_id;
  std::string post_id;
  std::string source_ref;
  std::string content_digest;
  std::optional<Image> image;
  std::optional<std::string> failure;
};

ClassifiedItem classify(const Job& job, const vision::ConvClassifier& model, const MonitorConfig& config,
                        const ItemStore& store, const std::string& checksum) {
  ClassifiedItem item;
  item.image_id = job.image_id;
  item.post_id = job.post_id;
  item.source_ref = job.source_ref;
  item.content_digest = job.content_digest;
  if (job.failure) {
    item.failure = job.failure;
    return item;
  }
  try {
    item.probs = model.predict(vision::resize_normalize(*job.image, model.spec().input_side));
    item.predicted = item.probs.p_damage >= config.threshold ? corpus::LabelValue::damage
                                                              : corpus::LabelValue::non_damage;
    if (config.explain) {
      const auto explanation = gradcam::explain(model, *job.image, true);
      gradcam::save_explanation(store.heatmap_dir(), job.image_id, explanation, checksum);
      for (const auto& ce : explanation.classes) {
        const std::string cls(gradcam::to_string(ce.target));
        item.heatmap_refs[cls] = "heatmaps/" + job.image_id + "_" + cls + "_overlay.png";
      }
    }
  } catch (const std::exception& e) {
    item.probs = {};
    item.predicted = corpus::LabelValue::non_damage;
    item.heatmap_refs.clear();
    item.failure = std::string("classify: ") + e.what();
  }
  return item;
}

}  // namespace

MonitorSummary run_monitor(FeedAdapter& adapter, const MonitorConfig& config, const vision::ConvClassifier& model,
                           ItemStore& store, const MonitorOptions& options) {
  config.validate();
  const Clock clock = options.clock ? options.clock : Clock(now_utc);
  const auto sleep = options.sleep ? options.sleep
                                   : std::function<void(std::chrono::milliseconds)>(
                                         [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });
  const std::string checksum = config.explain ? model.checksum().hex() : std::string();

  MonitorSummary summary;
  BoundedQueue<Job> queue(config.queue_capacity);
  StreamDedup dedup(config.dedup_window, config.near_dedup, config.near_threshold);
  Rng rng(config.seed);

  std::mutex ready_mutex;
  std::condition_variable ready_cv;
  std::map<std::uint64_t, ClassifiedItem> ready;
  std::optional<std::uint64_t> total_jobs;
  std::exception_ptr writer_error;
  std::size_t classified = 0, failed = 0;

  std::vector<std::thread> workers;
  for (int w = 0; w < config.workers; ++w) {
    workers.emplace_back([&] {
      while (auto job = queue.pop()) {
        ClassifiedItem item = classify(*job, model, config, store, checksum);
        std::lock_guard lock(ready_mutex);
        ready.emplace(job->seq, std::move(item));
        ready_cv.notify_all();
      }
    });
  }

  std::thread writer([&] {
    std::uint64_t next = 0;
    for (;;) {
      ClassifiedItem item;
      {
        std::unique_lock lock(ready_mutex);
        ready_cv.wait(lock, [&] { return ready.count(next) || (total_jobs && next >= *total_jobs); });
        if (!ready.count(next)) return;
        item = std::move(ready.extract(next).mapped());
      }
      ++next;
      if (writer_error) continue;
      try {
        item.processed_at = clock();
        store.put(item);
        if (config.output_jsonl) append_json_line(*config.output_jsonl, to_json(item));
        ++classified;
        if (item.failure) ++failed;
        if (options.on_item) options.on_item(item);
      } catch (...) {
        writer_error = std::current_exception();
      }
    }
  });

  std::uint64_t seq = 0;
  auto finish = [&] {
    queue.close();
    for (auto& t : workers) t.join();
    {
      std::lock_guard lock(ready_mutex);
      total_jobs = seq;
      ready_cv.notify_all();
    }
    writer.join();
  };

  try {
    std::optional<std::string> cursor;
    int failures = 0;
    auto reconnect = [&](const std::string& why) {
      for (;;) {
        if (++failures > config.reconnect.max_attempts) {
          throw Error(ErrorCode::fetch, "feed lost after " + std::to_string(config.reconnect.max_attempts) +
                                            " reconnect attempts: " + why);
        }
        sleep(config.reconnect.delay(failures, rng));
        try {
          adapter.connect(cursor);
          ++summary.reconnects;
          return;
        } catch (const Disconnected&) {
        }
      }
    };
    try {
      adapter.connect(cursor);
    } catch (const Disconnected& e) {
      reconnect(e.what());
    }

    for (;;) {
      std::optional<FeedItem> post;
      try {
        post = adapter.next();
      } catch (const Disconnected& e) {
        reconnect(e.what());
        continue;
      }
      if (!post) break;
      failures = 0;
      cursor = adapter.cursor();
      ++summary.posts_seen;
      if (options.on_post) options.on_post(*post);
      if (!matches_keyword(post->text, config.keyword)) {
        ++summary.posts_off_keyword;
        continue;
      }
      if (post->image_refs.empty()) {
        ++summary.posts_without_images;
        if (config.require_images) continue;
      }
      for (std::size_t k = 0; k < post->image_refs.size(); ++k) {
        ++summary.images_seen;
        Job job;
        job.image_id = post->post_id + "_" + std::to_string(k);
        job.post_id = post->post_id;
        const std::string& ref = post->image_refs[k];
        Bytes bytes;
        try {
          job.source_ref = adapter.resolve(ref);
          bytes = adapter.load_image(ref);
        } catch (const std::exception& e) {
          if (job.source_ref.empty()) job.source_ref = ref;
          job.failure = std::string("fetch: ") + e.what();
        }
        if (!job.failure) {
          const Digest128 digest = dedup::exact_digest(bytes);
          job.content_digest = digest.hex();
          std::optional<dedup::PerceptualSignature> signature;
          try {
            job.image = decode_image(bytes);
            signature = dedup::near_signature(*job.image);
          } catch (const std::exception& e) {
            job.failure = std::string("decode: ") + e.what();
          }
          const DedupDecision d = dedup.decide(job.image_id, digest, signature, post->created_at);
          if (!d.keep) {
            (*d.reason == SuppressReason::exact ? summary.suppressed_exact : summary.suppressed_near)++;
            store.record_suppressed({job.image_id, job.post_id, *d.reason, d.matched_image_id.value_or(""),
                                     job.source_ref, job.content_digest, post->created_at});
            continue;
          }
        }
        job.seq = seq++;
        const std::size_t depth = queue.size();
        if (depth >= queue.capacity()) {
          store.record_overflow(job.post_id, depth, clock());
          ++summary.overflow_events;
        }
        queue.push(std::move(job));
      }
    }
  } catch (...) {
    finish();
    throw;
  }
  finish();
  if (writer_error) std::rethrow_exception(writer_error);
  summary.classified = classified;
  summary.failed = failed;
  return summary;
}

}  // namespace dmgwatch::monitor
