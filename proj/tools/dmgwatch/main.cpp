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

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "dmgwatch/core/error.hpp"
#include "run_record.hpp"

namespace {

constexpr int kUsageExit = 2;

void print_error(std::string_view code, const std::string& message, const std::string& subject) {
  nlohmann::json j = {{"error", code}, {"message", message}};
  if (!subject.empty()) j["subject"] = subject;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dmgwatch;
  CLI::App app("Earthquake building-damage image pipeline: fetch, dedup, train, evaluate, explain, monitor.",
               "dmgwatch");
  app.set_version_flag("--version", cli::kVersion);

  cli::Context ctx;
  app.add_option("--seed", ctx.seed, "Random seed for every seeded stage")->each([&](const std::string&) {
    ctx.seed_given = true;
  });
  app.add_option("--config", ctx.config, "Pipeline config JSON; sections train and monitor supply defaults")
      ->check(CLI::ExistingFile);
  app.add_option("--out-dir", ctx.out_dir, "Directory for reports and runs.jsonl");
  app.require_subcommand(1);
  cli::register_commands(app, ctx);

  if (argc < 2) {
    std::cerr << app.help();
    return kUsageExit;
  }

  std::vector<std::string> args(argv, argv + argc);
  cli::RunRecord record(args, 0);
  ctx.record = &record;
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kUsageExit;
  } catch (const Error& e) {
    print_error(to_string(e.code()), e.what(), e.subject());
    record.set_seed(ctx.seed);
    record.note("error", {{"code", to_string(e.code())}, {"message", e.what()}});
    try {
      record.append(ctx.out_dir, "error");
    } catch (const std::exception&) {
    }
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what(), {});
    return 1;
  }
  record.set_seed(ctx.seed);
  record.append(ctx.out_dir, "ok");
  return 0;
}
