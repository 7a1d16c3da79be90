/*
 * Copyright 2025 The ddxflow Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ddx/benchmark_ingest.hpp"
#include "ddx/metrics.hpp"
#include "ddx/replay.hpp"
#include "ddx/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 2;      // ingest/eval/replay failures
constexpr int kExitNoCases = 3;    // run completed zero cases

struct IngestArgs {
  std::string dataset;
  std::string path;
  std::string subset;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out_dir;
};

int cmd_ingest(const IngestArgs& args) {
  using namespace ddx;
  ingest::DatasetDescriptor descriptor;
  descriptor.kind = dataset_from_string(args.dataset);
  descriptor.path = args.path;
  if (!args.subset.empty()) descriptor.subset = args.subset;

  ingest::LoadResult loaded = ingest::load_dataset(descriptor);
  for (const auto& diagnostic : loaded.skipped) {
    std::cerr << "skipped: " << diagnostic << "\n";
  }
  std::cout << "loaded " << loaded.cases.size() << " cases (" << loaded.skipped.size()
            << " skipped)\n";

  const std::size_t n = args.n == 0 ? loaded.cases.size() : args.n;
  std::vector<PatientCase> sample = ingest::sample_cases(loaded.cases, n, args.seed);

  const std::filesystem::path out(args.out_dir);
  std::filesystem::create_directories(out);
  ingest::save_cases(out / "sample.json", descriptor.kind, sample);

  std::set<std::string> eval_ids;
  for (const auto& c : sample) eval_ids.insert(c.case_id);
  ingest::save_cases(out / "store_sources.json", descriptor.kind,
                     ingest::split_example_store(loaded.cases, eval_ids));

  ingest::DiseaseSet diseases =
      ingest::build_disease_set(loaded.cases, ingest::DedupMode::Exact, descriptor);
  {
    nlohmann::json j{{"schema", "ddxflow.disease_set.v1"},
                     {"dataset", to_string(descriptor.kind)},
                     {"count", diseases.diseases.size()},
                     {"diseases", diseases.diseases}};
    std::ofstream f(out / "disease_set.json");
    f << j.dump(2) << "\n";
  }

  nlohmann::json manifest{{"schema", "ddxflow.sample_manifest.v1"},
                          {"dataset", to_string(descriptor.kind)},
                          {"source_path", args.path},
                          {"subset", args.subset},
                          {"seed", args.seed},
                          {"n", n},
                          {"case_ids", std::vector<std::string>(eval_ids.begin(), eval_ids.end())},
                          {"skipped", loaded.skipped.size()}};
  // keep sampling order visible as well
  nlohmann::json order = nlohmann::json::array();
  for (const auto& c : sample) order.push_back(c.case_id);
  manifest["sample_order"] = order;
  {
    std::ofstream f(out / "sample_manifest.json");
    f << manifest.dump(2) << "\n";
  }
  std::cout << "wrote sample.json, store_sources.json, disease_set.json, sample_manifest.json to "
            << out.string() << "\n";
  return kExitOk;
}

struct RunFlagOverrides {
  std::string policy;
  std::string output_dir;
  int max_iterations = -1;
  int questions = -1;
  long long sample_n = -1;
  long long seed = -1;
};

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const RunFlagOverrides& flags) {
  using namespace ddx;
  run::RunConfig config = run::load_config(config_path);
  if (!flags.policy.empty()) config.policy = flags.policy;
  if (!flags.output_dir.empty()) config.output_dir = flags.output_dir;
  if (flags.max_iterations > 0) config.max_iterations = flags.max_iterations;
  if (flags.questions > 0) config.questions_per_iteration = flags.questions;
  if (flags.sample_n >= 0) config.sample_n = static_cast<std::size_t>(flags.sample_n);
  if (flags.seed >= 0) config.seed = static_cast<std::uint64_t>(flags.seed);
  for (const auto& override_arg : overrides) {
    const auto eq = override_arg.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, "override must be key=value: " + override_arg);
    }
    nlohmann::json j = config;
    const std::string key = override_arg.substr(0, eq);
    const std::string value = override_arg.substr(eq + 1);
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
      parsed = value;  // plain string
    }
    j[key] = parsed;
    config = j.get<run::RunConfig>();
  }

  run::RunSummary summary = run::run_experiment(config);
  for (const auto& outcome : summary.outcomes) {
    if (outcome.completed) {
      std::cout << outcome.case_id << ": ok (" << outcome.trace_file << ")\n";
    } else {
      std::cerr << outcome.case_id << ": FAILED - " << outcome.error << "\n";
    }
  }
  std::cout << summary.completed_count() << "/" << summary.outcomes.size()
            << " cases completed; manifest " << summary.manifest_path.string() << "\n";
  return summary.completed_count() > 0 ? kExitOk : kExitNoCases;
}

int cmd_eval(const std::string& trace_dir, const std::string& k_spec,
             const std::string& out_path) {
  using namespace ddx;
  std::vector<int> k_values;
  std::stringstream ks(k_spec);
  std::string token;
  while (std::getline(ks, token, ',')) {
    if (!token.empty()) k_values.push_back(std::stoi(token));
  }
  if (k_values.empty()) k_values = {1, 3, 5};

  metrics::RunReport report = metrics::build_report(trace_dir, k_values);
  std::cout << metrics::render_table(report);
  if (!out_path.empty()) {
    std::ofstream f(out_path);
    f << metrics::report_to_json(report).dump(2) << "\n";
    std::cout << "report written to " << out_path << "\n";
  }
  return kExitOk;
}

int cmd_replay(const std::string& trace_file) {
  std::cout << ddx::replay::render_case_replay(trace_file);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ddxflow - iterative differential diagnosis agent framework"};
  app.require_subcommand(1);

  IngestArgs ingest_args;
  CLI::App* ingest = app.add_subcommand("ingest", "Load a dataset, sample cases, build outputs");
  ingest->add_option("--dataset", ingest_args.dataset, "ddxplus | icraftmd | rarebench")
      ->required();
  ingest->add_option("--path", ingest_args.path, "dataset file (unified case format)")
      ->required();
  ingest->add_option("--subset", ingest_args.subset, "RareBench subset (RAMEDIS|MME|PUMCH)");
  ingest->add_option("--n", ingest_args.n, "sample size (0 = all)");
  ingest->add_option("--seed", ingest_args.seed, "sampling seed");
  ingest->add_option("--out", ingest_args.out_dir, "output directory")->required();

  std::string run_config_path;
  std::vector<std::string> run_overrides;
  RunFlagOverrides run_flags;
  CLI::App* run_cmd = app.add_subcommand("run", "Execute an experiment from a config file");
  run_cmd->add_option("--config", run_config_path, "run config JSON")->required();
  run_cmd->add_option("--set", run_overrides, "override config fields (key=value)");
  run_cmd->add_option("--policy", run_flags.policy, "fixed | dynamic");
  run_cmd->add_option("--max-iterations", run_flags.max_iterations, "iteration budget");
  run_cmd->add_option("--questions", run_flags.questions, "questions per iteration");
  run_cmd->add_option("--n", run_flags.sample_n, "sample size (0 = all)");
  run_cmd->add_option("--seed", run_flags.seed, "sampling seed");
  run_cmd->add_option("--out", run_flags.output_dir, "output directory");

  std::string eval_dir, eval_k = "1,3,5", eval_out;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a directory of trace files");
  eval_cmd->add_option("--traces", eval_dir, "trace directory")->required();
  eval_cmd->add_option("--k", eval_k, "comma-separated GTPA cutoffs");
  eval_cmd->add_option("--out", eval_out, "write machine-readable report here");

  std::string replay_path;
  CLI::App* replay_cmd = app.add_subcommand("replay", "Pretty-print one case trace");
  replay_cmd->add_option("trace", replay_path, "case trace file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_args);
    if (run_cmd->parsed()) return cmd_run(run_config_path, run_overrides, run_flags);
    if (eval_cmd->parsed()) return cmd_eval(eval_dir, eval_k, eval_out);
    if (replay_cmd->parsed()) return cmd_replay(replay_path);
  } catch (const ddx::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
