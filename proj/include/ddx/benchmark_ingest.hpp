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
#ifndef DDXFLOW_BENCHMARK_INGEST_HPP
#define DDXFLOW_BENCHMARK_INGEST_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ddx/core_model.hpp"
#include "ddx/llm_provider.hpp"

namespace ddx::ingest {

inline constexpr const char* kCaseFileSchema = "ddxflow.cases.v1";

struct DatasetDescriptor {
  Dataset kind = Dataset::DDxPlus;
  std::filesystem::path path;
  std::optional<std::string> subset;  // RareBench: RAMEDIS, MME, or PUMCH

  /// subset must be present iff kind == RareBench.
  void validate() const;
};

struct LoadResult {
  std::vector<PatientCase> cases;
  std::vector<std::string> skipped;  // one diagnostic per skipped record
};

/// Loads a dataset file in the unified three-part case format, applying the
/// per-dataset rules (DDxPlus keeps its reference differential; RareBench
/// cases carry no initial info and are filtered by subset). Malformed
/// records are skipped with a diagnostic; more than 10% skipped raises
/// Error(SchemaDrift), an unreadable file Error(IngestError).
LoadResult load_dataset(const DatasetDescriptor& descriptor);

struct DiseaseSet {
  std::vector<std::string> diseases;  // normalized, sorted, unique
  DatasetDescriptor source;
};

enum class DedupMode { Exact, BackendAssisted };

/// Exact mode unions the normalized ground truths and listed options.
/// BackendAssisted additionally asks the chat backend to merge redundant
/// names; the applied mapping is written to mapping_out (when given) and a
/// backend failure falls back to Exact with a warning.
DiseaseSet build_disease_set(const std::vector<PatientCase>& cases, DedupMode mode,
                             const DatasetDescriptor& source = {},
                             llm::ChatClient* chat = nullptr,
                             std::string* warning = nullptr,
                             const std::filesystem::path& mapping_out = {});

/// Deterministic sample of n cases without replacement. The generator is
/// fixed and portable: mt19937_64 seeded with `seed` drives a partial
/// Fisher-Yates shuffle, picking index i + (next() % (N - i)) at step i.
/// Throws Error(IngestError) when n > |cases|.
std::vector<PatientCase> sample_cases(const std::vector<PatientCase>& cases, std::size_t n,
                                      std::uint64_t seed);

/// Cases whose id is not in eval_ids - the few-shot reference pool,
/// guaranteed disjoint from the evaluation sample.
std::vector<PatientCase> split_example_store(const std::vector<PatientCase>& cases,
                                             const std::set<std::string>& eval_ids);

/// Unified case-file IO.
void save_cases(const std::filesystem::path& path, Dataset dataset,
                const std::vector<PatientCase>& cases);
std::vector<PatientCase> read_case_file(const std::filesystem::path& path);

}  // namespace ddx::ingest

#endif  // DDXFLOW_BENCHMARK_INGEST_HPP
