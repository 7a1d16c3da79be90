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
#include "ddx/benchmark_ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace ddx::ingest {

void DatasetDescriptor::validate() const {
  const bool rare = kind == Dataset::RareBench;
  if (rare && (!subset || subset->empty())) {
    throw Error(ErrorCode::IngestError, "RareBench descriptors require a subset");
  }
  if (!rare && subset) {
    throw Error(ErrorCode::IngestError,
                "subset is only meaningful for RareBench descriptors");
  }
  if (rare) {
    static const std::set<std::string> known = {"RAMEDIS", "MME", "PUMCH"};
    if (!known.count(*subset)) {
      throw Error(ErrorCode::IngestError, "unknown RareBench subset '" + *subset + "'");
    }
  }
}

namespace {

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::IngestError, "cannot open " + path.string());
  }
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::IngestError, path.string() + ": " + e.what());
  }
}

}  // namespace

LoadResult load_dataset(const DatasetDescriptor& descriptor) {
  descriptor.validate();
  const nlohmann::json file = read_json_file(descriptor.path);
  if (!file.contains("cases") || !file.at("cases").is_array()) {
    throw Error(ErrorCode::IngestError,
                descriptor.path.string() + ": missing 'cases' array");
  }

  LoadResult result;
  std::size_t considered = 0;
  for (const auto& record : file.at("cases")) {
    PatientCase c;
    try {
      c = record.get<PatientCase>();
    } catch (const std::exception& e) {
      ++considered;
      result.skipped.push_back(std::string("unreadable record: ") + e.what());
      continue;
    }
    if (c.dataset != descriptor.kind) {
      ++considered;
      result.skipped.push_back("case " + c.case_id + ": dataset mismatch");
      continue;
    }
    if (descriptor.kind == Dataset::RareBench) {
      if (!c.subset) {
        ++considered;
        result.skipped.push_back("case " + c.case_id + ": RareBench record without subset");
        continue;
      }
      if (*c.subset != *descriptor.subset) continue;  // other subset, not an error
    }
    ++considered;
    try {
      c.validate();
    } catch (const Error& e) {
      result.skipped.push_back(e.what());
      continue;
    }
    result.cases.push_back(std::move(c));
  }

  if (considered == 0) {
    throw Error(ErrorCode::IngestError, descriptor.path.string() + ": no records");
  }
  if (result.skipped.size() * 10 > considered) {
    throw Error(ErrorCode::SchemaDrift,
                descriptor.path.string() + ": " + std::to_string(result.skipped.size()) +
                    " of " + std::to_string(considered) + " records skipped");
  }
  return result;
}

namespace {

// Reply format for backend-assisted dedup: one "variant -> canonical" line
// per merged name.
std::map<std::string, std::string> parse_merge_mapping(const std::string& reply) {
  std::map<std::string, std::string> mapping;
  std::istringstream in(reply);
  std::string line;
  while (std::getline(in, line)) {
    const auto arrow = line.find("->");
    if (arrow == std::string::npos) continue;
    std::string from = normalize_text(line.substr(0, arrow));
    std::string to = normalize_text(line.substr(arrow + 2));
    if (!from.empty() && !to.empty() && from != to) mapping[from] = to;
  }
  return mapping;
}

}  // namespace

DiseaseSet build_disease_set(const std::vector<PatientCase>& cases, DedupMode mode,
                             const DatasetDescriptor& source, llm::ChatClient* chat,
                             std::string* warning, const std::filesystem::path& mapping_out) {
  if (cases.empty()) {
    throw Error(ErrorCode::IngestError, "build_disease_set: no cases");
  }
  std::set<std::string> names;
  for (const auto& c : cases) {
    names.insert(normalize_disease_name(c.ground_truth));
    for (const auto& option : c.diagnosis_options) {
      names.insert(normalize_disease_name(option));
    }
  }

  if (mode == DedupMode::BackendAssisted) {
    std::map<std::string, std::string> mapping;
    if (chat != nullptr && chat->valid()) {
      std::string listing;
      for (const auto& name : names) listing += "- " + name + "\n";
      llm::ChatRequest request;
      request.messages.push_back(
          {llm::Role::User,
           "The list below may contain redundant disease names (synonyms or spelling "
           "variants). For every redundant name, output one line 'variant -> canonical' "
           "choosing one canonical name per group. Output nothing for names that are "
           "already unique.\n\n" +
               listing});
      try {
        mapping = parse_merge_mapping(chat->complete(request));
      } catch (const Error& e) {
        if (warning) *warning = std::string("backend dedup failed, using exact mode: ") + e.what();
        mapping.clear();
      }
    } else if (warning) {
      *warning = "backend dedup requested without a chat client, using exact mode";
    }
    if (!mapping.empty()) {
      std::set<std::string> merged;
      for (const auto& name : names) {
        auto it = mapping.find(name);
        merged.insert(it == mapping.end() ? name : it->second);
      }
      names = std::move(merged);
      if (!mapping_out.empty()) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [from, to] : mapping) j[from] = to;
        std::ofstream out(mapping_out);
        out << j.dump(2) << "\n";
      }
    }
  }

  DiseaseSet set;
  set.source = source;
  set.diseases.assign(names.begin(), names.end());
  return set;
}

std::vector<PatientCase> sample_cases(const std::vector<PatientCase>& cases, std::size_t n,
                                      std::uint64_t seed) {
  if (n > cases.size()) {
    throw Error(ErrorCode::IngestError,
                "sample of " + std::to_string(n) + " from " + std::to_string(cases.size()) +
                    " cases");
  }
  std::vector<std::size_t> indices(cases.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates with modulo reduction: portable because the
  // mt19937_64 output sequence is fixed by the standard.
  std::vector<PatientCase> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t remaining = indices.size() - i;
    const std::size_t j = i + static_cast<std::size_t>(rng() % remaining);
    std::swap(indices[i], indices[j]);
    out.push_back(cases[indices[i]]);
  }
  return out;
}

std::vector<PatientCase> split_example_store(const std::vector<PatientCase>& cases,
                                             const std::set<std::string>& eval_ids) {
  std::vector<PatientCase> out;
  for (const auto& c : cases) {
    if (!eval_ids.count(c.case_id)) out.push_back(c);
  }
  return out;
}

void save_cases(const std::filesystem::path& path, Dataset dataset,
                const std::vector<PatientCase>& cases) {
  nlohmann::json j{{"schema", kCaseFileSchema},
                   {"dataset", to_string(dataset)},
                   {"cases", cases}};
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::IngestError, "cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

std::vector<PatientCase> read_case_file(const std::filesystem::path& path) {
  const nlohmann::json j = read_json_file(path);
  std::vector<PatientCase> cases;
  for (const auto& record : j.at("cases")) {
    cases.push_back(record.get<PatientCase>());
  }
  return cases;
}

}  // namespace ddx::ingest
