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
#include "ddx/core_model.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ddx {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v';
}

}  // namespace

std::string to_string(Dataset dataset) {
  switch (dataset) {
    case Dataset::DDxPlus: return "ddxplus";
    case Dataset::ICraftMD: return "icraftmd";
    case Dataset::RareBench: return "rarebench";
  }
  return "unknown";
}

Dataset dataset_from_string(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == '-' || c == '_' || is_space(c)) continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "ddxplus") return Dataset::DDxPlus;
  if (key == "icraftmd") return Dataset::ICraftMD;
  if (key == "rarebench") return Dataset::RareBench;
  throw Error(ErrorCode::InvalidArgument, "unknown dataset '" + std::string(name) + "'");
}

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (char c : raw) {
    if (is_space(c)) {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::string normalize_disease_name(std::string_view raw) {
  std::string out = normalize_text(raw);
  if (out.empty()) {
    throw Error(ErrorCode::InvalidName, "disease name empty after trimming");
  }
  return out;
}

std::string InitialInfo::to_text() const {
  std::ostringstream os;
  bool first = true;
  auto line = [&](const std::string& label, const std::string& value) {
    if (!first) os << '\n';
    os << label << ": " << value;
    first = false;
  };
  if (age) line("Age", std::to_string(*age));
  if (sex) line("Sex", *sex);
  if (chief_complaint) line("Chief Complaint", *chief_complaint);
  return os.str();
}

std::string to_string(FactSource source) {
  switch (source) {
    case FactSource::Initial: return "initial";
    case FactSource::Dialogue: return "dialogue";
    case FactSource::Retrieval: return "retrieval";
  }
  return "unknown";
}

FactSource fact_source_from_string(std::string_view name) {
  if (name == "initial") return FactSource::Initial;
  if (name == "dialogue") return FactSource::Dialogue;
  if (name == "retrieval") return FactSource::Retrieval;
  throw Error(ErrorCode::InvalidArgument, "unknown fact source '" + std::string(name) + "'");
}

bool PatientProfile::add(std::string text, FactSource source) {
  std::string key = normalize_text(text);
  if (key.empty()) return false;
  if (!keys_.insert(key).second) return false;
  facts_.push_back(Fact{std::move(text), source});
  return true;
}

std::size_t PatientProfile::merge(const std::vector<std::string>& new_facts,
                                  FactSource source) {
  std::size_t added = 0;
  for (const auto& fact : new_facts) {
    if (add(fact, source)) ++added;
  }
  return added;
}

bool PatientProfile::contains(std::string_view text) const {
  return keys_.count(normalize_text(text)) > 0;
}

std::string PatientProfile::joined_text() const {
  std::string out;
  for (const auto& fact : facts_) {
    if (!out.empty()) out.push_back('\n');
    out += fact.text;
  }
  return out;
}

bool RankedDifferential::same_entries(const RankedDifferential& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (normalize_text(entries[i]) != normalize_text(other.entries[i])) return false;
  }
  return true;
}

void PatientCase::validate() const {
  if (case_id.empty()) {
    throw Error(ErrorCode::IngestError, "case with empty case_id");
  }
  if (full_profile.empty()) {
    throw Error(ErrorCode::IngestError, "case " + case_id + ": full_profile is empty");
  }
  if (ground_truth.empty()) {
    throw Error(ErrorCode::IngestError, "case " + case_id + ": missing ground truth");
  }
  const std::string truth = normalize_disease_name(ground_truth);
  bool found = false;
  for (const auto& option : diagnosis_options) {
    if (normalize_text(option) == truth) {
      found = true;
      break;
    }
  }
  if (!found) {
    throw Error(ErrorCode::IngestError,
                "case " + case_id + ": ground truth '" + ground_truth +
                    "' not among diagnosis options");
  }
  if (dataset == Dataset::RareBench && initial_info.has_value()) {
    throw Error(ErrorCode::IngestError,
                "case " + case_id + ": RareBench cases carry no initial info");
  }
  if (initial_info && initial_info->empty()) {
    throw Error(ErrorCode::IngestError,
                "case " + case_id + ": initial_info present but has no fields");
  }
}

namespace {

// Matches "N. name" with optional surrounding whitespace. Returns false when
// the line is not a ranked entry.
bool parse_rank_line(std::string_view line, int* rank, std::string* name) {
  std::size_t i = 0;
  while (i < line.size() && is_space(line[i])) ++i;
  std::size_t digits_begin = i;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == digits_begin || i >= line.size() || line[i] != '.') return false;
  ++i;  // consume '.'
  std::size_t name_begin = i;
  while (name_begin < line.size() && is_space(line[name_begin])) ++name_begin;
  std::size_t name_end = line.size();
  while (name_end > name_begin && is_space(line[name_end - 1])) --name_end;
  if (name_begin >= name_end) return false;
  const std::string digits(line.substr(digits_begin, i - digits_begin - 1));
  if (digits.size() > 6) return false;  // not a plausible rank number
  *rank = std::stoi(digits);
  *name = std::string(line.substr(name_begin, name_end - name_begin));
  return true;
}

}  // namespace

RankedDifferential parse_ranked_list(std::string_view text, int max_len,
                                     ParseWarnings* warnings) {
  if (max_len < 1) {
    throw Error(ErrorCode::InvalidArgument, "parse_ranked_list: max_len < 1");
  }

  std::vector<std::pair<int, std::string>> raw;
  std::size_t pos = 0;
  bool in_list = false;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    int rank = 0;
    std::string name;
    if (parse_rank_line(line, &rank, &name)) {
      raw.emplace_back(rank, std::move(name));
      in_list = true;
    } else if (in_list && !normalize_text(line).empty()) {
      break;  // a non-matching line inside the list ends it
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }

  if (raw.empty()) {
    throw Error(ErrorCode::ParseFailure, "no 'N. name' lines found");
  }
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i].first != static_cast<int>(i) + 1) {
      throw Error(ErrorCode::ParseFailure,
                  "rank numbers must start at 1 and be consecutive (saw " +
                      std::to_string(raw[i].first) + " at position " +
                      std::to_string(i + 1) + ")");
    }
  }

  RankedDifferential out;
  std::set<std::string> seen;
  for (auto& [rank, name] : raw) {
    std::string key = normalize_text(name);
    if (!seen.insert(key).second) {
      if (warnings) {
        warnings->messages.push_back("duplicate entry dropped: '" + name + "'");
      }
      continue;
    }
    if (static_cast<int>(out.entries.size()) < max_len) {
      out.entries.push_back(std::move(name));
    }
  }
  return out;
}

std::string render_ranked_list(const RankedDifferential& ddx) {
  if (ddx.entries.empty()) {
    throw Error(ErrorCode::InvalidArgument, "render_ranked_list: empty list");
  }
  std::string out;
  for (std::size_t i = 0; i < ddx.entries.size(); ++i) {
    if (i) out.push_back('\n');
    out += std::to_string(i + 1);
    out += ". ";
    out += ddx.entries[i];
  }
  return out;
}

void to_json(nlohmann::json& j, const InitialInfo& info) {
  j = nlohmann::json::object();
  if (info.age) j["age"] = *info.age;
  if (info.sex) j["sex"] = *info.sex;
  if (info.chief_complaint) j["chief_complaint"] = *info.chief_complaint;
}

void from_json(const nlohmann::json& j, InitialInfo& info) {
  info = InitialInfo{};
  if (j.contains("age") && !j.at("age").is_null()) info.age = j.at("age").get<int>();
  if (j.contains("sex") && !j.at("sex").is_null()) info.sex = j.at("sex").get<std::string>();
  if (j.contains("chief_complaint") && !j.at("chief_complaint").is_null()) {
    info.chief_complaint = j.at("chief_complaint").get<std::string>();
  }
}

void to_json(nlohmann::json& j, const PatientCase& c) {
  j = nlohmann::json{{"case_id", c.case_id},
                     {"dataset", to_string(c.dataset)},
                     {"full_profile", c.full_profile},
                     {"diagnosis_options", c.diagnosis_options},
                     {"ground_truth", c.ground_truth}};
  if (c.initial_info) j["initial_info"] = *c.initial_info;
  if (c.ground_truth_ddx) j["ground_truth_ddx"] = *c.ground_truth_ddx;
  if (c.subset) j["subset"] = *c.subset;
}

void from_json(const nlohmann::json& j, PatientCase& c) {
  c = PatientCase{};
  c.case_id = j.at("case_id").get<std::string>();
  c.dataset = dataset_from_string(j.at("dataset").get<std::string>());
  if (j.contains("initial_info") && !j.at("initial_info").is_null()) {
    c.initial_info = j.at("initial_info").get<InitialInfo>();
  }
  c.full_profile = j.at("full_profile").get<std::vector<std::string>>();
  c.diagnosis_options = j.at("diagnosis_options").get<std::vector<std::string>>();
  c.ground_truth = j.at("ground_truth").get<std::string>();
  if (j.contains("ground_truth_ddx") && !j.at("ground_truth_ddx").is_null()) {
    c.ground_truth_ddx = j.at("ground_truth_ddx").get<std::vector<std::string>>();
  }
  if (j.contains("subset") && !j.at("subset").is_null()) {
    c.subset = j.at("subset").get<std::string>();
  }
}

void to_json(nlohmann::json& j, const RankedDifferential& d) {
  j = nlohmann::json{{"entries", d.entries},
                     {"produced_at_iteration", d.produced_at_iteration}};
}

void from_json(const nlohmann::json& j, RankedDifferential& d) {
  d.entries = j.at("entries").get<std::vector<std::string>>();
  d.produced_at_iteration = j.value("produced_at_iteration", 1);
}

}  // namespace ddx
