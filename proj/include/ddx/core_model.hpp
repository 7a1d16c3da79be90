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
#ifndef DDXFLOW_CORE_MODEL_HPP
#define DDXFLOW_CORE_MODEL_HPP

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ddx/errors.hpp"

namespace ddx {

enum class Dataset { DDxPlus, ICraftMD, RareBench };

std::string to_string(Dataset dataset);
Dataset dataset_from_string(std::string_view name);

/// Canonical form for disease-name comparison: trimmed, case-folded,
/// internal whitespace runs collapsed to single spaces. Idempotent.
/// Throws Error(InvalidName) when the input is empty after trimming.
std::string normalize_disease_name(std::string_view raw);

/// Same folding as normalize_disease_name but tolerant of empty input
/// (returns ""). Used for fact/text deduplication keys.
std::string normalize_text(std::string_view raw);

struct InitialInfo {
  std::optional<int> age;
  std::optional<std::string> sex;  // "M", "F", or as given
  std::optional<std::string> chief_complaint;

  bool empty() const { return !age && !sex && !chief_complaint; }
  /// Multi-line "Age: ... / Sex: ... / Chief Complaint: ..." rendering.
  std::string to_text() const;
};

enum class FactSource { Initial, Dialogue, Retrieval };

std::string to_string(FactSource source);
FactSource fact_source_from_string(std::string_view name);

/// The evolving set of known facts about a patient. Facts are only ever
/// added; duplicates (after whitespace/case normalization) are rejected.
class PatientProfile {
 public:
  struct Fact {
    std::string text;
    FactSource source;
  };

  /// Returns true if the fact was new and added.
  bool add(std::string text, FactSource source);

  /// Adds every fact not already present; returns the number added.
  std::size_t merge(const std::vector<std::string>& new_facts, FactSource source);

  bool contains(std::string_view text) const;
  const std::vector<Fact>& facts() const { return facts_; }
  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }

  /// Newline-joined fact texts, in insertion order.
  std::string joined_text() const;

 private:
  std::vector<Fact> facts_;
  std::set<std::string> keys_;
};

/// Ordered disease list, most likely first.
struct RankedDifferential {
  std::vector<std::string> entries;
  int produced_at_iteration = 1;

  bool empty() const { return entries.empty(); }
  /// Entry-wise equality on normalized names.
  bool same_entries(const RankedDifferential& other) const;
};

struct PatientCase {
  std::string case_id;
  Dataset dataset = Dataset::DDxPlus;
  std::optional<InitialInfo> initial_info;
  std::vector<std::string> full_profile;
  std::vector<std::string> diagnosis_options;
  std::string ground_truth;
  std::optional<std::vector<std::string>> ground_truth_ddx;
  std::optional<std::string> subset;  // RareBench regional subset

  /// Throws Error(IngestError) on any invariant violation: empty profile,
  /// ground truth missing from options, RareBench case with initial info,
  /// or an InitialInfo with no populated field.
  void validate() const;
};

struct ParseWarnings {
  std::vector<std::string> messages;
};

/// Extracts "N. name" lines (ranks starting at 1, consecutive) from model
/// output. Lines before the first match and after the list are ignored; a
/// non-matching line inside the list terminates it. Duplicate names beyond
/// the first occurrence are dropped with a warning; output is truncated to
/// max_len. Throws Error(ParseFailure) on zero matches or a broken rank
/// sequence, Error(InvalidArgument) when max_len < 1.
RankedDifferential parse_ranked_list(std::string_view text, int max_len,
                                     ParseWarnings* warnings = nullptr);

/// Renders one "N. name" line per entry. parse_ranked_list on the result
/// reproduces the input entries. Throws Error(InvalidArgument) when empty.
std::string render_ranked_list(const RankedDifferential& ddx);

// JSON bindings for the unified case format.
void to_json(nlohmann::json& j, const InitialInfo& info);
void from_json(const nlohmann::json& j, InitialInfo& info);
void to_json(nlohmann::json& j, const PatientCase& c);
void from_json(const nlohmann::json& j, PatientCase& c);
void to_json(nlohmann::json& j, const RankedDifferential& d);
void from_json(const nlohmann::json& j, RankedDifferential& d);

inline constexpr int kDefaultDdxLength = 10;

}  // namespace ddx

#endif  // DDXFLOW_CORE_MODEL_HPP
