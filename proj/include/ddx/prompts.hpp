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
#ifndef DDXFLOW_PROMPTS_HPP
#define DDXFLOW_PROMPTS_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ddx::prompts {

/// Replaces every <KEY> placeholder with values.at("KEY"). Tokens without a
/// value are left untouched (they may be literal format examples).
std::string render_template(const std::string& text,
                            const std::map<std::string, std::string>& values);

/// Named prompt templates: compiled-in defaults, optionally overridden by
/// <name>.txt files in a directory. Trailing newlines at end-of-file are
/// stripped so file and builtin forms compare equal.
class PromptLibrary {
 public:
  static PromptLibrary builtin();

  /// Loads every known template name from dir; names without a file keep
  /// the builtin text. Throws Error(ConfigError) when dir does not exist.
  static PromptLibrary from_dir(const std::filesystem::path& dir);

  const std::string& text(const std::string& name) const;
  std::string render(const std::string& name,
                     const std::map<std::string, std::string>& values) const;
  std::vector<std::string> names() const;

 private:
  std::map<std::string, std::string> templates_;
};

}  // namespace ddx::prompts

#endif  // DDXFLOW_PROMPTS_HPP
