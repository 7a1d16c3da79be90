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
#ifndef DDXFLOW_REPLAY_HPP
#define DDXFLOW_REPLAY_HPP

#include <filesystem>
#include <string>

namespace ddx::replay {

/// Pretty-prints one case's thought/action/observation sequence grouped by
/// iteration, with rank movements between consecutive differentials and
/// fallback events highlighted. Throws Error(MetricsError) naming the line
/// on malformed traces.
std::string render_case_replay(const std::filesystem::path& trace_file);

}  // namespace ddx::replay

#endif  // DDXFLOW_REPLAY_HPP
