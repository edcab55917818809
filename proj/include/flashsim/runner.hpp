/*
 * Copyright 2026 The flashsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flashsim/hostmodel.hpp"

namespace flashsim {

/// Environment variable naming the default directory for run records.
inline constexpr const char* kOutputDirEnv = "FLASHSIM_OUT_DIR";

struct RunSpec {
  std::string preset;       // exactly one of preset / config_path; neither means preset S
  std::string config_path;
  std::string model = "opt-6.7b";  // preset name or file path
  std::uint64_t seq_len = 512;
  RunOptions options;
  std::uint64_t seed = 0;
  std::string trace_path;
  std::string out_path;
};

SystemConfig resolve_system(const RunSpec& spec);

nlohmann::json to_json(const SystemConfig& config);
nlohmann::json to_json(const ModelSpec& model);
nlohmann::json to_json(const TokenReport& report);
/// Reproducibility header: resolved config, model and options.
nlohmann::json run_header(const RunSpec& spec, const SystemConfig& config, const ModelSpec& model);

/// Runs one spec and returns its record. Writes the trace when trace_path is set.
nlohmann::json run(const RunSpec& spec);

/// Writes the record to spec.out_path, else to $FLASHSIM_OUT_DIR, else returns false.
bool emit(const nlohmann::json& record, const RunSpec& spec, const std::string& default_name);

enum class SweepAxis { channels, chips };
SweepAxis parse_sweep_axis(const std::string& text);

struct SweepRow {
  std::uint32_t point = 0;
  double tokens_per_s = 0;
  double utilization = 0;
  std::string error;  // empty on success
};

/// Points run concurrently; rows come back in point order. A failing point reports its
/// error without stopping the others.
std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<std::uint32_t>& points, const SystemConfig& base,
                            const ModelSpec& model, std::uint64_t seq_len, const RunOptions& options);
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct Ablation {
  std::string name;
  std::vector<std::pair<std::string, TokenReport>> variants;  // first entry is the reference
};

Ablation ablate_slicing(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len, RunOptions options);
Ablation ablate_tiling(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len, RunOptions options);
Ablation ablate_tile_size(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len,
                          RunOptions options, const std::vector<TileShape>& shapes);
nlohmann::json to_json(const Ablation& ablation);

}  // namespace flashsim
