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
#include <optional>
#include <string>
#include <vector>

#include "flashsim/engine.hpp"
#include "flashsim/hwconfig.hpp"
#include "flashsim/tiler.hpp"
#include "flashsim/topology.hpp"
#include "flashsim/workload.hpp"

namespace flashsim {

enum class SimMode { simulate, analytic };
enum class AlphaMode { formula, autotune };
SimMode parse_sim_mode(const std::string& text);
AlphaMode parse_alpha_mode(const std::string& text);
std::string to_string(SimMode m);
std::string to_string(AlphaMode m);

struct NpuModel {
  double ops_per_us = 2e6;
  std::uint32_t systolic_rows = 16;
  std::uint32_t systolic_cols = 16;
  double ingest_bw = 0;  // bytes/us, every channel at full rate
};

NpuModel npu_model(const SystemConfig& config);

/// Offload baseline: weights staged flash -> DRAM -> accelerator over a storage interface.
struct BaselineModel {
  double interface_bw = 4000.0;  // bytes/us
  bool dram_staging = true;
  double transfer_multiplier = 3.0;
};

struct RunOptions {
  SimMode mode = SimMode::simulate;
  Strategy strategy = Strategy::c;
  std::optional<TileShape> tile;          // applied to every matrix when set
  AlphaMode alpha = AlphaMode::formula;
  std::optional<double> flash_fraction;   // overrides the formula split
  std::uint64_t slice_bytes = 512;
  double core_speed = 1.0;
  std::uint32_t calibration_tiles = 8;    // analytic mode window
  double autotune_span = 0.2;
  std::uint32_t autotune_points = 9;
};

struct StageReport {
  std::string name;
  std::uint32_t group = 0;
  std::uint32_t repeat = 1;  // executions per token
  TileShape shape;
  double flash_fraction = 0;
  std::uint64_t flash_tiles = 0;
  std::uint64_t flash_bytes = 0;
  std::uint64_t npu_bytes = 0;
  double time_us = 0;   // one execution
  double flash_us = 0;  // last read-compute result
  double npu_us = 0;    // last streamed page
  double npu_compute_us = 0;
  std::uint64_t channel_bytes = 0;
  double channel_busy_us = 0;  // summed over channels
};

struct PathBytes {
  std::uint64_t flash_channel = 0;
  std::uint64_t d2d = 0;           // die-to-die link; carries the channel bytes
  std::uint64_t dram = 0;
  std::uint64_t interconnect = 0;  // host storage interface

  /// Distinct bytes moved. d2d repeats the channel bytes and is not added again.
  std::uint64_t moved() const { return flash_channel + dram + interconnect; }
};

struct PathEnergy {
  double flash_channel = 0, d2d = 0, dram = 0, interconnect = 0, compute = 0;  // pJ
  double total() const { return flash_channel + d2d + dram + interconnect + compute; }
};

struct TokenReport {
  std::string system;
  std::string model;
  std::uint64_t seq_len = 0;
  std::string variant;
  double latency_us = 0;
  double tokens_per_s = 0;
  double flash_pipeline_us = 0;
  double npu_stream_us = 0;
  double npu_compute_us = 0;
  double kv_us = 0;
  double sfu_us = 0;
  double channel_utilization = 0;
  PathBytes bytes;
  std::uint64_t ops = 0;
  PathEnergy energy;
  std::vector<StageReport> stages;
};

/// One entry per distinct GeMV stage (the per-layer matrices, then the LM head).
std::vector<PlannedMatrix> plan_model(const SystemConfig& config, const ModelSpec& model, const RunOptions& options);

/// Stage timing for one plan, in the selected mode.
StageReport run_stage(const SystemConfig& config, const PlannedMatrix& matrix, const RunOptions& options);

/// Full event simulation of one stage; the timeline is returned for tracing.
Timeline simulate_stage(const SystemConfig& config, const PlannedMatrix& matrix, const RunOptions& options,
                        bool record_events);

TokenReport token_latency(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len,
                          const RunOptions& options = {});

/// Lower bound on latency: each stage at least as long as its flash share over the aggregate core
/// bandwidth and its NPU share over the channel bandwidth left after read-compute vectors.
double analytic_ceiling_us(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len,
                           const RunOptions& options = {});

TokenReport baseline_token_latency(const ModelSpec& model, const QuantizationSpec& quant, std::uint64_t seq_len,
                                   const BaselineModel& baseline = {}, const EnergyCoefficients& energy = {});

PathEnergy energy_report(const TokenReport& report, const EnergyCoefficients& coefficients);

}  // namespace flashsim
