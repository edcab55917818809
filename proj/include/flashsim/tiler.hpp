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
#include <stdexcept>
#include <string>
#include <vector>

#include "flashsim/hwconfig.hpp"

namespace flashsim {

/// Raised when read-compute traffic alone would saturate a channel.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tile of the weight matrix processed by one read-compute round across all cores.
/// h_req rows (outputs) by w_req columns (inputs).
struct TileShape {
  std::uint64_t h_req = 0;
  std::uint64_t w_req = 0;

  std::uint64_t elements() const { return h_req * w_req; }
  bool operator==(const TileShape&) const = default;
};

std::string to_string(const TileShape& shape);
/// Parses "HxW".
TileShape parse_tile_shape(const std::string& text);

/// Each core's atomic tile is (h_req/ccore_num) x (w_req/channel_num) and holds exactly one page,
/// and the core's input slice plus result slice fit its buffer.
bool is_feasible(const TileShape& shape, const SystemConfig& config);
void check_feasible(const TileShape& shape, const SystemConfig& config);

/// All shapes satisfying the page-per-atomic-tile constraint, ordered by increasing w_req.
std::vector<TileShape> feasible_shapes(const SystemConfig& config);

/// Trans in elements with broadcast inputs: w_req + channel_num * h_req.
std::uint64_t trans_elements(const TileShape& shape, const SystemConfig& config);

/// Minimizes Trans over feasible shapes; ties go to the smaller w_req.
TileShape optimal_tile_shape(const SystemConfig& config);

/// Like optimal_tile_shape, restricted to shapes that fit inside a rows x cols matrix.
/// Falls back to the unrestricted optimum (padded) when none fits.
TileShape optimal_tile_shape_for(const SystemConfig& config, std::uint64_t rows, std::uint64_t cols);

enum class TransScheme { broadcast, no_broadcast };

/// Channel bytes per tile. Inputs and results are both activation-width elements.
std::uint64_t trans_volume(const TileShape& shape, const SystemConfig& config, TransScheme scheme);

struct AnalyticRates {
  double t_rc = 0;      // us per read-compute round
  double t_r = 0;       // us per read round (one page per channel)
  double rate_rc = 0;   // channel share consumed by read-compute vectors
  double trans = 0;     // bytes, broadcast
  double trans_alt = 0; // bytes, no broadcast
};

/// Throws InfeasibleError when rate_rc >= 1.
AnalyticRates analytic_rates(const TileShape& shape, const SystemConfig& config);

struct WorkloadSplit {
  double alpha = 0;                // share of scheduling rounds issued as read-compute
  double flash_byte_fraction = 0;  // share of weight bytes computed in flash
};

WorkloadSplit compute_alpha(const AnalyticRates& rates, std::uint32_t ccore_num);

/// Byte share for a given round share alpha.
double flash_fraction_from_alpha(double alpha, std::uint32_t ccore_num);

/// One tile slot of the matrix grid. Edge slots may be partially filled.
struct FlashTile {
  std::uint32_t slot = 0;  // row-major slot index
  std::uint64_t row = 0;   // slot row
  std::uint64_t col = 0;   // slot column
  std::uint64_t real_rows = 0;
  std::uint64_t real_cols = 0;
};

/// The page-sized piece of a tile handled by one core. Cores on a channel share the
/// column segment, so they form one broadcast group.
struct AtomicTile {
  std::uint32_t channel = 0;
  std::uint32_t core_in_channel = 0;
  std::uint32_t core = 0;  // global: channel * ccore_num + core_in_channel
  std::uint64_t row0 = 0, col0 = 0;  // offset in the weight matrix
  std::uint64_t real_elements = 0;   // elements that are not padding
};

struct TilingPlan {
  TileShape shape;
  std::uint64_t h_weight = 0;
  std::uint64_t w_weight = 0;
  double alpha = 0;
  double target_fraction = 0;     // requested flash byte share
  double flash_byte_fraction = 0; // achieved share of real matrix bytes
  std::uint32_t slot_rows = 0, slot_cols = 0;
  std::vector<FlashTile> flash_tiles;
  std::uint64_t matrix_bytes = 0;
  std::uint64_t flash_bytes = 0;  // real bytes computed in flash
  std::uint64_t npu_bytes = 0;    // real bytes streamed to the NPU
  std::uint64_t padded_bytes = 0; // zero padding inside flash tiles
  std::uint64_t npu_pages = 0;

  std::uint32_t slot_count() const { return slot_rows * slot_cols; }
};

/// Knobs for partition_matrix. Times feed the whole-tile rounding decision.
struct PartitionInputs {
  TileShape shape;
  double alpha = 0;
  double flash_fraction = 0;    // target byte share in [0, 1]
  double tile_round_us = 0;     // flash time per tile round
  double npu_stream_bw = 0;     // bytes/us reaching the NPU over all channels
  std::uint64_t page_size = 16384;
  double weight_bytes_per_element = 1.0;
};

/// Formula-driven inputs for a config and shape (alpha from analytic_rates).
PartitionInputs partition_inputs(const SystemConfig& config, const TileShape& shape,
                                 std::optional<double> flash_fraction = std::nullopt);

/// Assigns whole tiles to flash, full slots before edge slots, row-major.
/// The flash tile count is the floor of the byte target, bumped by one tile when that
/// better balances the flash and NPU streams.
TilingPlan partition_matrix(std::uint64_t h_weight, std::uint64_t w_weight, const PartitionInputs& in);

std::vector<AtomicTile> atomic_tiles(const FlashTile& tile, const TileShape& shape,
                                     const SystemConfig& config);

/// Structured text dump of a plan.
std::string describe_plan(const TilingPlan& plan, const SystemConfig& config, bool with_atoms);

}  // namespace flashsim
