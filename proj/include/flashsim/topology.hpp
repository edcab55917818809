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

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flashsim/hwconfig.hpp"
#include "flashsim/tiler.hpp"

namespace flashsim {

class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FlashAddress {
  std::uint32_t channel = 0;
  std::uint32_t chip = 0;
  std::uint32_t die = 0;
  std::uint32_t plane = 0;
  std::uint32_t block = 0;
  std::uint32_t page = 0;

  auto operator<=>(const FlashAddress&) const = default;
};

std::string to_string(const FlashAddress& addr);

struct RegisterState {
  bool busy = false;
  Nanos ready_at = 0;  // when the current occupant finishes or last became free
};

struct PlaneState {
  RegisterState data_register;
  RegisterState cache_register;
};

struct ComputeCoreState {
  std::uint32_t die = 0;  // global die index
  std::uint64_t input_occupancy = 0;
  std::uint64_t output_occupancy = 0;
  Nanos busy_until = 0;
};

/// Channels, chips, dies, planes and compute cores of one device. Indices are dense:
/// die = (channel * chips + chip) * dies_per_chip + die, plane = die * planes_per_die + plane,
/// core = channel * ccore_num + core_in_channel.
class DeviceTree {
 public:
  explicit DeviceTree(const SystemConfig& config);

  const SystemConfig& config() const { return config_; }
  std::uint32_t channel_count() const { return config_.flash.channel_num; }
  std::uint32_t die_count() const;
  std::uint32_t plane_count() const { return static_cast<std::uint32_t>(planes_.size()); }
  std::uint32_t core_count() const { return static_cast<std::uint32_t>(cores_.size()); }

  /// Throws std::out_of_range when any index exceeds the geometry.
  void check(const FlashAddress& addr) const;
  std::uint32_t die_index(const FlashAddress& addr) const;
  std::uint32_t plane_index(const FlashAddress& addr) const;

  /// Die-level address (block and page zero) of a core.
  FlashAddress core_die(std::uint32_t core) const;
  std::uint32_t channel_of_core(std::uint32_t core) const;
  /// Cores sharing the die of addr own disjoint plane groups; this returns the owner of addr's plane.
  std::uint32_t core_of_plane(const FlashAddress& addr) const;
  /// First plane of the core's plane group. Read-compute pages live here.
  FlashAddress compute_plane(std::uint32_t core) const;
  /// Planes of a die that hold plain-read pages. Falls back to every plane when the
  /// compute planes leave none free.
  std::vector<std::uint32_t> read_planes() const;

  PlaneState& plane(const FlashAddress& addr) { return planes_[plane_index(addr)]; }
  const PlaneState& plane(const FlashAddress& addr) const { return planes_[plane_index(addr)]; }
  std::vector<PlaneState>& planes() { return planes_; }
  std::vector<ComputeCoreState>& cores() { return cores_; }
  const std::vector<ComputeCoreState>& cores() const { return cores_; }

  /// Back to idle.
  void reset();

 private:
  SystemConfig config_;
  std::vector<PlaneState> planes_;
  std::vector<ComputeCoreState> cores_;
};

DeviceTree build_device(const SystemConfig& config);

/// Hands out pages plane by plane in block/page order.
class PageAllocator {
 public:
  explicit PageAllocator(const DeviceTree& device);
  /// Next free page of the plane at addr (block and page fields ignored).
  FlashAddress allocate(const FlashAddress& plane_addr);
  std::uint64_t used_pages() const { return used_; }

 private:
  const DeviceTree* device_;
  std::vector<std::uint64_t> next_;
  std::uint64_t used_ = 0;
};

struct PlannedMatrix {
  std::string name;
  int layer = -1;
  TilingPlan plan;
};

struct TilePlacement {
  std::uint32_t matrix = 0;  // index into the planned matrix list
  std::uint32_t tile = 0;    // index into plan.flash_tiles
  std::uint32_t core = 0;
  FlashAddress addr;
  std::uint64_t real_bytes = 0;
};

struct NpuPagePlacement {
  std::uint32_t matrix = 0;
  std::uint64_t page = 0;
  FlashAddress addr;
  std::uint64_t bytes = 0;
};

struct WeightLayout {
  std::vector<TilePlacement> tiles;
  std::vector<NpuPagePlacement> npu_pages;

  /// Real weight bytes mapped, excluding padding.
  std::uint64_t mapped_bytes() const;
  std::uint64_t page_count() const { return tiles.size() + npu_pages.size(); }
};

/// Flash tiles go one atomic tile per core on the core's compute plane. NPU pages are
/// striped channel first, then chip, then die, then over the die's read planes.
/// Throws CapacityError when the device runs out of pages.
WeightLayout layout_weights(const std::vector<PlannedMatrix>& matrices, const DeviceTree& device);

/// Tab-separated table: matrix, tile, core, address.
std::string dump_layout(const WeightLayout& layout, const std::vector<PlannedMatrix>& matrices);

}  // namespace flashsim
