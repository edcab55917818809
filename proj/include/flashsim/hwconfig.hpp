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
#include <stdexcept>
#include <string>
#include <string_view>

namespace flashsim {

/// Simulator time base: integer nanoseconds.
using Nanos = std::int64_t;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NAND hierarchy sizes. Counts are per parent (chips per channel, dies per chip, ...).
struct FlashGeometry {
  std::uint32_t channel_num = 8;
  std::uint32_t chips_per_channel = 2;
  std::uint32_t dies_per_chip = 2;
  std::uint32_t planes_per_die = 2;
  std::uint32_t ccores_per_die = 1;
  std::uint64_t page_size = 16384;
  std::uint64_t spare_size = 1664;
  std::uint32_t block_pages = 256;
  std::uint32_t blocks_per_plane = 2048;

  std::uint32_t dies_per_channel() const { return chips_per_channel * dies_per_chip; }
  /// Compute cores attached to one channel.
  std::uint32_t ccore_num() const { return chips_per_channel * dies_per_chip * ccores_per_die; }
  std::uint32_t total_cores() const { return channel_num * ccore_num(); }
  std::uint64_t total_planes() const {
    return std::uint64_t{channel_num} * dies_per_channel() * planes_per_die;
  }
  std::uint64_t pages_per_plane() const { return std::uint64_t{block_pages} * blocks_per_plane; }

  bool operator==(const FlashGeometry&) const = default;
};

struct FlashTiming {
  double t_read = 30.0;                     // us
  std::uint64_t channel_rate = 1000000000;  // transfers/s
  std::uint32_t bus_width = 8;              // bits

  /// Channel bandwidth in bytes/us (decimal units).
  double bw_channel() const {
    return static_cast<double>(channel_rate) * bus_width / 8.0 / 1e6;
  }
  Nanos t_read_ns() const;
  /// Bus occupancy for `bytes`, rounded up to whole nanoseconds.
  Nanos transfer_ns(std::uint64_t bytes) const;

  bool operator==(const FlashTiming&) const = default;
};

struct HostConfig {
  double npu_ops_per_us = 2e6;   // 2 TOPS
  double dram_bw = 40000.0;      // bytes/us
  std::uint64_t input_output_buffer = 2048;  // bytes per compute core

  bool operator==(const HostConfig&) const = default;
};

struct QuantizationSpec {
  std::uint32_t weight_bits = 8;
  std::uint32_t activation_bits = 8;

  std::uint64_t elements_per_page(std::uint64_t page_size) const {
    return page_size * 8 / weight_bits;
  }
  double weight_bytes_per_element() const { return weight_bits / 8.0; }
  std::uint32_t activation_bytes() const { return activation_bits / 8; }

  bool operator==(const QuantizationSpec&) const = default;
};

/// Per-byte and per-op energy. Only ratios between runs are meaningful.
struct EnergyCoefficients {
  double flash_channel_pj_per_byte = 1.0;
  double d2d_pj_per_byte = 1.0;
  double dram_pj_per_byte = 4.0;
  double interconnect_pj_per_byte = 10.0;
  double compute_pj_per_op = 0.1;

  bool operator==(const EnergyCoefficients&) const = default;
};

struct SystemConfig {
  std::string name = "custom";
  FlashGeometry flash;
  FlashTiming timing;
  HostConfig host;
  QuantizationSpec quant;
  EnergyCoefficients energy;

  std::uint64_t elements_per_page() const { return quant.elements_per_page(flash.page_size); }
  /// INT ops a core performs on one page (one multiply and one add per weight).
  std::uint64_t page_ops() const { return 2 * elements_per_page(); }
  /// Aggregate in-flash read bandwidth of all cores, bytes/us.
  double aggregate_core_bw() const {
    return static_cast<double>(flash.total_cores()) * flash.page_size / timing.t_read;
  }

  bool operator==(const SystemConfig&) const = default;
};

/// Throws ConfigError naming the offending key.
void validate(const SystemConfig& config);

SystemConfig load_config(std::string_view text);
SystemConfig load_config_file(const std::string& path);
std::string serialize_config(const SystemConfig& config);

/// Hardware presets "S", "M", "L" (case-insensitive).
SystemConfig preset(std::string_view name);

/// A preset name or a config file path.
SystemConfig resolve_config(const std::string& source);

}  // namespace flashsim
