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


#include "flashsim/topology.hpp"

#include <cmath>
#include <sstream>

namespace flashsim {

std::string to_string(const FlashAddress& a) {
  std::ostringstream os;
  os << "ch" << a.channel << ".chip" << a.chip << ".die" << a.die << ".pl" << a.plane << ".blk" << a.block << ".pg"
     << a.page;
  return os.str();
}

DeviceTree::DeviceTree(const SystemConfig& config) : config_(config) {
  validate(config_);
  planes_.resize(std::size_t{die_count()} * config_.flash.planes_per_die);
  cores_.resize(config_.flash.total_cores());
  reset();
}

std::uint32_t DeviceTree::die_count() const {
  return config_.flash.channel_num * config_.flash.dies_per_channel();
}

void DeviceTree::check(const FlashAddress& a) const {
  const auto& f = config_.flash;
  if (a.channel >= f.channel_num || a.chip >= f.chips_per_channel || a.die >= f.dies_per_chip ||
      a.plane >= f.planes_per_die || a.block >= f.blocks_per_plane || a.page >= f.block_pages) {
    throw std::out_of_range("flash address " + to_string(a) + " is outside the device geometry");
  }
}

std::uint32_t DeviceTree::die_index(const FlashAddress& a) const {
  check(a);
  const auto& f = config_.flash;
  return (a.channel * f.chips_per_channel + a.chip) * f.dies_per_chip + a.die;
}

std::uint32_t DeviceTree::plane_index(const FlashAddress& a) const {
  return die_index(a) * config_.flash.planes_per_die + a.plane;
}

FlashAddress DeviceTree::core_die(std::uint32_t core) const {
  if (core >= core_count()) throw std::out_of_range("core " + std::to_string(core) + " does not exist");
  const auto& f = config_.flash;
  FlashAddress a;
  a.channel = core / f.ccore_num();
  std::uint32_t local_die = (core % f.ccore_num()) / f.ccores_per_die;
  a.chip = local_die / f.dies_per_chip;
  a.die = local_die % f.dies_per_chip;
  return a;
}

std::uint32_t DeviceTree::channel_of_core(std::uint32_t core) const { return core_die(core).channel; }

std::uint32_t DeviceTree::core_of_plane(const FlashAddress& a) const {
  const auto& f = config_.flash;
  const std::uint32_t per_core = f.planes_per_die / f.ccores_per_die;
  const std::uint32_t local = std::min(a.plane / per_core, f.ccores_per_die - 1);
  return die_index(a) * f.ccores_per_die + local;
}

FlashAddress DeviceTree::compute_plane(std::uint32_t core) const {
  const auto& f = config_.flash;
  FlashAddress a = core_die(core);
  a.plane = (core % f.ccores_per_die) * (f.planes_per_die / f.ccores_per_die);
  return a;
}

std::vector<std::uint32_t> DeviceTree::read_planes() const {
  const auto& f = config_.flash;
  const std::uint32_t per_core = f.planes_per_die / f.ccores_per_die;
  std::vector<std::uint32_t> out;
  for (std::uint32_t p = 0; p < f.planes_per_die; ++p) {
    const bool compute = p % per_core == 0 && p / per_core < f.ccores_per_die;
    if (!compute) out.push_back(p);
  }
  if (out.empty())
    for (std::uint32_t p = 0; p < f.planes_per_die; ++p) out.push_back(p);
  return out;
}

void DeviceTree::reset() {
  for (auto& p : planes_) p = PlaneState{};
  for (std::uint32_t c = 0; c < cores_.size(); ++c) {
    cores_[c] = ComputeCoreState{};
    cores_[c].die = c / config_.flash.ccores_per_die;
  }
}

DeviceTree build_device(const SystemConfig& config) { return DeviceTree(config); }

PageAllocator::PageAllocator(const DeviceTree& device) : device_(&device), next_(device.plane_count(), 0) {}

FlashAddress PageAllocator::allocate(const FlashAddress& plane_addr) {
  FlashAddress a = plane_addr;
  a.block = 0;
  a.page = 0;
  auto& next = next_[device_->plane_index(a)];
  const auto& f = device_->config().flash;
  if (next >= f.pages_per_plane()) {
    throw CapacityError("plane " + to_string(a) + " is full (" + std::to_string(f.pages_per_plane()) + " pages)");
  }
  a.block = static_cast<std::uint32_t>(next / f.block_pages);
  a.page = static_cast<std::uint32_t>(next % f.block_pages);
  ++next;
  ++used_;
  return a;
}

std::uint64_t WeightLayout::mapped_bytes() const {
  std::uint64_t n = 0;
  for (const auto& t : tiles) n += t.real_bytes;
  for (const auto& p : npu_pages) n += p.bytes;
  return n;
}

WeightLayout layout_weights(const std::vector<PlannedMatrix>& matrices, const DeviceTree& device) {
  const auto& cfg = device.config();
  const auto& f = cfg.flash;
  const double wb = cfg.quant.weight_bytes_per_element();
  const auto read_planes = device.read_planes();
  PageAllocator alloc(device);
  WeightLayout layout;

  for (std::uint32_t m = 0; m < matrices.size(); ++m) {
    const auto& plan = matrices[m].plan;
    if (!plan.flash_tiles.empty()) check_feasible(plan.shape, cfg);
    for (std::uint32_t t = 0; t < plan.flash_tiles.size(); ++t) {
      for (const auto& atom : atomic_tiles(plan.flash_tiles[t], plan.shape, cfg)) {
        TilePlacement p;
        p.matrix = m;
        p.tile = t;
        p.core = atom.core;
        p.addr = alloc.allocate(device.compute_plane(atom.core));
        p.real_bytes = static_cast<std::uint64_t>(std::ceil(atom.real_elements * wb));
        layout.tiles.push_back(p);
      }
    }
    for (std::uint64_t i = 0; i < plan.npu_pages; ++i) {
      FlashAddress a;
      std::uint64_t rest = i;
      a.channel = static_cast<std::uint32_t>(rest % f.channel_num);
      rest /= f.channel_num;
      a.chip = static_cast<std::uint32_t>(rest % f.chips_per_channel);
      rest /= f.chips_per_channel;
      a.die = static_cast<std::uint32_t>(rest % f.dies_per_chip);
      rest /= f.dies_per_chip;
      a.plane = read_planes[rest % read_planes.size()];
      NpuPagePlacement p;
      p.matrix = m;
      p.page = i;
      p.addr = alloc.allocate(a);
      p.bytes = i + 1 < plan.npu_pages ? f.page_size : plan.npu_bytes - (plan.npu_pages - 1) * f.page_size;
      layout.npu_pages.push_back(p);
    }
  }
  return layout;
}

std::string dump_layout(const WeightLayout& layout, const std::vector<PlannedMatrix>& matrices) {
  std::ostringstream os;
  os << "matrix\ttile\tcore\taddress\n";
  for (const auto& t : layout.tiles)
    os << matrices[t.matrix].name << "\t" << t.tile << "\t" << t.core << "\t" << to_string(t.addr) << "\n";
  for (const auto& p : layout.npu_pages)
    os << matrices[p.matrix].name << "\tnpu" << p.page << "\t-\t" << to_string(p.addr) << "\n";
  return os.str();
}

}  // namespace flashsim
