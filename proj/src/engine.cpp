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


#include "flashsim/engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <map>
#include <ostream>
#include <queue>
#include <set>

namespace flashsim {

Strategy parse_strategy(const std::string& text) {
  std::string s;
  for (char ch : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (s == "a") return Strategy::a;
  if (s == "b") return Strategy::b;
  if (s == "c") return Strategy::c;
  throw std::invalid_argument("unknown strategy '" + text + "' (expected a, b or c)");
}

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::a: return "a";
    case Strategy::b: return "b";
    case Strategy::c: return "c";
  }
  return "?";
}

std::string to_string(ResourceKind r) {
  switch (r) {
    case ResourceKind::channel: return "channel";
    case ResourceKind::plane: return "plane";
    case ResourceKind::core: return "core";
  }
  return "?";
}

std::string to_string(Action a) {
  switch (a) {
    case Action::transfer_in: return "transfer-in";
    case Action::array_read: return "array-read";
    case Action::register_move: return "register-move";
    case Action::compute: return "compute";
    case Action::transfer_out: return "transfer-out";
  }
  return "?";
}

std::vector<Request> slice_read(const Request& read, std::uint64_t slice_bytes, std::uint64_t page_size,
                                std::int64_t parent_id) {
  if (read.kind != RequestKind::Read) throw std::invalid_argument("only Read requests can be sliced");
  if (slice_bytes == 0 || slice_bytes > page_size)
    throw std::invalid_argument("slice_bytes must be in [1, page_size], got " + std::to_string(slice_bytes));
  if (page_size % slice_bytes != 0)
    throw std::invalid_argument("slice_bytes " + std::to_string(slice_bytes) + " does not divide the page size " +
                                std::to_string(page_size));
  std::vector<Request> out;
  for (std::uint64_t off = 0; off < read.payload_bytes; off += slice_bytes) {
    Request s = read;
    s.kind = RequestKind::ReadSlice;
    s.payload_bytes = std::min(slice_bytes, read.payload_bytes - off);
    s.parent = parent_id;
    out.push_back(s);
  }
  return out;
}

namespace {

enum class EvType { array_done, compute_done, transfer_done, release };

struct HeapItem {
  Nanos t;
  std::uint64_t seq;
  EvType type;
  std::uint32_t idx;
  bool operator>(const HeapItem& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

enum class Slot { free, incoming, latched };

struct PlaneRt {
  std::deque<std::uint32_t> queue;
  int data = -1;
  bool reading = false;
  int cache = -1;
  bool release_pending = false;
  Nanos last_data = 0, last_cache = 0;
};

struct CoreRt {
  std::deque<std::uint32_t> rc;
  Slot slot = Slot::free;
  int slot_group = -1;
  int computing = -1;
  std::uint64_t out_used = 0;
  Nanos busy_until = 0;
};

struct Group {
  std::uint32_t channel = 0;
  std::uint64_t key = 0;
  std::uint32_t first_req = 0;
  std::uint64_t bytes = 0;
  std::vector<std::uint32_t> cores;
};

enum class TransferKind { input, output, read };

struct ChannelRt {
  bool busy = false;
  TransferKind kind = TransferKind::input;
  std::uint32_t what = 0;
  std::uint64_t bytes = 0;
  std::vector<std::uint32_t> groups;
  std::size_t next_group = 0;
  std::set<std::pair<std::uint64_t, std::uint32_t>> outputs;
  std::set<std::pair<std::uint64_t, std::uint32_t>> ready_reads;
  std::vector<std::uint32_t> planes;
  std::vector<std::uint32_t> cores;
};

class Simulator {
 public:
  Simulator(const std::vector<Request>& reqs, DeviceTree& device, const ScheduleOptions& opt)
      : reqs_(reqs), dev_(device), cfg_(device.config()), opt_(opt) {}

  Timeline run() {
    validate_and_build();
    timeline_.channel_busy.assign(cfg_.flash.channel_num, 0);
    timeline_.channel_bytes.assign(cfg_.flash.channel_num, 0);
    timeline_.finish.assign(reqs_.size(), 0);
    if (reqs_.empty()) return timeline_;
    for (std::uint32_t ch = 0; ch < channels_.size(); ++ch) mark(ch);
    dispatch();
    while (!heap_.empty()) {
      now_ = heap_.top().t;
      while (!heap_.empty() && heap_.top().t == now_) {
        auto item = heap_.top();
        heap_.pop();
        handle(item);
      }
      dispatch();
    }
    if (completed_ != reqs_.size()) {
      throw std::logic_error("scheduler deadlock: " + std::to_string(reqs_.size() - completed_) +
                             " requests pending with no events at t=" + std::to_string(now_) + " ns");
    }
    finish_up();
    return std::move(timeline_);
  }

 private:
  const std::vector<Request>& reqs_;
  DeviceTree& dev_;
  const SystemConfig& cfg_;
  ScheduleOptions opt_;
  Timeline timeline_;

  std::vector<PlaneRt> planes_;
  std::vector<CoreRt> cores_;
  std::vector<ChannelRt> channels_;
  std::vector<Group> groups_;
  std::vector<int> group_of_;
  std::vector<std::uint32_t> plane_of_;
  std::vector<std::uint64_t> remaining_;
  std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap_;
  std::uint64_t seq_ = 0;
  Nanos now_ = 0;
  Nanos compute_ns_ = 0;
  std::size_t completed_ = 0;
  std::vector<char> dirty_;
  std::vector<std::uint32_t> dirty_list_;

  std::uint32_t plane_channel(std::uint32_t plane) const {
    return plane / (cfg_.flash.dies_per_channel() * cfg_.flash.planes_per_die);
  }

  void validate_and_build() {
    const auto& f = cfg_.flash;
    if (opt_.core_speed <= 0) throw std::invalid_argument("core_speed must be positive");
    compute_ns_ = static_cast<Nanos>(std::llround(static_cast<double>(cfg_.timing.t_read_ns()) / opt_.core_speed));
    if (opt_.strategy == Strategy::c &&
        (opt_.slice_bytes == 0 || opt_.slice_bytes > f.page_size || f.page_size % opt_.slice_bytes != 0)) {
      throw std::invalid_argument("slice_bytes " + std::to_string(opt_.slice_bytes) +
                                  " must divide the page size " + std::to_string(f.page_size));
    }
    planes_.assign(dev_.plane_count(), {});
    cores_.assign(dev_.core_count(), {});
    channels_.assign(f.channel_num, {});
    dirty_.assign(f.channel_num, 0);
    for (std::uint32_t p = 0; p < planes_.size(); ++p) channels_[plane_channel(p)].planes.push_back(p);
    for (std::uint32_t c = 0; c < cores_.size(); ++c) channels_[c / f.ccore_num()].cores.push_back(c);

    std::vector<std::uint32_t> idx(reqs_.size());
    for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return reqs_[a].order < reqs_[b].order; });

    plane_of_.assign(reqs_.size(), 0);
    group_of_.assign(reqs_.size(), -1);
    remaining_.assign(reqs_.size(), 0);
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> group_ids;
    const std::uint64_t buffer = cfg_.host.input_output_buffer;

    for (auto i : idx) {
      const auto& r = reqs_[i];
      plane_of_[i] = dev_.plane_index(r.addr);  // validates the address
      switch (r.kind) {
        case RequestKind::ReadSlice:
          throw std::invalid_argument("ReadSlice requests are produced by the scheduler, not submitted");
        case RequestKind::Read:
          if (opt_.strategy == Strategy::a)
            throw std::invalid_argument("strategy a accepts read-compute requests only");
          if (r.payload_bytes == 0 || r.payload_bytes > f.page_size)
            throw std::invalid_argument("read payload must be in [1, page_size]");
          remaining_[i] = r.payload_bytes;
          break;
        case RequestKind::ReadCompute: {
          if (r.core >= cores_.size()) throw std::invalid_argument("request targets missing core " + std::to_string(r.core));
          if (dev_.die_index(r.addr) != r.core / f.ccores_per_die)
            throw std::invalid_argument("read-compute page " + to_string(r.addr) + " is not on the die of core " +
                                        std::to_string(r.core));
          if (r.input_vector_bytes + r.result_vector_bytes > buffer) {
            throw BufferOverflowError("input " + std::to_string(r.input_vector_bytes) + " B + result " +
                                      std::to_string(r.result_vector_bytes) + " B exceed the " +
                                      std::to_string(buffer) + " B core buffer");
          }
          const std::uint32_t ch = r.core / f.ccore_num();
          auto [it, fresh] = group_ids.try_emplace({ch, r.tile}, static_cast<std::uint32_t>(groups_.size()));
          if (fresh) {
            Group g;
            g.channel = ch;
            g.key = r.order;
            g.first_req = i;
            g.bytes = r.input_vector_bytes;
            groups_.push_back(g);
          }
          auto& g = groups_[it->second];
          if (g.bytes != r.input_vector_bytes)
            throw std::invalid_argument("cores of one broadcast group disagree on the input size");
          if (std::find(g.cores.begin(), g.cores.end(), r.core) != g.cores.end())
            throw std::invalid_argument("core " + std::to_string(r.core) + " appears twice in tile " +
                                        std::to_string(r.tile));
          g.cores.push_back(r.core);
          group_of_[i] = static_cast<int>(it->second);
          cores_[r.core].rc.push_back(i);
          break;
        }
      }
      planes_[plane_of_[i]].queue.push_back(i);
    }

    for (std::uint32_t g = 0; g < groups_.size(); ++g) channels_[groups_[g].channel].groups.push_back(g);
    std::vector<std::size_t> rank(groups_.size());
    for (auto& ch : channels_) {
      std::sort(ch.groups.begin(), ch.groups.end(), [&](auto a, auto b) { return groups_[a].key < groups_[b].key; });
      for (std::size_t k = 0; k < ch.groups.size(); ++k) rank[ch.groups[k]] = k;
    }
    for (std::uint32_t c = 0; c < cores_.size(); ++c) {
      std::size_t last = 0;
      bool first = true;
      for (auto r : cores_[c].rc) {
        auto k = rank[static_cast<std::size_t>(group_of_[r])];
        if (!first && k <= last)
          throw std::invalid_argument("core " + std::to_string(c) + " consumes broadcast groups out of channel order");
        last = k;
        first = false;
      }
    }
  }

  void push(Nanos t, EvType type, std::uint32_t idx) { heap_.push({t, seq_++, type, idx}); }

  void mark(std::uint32_t ch) {
    if (!dirty_[ch]) {
      dirty_[ch] = 1;
      dirty_list_.push_back(ch);
    }
  }

  void record(Nanos start, Nanos end, ResourceKind res, std::uint32_t index, Action action, std::uint64_t req) {
    timeline_.makespan = std::max(timeline_.makespan, end);
    if (opt_.record_events) timeline_.events.push_back({start, end, res, index, action, req});
  }

  void complete(std::uint32_t r) {
    timeline_.finish[r] = now_;
    ++completed_;
    if (reqs_[r].kind == RequestKind::ReadCompute)
      timeline_.last_compute_end = std::max(timeline_.last_compute_end, now_);
    else
      timeline_.last_read_end = std::max(timeline_.last_read_end, now_);
  }

  void handle(const HeapItem& item) {
    switch (item.type) {
      case EvType::array_done: {
        planes_[item.idx].reading = false;
        mark(plane_channel(item.idx));
        break;
      }
      case EvType::release: {
        planes_[item.idx].release_pending = false;
        mark(plane_channel(item.idx));
        break;
      }
      case EvType::compute_done: {
        auto& core = cores_[item.idx];
        const auto r = static_cast<std::uint32_t>(core.computing);
        core.computing = -1;
        core.slot = Slot::free;
        core.slot_group = -1;
        core.busy_until = now_;
        auto& plane = planes_[plane_of_[r]];
        plane.cache = -1;
        plane.last_cache = now_;
        const std::uint32_t ch = item.idx / cfg_.flash.ccore_num();
        channels_[ch].outputs.insert({reqs_[r].order, r});
        mark(ch);
        break;
      }
      case EvType::transfer_done: {
        auto& ch = channels_[item.idx];
        ch.busy = false;
        if (ch.kind == TransferKind::input) {
          for (auto c : groups_[ch.what].cores) cores_[c].slot = Slot::latched;
        } else if (ch.kind == TransferKind::output) {
          cores_[reqs_[ch.what].core].out_used -= reqs_[ch.what].result_vector_bytes;
          complete(ch.what);
        } else {
          auto r = ch.what;
          remaining_[r] -= ch.bytes;
          if (remaining_[r] == 0) {
            auto& plane = planes_[plane_of_[r]];
            plane.cache = -1;
            plane.last_cache = now_;
            ch.ready_reads.erase({reqs_[r].order, r});
            complete(r);
          }
        }
        mark(item.idx);
        break;
      }
    }
  }

  void dispatch() {
    while (!dirty_list_.empty()) {
      auto list = std::move(dirty_list_);
      dirty_list_.clear();
      for (auto ch : list) dirty_[ch] = 0;
      for (auto ch : list) dispatch_channel(ch);
    }
  }

  bool step_planes(ChannelRt& ch) {
    bool progress = false;
    for (auto p : ch.planes) {
      auto& pl = planes_[p];
      if (pl.data >= 0 && !pl.reading && pl.cache < 0) {
        const auto r = static_cast<std::uint32_t>(pl.data);
        pl.cache = pl.data;
        pl.data = -1;
        pl.last_data = now_;
        record(now_, now_, ResourceKind::plane, p, Action::register_move, r);
        if (reqs_[r].kind == RequestKind::Read) ch.ready_reads.insert({reqs_[r].order, r});
        progress = true;
      }
      if (pl.data < 0 && !pl.queue.empty()) {
        const auto r = pl.queue.front();
        if (reqs_[r].release <= now_) {
          pl.queue.pop_front();
          pl.data = static_cast<int>(r);
          pl.reading = true;
          const Nanos end = now_ + cfg_.timing.t_read_ns();
          record(now_, end, ResourceKind::plane, p, Action::array_read, r);
          push(end, EvType::array_done, p);
          progress = true;
        } else if (!pl.release_pending) {
          pl.release_pending = true;
          push(reqs_[r].release, EvType::release, p);
        }
      }
    }
    return progress;
  }

  bool step_cores(ChannelRt& ch) {
    bool progress = false;
    const std::uint64_t buffer = cfg_.host.input_output_buffer;
    for (auto c : ch.cores) {
      auto& core = cores_[c];
      if (core.computing >= 0 || core.rc.empty() || core.slot != Slot::latched) continue;
      const auto r = core.rc.front();
      const auto& req = reqs_[r];
      if (core.slot_group != group_of_[r]) continue;
      if (planes_[plane_of_[r]].cache != static_cast<int>(r)) continue;
      if (core.out_used + req.result_vector_bytes > buffer - req.input_vector_bytes) continue;
      core.rc.pop_front();
      core.computing = static_cast<int>(r);
      core.out_used += req.result_vector_bytes;
      const Nanos end = now_ + compute_ns_;
      record(now_, end, ResourceKind::core, c, Action::compute, r);
      push(end, EvType::compute_done, c);
      progress = true;
    }
    return progress;
  }

  bool input_ready(const ChannelRt& ch) const {
    if (ch.next_group >= ch.groups.size()) return false;
    const auto g = ch.groups[ch.next_group];
    for (auto c : groups_[g].cores) {
      const auto& core = cores_[c];
      if (core.slot != Slot::free || core.rc.empty()) return false;
      if (group_of_[core.rc.front()] != static_cast<int>(g)) return false;
    }
    return true;
  }

  void start_transfer(std::uint32_t chi, TransferKind kind, std::uint32_t what, std::uint64_t bytes,
                      std::uint64_t req) {
    auto& ch = channels_[chi];
    ch.busy = true;
    ch.kind = kind;
    ch.what = what;
    ch.bytes = bytes;
    const Nanos end = now_ + cfg_.timing.transfer_ns(bytes);
    timeline_.channel_busy[chi] += end - now_;
    timeline_.channel_bytes[chi] += bytes;
    record(now_, end, ResourceKind::channel, chi, kind == TransferKind::input ? Action::transfer_in : Action::transfer_out,
           req);
    push(end, EvType::transfer_done, chi);
  }

  bool arbitrate(std::uint32_t chi) {
    auto& ch = channels_[chi];
    if (ch.busy) return false;
    const bool in_ok = input_ready(ch);
    const bool out_ok = !ch.outputs.empty();
    if (in_ok) {
      const auto g = ch.groups[ch.next_group++];
      for (auto c : groups_[g].cores) {
        cores_[c].slot = Slot::incoming;
        cores_[c].slot_group = static_cast<int>(g);
      }
      start_transfer(chi, TransferKind::input, g, groups_[g].bytes, groups_[g].first_req);
      return true;
    }
    if (out_ok) {
      const auto r = ch.outputs.begin()->second;
      ch.outputs.erase(ch.outputs.begin());
      start_transfer(chi, TransferKind::output, r, reqs_[r].result_vector_bytes, r);
      return true;
    }
    if (!ch.ready_reads.empty()) {
      const auto r = ch.ready_reads.begin()->second;
      const std::uint64_t bytes =
          opt_.strategy == Strategy::c ? std::min(opt_.slice_bytes, remaining_[r]) : remaining_[r];
      start_transfer(chi, TransferKind::read, r, bytes, r);
      return true;
    }
    return false;
  }

  void dispatch_channel(std::uint32_t chi) {
    auto& ch = channels_[chi];
    bool progress = true;
    while (progress) {
      progress = step_planes(ch);
      progress |= step_cores(ch);
      progress |= arbitrate(chi);
    }
  }

  void finish_up() {
    for (std::uint32_t c = 0; c < cores_.size(); ++c) dev_.cores()[c].busy_until = cores_[c].busy_until;
    for (std::uint32_t p = 0; p < planes_.size(); ++p) {
      auto& st = dev_.planes()[p];
      st.data_register = {false, planes_[p].last_data};
      st.cache_register = {false, planes_[p].last_cache};
    }
    if (opt_.record_events) {
      std::stable_sort(timeline_.events.begin(), timeline_.events.end(), [](const Event& a, const Event& b) {
        if (a.start != b.start) return a.start < b.start;
        if (a.resource != b.resource) return a.resource < b.resource;
        return a.index < b.index;
      });
    }
  }
};

}  // namespace

Timeline schedule(const std::vector<Request>& requests, DeviceTree& device, const ScheduleOptions& options) {
  Simulator sim(requests, device, options);
  return sim.run();
}

Timeline exec_read_compute(const std::vector<Request>& tile_job, DeviceTree& device, double core_speed) {
  ScheduleOptions opt;
  opt.strategy = Strategy::a;
  opt.core_speed = core_speed;
  return schedule(tile_job, device, opt);
}

std::vector<double> channel_utilization(const Timeline& t) {
  std::vector<double> u(t.channel_busy.size(), 0.0);
  if (t.makespan <= 0) return u;
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = static_cast<double>(t.channel_busy[i]) / static_cast<double>(t.makespan);
  return u;
}

double mean_utilization(const Timeline& t) {
  auto u = channel_utilization(t);
  if (u.empty()) return 0.0;
  double s = 0;
  for (double v : u) s += v;
  return s / static_cast<double>(u.size());
}

void write_trace(std::ostream& os, const Timeline& t) {
  for (const auto& e : t.events)
    os << e.start << '\t' << to_string(e.resource) << e.index << '\t' << to_string(e.action) << '\t' << e.request
       << '\n';
}

std::vector<Request> read_compute_requests(const WeightLayout& layout, std::uint32_t matrix, const TileShape& shape,
                                           const SystemConfig& config, std::uint64_t first_order) {
  const std::uint64_t ab = config.quant.activation_bytes();
  std::vector<Request> out;
  for (const auto& p : layout.tiles) {
    if (p.matrix != matrix) continue;
    Request r;
    r.kind = RequestKind::ReadCompute;
    r.addr = p.addr;
    r.core = p.core;
    r.tile = p.tile;
    r.input_vector_bytes = shape.w_req / config.flash.channel_num * ab;
    r.result_vector_bytes = shape.h_req / config.flash.ccore_num() * ab;
    r.order = first_order + out.size();
    out.push_back(r);
  }
  return out;
}

std::vector<Request> npu_read_requests(const WeightLayout& layout, std::uint32_t matrix, std::uint64_t first_order) {
  std::vector<Request> out;
  for (const auto& p : layout.npu_pages) {
    if (p.matrix != matrix) continue;
    Request r;
    r.kind = RequestKind::Read;
    r.addr = p.addr;
    r.payload_bytes = p.bytes;
    r.order = first_order + out.size();
    out.push_back(r);
  }
  return out;
}

}  // namespace flashsim
