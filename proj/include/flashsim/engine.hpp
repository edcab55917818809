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
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "flashsim/hwconfig.hpp"
#include "flashsim/topology.hpp"

namespace flashsim {

/// An input plus result vector that does not fit a compute core's buffer.
class BufferOverflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RequestKind { Read, ReadCompute, ReadSlice };

struct Request {
  RequestKind kind = RequestKind::Read;
  FlashAddress addr;
  std::uint32_t core = 0;  // ReadCompute: consuming core
  std::uint32_t tile = 0;  // ReadCompute: broadcast group id, shared by the cores of one channel
  std::uint64_t input_vector_bytes = 0;   // ReadCompute: broadcast once per channel
  std::uint64_t result_vector_bytes = 0;  // ReadCompute: per core
  std::uint64_t payload_bytes = 0;        // Read / ReadSlice
  std::int64_t parent = -1;               // ReadSlice: index of the parent Read
  std::uint64_t order = 0;                // issue order
  Nanos release = 0;                      // earliest array-read start
};

enum class Strategy { a, b, c };
Strategy parse_strategy(const std::string& text);
std::string to_string(Strategy s);

/// Splits a Read into ReadSlice pieces. slice_bytes must divide the page size.
std::vector<Request> slice_read(const Request& read, std::uint64_t slice_bytes, std::uint64_t page_size,
                                std::int64_t parent_id);

enum class ResourceKind { channel, plane, core };
enum class Action { transfer_in, array_read, register_move, compute, transfer_out };
std::string to_string(ResourceKind r);
std::string to_string(Action a);

struct Event {
  Nanos start = 0;
  Nanos end = 0;
  ResourceKind resource = ResourceKind::channel;
  std::uint32_t index = 0;
  Action action = Action::transfer_in;
  std::uint64_t request = 0;
};

struct Timeline {
  std::vector<Event> events;  // sorted by start, then resource, then index
  Nanos makespan = 0;
  std::vector<Nanos> channel_busy;
  std::vector<std::uint64_t> channel_bytes;
  std::vector<Nanos> finish;  // per request
  Nanos last_compute_end = 0; // last read-compute result delivered
  Nanos last_read_end = 0;    // last plain read delivered
};

struct ScheduleOptions {
  Strategy strategy = Strategy::c;
  std::uint64_t slice_bytes = 512;
  double core_speed = 1.0;  // compute time = t_read / core_speed
  bool record_events = true;
};

/// Runs the requests to completion. Throws std::invalid_argument on malformed requests,
/// BufferOverflowError when vectors exceed a core's buffer and std::logic_error on deadlock.
Timeline schedule(const std::vector<Request>& requests, DeviceTree& device, const ScheduleOptions& options = {});

/// Read-compute requests of one tile, all cores, compute-only strategy.
Timeline exec_read_compute(const std::vector<Request>& tile_job, DeviceTree& device, double core_speed = 1.0);

/// Busy fraction per channel; all zero for an empty timeline.
std::vector<double> channel_utilization(const Timeline& timeline);
double mean_utilization(const Timeline& timeline);

/// One line per event: start_ns, resource, action, request id.
void write_trace(std::ostream& os, const Timeline& timeline);

/// Read-compute requests for every flash tile placement of matrix `matrix`, in tile order.
std::vector<Request> read_compute_requests(const WeightLayout& layout, std::uint32_t matrix, const TileShape& shape,
                                           const SystemConfig& config, std::uint64_t first_order = 0);
/// Plain reads for the NPU pages of matrix `matrix`.
std::vector<Request> npu_read_requests(const WeightLayout& layout, std::uint32_t matrix,
                                       std::uint64_t first_order = 0);

}  // namespace flashsim
