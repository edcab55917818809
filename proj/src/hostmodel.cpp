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


#include "flashsim/hostmodel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace flashsim {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// plan_model lists the per-layer stages first and the LM head last.
std::uint32_t repeat_of(std::size_t index, std::size_t count, const ModelSpec& model) {
  return index + 1 == count ? 1 : model.layer_count;
}

PlannedMatrix plan_matrix(const SystemConfig& config, const MatrixShape& m, const RunOptions& options,
                          std::optional<double> fraction) {
  const TileShape shape = options.tile ? *options.tile : optimal_tile_shape_for(config, m.rows, m.cols);
  check_feasible(shape, config);
  if (options.strategy == Strategy::a) fraction = 1.0;
  PlannedMatrix pm;
  pm.name = m.name;
  pm.plan = partition_matrix(m.rows, m.cols, partition_inputs(config, shape, fraction));
  return pm;
}

/// The first `tiles` flash tiles and a proportional share of the NPU pages.
PlannedMatrix window(const PlannedMatrix& full, std::uint64_t tiles, std::uint64_t pages, std::uint64_t page_size) {
  PlannedMatrix w = full;
  auto& p = w.plan;
  p.flash_tiles.resize(tiles);
  p.npu_pages = pages;
  p.npu_bytes = std::min(full.plan.npu_bytes, pages * page_size);
  return w;
}

struct KvSfu {
  double kv_us = 0;
  double sfu_us = 0;
  std::uint64_t kv_bytes = 0;
  std::uint64_t ops = 0;
};

KvSfu kv_and_sfu(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len) {
  const auto graph = build_decode_graph(model, config.quant, seq_len);
  std::map<int, std::pair<std::uint64_t, std::uint64_t>> per_layer;  // bytes, ops
  KvSfu r;
  std::uint64_t sfu_ops = 0;
  for (const auto& op : graph.ops) {
    r.ops += op.ops;
    if (op.kind == OpKind::dram_kv_load) per_layer[op.layer].first += op.kv_bytes;
    if (op.kind == OpKind::npu_kv) per_layer[op.layer].second += op.ops;
    if (op.kind == OpKind::sfu) sfu_ops += op.ops;
  }
  for (const auto& [layer, bo] : per_layer) {
    r.kv_bytes += bo.first;
    r.kv_us += std::max(bo.first / config.host.dram_bw, bo.second / config.host.npu_ops_per_us);
  }
  r.sfu_us = sfu_ops / config.host.npu_ops_per_us;
  return r;
}

StageReport from_timeline(const PlannedMatrix& m, const Timeline& t, const SystemConfig& config) {
  StageReport s;
  s.name = m.name;
  s.shape = m.plan.shape;
  s.flash_fraction = m.plan.flash_byte_fraction;
  s.flash_tiles = m.plan.flash_tiles.size();
  s.flash_bytes = m.plan.flash_bytes;
  s.npu_bytes = m.plan.npu_bytes;
  s.flash_us = t.last_compute_end / 1000.0;
  s.npu_us = t.last_read_end / 1000.0;
  s.npu_compute_us = 2.0 * static_cast<double>(m.plan.npu_bytes) / config.host.npu_ops_per_us;
  s.time_us = std::max(t.makespan / 1000.0, s.npu_compute_us);
  for (auto b : t.channel_bytes) s.channel_bytes += b;
  for (auto b : t.channel_busy) s.channel_busy_us += b / 1000.0;
  return s;
}

}  // namespace

SimMode parse_sim_mode(const std::string& text) {
  auto s = lower(text);
  if (s == "simulate") return SimMode::simulate;
  if (s == "analytic") return SimMode::analytic;
  throw std::invalid_argument("unknown mode '" + text + "' (expected simulate or analytic)");
}

AlphaMode parse_alpha_mode(const std::string& text) {
  auto s = lower(text);
  if (s == "formula") return AlphaMode::formula;
  if (s == "autotune") return AlphaMode::autotune;
  throw std::invalid_argument("unknown alpha mode '" + text + "' (expected formula or autotune)");
}

std::string to_string(SimMode m) { return m == SimMode::simulate ? "simulate" : "analytic"; }
std::string to_string(AlphaMode m) { return m == AlphaMode::formula ? "formula" : "autotune"; }

NpuModel npu_model(const SystemConfig& config) {
  NpuModel n;
  n.ops_per_us = config.host.npu_ops_per_us;
  n.ingest_bw = config.flash.channel_num * config.timing.bw_channel();
  return n;
}

std::vector<PlannedMatrix> plan_model(const SystemConfig& config, const ModelSpec& model, const RunOptions& options) {
  validate(model);
  std::vector<PlannedMatrix> out;
  auto mats = model.layer_matrices();
  mats.push_back(model.lm_head());
  for (const auto& m : mats) out.push_back(plan_matrix(config, m, options, options.flash_fraction));
  return out;
}

Timeline simulate_stage(const SystemConfig& config, const PlannedMatrix& matrix, const RunOptions& options,
                        bool record_events) {
  DeviceTree device(config);
  const auto layout = layout_weights({matrix}, device);
  auto reqs = read_compute_requests(layout, 0, matrix.plan.shape, config, 0);
  auto reads = npu_read_requests(layout, 0, reqs.size());
  reqs.insert(reqs.end(), reads.begin(), reads.end());
  ScheduleOptions so;
  so.strategy = options.strategy;
  so.slice_bytes = options.slice_bytes;
  so.core_speed = options.core_speed;
  so.record_events = record_events;
  return schedule(reqs, device, so);
}

StageReport run_stage(const SystemConfig& config, const PlannedMatrix& matrix, const RunOptions& options) {
  const auto& plan = matrix.plan;
  const std::uint64_t n = plan.flash_tiles.size();
  const std::uint64_t pages = plan.npu_pages;
  const std::uint64_t k_tiles = std::max<std::uint64_t>(1, options.calibration_tiles);
  const std::uint64_t k_pages = k_tiles * config.flash.channel_num * config.flash.dies_per_channel();

  bool windowed = false;
  std::uint64_t k = 0, total = 0;
  if (options.mode == SimMode::analytic) {
    if (n > 2 * k_tiles) {
      windowed = true;
      k = k_tiles;
      total = n;
    } else if (n == 0 && pages > 2 * k_pages) {
      windowed = true;
      k = k_pages;
      total = pages;
    }
  }
  if (!windowed) return from_timeline(matrix, simulate_stage(config, matrix, options, false), config);

  auto make = [&](std::uint64_t m) {
    if (n == 0) return window(matrix, 0, m, config.flash.page_size);
    const auto p = static_cast<std::uint64_t>(std::llround(static_cast<double>(pages) * m / n));
    return window(matrix, m, p, config.flash.page_size);
  };
  const auto w1 = make(k), w2 = make(2 * k);
  const auto r1 = from_timeline(w1, simulate_stage(config, w1, options, false), config);
  const auto r2 = from_timeline(w2, simulate_stage(config, w2, options, false), config);
  const double scale = static_cast<double>(total - k) / static_cast<double>(k);
  auto extrapolate = [&](double a, double b) { return a + scale * (b - a); };

  StageReport s = from_timeline(matrix, Timeline{}, config);
  s.flash_us = extrapolate(r1.flash_us, r2.flash_us);
  s.npu_us = extrapolate(r1.npu_us, r2.npu_us);
  s.time_us = std::max({extrapolate(r1.time_us, r2.time_us), s.flash_us, s.npu_us, s.npu_compute_us});
  s.channel_bytes = static_cast<std::uint64_t>(
      std::llround(extrapolate(static_cast<double>(r1.channel_bytes), static_cast<double>(r2.channel_bytes))));
  s.channel_busy_us = extrapolate(r1.channel_busy_us, r2.channel_busy_us);
  return s;
}

TokenReport token_latency(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len,
                          const RunOptions& options) {
  validate(config);
  auto plans = plan_model(config, model, options);
  auto mats = model.layer_matrices();
  mats.push_back(model.lm_head());

  TokenReport r;
  r.system = config.name;
  r.model = model.name;
  r.seq_len = seq_len;
  r.variant = "strategy=" + to_string(options.strategy) + ",mode=" + to_string(options.mode) +
              ",alpha=" + to_string(options.alpha) + (options.tile ? ",tile=" + to_string(*options.tile) : "");

  double busy = 0, span = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    StageReport best = run_stage(config, plans[i], options);
    if (options.alpha == AlphaMode::autotune && options.strategy != Strategy::a && options.autotune_points > 1) {
      const double f0 = plans[i].plan.target_fraction;
      for (std::uint32_t j = 0; j < options.autotune_points; ++j) {
        const double s = -options.autotune_span + 2.0 * options.autotune_span * j / (options.autotune_points - 1);
        if (s == 0.0) continue;
        const double f = std::clamp(f0 * (1.0 + s), 0.0, 1.0);
        const auto candidate = run_stage(config, plan_matrix(config, mats[i], options, f), options);
        if (candidate.time_us < best.time_us) best = candidate;
      }
    }
    best.group = mats[i].group;
    best.repeat = repeat_of(i, plans.size(), model);
    r.flash_pipeline_us += best.repeat * best.flash_us;
    r.npu_stream_us += best.repeat * best.npu_us;
    r.npu_compute_us += best.repeat * best.npu_compute_us;
    r.latency_us += best.repeat * best.time_us;
    r.bytes.flash_channel += best.repeat * best.channel_bytes;
    busy += best.repeat * best.channel_busy_us;
    span += best.repeat * best.time_us;
    r.stages.push_back(best);
  }
  const auto extra = kv_and_sfu(config, model, seq_len);
  r.kv_us = extra.kv_us;
  r.sfu_us = extra.sfu_us;
  r.latency_us += extra.kv_us + extra.sfu_us;
  r.tokens_per_s = r.latency_us > 0 ? 1e6 / r.latency_us : 0.0;
  r.channel_utilization = span > 0 ? busy / (config.flash.channel_num * span) : 0.0;
  r.bytes.d2d = r.bytes.flash_channel;
  r.bytes.dram = extra.kv_bytes;
  r.ops = extra.ops;
  r.energy = energy_report(r, config.energy);
  return r;
}

double analytic_ceiling_us(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len,
                           const RunOptions& options) {
  const auto plans = plan_model(config, model, options);
  const double agg = config.aggregate_core_bw();
  double t = 0;
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& plan = plans[i].plan;
    const double npu_bw = partition_inputs(config, plan.shape).npu_stream_bw;
    const double stage = std::max(plan.flash_bytes / agg, plan.npu_bytes / npu_bw);
    t += repeat_of(i, plans.size(), model) * stage;
  }
  const auto extra = kv_and_sfu(config, model, seq_len);
  return t + extra.kv_us + extra.sfu_us;
}

TokenReport baseline_token_latency(const ModelSpec& model, const QuantizationSpec& quant, std::uint64_t seq_len,
                                   const BaselineModel& baseline, const EnergyCoefficients& energy) {
  validate(model);
  if (baseline.transfer_multiplier < 1.0) throw std::invalid_argument("transfer multiplier must be >= 1");
  if (baseline.interface_bw <= 0) throw std::invalid_argument("interface bandwidth must be positive");
  const std::uint64_t w = model.weight_bytes_total(quant);
  const auto graph = build_decode_graph(model, quant, seq_len);
  TokenReport r;
  r.system = "offload-baseline";
  r.model = model.name;
  r.seq_len = seq_len;
  r.variant = "multiplier=" + std::to_string(baseline.transfer_multiplier);
  r.latency_us = static_cast<double>(w) / baseline.interface_bw;
  r.tokens_per_s = 1e6 / r.latency_us;
  r.bytes.flash_channel = w;
  r.bytes.interconnect =
      static_cast<std::uint64_t>(std::llround((baseline.transfer_multiplier - 1.0) * static_cast<double>(w)));
  r.bytes.dram = graph.total_kv_bytes();
  for (const auto& op : graph.ops) r.ops += op.ops;
  r.energy = energy_report(r, energy);
  return r;
}

PathEnergy energy_report(const TokenReport& report, const EnergyCoefficients& c) {
  if (c.flash_channel_pj_per_byte < 0 || c.d2d_pj_per_byte < 0 || c.dram_pj_per_byte < 0 ||
      c.interconnect_pj_per_byte < 0 || c.compute_pj_per_op < 0)
    throw std::invalid_argument("energy coefficients must be non-negative");
  PathEnergy e;
  e.flash_channel = report.bytes.flash_channel * c.flash_channel_pj_per_byte;
  e.d2d = report.bytes.d2d * c.d2d_pj_per_byte;
  e.dram = report.bytes.dram * c.dram_pj_per_byte;
  e.interconnect = report.bytes.interconnect * c.interconnect_pj_per_byte;
  e.compute = report.ops * c.compute_pj_per_op;
  return e;
}

}  // namespace flashsim
