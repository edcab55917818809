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


#include "flashsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace flashsim {

SystemConfig resolve_system(const RunSpec& spec) {
  if (!spec.preset.empty() && !spec.config_path.empty())
    throw std::invalid_argument("give either a preset or a config file, not both");
  if (!spec.config_path.empty()) return load_config_file(spec.config_path);
  return preset(spec.preset.empty() ? "S" : spec.preset);
}

nlohmann::json to_json(const SystemConfig& c) {
  return {
      {"name", c.name},
      {"flash",
       {{"channel_num", c.flash.channel_num},
        {"chips_per_channel", c.flash.chips_per_channel},
        {"dies_per_chip", c.flash.dies_per_chip},
        {"planes_per_die", c.flash.planes_per_die},
        {"ccores_per_die", c.flash.ccores_per_die},
        {"page_size", c.flash.page_size},
        {"spare_size", c.flash.spare_size},
        {"block_pages", c.flash.block_pages},
        {"blocks_per_plane", c.flash.blocks_per_plane}}},
      {"timing", {{"t_read", c.timing.t_read}, {"channel_rate", c.timing.channel_rate}, {"bus_width", c.timing.bus_width}}},
      {"host",
       {{"npu_ops_per_us", c.host.npu_ops_per_us},
        {"dram_bw", c.host.dram_bw},
        {"input_output_buffer", c.host.input_output_buffer}}},
      {"quant", {{"weight_bits", c.quant.weight_bits}, {"activation_bits", c.quant.activation_bits}}},
      {"energy",
       {{"flash_channel_pj_per_byte", c.energy.flash_channel_pj_per_byte},
        {"d2d_pj_per_byte", c.energy.d2d_pj_per_byte},
        {"dram_pj_per_byte", c.energy.dram_pj_per_byte},
        {"interconnect_pj_per_byte", c.energy.interconnect_pj_per_byte},
        {"compute_pj_per_op", c.energy.compute_pj_per_op}}},
  };
}

nlohmann::json to_json(const ModelSpec& m) {
  return {{"name", m.name},
          {"layer_count", m.layer_count},
          {"d_model", m.d_model},
          {"ffn_dim", m.ffn_dim},
          {"head_count", m.head_count},
          {"kv_head_count", m.kv_head_count},
          {"vocab_size", m.vocab_size},
          {"ffn", m.ffn == FfnKind::gated ? "gated" : "plain"},
          {"tied_embeddings", m.tied_embeddings},
          {"parameter_count", m.parameter_count()}};
}

nlohmann::json to_json(const TokenReport& r) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : r.stages) {
    stages.push_back({{"name", s.name},
                      {"repeat", s.repeat},
                      {"tile", to_string(s.shape)},
                      {"flash_fraction", s.flash_fraction},
                      {"flash_tiles", s.flash_tiles},
                      {"flash_bytes", s.flash_bytes},
                      {"npu_bytes", s.npu_bytes},
                      {"time_us", s.time_us},
                      {"flash_us", s.flash_us},
                      {"npu_us", s.npu_us},
                      {"channel_bytes", s.channel_bytes}});
  }
  return {{"system", r.system},
          {"model", r.model},
          {"seq_len", r.seq_len},
          {"variant", r.variant},
          {"latency_us", r.latency_us},
          {"tokens_per_s", r.tokens_per_s},
          {"flash_pipeline_us", r.flash_pipeline_us},
          {"npu_stream_us", r.npu_stream_us},
          {"npu_compute_us", r.npu_compute_us},
          {"kv_us", r.kv_us},
          {"sfu_us", r.sfu_us},
          {"channel_utilization", r.channel_utilization},
          {"bytes",
           {{"flash_channel", r.bytes.flash_channel},
            {"d2d", r.bytes.d2d},
            {"dram", r.bytes.dram},
            {"interconnect", r.bytes.interconnect},
            {"moved", r.bytes.moved()}}},
          {"ops", r.ops},
          {"energy_pj",
           {{"flash_channel", r.energy.flash_channel},
            {"d2d", r.energy.d2d},
            {"dram", r.energy.dram},
            {"interconnect", r.energy.interconnect},
            {"compute", r.energy.compute},
            {"total", r.energy.total()}}},
          {"stages", stages}};
}

nlohmann::json run_header(const RunSpec& spec, const SystemConfig& config, const ModelSpec& model) {
  const auto& o = spec.options;
  return {{"config", to_json(config)},
          {"model", to_json(model)},
          {"options",
           {{"seq_len", spec.seq_len},
            {"mode", to_string(o.mode)},
            {"strategy", to_string(o.strategy)},
            {"tile", o.tile ? to_string(*o.tile) : "auto"},
            {"alpha", to_string(o.alpha)},
            {"slice_bytes", o.slice_bytes},
            {"core_speed", o.core_speed},
            {"seed", spec.seed}}}};
}

nlohmann::json run(const RunSpec& spec) {
  const auto config = resolve_system(spec);
  const auto model = resolve_model(spec.model);
  auto report = token_latency(config, model, spec.seq_len, spec.options);
  if (!spec.trace_path.empty()) {
    std::ofstream f(spec.trace_path);
    if (!f) throw std::runtime_error("cannot write trace '" + spec.trace_path + "'");
    for (const auto& pm : plan_model(config, model, spec.options)) {
      f << "# stage " << pm.name << '\n';
      write_trace(f, simulate_stage(config, pm, spec.options, true));
    }
  }
  nlohmann::json record = run_header(spec, config, model);
  record["report"] = to_json(report);
  record["analytic_ceiling_tokens_per_s"] = 1e6 / analytic_ceiling_us(config, model, spec.seq_len, spec.options);
  return record;
}

bool emit(const nlohmann::json& record, const RunSpec& spec, const std::string& default_name) {
  std::filesystem::path path;
  if (!spec.out_path.empty()) {
    path = spec.out_path;
  } else if (const char* dir = std::getenv(kOutputDirEnv); dir && *dir) {
    path = std::filesystem::path(dir) / default_name;
  } else {
    return false;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << record.dump(2) << '\n';
  return true;
}

SweepAxis parse_sweep_axis(const std::string& text) {
  if (text == "channels") return SweepAxis::channels;
  if (text == "chips") return SweepAxis::chips;
  throw std::invalid_argument("unknown sweep axis '" + text + "' (expected channels or chips)");
}

std::vector<SweepRow> sweep(SweepAxis axis, const std::vector<std::uint32_t>& points, const SystemConfig& base,
                            const ModelSpec& model, std::uint64_t seq_len, const RunOptions& options) {
  if (points.empty()) throw std::invalid_argument("sweep range is empty");
  std::vector<SweepRow> rows(points.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) {
      rows[i].point = points[i];
      try {
        SystemConfig c = base;
        if (axis == SweepAxis::channels)
          c.flash.channel_num = points[i];
        else
          c.flash.chips_per_channel = points[i];
        auto r = token_latency(c, model, seq_len, options);
        rows[i].tokens_per_s = r.tokens_per_s;
        rows[i].utilization = r.channel_utilization;
      } catch (const std::exception& e) {
        rows[i].error = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), points.size()));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "point,tokens_per_s,mean_utilization,error\n";
  for (const auto& r : rows) os << r.point << ',' << r.tokens_per_s << ',' << r.utilization << ',' << r.error << '\n';
  return os.str();
}

Ablation ablate_slicing(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len, RunOptions options) {
  Ablation a{"slicing", {}};
  options.strategy = Strategy::c;
  a.variants.emplace_back("sliced", token_latency(config, model, seq_len, options));
  options.strategy = Strategy::b;
  a.variants.emplace_back("unsliced", token_latency(config, model, seq_len, options));
  return a;
}

Ablation ablate_tiling(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len, RunOptions options) {
  Ablation a{"tiling", {}};
  options.strategy = Strategy::c;
  a.variants.emplace_back("flash+npu", token_latency(config, model, seq_len, options));
  options.strategy = Strategy::a;
  a.variants.emplace_back("flash-only", token_latency(config, model, seq_len, options));
  return a;
}

Ablation ablate_tile_size(const SystemConfig& config, const ModelSpec& model, std::uint64_t seq_len,
                          RunOptions options, const std::vector<TileShape>& shapes) {
  Ablation a{"tile-size", {}};
  for (const auto& s : shapes) {
    options.tile = s;
    a.variants.emplace_back(to_string(s), token_latency(config, model, seq_len, options));
  }
  return a;
}

nlohmann::json to_json(const Ablation& a) {
  nlohmann::json out = {{"ablation", a.name}, {"variants", nlohmann::json::array()}};
  if (a.variants.empty()) return out;
  const double ref = a.variants.front().second.tokens_per_s;
  for (const auto& [name, r] : a.variants) {
    out["variants"].push_back({{"name", name},
                               {"tokens_per_s", r.tokens_per_s},
                               {"channel_utilization", r.channel_utilization},
                               {"reference_speedup", r.tokens_per_s > 0 ? ref / r.tokens_per_s : 0.0}});
  }
  return out;
}

}  // namespace flashsim
