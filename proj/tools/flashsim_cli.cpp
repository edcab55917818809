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


#include <fstream>
#include <iostream>
#include <random>

#include <CLI11.hpp>

#include "flashsim/ecc.hpp"
#include "flashsim/runner.hpp"

using namespace flashsim;

namespace {

struct CommonFlags {
  std::string preset;
  std::string config;
  std::string model = "opt-6.7b";
  std::uint64_t seq_len = 512;
  std::string mode = "simulate";
  std::string strategy = "c";
  std::string tile;
  std::string alpha = "formula";
  std::uint64_t slice_bytes = 512;
  std::uint64_t seed = 0;
  std::string trace;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  auto* p = cmd->add_option("--preset", f.preset, "Hardware preset S, M or L");
  auto* c = cmd->add_option("--config", f.config, "Hardware config file")->check(CLI::ExistingFile);
  p->excludes(c);
  cmd->add_option("--model", f.model, "Model preset name or model file")->capture_default_str();
  cmd->add_option("--seq-len", f.seq_len, "Tokens already in the KV cache")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--mode", f.mode, "simulate or analytic")->capture_default_str();
  cmd->add_option("--strategy", f.strategy, "a, b or c")->capture_default_str();
  cmd->add_option("--tile", f.tile, "Tile shape HxW for every matrix");
  cmd->add_option("--alpha", f.alpha, "formula or autotune")->capture_default_str();
  cmd->add_option("--slice-bytes", f.slice_bytes, "Slice size for strategy c")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Random seed")->capture_default_str();
  cmd->add_option("--trace", f.trace, "Write a tab-separated event trace");
  cmd->add_option("--out", f.out, "Write the JSON record here");
}

RunSpec to_spec(const CommonFlags& f) {
  RunSpec s;
  s.preset = f.preset;
  s.config_path = f.config;
  s.model = f.model;
  s.seq_len = f.seq_len;
  s.options.mode = parse_sim_mode(f.mode);
  s.options.strategy = parse_strategy(f.strategy);
  if (!f.tile.empty()) s.options.tile = parse_tile_shape(f.tile);
  s.options.alpha = parse_alpha_mode(f.alpha);
  s.options.slice_bytes = f.slice_bytes;
  s.seed = f.seed;
  s.trace_path = f.trace;
  s.out_path = f.out;
  return s;
}

void print(const nlohmann::json& record, const RunSpec& spec, const std::string& name) {
  if (!emit(record, spec, name)) std::cout << record.dump(2) << '\n';
}

std::string record_name(const RunSpec& spec, const SystemConfig& config, const std::string& what) {
  std::string model = spec.model;
  for (auto& ch : model)
    if (ch == '/' || ch == '\\') ch = '_';
  return what + "_" + config.name + "_" + model + ".json";
}

int ecc_command(std::uint64_t pages, double x, std::uint64_t seed, const std::string& out) {
  EccParams params;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> value(-128, 127);
  std::uint64_t protected_bits = 0, protected_flips = 0, dropped = 0, violations = 0;
  for (std::uint64_t p = 0; p < pages; ++p) {
    WeightPage page(params.elements);
    for (auto& v : page) v = static_cast<std::int8_t>(value(rng));
    const auto block = encode_page(page, params);
    auto packed = pack(block, params);
    auto corrupted = page;
    inject_errors(corrupted, packed, x, rng);
    DecodeStats stats;
    const auto decoded = decode_page(corrupted, packed, params, &stats);
    for (const auto& e : block.entries) {
      protected_bits += 8;
      protected_flips += __builtin_popcount(static_cast<std::uint8_t>(decoded[e.address] ^ page[e.address]));
    }
    dropped += stats.dropped_entries;
    std::vector<char> prot(params.elements, 0);
    for (auto a : stats.protected_addresses) prot[a] = 1;
    for (std::uint32_t i = 0; i < params.elements; ++i)
      if (!prot[i] && std::abs(static_cast<int>(decoded[i])) > static_cast<int>(stats.threshold)) ++violations;
  }
  nlohmann::json r = {{"pages", pages},
                      {"bit_error_rate", x},
                      {"seed", seed},
                      {"ecc_bytes", params.packed_bytes()},
                      {"protected_bit_flip_rate", protected_bits ? double(protected_flips) / protected_bits : 0.0},
                      {"dropped_entries", dropped},
                      {"unprotected_above_threshold", violations},
                      {"flip_rate_protected_exact", flip_rate_protected(params.value_copies, x, FlipRateMode::exact)}};
  RunSpec spec;
  spec.out_path = out;
  print(r, spec, "ecc.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flashsim: in-flash GeMV offload simulator for LLM decoding"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  auto* run_cmd = app.add_subcommand("run", "Simulate one decode token");
  add_common(run_cmd, run_flags);

  CommonFlags sweep_flags;
  std::string axis = "chips";
  std::vector<std::uint32_t> points;
  std::string csv;
  auto* sweep_cmd = app.add_subcommand("sweep", "Scale channels or chips per channel");
  add_common(sweep_cmd, sweep_flags);
  sweep_cmd->add_option("--axis", axis, "channels or chips")->capture_default_str();
  sweep_cmd->add_option("--points", points, "Comma-separated sweep points")->delimiter(',');
  sweep_cmd->add_option("--csv", csv, "Write point,tokens_per_s,mean_utilization here");

  CommonFlags slicing_flags, tiling_flags, size_flags;
  std::vector<std::string> shapes = {"256x2048", "128x4096", "4096x128"};
  auto* slicing_cmd = app.add_subcommand("ablate-slicing", "Sliced versus unsliced plain reads");
  add_common(slicing_cmd, slicing_flags);
  auto* tiling_cmd = app.add_subcommand("ablate-tiling", "Flash plus NPU versus flash-only GeMV");
  add_common(tiling_cmd, tiling_flags);
  auto* size_cmd = app.add_subcommand("ablate-tile-size", "Compare tile shapes");
  add_common(size_cmd, size_flags);
  size_cmd->add_option("--shapes", shapes, "Tile shapes, reference first")->delimiter(',')->capture_default_str();

  CommonFlags plan_flags;
  bool atoms = false;
  std::string layout_out;
  auto* plan_cmd = app.add_subcommand("plan", "Print the tiling plan of every matrix");
  add_common(plan_cmd, plan_flags);
  plan_cmd->add_flag("--atoms", atoms, "List atomic tiles");
  plan_cmd->add_option("--layout", layout_out, "Write the page layout table here");

  std::uint64_t ecc_pages = 100, ecc_seed = 0;
  double ecc_x = 2e-4;
  std::string ecc_out;
  auto* ecc_cmd = app.add_subcommand("ecc", "Encode, corrupt and decode random pages");
  ecc_cmd->add_option("--pages", ecc_pages)->capture_default_str();
  ecc_cmd->add_option("--ber", ecc_x, "Per-bit flip probability")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  ecc_cmd->add_option("--seed", ecc_seed)->capture_default_str();
  ecc_cmd->add_option("--out", ecc_out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      auto spec = to_spec(run_flags);
      auto record = run(spec);
      print(record, spec, record_name(spec, resolve_system(spec), "run"));
    } else if (*sweep_cmd) {
      auto spec = to_spec(sweep_flags);
      const auto axis_v = parse_sweep_axis(axis);
      if (points.empty())
        points = axis_v == SweepAxis::chips ? std::vector<std::uint32_t>{1, 2, 4, 8, 16, 32, 64, 128}
                                            : std::vector<std::uint32_t>{1, 2, 4, 8, 16, 32, 64};
      const auto config = resolve_system(spec);
      const auto model = resolve_model(spec.model);
      const auto rows = sweep(axis_v, points, config, model, spec.seq_len, spec.options);
      if (!csv.empty()) {
        std::ofstream f(csv);
        f << sweep_csv(rows);
      }
      auto record = run_header(spec, config, model);
      record["axis"] = axis;
      for (const auto& r : rows)
        record["rows"].push_back({{"point", r.point}, {"tokens_per_s", r.tokens_per_s},
                                  {"mean_utilization", r.utilization}, {"error", r.error}});
      print(record, spec, record_name(spec, config, "sweep-" + axis));
    } else if (*slicing_cmd || *tiling_cmd || *size_cmd) {
      const auto& flags = *slicing_cmd ? slicing_flags : *tiling_cmd ? tiling_flags : size_flags;
      auto spec = to_spec(flags);
      const auto config = resolve_system(spec);
      const auto model = resolve_model(spec.model);
      Ablation a;
      if (*slicing_cmd) {
        a = ablate_slicing(config, model, spec.seq_len, spec.options);
      } else if (*tiling_cmd) {
        a = ablate_tiling(config, model, spec.seq_len, spec.options);
      } else {
        std::vector<TileShape> s;
        for (const auto& t : shapes) s.push_back(parse_tile_shape(t));
        a = ablate_tile_size(config, model, spec.seq_len, spec.options, s);
      }
      auto record = run_header(spec, config, model);
      record["result"] = to_json(a);
      print(record, spec, record_name(spec, config, "ablate-" + a.name));
    } else if (*plan_cmd) {
      auto spec = to_spec(plan_flags);
      const auto config = resolve_system(spec);
      const auto model = resolve_model(spec.model);
      const auto plans = plan_model(config, model, spec.options);
      for (const auto& pm : plans) std::cout << "# " << pm.name << '\n' << describe_plan(pm.plan, config, atoms);
      if (!layout_out.empty()) {
        DeviceTree device(config);
        std::ofstream f(layout_out);
        f << dump_layout(layout_weights(plans, device), plans);
      }
    } else if (*ecc_cmd) {
      return ecc_command(ecc_pages, ecc_x, ecc_seed, ecc_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
