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

#include "flashsim/hwconfig.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

namespace flashsim {

Nanos FlashTiming::t_read_ns() const { return static_cast<Nanos>(std::llround(t_read * 1000.0)); }

Nanos FlashTiming::transfer_ns(std::uint64_t bytes) const {
  // ns = bytes * 8 bits * 1e9 / (rate * bus_width), rounded up.
  const unsigned __int128 num = static_cast<unsigned __int128>(bytes) * 8u * 1000000000u;
  const unsigned __int128 den = static_cast<unsigned __int128>(channel_rate) * bus_width;
  return static_cast<Nanos>((num + den - 1) / den);
}

namespace {

bool is_pow2(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  throw ConfigError("invalid value for '" + key + "': " + what);
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

template <typename T>
T parse_uint(const std::string& key, const std::string& value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw ConfigError("parse error: '" + key + "' expects a non-negative integer, got '" + value + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  double out = 0;
  in >> out;
  if (in.fail() || !in.eof() || !std::isfinite(out))
    throw ConfigError("parse error: '" + key + "' expects a number, got '" + value + "'");
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// One entry per key: how to read it into a config and how to print it back.
struct Field {
  std::function<void(SystemConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const SystemConfig&)> get;
};

#define FLASHSIM_UINT_FIELD(member, type)                                                        \
  Field {                                                                                        \
    [](SystemConfig& c, const std::string& k, const std::string& v) {                            \
      c.member = parse_uint<type>(k, v);                                                         \
    },                                                                                           \
        [](const SystemConfig& c) { return std::to_string(c.member); }                           \
  }
#define FLASHSIM_DOUBLE_FIELD(member)                                                            \
  Field {                                                                                        \
    [](SystemConfig& c, const std::string& k, const std::string& v) {                            \
      c.member = parse_double(k, v);                                                             \
    },                                                                                           \
        [](const SystemConfig& c) { return fmt_double(c.member); }                               \
  }

using Schema = std::vector<std::pair<std::string, std::vector<std::pair<std::string, Field>>>>;

const Schema& schema() {
  static const Schema s = {
      {"system",
       {{"name", Field{[](SystemConfig& c, const std::string&, const std::string& v) { c.name = v; },
                       [](const SystemConfig& c) { return c.name; }}}}},
      {"flash",
       {{"channel_num", FLASHSIM_UINT_FIELD(flash.channel_num, std::uint32_t)},
        {"chips_per_channel", FLASHSIM_UINT_FIELD(flash.chips_per_channel, std::uint32_t)},
        {"dies_per_chip", FLASHSIM_UINT_FIELD(flash.dies_per_chip, std::uint32_t)},
        {"planes_per_die", FLASHSIM_UINT_FIELD(flash.planes_per_die, std::uint32_t)},
        {"ccores_per_die", FLASHSIM_UINT_FIELD(flash.ccores_per_die, std::uint32_t)},
        {"page_size", FLASHSIM_UINT_FIELD(flash.page_size, std::uint64_t)},
        {"spare_size", FLASHSIM_UINT_FIELD(flash.spare_size, std::uint64_t)},
        {"block_pages", FLASHSIM_UINT_FIELD(flash.block_pages, std::uint32_t)},
        {"blocks_per_plane", FLASHSIM_UINT_FIELD(flash.blocks_per_plane, std::uint32_t)}}},
      {"timing",
       {{"t_read", FLASHSIM_DOUBLE_FIELD(timing.t_read)},
        {"channel_rate", FLASHSIM_UINT_FIELD(timing.channel_rate, std::uint64_t)},
        {"bus_width", FLASHSIM_UINT_FIELD(timing.bus_width, std::uint32_t)}}},
      {"host",
       {{"npu_ops_per_us", FLASHSIM_DOUBLE_FIELD(host.npu_ops_per_us)},
        {"dram_bw", FLASHSIM_DOUBLE_FIELD(host.dram_bw)},
        {"input_output_buffer", FLASHSIM_UINT_FIELD(host.input_output_buffer, std::uint64_t)}}},
      {"quant",
       {{"weight_bits", FLASHSIM_UINT_FIELD(quant.weight_bits, std::uint32_t)},
        {"activation_bits", FLASHSIM_UINT_FIELD(quant.activation_bits, std::uint32_t)}}},
      {"energy",
       {{"flash_channel_pj_per_byte", FLASHSIM_DOUBLE_FIELD(energy.flash_channel_pj_per_byte)},
        {"d2d_pj_per_byte", FLASHSIM_DOUBLE_FIELD(energy.d2d_pj_per_byte)},
        {"dram_pj_per_byte", FLASHSIM_DOUBLE_FIELD(energy.dram_pj_per_byte)},
        {"interconnect_pj_per_byte", FLASHSIM_DOUBLE_FIELD(energy.interconnect_pj_per_byte)},
        {"compute_pj_per_op", FLASHSIM_DOUBLE_FIELD(energy.compute_pj_per_op)}}},
  };
  return s;
}

#undef FLASHSIM_UINT_FIELD
#undef FLASHSIM_DOUBLE_FIELD

const Field* find_field(const std::string& section, const std::string& key) {
  for (const auto& [sec, fields] : schema()) {
    if (sec != section) continue;
    for (const auto& [name, field] : fields)
      if (name == key) return &field;
  }
  return nullptr;
}

}  // namespace

void validate(const SystemConfig& c) {
  const auto& f = c.flash;
  auto at_least_one = [](const char* key, std::uint64_t v) {
    if (v < 1) invalid(key, "must be >= 1");
  };
  at_least_one("channel_num", f.channel_num);
  at_least_one("chips_per_channel", f.chips_per_channel);
  at_least_one("dies_per_chip", f.dies_per_chip);
  at_least_one("planes_per_die", f.planes_per_die);
  at_least_one("ccores_per_die", f.ccores_per_die);
  at_least_one("block_pages", f.block_pages);
  at_least_one("blocks_per_plane", f.blocks_per_plane);
  if (!is_pow2(f.page_size) || f.page_size < 4096)
    invalid("page_size", "must be a power of two >= 4096");
  if (f.ccores_per_die > f.planes_per_die)
    invalid("ccores_per_die", "cannot exceed planes_per_die");

  if (!(c.timing.t_read > 0)) invalid("t_read", "must be > 0");
  if (c.timing.t_read_ns() < 1) invalid("t_read", "must be at least 1 ns");
  if (c.timing.channel_rate < 1) invalid("channel_rate", "must be >= 1");
  if (c.timing.bus_width < 1) invalid("bus_width", "must be >= 1");
  if (!(c.timing.bw_channel() > 0)) invalid("channel_rate", "derived bw_channel must be > 0");

  if (!(c.host.npu_ops_per_us > 0)) invalid("npu_ops_per_us", "must be > 0");
  if (!(c.host.dram_bw > 0)) invalid("dram_bw", "must be > 0");
  if (c.host.input_output_buffer < 1) invalid("input_output_buffer", "must be > 0");

  if (c.quant.weight_bits != 4 && c.quant.weight_bits != 8) invalid("weight_bits", "must be 4 or 8");
  if (c.quant.activation_bits != 8 && c.quant.activation_bits != 16)
    invalid("activation_bits", "must be 8 or 16");

  const auto& e = c.energy;
  for (auto [key, v] : {std::pair{"flash_channel_pj_per_byte", e.flash_channel_pj_per_byte},
                        std::pair{"d2d_pj_per_byte", e.d2d_pj_per_byte},
                        std::pair{"dram_pj_per_byte", e.dram_pj_per_byte},
                        std::pair{"interconnect_pj_per_byte", e.interconnect_pj_per_byte},
                        std::pair{"compute_pj_per_op", e.compute_pj_per_op}}) {
    if (!(v >= 0)) invalid(key, "must be >= 0");
  }
}

SystemConfig load_config(std::string_view text) {
  SystemConfig config;
  std::string section;
  std::map<std::string, int> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("parse error at line " + std::to_string(line_no) + ": unterminated section");
      section = lower(trim(line.substr(1, line.size() - 2)));
      bool known = std::any_of(schema().begin(), schema().end(),
                               [&](const auto& s) { return s.first == section; });
      if (!known) throw ConfigError("unknown section '[" + section + "]' at line " + std::to_string(line_no));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("parse error at line " + std::to_string(line_no) + ": expected 'key = value'");
    if (section.empty())
      throw ConfigError("parse error at line " + std::to_string(line_no) + ": key outside of a section");
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    const Field* field = find_field(section, key);
    if (!field) throw ConfigError("unknown key '" + key + "' in section [" + section + "]");
    if (seen[section + "." + key]++)
      throw ConfigError("duplicate key '" + key + "' in section [" + section + "]");
    field->set(config, key, value);
  }
  validate(config);
  return config;
}

SystemConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return load_config(buf.str());
}

std::string serialize_config(const SystemConfig& config) {
  std::ostringstream os;
  bool first = true;
  for (const auto& [sec, fields] : schema()) {
    if (!first) os << '\n';
    first = false;
    os << '[' << sec << "]\n";
    for (const auto& [name, field] : fields) os << name << " = " << field.get(config) << '\n';
  }
  return os.str();
}

SystemConfig preset(std::string_view name) {
  std::string n = lower(std::string(name));
  SystemConfig c;
  if (n == "s") {
    c.name = "S";
    c.flash.channel_num = 8;
    c.flash.chips_per_channel = 2;
  } else if (n == "m") {
    c.name = "M";
    c.flash.channel_num = 16;
    c.flash.chips_per_channel = 4;
  } else if (n == "l") {
    c.name = "L";
    c.flash.channel_num = 32;
    c.flash.chips_per_channel = 8;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected S, M or L)");
  }
  validate(c);
  return c;
}

SystemConfig resolve_config(const std::string& source) {
  std::string n = lower(source);
  if (n == "s" || n == "m" || n == "l") return preset(n);
  return load_config_file(source);
}

}  // namespace flashsim
