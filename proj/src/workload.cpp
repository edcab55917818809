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


#include "flashsim/workload.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace flashsim {

namespace {

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

std::uint64_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    if (!value.empty() && value[0] == '-') throw std::invalid_argument("");
    auto v = std::stoull(value, &used);
    if (used != value.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("parse error: '" + key + "' expects a non-negative integer, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  auto v = lower(value);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("parse error: '" + key + "' expects true or false, got '" + value + "'");
}

ModelSpec opt(std::string name, std::uint32_t layers, std::uint64_t d, std::uint32_t heads) {
  return {std::move(name), layers, d, 4 * d, heads, heads, 50272, FfnKind::plain, true};
}

ModelSpec llama2(std::string name, std::uint32_t layers, std::uint64_t d, std::uint64_t ffn, std::uint32_t heads,
                 std::uint32_t kv_heads) {
  return {std::move(name), layers, d, ffn, heads, kv_heads, 32000, FfnKind::gated, false};
}

const std::vector<ModelSpec>& presets() {
  static const std::vector<ModelSpec> all = {
      opt("opt-6.7b", 32, 4096, 32),
      opt("opt-13b", 40, 5120, 40),
      opt("opt-30b", 48, 7168, 56),
      opt("opt-66b", 64, 9216, 72),
      llama2("llama2-7b", 32, 4096, 11008, 32, 32),
      llama2("llama2-13b", 40, 5120, 13824, 40, 40),
      llama2("llama2-70b", 80, 8192, 28672, 64, 8),
  };
  return all;
}

}  // namespace

std::vector<MatrixShape> ModelSpec::layer_matrices() const {
  std::vector<MatrixShape> m;
  m.push_back({"qkv", d_model + 2 * kv_dim(), d_model, 0});
  m.push_back({"o_proj", d_model, d_model, 1});
  if (ffn == FfnKind::gated) {
    m.push_back({"gate_up", 2 * ffn_dim, d_model, 2});
    m.push_back({"down", d_model, ffn_dim, 3});
  } else {
    m.push_back({"fc1", ffn_dim, d_model, 2});
    m.push_back({"fc2", d_model, ffn_dim, 3});
  }
  return m;
}

MatrixShape ModelSpec::lm_head() const { return {"lm_head", vocab_size, d_model, lm_head_group}; }

std::uint64_t ModelSpec::weight_elements() const {
  std::uint64_t per_layer = 0;
  for (const auto& m : layer_matrices()) per_layer += m.elements();
  return per_layer * layer_count + lm_head().elements();
}

std::uint64_t ModelSpec::weight_bytes_total(const QuantizationSpec& quant) const {
  return weight_elements() * quant.weight_bits / 8;
}

std::uint64_t ModelSpec::parameter_count() const {
  return weight_elements() + (tied_embeddings ? 0 : vocab_size * d_model);
}

void validate(const ModelSpec& m) {
  auto positive = [](const char* key, std::uint64_t v) {
    if (v == 0) throw ConfigError(std::string("invalid value for '") + key + "': must be >= 1");
  };
  positive("layer_count", m.layer_count);
  positive("d_model", m.d_model);
  positive("ffn_dim", m.ffn_dim);
  positive("head_count", m.head_count);
  positive("kv_head_count", m.kv_head_count);
  positive("vocab_size", m.vocab_size);
  if (m.d_model % m.head_count != 0)
    throw ConfigError("invalid value for 'head_count': must divide d_model");
  if (m.kv_head_count > m.head_count || m.head_count % m.kv_head_count != 0)
    throw ConfigError("invalid value for 'kv_head_count': must divide head_count");
}

ModelSpec load_model(std::string_view text) {
  ModelSpec m;
  m.name = "custom";
  std::map<std::string, std::function<void(const std::string&, const std::string&)>> fields = {
      {"name", [&](auto&, auto& v) { m.name = v; }},
      {"layer_count", [&](auto& k, auto& v) { m.layer_count = static_cast<std::uint32_t>(parse_count(k, v)); }},
      {"d_model", [&](auto& k, auto& v) { m.d_model = parse_count(k, v); }},
      {"ffn_dim", [&](auto& k, auto& v) { m.ffn_dim = parse_count(k, v); }},
      {"head_count", [&](auto& k, auto& v) { m.head_count = static_cast<std::uint32_t>(parse_count(k, v)); }},
      {"kv_head_count", [&](auto& k, auto& v) { m.kv_head_count = static_cast<std::uint32_t>(parse_count(k, v)); }},
      {"vocab_size", [&](auto& k, auto& v) { m.vocab_size = parse_count(k, v); }},
      {"ffn", [&](auto& k, auto& v) {
         auto s = lower(v);
         if (s == "plain") m.ffn = FfnKind::plain;
         else if (s == "gated") m.ffn = FfnKind::gated;
         else throw ConfigError("parse error: '" + k + "' expects plain or gated, got '" + v + "'");
       }},
      {"tied_embeddings", [&](auto& k, auto& v) { m.tied_embeddings = parse_bool(k, v); }},
  };
  std::map<std::string, int> seen;
  bool in_model = false;
  bool kv_heads_set = false;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("parse error at line " + std::to_string(line_no) + ": unterminated section");
      auto section = lower(trim(line.substr(1, line.size() - 2)));
      if (section != "model") throw ConfigError("unknown section '[" + section + "]' at line " + std::to_string(line_no));
      in_model = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("parse error at line " + std::to_string(line_no) + ": expected 'key = value'");
    if (!in_model) throw ConfigError("parse error at line " + std::to_string(line_no) + ": key outside of a section");
    auto key = lower(trim(line.substr(0, eq)));
    auto value = trim(line.substr(eq + 1));
    auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("unknown key '" + key + "' in section [model]");
    if (seen[key]++) throw ConfigError("duplicate key '" + key + "' in section [model]");
    it->second(key, value);
    kv_heads_set |= key == "kv_head_count";
  }
  if (!kv_heads_set) m.kv_head_count = m.head_count;
  validate(m);
  return m;
}

ModelSpec load_model_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << f.rdbuf();
  return load_model(buf.str());
}

std::string serialize_model(const ModelSpec& m) {
  std::ostringstream os;
  os << "[model]\n"
     << "name = " << m.name << "\n"
     << "layer_count = " << m.layer_count << "\n"
     << "d_model = " << m.d_model << "\n"
     << "ffn_dim = " << m.ffn_dim << "\n"
     << "head_count = " << m.head_count << "\n"
     << "kv_head_count = " << m.kv_head_count << "\n"
     << "vocab_size = " << m.vocab_size << "\n"
     << "ffn = " << (m.ffn == FfnKind::gated ? "gated" : "plain") << "\n"
     << "tied_embeddings = " << (m.tied_embeddings ? "true" : "false") << "\n";
  return os.str();
}

std::vector<std::string> model_preset_names() {
  std::vector<std::string> names;
  for (const auto& m : presets()) names.push_back(m.name);
  return names;
}

ModelSpec model_preset(std::string_view name) {
  auto key = lower(std::string(name));
  for (const auto& m : presets())
    if (m.name == key) return m;
  throw ConfigError("unknown model preset '" + std::string(name) + "'");
}

ModelSpec resolve_model(const std::string& source) {
  auto key = lower(source);
  for (const auto& m : presets())
    if (m.name == key) return m;
  return load_model_file(source);
}

std::string to_string(OpKind kind) {
  switch (kind) {
    case OpKind::flash_gemv: return "flash_gemv";
    case OpKind::npu_kv: return "npu_kv";
    case OpKind::dram_kv_load: return "dram_kv_load";
    case OpKind::sfu: return "sfu";
  }
  return "unknown";
}

std::uint64_t DecodeGraph::total_ops(OpKind kind) const {
  std::uint64_t n = 0;
  for (const auto& op : ops)
    if (op.kind == kind) n += op.ops;
  return n;
}

std::uint64_t DecodeGraph::total_weight_bytes() const {
  std::uint64_t n = 0;
  for (const auto& op : ops) n += op.weight_bytes;
  return n;
}

std::uint64_t DecodeGraph::total_kv_bytes() const {
  std::uint64_t n = 0;
  for (const auto& op : ops) n += op.kv_bytes;
  return n;
}

DecodeGraph build_decode_graph(const ModelSpec& model, const QuantizationSpec& quant, std::uint64_t seq_len) {
  if (seq_len == 0) throw std::invalid_argument("seq_len must be >= 1");
  validate(model);
  DecodeGraph g;
  g.model_name = model.name;
  g.seq_len = seq_len;
  const std::uint64_t d = model.d_model;
  const std::uint64_t ab = quant.activation_bytes();
  const std::uint64_t kv_load = seq_len * model.kv_dim() * ab;

  std::uint32_t prev = 0;
  bool has_prev = false;
  auto add = [&](std::string name, OpKind kind, int layer, std::vector<std::uint32_t> deps) -> DecodeOp& {
    DecodeOp op;
    op.id = static_cast<std::uint32_t>(g.ops.size());
    op.name = std::move(name);
    op.kind = kind;
    op.layer = layer;
    op.deps = std::move(deps);
    g.ops.push_back(std::move(op));
    return g.ops.back();
  };
  auto chain = [&]() { return has_prev ? std::vector<std::uint32_t>{prev} : std::vector<std::uint32_t>{}; };
  auto gemv = [&](const MatrixShape& m, int layer, std::vector<std::uint32_t> deps) {
    auto& op = add(m.name, OpKind::flash_gemv, layer, std::move(deps));
    op.matrix = m;
    op.weight_bytes = m.elements() * quant.weight_bits / 8;
    op.ops = 2 * m.elements();
    return op.id;
  };
  auto sfu = [&](std::string name, std::uint64_t n, int layer, std::vector<std::uint32_t> deps) {
    auto& op = add(std::move(name), OpKind::sfu, layer, std::move(deps));
    op.ops = n;
    return op.id;
  };

  const auto mats = model.layer_matrices();
  for (std::uint32_t l = 0; l < model.layer_count; ++l) {
    const int L = static_cast<int>(l);
    auto norm1 = sfu("norm_attn", 5 * d, L, chain());
    auto qkv = gemv(mats[0], L, {norm1});
    std::uint32_t q_ready = qkv;
    if (model.ffn == FfnKind::gated) q_ready = sfu("rotary", 3 * (d + model.kv_dim()), L, {qkv});
    auto& kload = add("k_load", OpKind::dram_kv_load, L, {});
    kload.kv_bytes = kv_load;
    auto k_id = kload.id;
    auto& score = add("attn_score", OpKind::npu_kv, L, {q_ready, k_id});
    score.ops = 2 * seq_len * d;
    auto score_id = score.id;
    auto soft = sfu("softmax", 5 * seq_len * model.head_count, L, {score_id});
    auto& vload = add("v_load", OpKind::dram_kv_load, L, {});
    vload.kv_bytes = kv_load;
    auto v_id = vload.id;
    auto& ctx = add("attn_context", OpKind::npu_kv, L, {soft, v_id});
    ctx.ops = 2 * seq_len * d;
    auto ctx_id = ctx.id;
    auto o = gemv(mats[1], L, {ctx_id});
    auto norm2 = sfu("norm_ffn", 5 * d, L, {o});
    auto up = gemv(mats[2], L, {norm2});
    auto act = sfu("activation", model.ffn == FfnKind::gated ? 3 * model.ffn_dim : model.ffn_dim, L, {up});
    prev = gemv(mats[3], L, {act});
    has_prev = true;
  }
  auto norm = sfu("norm_final", 5 * d, -1, chain());
  gemv(model.lm_head(), -1, {norm});
  return g;
}

std::uint64_t kv_cache_bytes(const ModelSpec& model, const QuantizationSpec& quant, std::uint64_t seq_len) {
  return std::uint64_t{model.layer_count} * 2 * model.kv_dim() * seq_len * quant.activation_bytes();
}

double arithmetic_intensity(const ModelSpec& model, const QuantizationSpec& quant) {
  if (model.layer_count == 0 || model.d_model == 0 || model.weight_elements() == 0)
    throw std::invalid_argument("arithmetic intensity is undefined for a model without weights");
  const double bytes = static_cast<double>(model.weight_elements()) * quant.weight_bytes_per_element();
  return 2.0 * static_cast<double>(model.weight_elements()) / bytes;
}

double reduction_ratio(std::uint64_t rows, std::uint64_t cols, const QuantizationSpec& quant) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("matrix dimensions must be positive");
  const double ab = quant.activation_bytes();
  const double in = static_cast<double>(rows) * cols * quant.weight_bytes_per_element() + cols * ab;
  return in / (rows * ab);
}

}  // namespace flashsim
