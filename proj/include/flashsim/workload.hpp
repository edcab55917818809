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
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "flashsim/hwconfig.hpp"

namespace flashsim {

enum class FfnKind { plain, gated };

/// A weight matrix: rows are outputs, cols are inputs.
struct MatrixShape {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint32_t group = 0;  // stage index inside a layer; the LM head uses lm_head_group

  std::uint64_t elements() const { return rows * cols; }
  bool operator==(const MatrixShape&) const = default;
};

inline constexpr std::uint32_t lm_head_group = 4;

struct ModelSpec {
  std::string name;
  std::uint32_t layer_count = 0;
  std::uint64_t d_model = 0;
  std::uint64_t ffn_dim = 0;
  std::uint32_t head_count = 0;
  std::uint32_t kv_head_count = 0;
  std::uint64_t vocab_size = 0;
  FfnKind ffn = FfnKind::plain;
  bool tied_embeddings = true;

  std::uint64_t head_dim() const { return d_model / head_count; }
  std::uint64_t kv_dim() const { return head_dim() * kv_head_count; }

  /// Weight matrices of one decoder layer in execution order.
  std::vector<MatrixShape> layer_matrices() const;
  MatrixShape lm_head() const;

  /// Elements of every weight matrix touched per decode token.
  std::uint64_t weight_elements() const;
  std::uint64_t weight_bytes_total(const QuantizationSpec& quant) const;
  /// Weight elements plus a separate input embedding when it is not tied.
  std::uint64_t parameter_count() const;

  bool operator==(const ModelSpec&) const = default;
};

/// Throws ConfigError naming the offending key.
void validate(const ModelSpec& model);

/// Parses a [model] document.
ModelSpec load_model(std::string_view text);
ModelSpec load_model_file(const std::string& path);
std::string serialize_model(const ModelSpec& model);

std::vector<std::string> model_preset_names();
ModelSpec model_preset(std::string_view name);
/// A preset name or a model file path.
ModelSpec resolve_model(const std::string& source);

enum class OpKind { flash_gemv, npu_kv, dram_kv_load, sfu };
std::string to_string(OpKind kind);

struct DecodeOp {
  std::uint32_t id = 0;
  std::string name;
  OpKind kind = OpKind::sfu;
  int layer = -1;  // -1 for ops after the last layer
  std::optional<MatrixShape> matrix;
  std::uint64_t weight_bytes = 0;
  std::uint64_t kv_bytes = 0;
  std::uint64_t ops = 0;
  std::vector<std::uint32_t> deps;
};

struct DecodeGraph {
  std::string model_name;
  std::uint64_t seq_len = 0;
  std::vector<DecodeOp> ops;

  std::uint64_t total_ops(OpKind kind) const;
  std::uint64_t total_weight_bytes() const;
  std::uint64_t total_kv_bytes() const;
};

/// One decode token. Throws std::invalid_argument when seq_len is zero.
DecodeGraph build_decode_graph(const ModelSpec& model, const QuantizationSpec& quant, std::uint64_t seq_len);

/// Per-token KV cache size.
std::uint64_t kv_cache_bytes(const ModelSpec& model, const QuantizationSpec& quant, std::uint64_t seq_len);

/// Weight GeMV ops per weight byte. Throws std::invalid_argument for a model without weights.
double arithmetic_intensity(const ModelSpec& model, const QuantizationSpec& quant);

/// GeMV input bytes (weights plus input vector) over output bytes.
double reduction_ratio(std::uint64_t rows, std::uint64_t cols, const QuantizationSpec& quant = {});

}  // namespace flashsim
