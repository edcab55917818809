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

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <map>

using namespace flashsim;

TEST(ModelPresets, ParameterCountsNearAdvertised) {
  const std::map<std::string, double> advertised = {
      {"opt-6.7b", 6.7e9},  {"opt-13b", 13e9},    {"opt-30b", 30e9},    {"opt-66b", 66e9},
      {"llama2-7b", 7e9},   {"llama2-13b", 13e9}, {"llama2-70b", 70e9},
  };
  ASSERT_EQ(model_preset_names().size(), advertised.size());
  for (const auto& [name, size] : advertised) {
    const double p = static_cast<double>(model_preset(name).parameter_count());
    EXPECT_LT(std::abs(p / size - 1.0), 0.05) << name << " has " << p;
  }
}

TEST(ModelPresets, CaseInsensitiveAndUnknown) {
  EXPECT_EQ(model_preset("LLaMA2-7B").d_model, 4096u);
  EXPECT_THROW(model_preset("gpt-2"), ConfigError);
}

TEST(ModelSpecShapes, LlamaSmallestMatrixIsSixteenMegabytes) {
  const auto m = model_preset("llama2-7b");
  std::uint64_t smallest = UINT64_MAX;
  for (const auto& s : m.layer_matrices()) smallest = std::min(smallest, s.elements());
  EXPECT_EQ(smallest, 4096u * 4096u);
  EXPECT_EQ(smallest * 8 / 8, 16777216u);
}

TEST(ModelSpecShapes, GroupedQueryAttention) {
  const auto m = model_preset("llama2-70b");
  EXPECT_EQ(m.kv_dim(), 1024u);
  EXPECT_EQ(m.layer_matrices()[0].rows, 8192u + 2 * 1024u);
}

TEST(DecodeGraph, WeightBytesCoverModelExactly) {
  for (const auto& name : model_preset_names()) {
    const auto m = model_preset(name);
    for (std::uint32_t bits : {8u, 4u}) {
      QuantizationSpec q;
      q.weight_bits = bits;
      const auto g = build_decode_graph(m, q, 16);
      EXPECT_EQ(g.total_weight_bytes(), m.weight_bytes_total(q)) << name;
      std::uint64_t gemvs = 0;
      for (const auto& op : g.ops) gemvs += op.kind == OpKind::flash_gemv;
      EXPECT_EQ(gemvs, 4u * m.layer_count + 1u);
    }
  }
}

TEST(DecodeGraph, TopologicalOrder) {
  const auto g = build_decode_graph(model_preset("opt-6.7b"), {}, 8);
  for (const auto& op : g.ops)
    for (auto d : op.deps) EXPECT_LT(d, op.id) << op.name;
}

TEST(DecodeGraph, KvGrowsLinearly) {
  const auto m = model_preset("opt-13b");
  const auto a = build_decode_graph(m, {}, 100).total_kv_bytes();
  const auto b = build_decode_graph(m, {}, 200).total_kv_bytes();
  EXPECT_EQ(b, 2 * a);
  EXPECT_EQ(a, kv_cache_bytes(m, {}, 100));
}

TEST(DecodeGraph, SingleTokenContext) {
  const auto m = model_preset("opt-6.7b");
  const auto g = build_decode_graph(m, {}, 1);
  for (const auto& op : g.ops)
    if (op.kind == OpKind::dram_kv_load) EXPECT_EQ(op.kv_bytes, m.kv_dim());
  EXPECT_THROW(build_decode_graph(m, {}, 0), std::invalid_argument);
}

TEST(DecodeGraph, SeventyBillionKvCacheUnder700MB) {
  QuantizationSpec a16;
  a16.activation_bits = 16;
  EXPECT_LT(kv_cache_bytes(model_preset("llama2-70b"), a16, 1000), 700000000u);
}

TEST(Analytics, ArithmeticIntensity) {
  QuantizationSpec q;
  EXPECT_DOUBLE_EQ(arithmetic_intensity(model_preset("opt-6.7b"), q), 2.0);
  q.weight_bits = 4;
  q.activation_bits = 16;
  EXPECT_DOUBLE_EQ(arithmetic_intensity(model_preset("llama2-13b"), q), 4.0);
  EXPECT_THROW(arithmetic_intensity(ModelSpec{}, q), std::invalid_argument);
}

TEST(Analytics, ReductionRatio) {
  EXPECT_NEAR(reduction_ratio(4096, 4096), 4097.0, 1e-9);
  EXPECT_NEAR(reduction_ratio(1, 1), 2.0, 1e-12);
  EXPECT_NEAR(reduction_ratio(4096, 11008), (4096.0 * 11008 + 11008) / 4096, 1e-9);
}

TEST(ModelFile, RoundTripAndDefaults) {
  const auto m = model_preset("llama2-70b");
  EXPECT_EQ(load_model(serialize_model(m)), m);
  const auto tiny = load_model("[model]\nname = tiny\nlayer_count = 2\nd_model = 64\nffn_dim = 256\n"
                               "head_count = 4\nvocab_size = 100\n");
  EXPECT_EQ(tiny.kv_head_count, 4u);
  EXPECT_EQ(tiny.weight_elements(), 2u * (4 * 64 * 64 + 2 * 64 * 256) + 100u * 64);
}

TEST(ModelFile, Errors) {
  EXPECT_THROW(load_model("[model]\nlayer_count = 0\n"), ConfigError);
  EXPECT_THROW(load_model("[model]\nwidth = 3\n"), ConfigError);
  EXPECT_THROW(load_model("[weights]\n"), ConfigError);
  EXPECT_THROW(load_model("[model]\nffn = swish\n"), ConfigError);
  EXPECT_THROW(load_model("layer_count = 2\n"), ConfigError);
  const std::string good = "[model]\nlayer_count = 1\nd_model = 8\nffn_dim = 8\nhead_count = 2\nvocab_size = 8\n";
  EXPECT_THROW(load_model(good + "head_count = 2\n"), ConfigError);
  EXPECT_THROW(load_model(good + "kv_head_count = 3\n"), ConfigError);
}

TEST(ModelFile, ResolveFromPath) {
  const std::string path = ::testing::TempDir() + "/flashsim_model.ini";
  {
    std::ofstream f(path);
    f << serialize_model(model_preset("opt-13b"));
  }
  EXPECT_EQ(resolve_model(path), model_preset("opt-13b"));
  EXPECT_EQ(resolve_model("OPT-13B"), model_preset("opt-13b"));
}
