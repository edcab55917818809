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

#include <gtest/gtest.h>

#include <cmath>

using namespace flashsim;

namespace {

RunOptions analytic() {
  RunOptions o;
  o.mode = SimMode::analytic;
  return o;
}

}  // namespace

TEST(HostModelNames, ParseRoundTrip) {
  for (auto m : {SimMode::simulate, SimMode::analytic}) EXPECT_EQ(parse_sim_mode(to_string(m)), m);
  for (auto m : {AlphaMode::formula, AlphaMode::autotune}) EXPECT_EQ(parse_alpha_mode(to_string(m)), m);
  EXPECT_THROW(parse_sim_mode("fast"), std::invalid_argument);
  EXPECT_THROW(parse_alpha_mode("guess"), std::invalid_argument);
}

TEST(PlanModel, StagesCoverEveryWeightOnce) {
  const auto c = preset("S");
  for (const auto* name : {"opt-6.7b", "llama2-7b"}) {
    const auto m = model_preset(name);
    const auto plans = plan_model(c, m, {});
    const auto shapes = m.layer_matrices();
    ASSERT_EQ(plans.size(), shapes.size() + 1);
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const auto& p = plans[i].plan;
      EXPECT_EQ(p.flash_bytes + p.npu_bytes, p.matrix_bytes);
      total += p.matrix_bytes * (i + 1 < plans.size() ? m.layer_count : 1);
    }
    EXPECT_EQ(total, m.weight_bytes_total(c.quant));
  }
}

TEST(PlanModel, FractionOverrideExtremes) {
  const auto c = preset("S");
  auto o = RunOptions{};
  o.flash_fraction = 0.0;
  for (const auto& p : plan_model(c, model_preset("opt-6.7b"), o)) EXPECT_EQ(p.plan.flash_bytes, 0u);
  o.flash_fraction = 1.0;
  for (const auto& p : plan_model(c, model_preset("opt-6.7b"), o)) EXPECT_EQ(p.plan.npu_bytes, 0u);
}

TEST(TokenLatency, CeilingIsALowerBound) {
  const auto c = preset("S");
  const auto m = model_preset("opt-6.7b");
  const auto sim = token_latency(c, m, 512);
  const auto fast = token_latency(c, m, 512, analytic());
  const double ceiling = analytic_ceiling_us(c, m, 512);
  EXPECT_LE(ceiling, sim.latency_us);
  EXPECT_LE(ceiling, fast.latency_us);
  EXPECT_NEAR(fast.latency_us / sim.latency_us, 1.0, 0.02);
  EXPECT_NEAR(sim.tokens_per_s, 1e6 / sim.latency_us, 1e-9);
}

TEST(TokenLatency, GrowsWithContext) {
  const auto c = preset("S");
  const auto m = model_preset("llama2-13b");
  double prev = 0;
  for (std::uint64_t seq : {1, 256, 1024, 4096}) {
    const auto r = token_latency(c, m, seq, analytic());
    EXPECT_GT(r.latency_us, prev);
    EXPECT_GT(r.kv_us, 0);
    prev = r.latency_us;
  }
}

TEST(TokenLatency, ByteAccounting) {
  const auto c = preset("S");
  const auto m = model_preset("opt-6.7b");
  const auto r = token_latency(c, m, 512, analytic());
  EXPECT_EQ(r.bytes.d2d, r.bytes.flash_channel);
  EXPECT_EQ(r.bytes.dram, kv_cache_bytes(m, c.quant, 512));
  EXPECT_EQ(r.bytes.interconnect, 0u);
  EXPECT_EQ(r.bytes.moved(), r.bytes.flash_channel + r.bytes.dram);
  std::uint64_t stage_bytes = 0;
  for (const auto& s : r.stages) stage_bytes += s.channel_bytes * s.repeat;
  EXPECT_EQ(stage_bytes, r.bytes.flash_channel);
  EXPECT_GT(r.channel_utilization, 0);
  EXPECT_LE(r.channel_utilization, 1);
}

TEST(TokenLatency, FourBitWeightsAreFaster) {
  for (const auto* sys : {"S", "L"}) {
    auto c = preset(sys);
    const auto m = model_preset("llama2-7b");
    const double w8 = token_latency(c, m, 512, analytic()).tokens_per_s;
    c.quant.weight_bits = 4;
    EXPECT_GT(token_latency(c, m, 512, analytic()).tokens_per_s, w8) << sys;
  }
}

TEST(TokenLatency, AutotuneNeverLoses) {
  const auto c = preset("S");
  const auto m = model_preset("opt-6.7b");
  auto tuned = analytic();
  tuned.alpha = AlphaMode::autotune;
  EXPECT_LE(token_latency(c, m, 512, tuned).latency_us, token_latency(c, m, 512, analytic()).latency_us * 1.0001);
}

TEST(Baseline, SeventyBillionAtInterfaceBandwidth) {
  const auto m = model_preset("llama2-70b");
  const QuantizationSpec q;
  const auto r = baseline_token_latency(m, q, 512);
  const double weight_us = static_cast<double>(m.weight_bytes_total(q)) / 4000.0;
  EXPECT_GE(r.latency_us, weight_us);
  EXPECT_NEAR(r.tokens_per_s, 0.057, 0.057 * 0.05);
  EXPECT_EQ(r.bytes.flash_channel, m.weight_bytes_total(q));
  EXPECT_EQ(r.bytes.interconnect, 2 * m.weight_bytes_total(q));
}

TEST(Energy, LinearInCoefficients) {
  const auto c = preset("S");
  const auto r = token_latency(c, model_preset("opt-6.7b"), 512, analytic());
  EnergyCoefficients k;
  const auto e1 = energy_report(r, k);
  k.flash_channel_pj_per_byte *= 2;
  k.d2d_pj_per_byte *= 2;
  k.dram_pj_per_byte *= 2;
  k.interconnect_pj_per_byte *= 2;
  k.compute_pj_per_op *= 2;
  EXPECT_NEAR(energy_report(r, k).total(), 2 * e1.total(), 1e-6 * e1.total());
  EXPECT_EQ(energy_report(r, EnergyCoefficients{0, 0, 0, 0, 0}).total(), 0.0);
  EXPECT_DOUBLE_EQ(e1.flash_channel, static_cast<double>(r.bytes.flash_channel));
}

TEST(Energy, BelowOffloadBaseline) {
  const auto c = preset("S");
  for (const auto& name : model_preset_names()) {
    const auto m = model_preset(name);
    const auto ours = token_latency(c, m, 512, analytic());
    const auto base = baseline_token_latency(m, c.quant, 512);
    EXPECT_LT(energy_report(ours, c.energy).total(), energy_report(base, c.energy).total()) << name;
  }
}
