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

#include <gtest/gtest.h>

#include <fstream>

using namespace flashsim;

TEST(Preset, SmallGeometry) {
  const auto c = preset("S");
  EXPECT_EQ(c.flash.channel_num, 8u);
  EXPECT_EQ(c.flash.chips_per_channel, 2u);
  EXPECT_EQ(c.flash.ccore_num(), 4u);
  EXPECT_EQ(c.flash.total_cores(), 32u);
  EXPECT_EQ(c.flash.total_planes(), 64u);
  EXPECT_DOUBLE_EQ(c.timing.bw_channel(), 1000.0);
  EXPECT_EQ(c.elements_per_page(), 16384u);
}

TEST(Preset, LargeHasFiveHundredTwelveCores) {
  EXPECT_EQ(preset("L").flash.total_cores(), 512u);
  EXPECT_EQ(preset("m").flash.total_cores(), 128u);
}

TEST(Preset, UnknownNameRejected) { EXPECT_THROW(preset("XL"), ConfigError); }

TEST(Preset, AggregateCoreBandwidth) {
  // 32 cores, one 16384 B page each per 30 us.
  EXPECT_NEAR(preset("S").aggregate_core_bw(), 32.0 * 16384 / 30.0, 1e-9);
}

TEST(Timing, TransferRoundsUpToWholeNanoseconds) {
  FlashTiming t;
  EXPECT_EQ(t.transfer_ns(1), 1);
  EXPECT_EQ(t.transfer_ns(16384), 16384);
  t.channel_rate = 3;
  t.bus_width = 8;
  EXPECT_EQ(t.transfer_ns(1), 333333334);
  EXPECT_EQ(t.t_read_ns(), 30000);
}

TEST(Quant, ElementsPerPage) {
  QuantizationSpec q;
  EXPECT_EQ(q.elements_per_page(16384), 16384u);
  q.weight_bits = 4;
  EXPECT_EQ(q.elements_per_page(16384), 32768u);
  q.activation_bits = 16;
  EXPECT_EQ(q.activation_bytes(), 2u);
}

TEST(Parse, RoundTripThroughText) {
  auto c = preset("M");
  c.timing.t_read = 25.5;
  c.energy.dram_pj_per_byte = 3.25;
  EXPECT_EQ(load_config(serialize_config(c)), c);
}

TEST(Parse, PartialDocumentKeepsDefaults) {
  const auto c = load_config("[flash]\nchannel_num = 4  # fewer channels\n");
  EXPECT_EQ(c.flash.channel_num, 4u);
  EXPECT_EQ(c.flash.chips_per_channel, SystemConfig{}.flash.chips_per_channel);
}

TEST(Parse, ZeroChannelsNamesTheKey) {
  try {
    load_config("[flash]\nchannel_num = 0\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("channel_num"), std::string::npos);
  }
}

TEST(Parse, RejectsMalformedDocuments) {
  EXPECT_THROW(load_config("channel_num = 4\n"), ConfigError);
  EXPECT_THROW(load_config("[flash]\nchannels = 4\n"), ConfigError);
  EXPECT_THROW(load_config("[nand]\n"), ConfigError);
  EXPECT_THROW(load_config("[flash]\nchannel_num = 4\nchannel_num = 5\n"), ConfigError);
  EXPECT_THROW(load_config("[flash]\nchannel_num = -1\n"), ConfigError);
  EXPECT_THROW(load_config("[timing]\nt_read = fast\n"), ConfigError);
  EXPECT_THROW(load_config("[flash\n"), ConfigError);
}

TEST(Validate, Constraints) {
  auto c = preset("S");
  c.flash.page_size = 12000;
  EXPECT_THROW(validate(c), ConfigError);
  c = preset("S");
  c.flash.ccores_per_die = 3;
  EXPECT_THROW(validate(c), ConfigError);
  c = preset("S");
  c.quant.weight_bits = 2;
  EXPECT_THROW(validate(c), ConfigError);
  c = preset("S");
  c.energy.d2d_pj_per_byte = -1;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Resolve, PresetOrFile) {
  EXPECT_EQ(resolve_config("l").flash.channel_num, 32u);
  const std::string path = ::testing::TempDir() + "/flashsim_cfg.ini";
  {
    std::ofstream f(path);
    f << "[system]\nname = tiny\n[flash]\nchannel_num = 1\nchips_per_channel = 1\n";
  }
  const auto c = resolve_config(path);
  EXPECT_EQ(c.name, "tiny");
  EXPECT_EQ(c.flash.total_cores(), 2u);
  EXPECT_THROW(resolve_config(path + ".missing"), ConfigError);
}
