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
#include <random>
#include <vector>

namespace flashsim {

/// Signed 8-bit weights of one page.
using WeightPage = std::vector<std::int8_t>;

struct EccParams {
  std::uint32_t elements = 16384;  // at most 2^14: addresses are 14 bits
  std::uint32_t threshold_copies = 9;
  std::uint32_t value_copies = 2;  // N

  std::uint32_t entry_count() const { return elements / 100; }
  std::uint64_t packed_bits() const;
  std::uint64_t packed_bytes() const { return (packed_bits() + 7) / 8; }
};

inline constexpr std::uint32_t kAddressBits = 14;
inline constexpr std::uint32_t kParityBits = 5;

struct EccEntry {
  std::uint16_t address = 0;
  std::uint8_t parity = 0;
  std::vector<std::uint8_t> copies;
};

struct EccBlock {
  std::vector<std::uint8_t> threshold_copies;
  std::vector<EccEntry> entries;  // increasing address
};

/// Parity bits p1, p2, p4, p8, p16 in bits 0..4. Codeword positions 1..19 hold parity at
/// powers of two and address bits (LSB first) everywhere else.
std::uint8_t hamming14_encode(std::uint16_t addr);

enum class HammingStatus { clean, corrected, uncorrectable };

struct HammingResult {
  std::uint16_t addr = 0;
  HammingStatus status = HammingStatus::clean;
};

HammingResult hamming14_decode(std::uint16_t addr, std::uint8_t parity);

EccBlock encode_page(const WeightPage& page, const EccParams& params = {});

/// Threshold copies first, then entries (address, parity, copies), MSB first, zero padded.
std::vector<std::uint8_t> pack(const EccBlock& block, const EccParams& params = {});
EccBlock unpack(const std::vector<std::uint8_t>& bytes, const EccParams& params = {});

struct ErrorModel {
  double bit_error_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Flips each bit independently with probability x. Returns the number of flipped bits.
std::uint64_t flip_bits(std::uint8_t* data, std::size_t size, double x, std::mt19937_64& rng);

/// Corrupts page and packed ECC in place; returns flipped bits.
std::uint64_t inject_errors(WeightPage& page, std::vector<std::uint8_t>& packed, double x, std::mt19937_64& rng);
std::uint64_t inject_errors(WeightPage& page, std::vector<std::uint8_t>& packed, const ErrorModel& model);

struct DecodeStats {
  std::uint32_t threshold = 0;
  std::uint32_t corrected_addresses = 0;
  std::uint32_t dropped_entries = 0;
  std::uint32_t truncated_values = 0;
  std::vector<std::uint16_t> protected_addresses;  // surviving entries after address decoding
};

WeightPage decode_page(const WeightPage& page, const std::vector<std::uint8_t>& packed, const EccParams& params = {},
                       DecodeStats* stats = nullptr);

enum class FlipRateMode { exact, approx };

/// Probability that a bitwise majority over N copies plus the page bit is wrong.
/// Throws std::invalid_argument for odd or zero N and for x outside [0, 1].
double flip_rate_protected(std::uint32_t n_copies, double x, FlipRateMode mode);

/// Simulated per-bit failure rate of the same vote over `trials` independent bits.
double monte_carlo_flip_rate(std::uint32_t n_copies, double x, std::uint64_t trials, std::uint64_t seed);

void write_page(std::ostream& os, const WeightPage& page);
WeightPage read_page(std::istream& is, std::uint32_t elements);
void write_ecc(std::ostream& os, const std::vector<std::uint8_t>& packed);
std::vector<std::uint8_t> read_ecc(std::istream& is, const EccParams& params = {});

}  // namespace flashsim
