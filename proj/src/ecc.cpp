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


#include "flashsim/ecc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace flashsim {

namespace {

class BitWriter {
 public:
  explicit BitWriter(std::vector<std::uint8_t>& out) : out_(out) {}
  void put(std::uint32_t value, std::uint32_t bits) {
    for (std::uint32_t i = bits; i-- > 0;) {
      if (pos_ % 8 == 0) out_.push_back(0);
      if ((value >> i) & 1u) out_.back() |= static_cast<std::uint8_t>(0x80u >> (pos_ % 8));
      ++pos_;
    }
  }

 private:
  std::vector<std::uint8_t>& out_;
  std::uint64_t pos_ = 0;
};

class BitReader {
 public:
  explicit BitReader(const std::vector<std::uint8_t>& in) : in_(in) {}
  std::uint32_t get(std::uint32_t bits) {
    std::uint32_t v = 0;
    for (std::uint32_t i = 0; i < bits; ++i, ++pos_) {
      const std::uint32_t bit = (in_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
      v = (v << 1) | bit;
    }
    return v;
  }

 private:
  const std::vector<std::uint8_t>& in_;
  std::uint64_t pos_ = 0;
};

// Codeword positions 1..19 that carry address bits, address LSB first.
constexpr std::uint32_t kDataPositions[kAddressBits] = {3, 5, 6, 7, 9, 10, 11, 12, 13, 14, 15, 17, 18, 19};

std::uint32_t codeword(std::uint16_t addr, std::uint8_t parity) {
  std::uint32_t cw = 0;
  for (std::uint32_t i = 0; i < kAddressBits; ++i)
    if ((addr >> i) & 1u) cw |= 1u << kDataPositions[i];
  for (std::uint32_t k = 0; k < kParityBits; ++k)
    if ((parity >> k) & 1u) cw |= 1u << (1u << k);
  return cw;
}

std::uint8_t majority(const std::uint8_t* v, std::size_t n) {
  std::uint8_t out = 0;
  for (int b = 0; b < 8; ++b) {
    std::size_t ones = 0;
    for (std::size_t i = 0; i < n; ++i) ones += (v[i] >> b) & 1u;
    if (2 * ones > n) out |= static_cast<std::uint8_t>(1u << b);
  }
  return out;
}

std::uint32_t magnitude(std::int8_t v) { return static_cast<std::uint32_t>(std::abs(static_cast<int>(v))); }

void check_params(const EccParams& p) {
  if (p.elements == 0 || p.elements > (1u << kAddressBits))
    throw std::invalid_argument("ECC pages hold between 1 and 16384 elements");
  if (p.threshold_copies == 0 || p.threshold_copies % 2 == 0)
    throw std::invalid_argument("threshold copies must be odd");
  if (p.value_copies == 0 || p.value_copies % 2 != 0) throw std::invalid_argument("value copies must be even");
}

}  // namespace

std::uint64_t EccParams::packed_bits() const {
  return 8ull * threshold_copies + std::uint64_t{entry_count()} * (kAddressBits + kParityBits + 8ull * value_copies);
}

std::uint8_t hamming14_encode(std::uint16_t addr) {
  if (addr >= (1u << kAddressBits)) throw std::invalid_argument("address exceeds 14 bits");
  const std::uint32_t cw = codeword(addr, 0);
  std::uint8_t parity = 0;
  for (std::uint32_t k = 0; k < kParityBits; ++k) {
    const std::uint32_t p = 1u << k;
    std::uint32_t ones = 0;
    for (std::uint32_t pos = 1; pos <= 19; ++pos)
      if ((pos & p) && ((cw >> pos) & 1u)) ++ones;
    if (ones & 1u) parity |= static_cast<std::uint8_t>(1u << k);
  }
  return parity;
}

HammingResult hamming14_decode(std::uint16_t addr, std::uint8_t parity) {
  std::uint32_t cw = codeword(addr & ((1u << kAddressBits) - 1), parity & 0x1f);
  std::uint32_t syndrome = 0;
  for (std::uint32_t pos = 1; pos <= 19; ++pos)
    if ((cw >> pos) & 1u) syndrome ^= pos;
  HammingResult r;
  if (syndrome > 19) {
    r.addr = addr;
    r.status = HammingStatus::uncorrectable;
    return r;
  }
  if (syndrome != 0) {
    cw ^= 1u << syndrome;
    r.status = HammingStatus::corrected;
  }
  for (std::uint32_t i = 0; i < kAddressBits; ++i)
    if ((cw >> kDataPositions[i]) & 1u) r.addr |= static_cast<std::uint16_t>(1u << i);
  return r;
}

EccBlock encode_page(const WeightPage& page, const EccParams& params) {
  check_params(params);
  if (page.size() != params.elements)
    throw std::invalid_argument("page has " + std::to_string(page.size()) + " elements, expected " +
                                std::to_string(params.elements));
  std::vector<std::uint16_t> idx(page.size());
  std::iota(idx.begin(), idx.end(), 0);
  const std::size_t k = params.entry_count();
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](auto a, auto b) {
    const auto ma = magnitude(page[a]), mb = magnitude(page[b]);
    return ma != mb ? ma > mb : a < b;
  });
  idx.resize(k);
  std::uint32_t threshold = 0;
  if (k > 0) {
    threshold = magnitude(page[idx[0]]);
    for (auto a : idx) threshold = std::min(threshold, magnitude(page[a]));
  }
  std::sort(idx.begin(), idx.end());

  EccBlock b;
  b.threshold_copies.assign(params.threshold_copies, static_cast<std::uint8_t>(threshold));
  for (auto a : idx) {
    EccEntry e;
    e.address = a;
    e.parity = hamming14_encode(a);
    e.copies.assign(params.value_copies, static_cast<std::uint8_t>(page[a]));
    b.entries.push_back(std::move(e));
  }
  return b;
}

std::vector<std::uint8_t> pack(const EccBlock& block, const EccParams& params) {
  check_params(params);
  if (block.threshold_copies.size() != params.threshold_copies || block.entries.size() != params.entry_count())
    throw std::invalid_argument("ECC block does not match its parameters");
  std::vector<std::uint8_t> out;
  out.reserve(params.packed_bytes());
  BitWriter w(out);
  for (auto t : block.threshold_copies) w.put(t, 8);
  for (const auto& e : block.entries) {
    w.put(e.address, kAddressBits);
    w.put(e.parity, kParityBits);
    for (auto c : e.copies) w.put(c, 8);
  }
  return out;
}

EccBlock unpack(const std::vector<std::uint8_t>& bytes, const EccParams& params) {
  check_params(params);
  if (bytes.size() < params.packed_bytes())
    throw std::invalid_argument("packed ECC needs " + std::to_string(params.packed_bytes()) + " bytes");
  BitReader r(bytes);
  EccBlock b;
  for (std::uint32_t i = 0; i < params.threshold_copies; ++i) b.threshold_copies.push_back(static_cast<std::uint8_t>(r.get(8)));
  for (std::uint32_t i = 0; i < params.entry_count(); ++i) {
    EccEntry e;
    e.address = static_cast<std::uint16_t>(r.get(kAddressBits));
    e.parity = static_cast<std::uint8_t>(r.get(kParityBits));
    for (std::uint32_t c = 0; c < params.value_copies; ++c) e.copies.push_back(static_cast<std::uint8_t>(r.get(8)));
    b.entries.push_back(std::move(e));
  }
  return b;
}

std::uint64_t flip_bits(std::uint8_t* data, std::size_t size, double x, std::mt19937_64& rng) {
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("bit error rate must be in [0, 1]");
  const std::uint64_t bits = std::uint64_t{size} * 8;
  if (x == 0.0 || bits == 0) return 0;
  if (x == 1.0) {
    for (std::size_t i = 0; i < size; ++i) data[i] = static_cast<std::uint8_t>(~data[i]);
    return bits;
  }
  std::geometric_distribution<std::uint64_t> skip(x);
  std::uint64_t flipped = 0;
  for (std::uint64_t pos = skip(rng); pos < bits; pos += skip(rng) + 1) {
    data[pos / 8] ^= static_cast<std::uint8_t>(1u << (pos % 8));
    ++flipped;
  }
  return flipped;
}

std::uint64_t inject_errors(WeightPage& page, std::vector<std::uint8_t>& packed, double x, std::mt19937_64& rng) {
  auto n = flip_bits(reinterpret_cast<std::uint8_t*>(page.data()), page.size(), x, rng);
  return n + flip_bits(packed.data(), packed.size(), x, rng);
}

std::uint64_t inject_errors(WeightPage& page, std::vector<std::uint8_t>& packed, const ErrorModel& model) {
  std::mt19937_64 rng(model.seed);
  return inject_errors(page, packed, model.bit_error_rate, rng);
}

WeightPage decode_page(const WeightPage& page, const std::vector<std::uint8_t>& packed, const EccParams& params,
                       DecodeStats* stats) {
  const EccBlock b = unpack(packed, params);
  if (page.size() != params.elements) throw std::invalid_argument("page size does not match the ECC parameters");
  DecodeStats s;
  s.threshold = majority(b.threshold_copies.data(), b.threshold_copies.size());
  WeightPage out = page;
  std::vector<char> is_protected(page.size(), 0);
  std::vector<std::uint8_t> votes(params.value_copies + 1);
  for (const auto& e : b.entries) {
    const auto h = hamming14_decode(e.address, e.parity);
    if (h.status == HammingStatus::uncorrectable || h.addr >= page.size()) {
      ++s.dropped_entries;
      continue;
    }
    if (h.status == HammingStatus::corrected) ++s.corrected_addresses;
    std::copy(e.copies.begin(), e.copies.end(), votes.begin());
    votes.back() = static_cast<std::uint8_t>(page[h.addr]);
    out[h.addr] = static_cast<std::int8_t>(majority(votes.data(), votes.size()));
    is_protected[h.addr] = 1;
    s.protected_addresses.push_back(h.addr);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!is_protected[i] && magnitude(out[i]) > s.threshold) {
      out[i] = 0;
      ++s.truncated_values;
    }
  }
  if (stats) *stats = std::move(s);
  return out;
}

double flip_rate_protected(std::uint32_t n, double x, FlipRateMode mode) {
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("copy count N must be even and positive");
  if (x < 0.0 || x > 1.0) throw std::invalid_argument("bit error rate must be in [0, 1]");
  const std::uint32_t total = n + 1;
  const std::uint32_t need = n / 2 + 1;
  auto choose = [](std::uint32_t a, std::uint32_t k) {
    double c = 1.0;
    for (std::uint32_t i = 1; i <= k; ++i) c = c * (a - k + i) / i;
    return c;
  };
  if (mode == FlipRateMode::approx) return choose(total, need) * std::pow(x, need);
  double sum = 0.0;
  for (std::uint32_t i = need; i <= total; ++i) sum += choose(total, i) * std::pow(x, i) * std::pow(1.0 - x, total - i);
  return sum;
}

double monte_carlo_flip_rate(std::uint32_t n, double x, std::uint64_t trials, std::uint64_t seed) {
  if (n == 0 || n % 2 != 0) throw std::invalid_argument("copy count N must be even and positive");
  if (trials == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution flip(x);
  std::uint64_t wrong = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    std::uint32_t flips = 0;
    for (std::uint32_t c = 0; c <= n; ++c) flips += flip(rng);
    if (2 * flips > n + 1) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(trials);
}

void write_page(std::ostream& os, const WeightPage& page) {
  os.write(reinterpret_cast<const char*>(page.data()), static_cast<std::streamsize>(page.size()));
}

WeightPage read_page(std::istream& is, std::uint32_t elements) {
  WeightPage p(elements);
  if (!is.read(reinterpret_cast<char*>(p.data()), elements)) throw std::runtime_error("short page read");
  return p;
}

void write_ecc(std::ostream& os, const std::vector<std::uint8_t>& packed) {
  os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
}

std::vector<std::uint8_t> read_ecc(std::istream& is, const EccParams& params) {
  std::vector<std::uint8_t> b(params.packed_bytes());
  if (!is.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size())))
    throw std::runtime_error("short ECC read");
  return b;
}

}  // namespace flashsim
