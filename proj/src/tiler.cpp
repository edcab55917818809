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

#include "flashsim/tiler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace flashsim {

namespace {

std::uint64_t weight_bytes(std::uint64_t elements, double bytes_per_element) {
  return static_cast<std::uint64_t>(std::ceil(static_cast<double>(elements) * bytes_per_element));
}

}  // namespace

std::string to_string(const TileShape& shape) {
  return std::to_string(shape.h_req) + "x" + std::to_string(shape.w_req);
}

TileShape parse_tile_shape(const std::string& text) {
  auto x = text.find_first_of("xX");
  if (x == std::string::npos) throw std::invalid_argument("tile shape must look like HxW: '" + text + "'");
  try {
    std::size_t used = 0;
    TileShape s;
    s.h_req = std::stoull(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument("");
    auto rest = text.substr(x + 1);
    s.w_req = std::stoull(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("");
    return s;
  } catch (const std::exception&) {
    throw std::invalid_argument("tile shape must look like HxW: '" + text + "'");
  }
}

bool is_feasible(const TileShape& s, const SystemConfig& c) {
  const std::uint64_t ccore = c.flash.ccore_num();
  const std::uint64_t ch = c.flash.channel_num;
  if (s.h_req == 0 || s.w_req == 0) return false;
  if (s.h_req % ccore != 0 || s.w_req % ch != 0) return false;
  if ((s.h_req / ccore) * (s.w_req / ch) != c.elements_per_page()) return false;
  const std::uint64_t ab = c.quant.activation_bytes();
  return (s.w_req / ch + s.h_req / ccore) * ab <= c.host.input_output_buffer;
}

void check_feasible(const TileShape& s, const SystemConfig& c) {
  if (!is_feasible(s, c)) {
    throw std::invalid_argument("tile " + to_string(s) + " does not split into one page per core (" +
                                std::to_string(c.flash.channel_num) + " channels x " +
                                std::to_string(c.flash.ccore_num()) + " cores, " +
                                std::to_string(c.elements_per_page()) + " elements per page, " +
                                std::to_string(c.host.input_output_buffer) + " B core buffer)");
  }
}

std::vector<TileShape> feasible_shapes(const SystemConfig& c) {
  const std::uint64_t e = c.elements_per_page();
  std::vector<TileShape> out;
  for (std::uint64_t a = e; a >= 1; --a) {  // a = rows per atomic tile
    if (e % a != 0) continue;
    TileShape s{a * c.flash.ccore_num(), (e / a) * c.flash.channel_num};
    if (is_feasible(s, c)) out.push_back(s);
  }
  return out;
}

std::uint64_t trans_elements(const TileShape& s, const SystemConfig& c) {
  return s.w_req + std::uint64_t{c.flash.channel_num} * s.h_req;
}

TileShape optimal_tile_shape(const SystemConfig& c) {
  TileShape best;
  std::uint64_t best_trans = std::numeric_limits<std::uint64_t>::max();
  for (const auto& s : feasible_shapes(c)) {  // increasing w_req, so strict < keeps the smaller w
    auto t = trans_elements(s, c);
    if (t < best_trans) {
      best_trans = t;
      best = s;
    }
  }
  if (best.h_req == 0) throw InfeasibleError("no tile shape fits one page per core within the core buffer");
  return best;
}

TileShape optimal_tile_shape_for(const SystemConfig& c, std::uint64_t rows, std::uint64_t cols) {
  std::optional<TileShape> best;
  std::uint64_t best_trans = std::numeric_limits<std::uint64_t>::max();
  for (const auto& s : feasible_shapes(c)) {
    if (s.h_req > rows || s.w_req > cols) continue;
    auto t = trans_elements(s, c);
    if (t < best_trans) {
      best_trans = t;
      best = s;
    }
  }
  return best ? *best : optimal_tile_shape(c);
}

std::uint64_t trans_volume(const TileShape& s, const SystemConfig& c, TransScheme scheme) {
  const std::uint64_t ab = c.quant.activation_bytes();
  const std::uint64_t inputs =
      scheme == TransScheme::broadcast ? s.w_req : std::uint64_t{c.flash.ccore_num()} * s.w_req;
  return (inputs + std::uint64_t{c.flash.channel_num} * s.h_req) * ab;
}

AnalyticRates analytic_rates(const TileShape& s, const SystemConfig& c) {
  check_feasible(s, c);
  const double ab = c.quant.activation_bytes();
  const double ch = c.flash.channel_num;
  const double bw = c.timing.bw_channel();
  const double tr = c.timing.t_read;
  AnalyticRates r;
  r.t_rc = tr + s.w_req * ab / (ch * bw);
  r.rate_rc = (s.h_req * ab + s.w_req * ab / ch) / (tr * bw);
  if (r.rate_rc >= 1.0) {
    throw InfeasibleError("tile " + to_string(s) + " saturates the channel with read-compute traffic (rate_rc=" +
                          std::to_string(r.rate_rc) + ")");
  }
  r.t_r = static_cast<double>(c.flash.page_size) / ((1.0 - r.rate_rc) * bw);
  r.trans = static_cast<double>(trans_volume(s, c, TransScheme::broadcast));
  r.trans_alt = static_cast<double>(trans_volume(s, c, TransScheme::no_broadcast));
  return r;
}

double flash_fraction_from_alpha(double alpha, std::uint32_t ccore_num) {
  const double denom = alpha * ccore_num + (1.0 - alpha);
  return denom > 0 ? alpha * ccore_num / denom : 0.0;
}

WorkloadSplit compute_alpha(const AnalyticRates& r, std::uint32_t ccore_num) {
  WorkloadSplit w;
  w.alpha = r.t_r / (r.t_r + r.t_rc);
  w.flash_byte_fraction = flash_fraction_from_alpha(w.alpha, ccore_num);
  return w;
}

PartitionInputs partition_inputs(const SystemConfig& c, const TileShape& shape,
                                 std::optional<double> flash_fraction) {
  const auto rates = analytic_rates(shape, c);
  const auto split = compute_alpha(rates, c.flash.ccore_num());
  PartitionInputs in;
  in.shape = shape;
  in.alpha = split.alpha;
  in.flash_fraction = split.flash_byte_fraction;
  if (flash_fraction) {
    const double f = std::clamp(*flash_fraction, 0.0, 1.0);
    const double k = c.flash.ccore_num();
    in.flash_fraction = f;
    in.alpha = f / (k - f * (k - 1.0));  // inverse of flash_fraction_from_alpha
  }
  in.tile_round_us = rates.t_rc;
  in.npu_stream_bw = c.flash.channel_num * (1.0 - rates.rate_rc) * c.timing.bw_channel();
  in.page_size = c.flash.page_size;
  in.weight_bytes_per_element = c.quant.weight_bytes_per_element();
  return in;
}

TilingPlan partition_matrix(std::uint64_t h_weight, std::uint64_t w_weight, const PartitionInputs& in) {
  if (h_weight == 0 || w_weight == 0) throw std::invalid_argument("matrix dimensions must be positive");
  if (in.shape.h_req == 0 || in.shape.w_req == 0) throw std::invalid_argument("tile shape must be positive");
  const auto& s = in.shape;
  const double wb = in.weight_bytes_per_element;

  TilingPlan plan;
  plan.shape = s;
  plan.h_weight = h_weight;
  plan.w_weight = w_weight;
  plan.alpha = in.alpha;
  plan.target_fraction = std::clamp(in.flash_fraction, 0.0, 1.0);
  plan.slot_rows = static_cast<std::uint32_t>((h_weight + s.h_req - 1) / s.h_req);
  plan.slot_cols = static_cast<std::uint32_t>((w_weight + s.w_req - 1) / s.w_req);
  plan.matrix_bytes = weight_bytes(h_weight * w_weight, wb);

  std::vector<FlashTile> full, edge;
  for (std::uint32_t r = 0; r < plan.slot_rows; ++r) {
    for (std::uint32_t col = 0; col < plan.slot_cols; ++col) {
      FlashTile t;
      t.slot = r * plan.slot_cols + col;
      t.row = r;
      t.col = col;
      t.real_rows = std::min<std::uint64_t>(s.h_req, h_weight - r * s.h_req);
      t.real_cols = std::min<std::uint64_t>(s.w_req, w_weight - col * s.w_req);
      (t.real_rows == s.h_req && t.real_cols == s.w_req ? full : edge).push_back(t);
    }
  }
  std::vector<FlashTile> order = std::move(full);
  order.insert(order.end(), edge.begin(), edge.end());

  std::vector<std::uint64_t> cum(order.size() + 1, 0);
  for (std::size_t i = 0; i < order.size(); ++i)
    cum[i + 1] = cum[i] + weight_bytes(order[i].real_rows * order[i].real_cols, wb);

  std::size_t n = 0;
  if (plan.target_fraction >= 1.0) {
    n = order.size();
  } else if (plan.target_fraction > 0.0) {
    const double target = plan.target_fraction * static_cast<double>(plan.matrix_bytes);
    while (n < order.size() && static_cast<double>(cum[n + 1]) <= target * (1.0 + 1e-12)) ++n;
    if (n < order.size() && in.tile_round_us > 0 && in.npu_stream_bw > 0) {
      auto cost = [&](std::size_t k) {
        const double flash = k * in.tile_round_us;
        const double npu = static_cast<double>(plan.matrix_bytes - cum[k]) / in.npu_stream_bw;
        return std::max(flash, npu);
      };
      if (cost(n + 1) < cost(n)) ++n;
    }
  }

  plan.flash_tiles.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));
  std::sort(plan.flash_tiles.begin(), plan.flash_tiles.end(),
            [](const FlashTile& a, const FlashTile& b) { return a.slot < b.slot; });
  plan.flash_bytes = cum[n];
  plan.npu_bytes = plan.matrix_bytes - plan.flash_bytes;
  const std::uint64_t tile_bytes = weight_bytes(s.elements(), wb);
  plan.padded_bytes = n * tile_bytes - plan.flash_bytes;
  plan.npu_pages = (plan.npu_bytes + in.page_size - 1) / in.page_size;
  plan.flash_byte_fraction =
      plan.matrix_bytes ? static_cast<double>(plan.flash_bytes) / static_cast<double>(plan.matrix_bytes) : 0.0;
  return plan;
}

std::vector<AtomicTile> atomic_tiles(const FlashTile& tile, const TileShape& shape, const SystemConfig& c) {
  const std::uint32_t ch = c.flash.channel_num;
  const std::uint32_t ccore = c.flash.ccore_num();
  const std::uint64_t ah = shape.h_req / ccore;
  const std::uint64_t aw = shape.w_req / ch;
  std::vector<AtomicTile> out;
  out.reserve(std::size_t{ch} * ccore);
  for (std::uint32_t chan = 0; chan < ch; ++chan) {
    for (std::uint32_t j = 0; j < ccore; ++j) {
      AtomicTile a;
      a.channel = chan;
      a.core_in_channel = j;
      a.core = chan * ccore + j;
      a.row0 = tile.row * shape.h_req + j * ah;
      a.col0 = tile.col * shape.w_req + chan * aw;
      const std::uint64_t rows = tile.real_rows > j * ah ? std::min(ah, tile.real_rows - j * ah) : 0;
      const std::uint64_t cols = tile.real_cols > chan * aw ? std::min(aw, tile.real_cols - chan * aw) : 0;
      a.real_elements = rows * cols;
      out.push_back(a);
    }
  }
  return out;
}

std::string describe_plan(const TilingPlan& plan, const SystemConfig& c, bool with_atoms) {
  std::ostringstream os;
  os << "matrix " << plan.h_weight << "x" << plan.w_weight << "\n";
  os << "tile " << to_string(plan.shape) << "\n";
  os << "alpha " << plan.alpha << "\n";
  os << "target_fraction " << plan.target_fraction << "\n";
  os << "flash_byte_fraction " << plan.flash_byte_fraction << "\n";
  os << "slots " << plan.slot_rows << "x" << plan.slot_cols << "\n";
  os << "flash_tiles " << plan.flash_tiles.size() << "\n";
  os << "flash_bytes " << plan.flash_bytes << "\n";
  os << "npu_bytes " << plan.npu_bytes << "\n";
  os << "padded_bytes " << plan.padded_bytes << "\n";
  os << "npu_pages " << plan.npu_pages << "\n";
  for (const auto& t : plan.flash_tiles) {
    os << "tile slot=" << t.slot << " row=" << t.row << " col=" << t.col << " real=" << t.real_rows << "x"
       << t.real_cols << "\n";
    if (!with_atoms) continue;
    for (const auto& a : atomic_tiles(t, plan.shape, c)) {
      os << "  atom channel=" << a.channel << " core=" << a.core << " broadcast_group=" << a.channel
         << " origin=" << a.row0 << "," << a.col0 << " real_elements=" << a.real_elements << "\n";
    }
  }
  return os.str();
}

}  // namespace flashsim
