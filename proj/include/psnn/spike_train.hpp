#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "psnn/error.hpp"

namespace psnn {

// Binary raster, rows are neurons and columns are time samples. Time is
// 0-based in code; text formats and CLI output use 1-based samples.
// Entries are fixed after construction; edits produce a new raster.
class SpikeTrain {
 public:
  SpikeTrain() = default;

  SpikeTrain(int num_neurons, int horizon)
      : num_neurons_(num_neurons), horizon_(horizon) {
    require_shape(num_neurons > 0 && horizon > 0, "SpikeTrain: dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(num_neurons) * horizon, 0);
  }

  SpikeTrain(int num_neurons, int horizon, std::vector<std::uint8_t> bits)
      : num_neurons_(num_neurons), horizon_(horizon), bits_(std::move(bits)) {
    require_shape(num_neurons > 0 && horizon > 0, "SpikeTrain: dimensions must be positive");
    require_shape(bits_.size() == static_cast<std::size_t>(num_neurons) * horizon,
                  "SpikeTrain: data size does not match dimensions");
    for (auto b : bits_) require(b <= 1, "SpikeTrain: entries must be 0 or 1");
  }

  int num_neurons() const { return num_neurons_; }
  int horizon() const { return horizon_; }
  std::size_t size() const { return bits_.size(); }

  std::uint8_t operator()(int j, int t) const { return bits_[index(j, t)]; }

  std::uint8_t at(int j, int t) const {
    require_shape(j >= 0 && j < num_neurons_ && t >= 0 && t < horizon_,
                  "SpikeTrain: index out of range");
    return bits_[index(j, t)];
  }

  std::span<const std::uint8_t> row(int j) const {
    return {bits_.data() + static_cast<std::size_t>(j) * horizon_,
            static_cast<std::size_t>(horizon_)};
  }

  std::span<const std::uint8_t> data() const { return bits_; }

  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits_) n += b;
    return n;
  }

  SpikeTrain flipped(int j, int t) const {
    SpikeTrain out = *this;
    auto& b = out.bits_[out.index(j, t)];
    b = static_cast<std::uint8_t>(1 - b);
    return out;
  }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;

 private:
  std::size_t index(int j, int t) const {
    return static_cast<std::size_t>(j) * horizon_ + static_cast<std::size_t>(t);
  }

  int num_neurons_ = 0;
  int horizon_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Signed change to a raster, entries in {-1, 0, +1}, same layout as SpikeTrain.
struct Perturbation {
  int num_neurons = 0;
  int horizon = 0;
  std::vector<std::int8_t> entries;

  Perturbation() = default;
  Perturbation(int n, int t)
      : num_neurons(n), horizon(t), entries(static_cast<std::size_t>(n) * t, 0) {}

  std::int8_t& operator()(int j, int t) {
    return entries[static_cast<std::size_t>(j) * horizon + t];
  }
  std::int8_t operator()(int j, int t) const {
    return entries[static_cast<std::size_t>(j) * horizon + t];
  }

  std::size_t nonzeros() const {
    std::size_t n = 0;
    for (auto e : entries) n += (e != 0);
    return n;
  }

  Perturbation negated() const {
    Perturbation out = *this;
    for (auto& e : out.entries) e = static_cast<std::int8_t>(-e);
    return out;
  }
};

struct PixelImage {
  std::vector<double> intensities;
  int label = 0;
  std::uint64_t source_index = 0;  // record position in its source; keys the encoder stream
};

struct LabeledExample {
  SpikeTrain input;
  int label = 0;
};

inline std::size_t hamming_distance(const SpikeTrain& a, const SpikeTrain& b) {
  require_shape(a.num_neurons() == b.num_neurons() && a.horizon() == b.horizon(),
                "hamming_distance: rasters differ in shape");
  auto da = a.data();
  auto db = b.data();
  std::size_t d = 0;
  for (std::size_t n = 0; n < da.size(); ++n) d += (da[n] != db[n]);
  return d;
}

inline SpikeTrain apply_perturbation(const SpikeTrain& x, const Perturbation& p) {
  require_shape(p.num_neurons == x.num_neurons() && p.horizon == x.horizon() &&
                    p.entries.size() == x.size(),
                "apply_perturbation: perturbation shape does not match raster");
  auto src = x.data();
  std::vector<std::uint8_t> out(src.size());
  for (std::size_t n = 0; n < src.size(); ++n) {
    const int e = p.entries[n];
    require(e >= -1 && e <= 1, "apply_perturbation: entries must be in {-1, 0, +1}");
    const int v = static_cast<int>(src[n]) + e;
    require(v == 0 || v == 1, "apply_perturbation: perturbation leaves {0, 1} for this input");
    out[n] = static_cast<std::uint8_t>(v);
  }
  return SpikeTrain(x.num_neurons(), x.horizon(), std::move(out));
}

// Raster text format: "N T" on the first line, then N lines of T '0'/'1' characters.
inline void write_raster(std::ostream& os, const SpikeTrain& x) {
  os << x.num_neurons() << ' ' << x.horizon() << '\n';
  for (int j = 0; j < x.num_neurons(); ++j) {
    for (auto b : x.row(j)) os << (b ? '1' : '0');
    os << '\n';
  }
}

inline SpikeTrain read_raster(std::istream& is) {
  int n = 0;
  int t = 0;
  if (!(is >> n >> t) || n <= 0 || t <= 0) throw Error("read_raster: bad header");
  std::vector<std::uint8_t> bits;
  bits.reserve(static_cast<std::size_t>(n) * t);
  for (int j = 0; j < n; ++j) {
    std::string line;
    if (!(is >> line) || static_cast<int>(line.size()) != t)
      throw Error("read_raster: row " + std::to_string(j + 1) + " has wrong length");
    for (char ch : line) {
      if (ch != '0' && ch != '1') throw Error("read_raster: unexpected character");
      bits.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
  }
  return SpikeTrain(n, t, std::move(bits));
}

}  // namespace psnn
