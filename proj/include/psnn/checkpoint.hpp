#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "psnn/error.hpp"
#include "psnn/model.hpp"

namespace psnn {

// Checkpoint layout, all integers little-endian:
//   magic      8 bytes  "PSNNCKPT"
//   version    u32      1
//   N_X N_Y T  u32 x3
//   K_syn K_fb u32 x2
//   span_syn span_fb  u32 x2
//   basis tag  u32      1 = raised cosine, linear time axis
//   activation u32      1 = sigmoid
//   decoding   u32      0 = rate, 1 = first-to-spike
//   payload    f64 LE   synaptic (i, j, k), feedback (i, k), bias (i)
inline constexpr std::array<char, 8> kCheckpointMagic{'P', 'S', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kBasisRaisedCosine = 1;
inline constexpr std::uint32_t kActivationSigmoid = 1;

struct Checkpoint {
  ModelParams params;
  Rule rule = Rule::rate;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), 4)) throw Error("checkpoint: truncated header");
  std::uint32_t v = 0;
  for (int b = 3; b >= 0; --b) v = (v << 8) | buf[b];
  return v;
}

inline double get_f64(std::istream& is) {
  std::array<unsigned char, 8> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), 8)) throw Error("checkpoint: truncated payload");
  std::uint64_t v = 0;
  for (int b = 7; b >= 0; --b) v = (v << 8) | buf[b];
  return std::bit_cast<double>(v);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const ModelParams& params, Rule rule) {
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  detail::put_u32(os, kCheckpointVersion);
  detail::put_u32(os, static_cast<std::uint32_t>(params.dims.num_inputs));
  detail::put_u32(os, static_cast<std::uint32_t>(params.dims.num_outputs));
  detail::put_u32(os, static_cast<std::uint32_t>(params.dims.horizon));
  const auto& b = params.basis.config;
  detail::put_u32(os, static_cast<std::uint32_t>(b.synaptic_bases));
  detail::put_u32(os, static_cast<std::uint32_t>(b.feedback_bases));
  detail::put_u32(os, static_cast<std::uint32_t>(b.synaptic_span));
  detail::put_u32(os, static_cast<std::uint32_t>(b.feedback_span));
  detail::put_u32(os, kBasisRaisedCosine);
  detail::put_u32(os, kActivationSigmoid);
  detail::put_u32(os, rule == Rule::rate ? 0u : 1u);
  const auto n = params.weights.size();
  for (std::size_t k = 0; k < n; ++k) detail::put_f64(os, params.weights.flat(k));
  if (!os) throw Error("checkpoint: write failed");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
    throw Error("checkpoint: bad magic");
  const auto version = detail::get_u32(is);
  if (version != kCheckpointVersion) throw Error("checkpoint: unsupported version " + std::to_string(version));
  ModelDims dims;
  dims.num_inputs = static_cast<int>(detail::get_u32(is));
  dims.num_outputs = static_cast<int>(detail::get_u32(is));
  dims.horizon = static_cast<int>(detail::get_u32(is));
  BasisConfig basis;
  basis.synaptic_bases = static_cast<int>(detail::get_u32(is));
  basis.feedback_bases = static_cast<int>(detail::get_u32(is));
  basis.synaptic_span = static_cast<int>(detail::get_u32(is));
  basis.feedback_span = static_cast<int>(detail::get_u32(is));
  if (detail::get_u32(is) != kBasisRaisedCosine) throw Error("checkpoint: unknown basis tag");
  if (detail::get_u32(is) != kActivationSigmoid) throw Error("checkpoint: unknown activation tag");
  const auto rule_tag = detail::get_u32(is);
  if (rule_tag > 1) throw Error("checkpoint: unknown decoding tag");
  Checkpoint ck{ModelParams(dims, basis), rule_tag == 0 ? Rule::rate : Rule::first_to_spike};
  const auto n = ck.params.weights.size();
  for (std::size_t k = 0; k < n; ++k) ck.params.weights.flat(k) = detail::get_f64(is);
  if (is.peek() != std::char_traits<char>::eof()) throw Error("checkpoint: trailing bytes");
  return ck;
}

inline void save_checkpoint(const std::string& path, const ModelParams& params, Rule rule) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("checkpoint: cannot open " + path + " for writing");
  write_checkpoint(os, params, rule);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open " + path);
  return read_checkpoint(is);
}

}  // namespace psnn
