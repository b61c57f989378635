#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "psnn/encoding.hpp"
#include "psnn/error.hpp"
#include "psnn/spike_train.hpp"

namespace psnn {

class MissingFileError : public Error {
 public:
  using Error::Error;
};

class MalformedRecordError : public Error {
 public:
  using Error::Error;
};

class UnknownLabelError : public Error {
 public:
  using Error::Error;
};

inline constexpr int kUspsPixels = 256;

// USPS record format, one sample per line:
//   <label> <v_1> ... <v_256>
// label is 1..10 with 10 standing for digit 0; values lie in [-1, 1] and map to
// (v + 1) / 2. Features may also be written sparsely as "index:value" with
// 1-based indices (the libsvm distribution); omitted entries are 0 before
// mapping. Blank lines and lines starting with '#' are ignored.
struct DatasetConfig {
  std::string train_path;
  std::string test_path;
  std::vector<int> class_filter{1, 5, 7, 9};
};

struct UspsSplit {
  std::vector<PixelImage> train;
  std::vector<PixelImage> test;
  std::vector<int> digits;  // digits[label] is the source digit of a contiguous label
};

namespace detail {

inline double parse_double(std::string_view tok, const std::string& where) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    throw MalformedRecordError(where + ": cannot parse '" + std::string(tok) + "'");
  return v;
}

inline double normalize_usps_value(double v, const std::string& where) {
  constexpr double slack = 1e-6;
  if (!(v >= -1.0 - slack && v <= 1.0 + slack)) throw MalformedRecordError(where + ": feature outside [-1, 1]");
  return std::clamp((v + 1.0) / 2.0, 0.0, 1.0);
}

inline int usps_digit(double label, const std::string& where) {
  const double r = std::round(label);
  if (r != label || r < 1 || r > 10) throw UnknownLabelError(where + ": unknown label");
  return static_cast<int>(r) % 10;
}

}  // namespace detail

// One parsed record: digit in 0..9 and 256 intensities in [0, 1].
inline std::vector<PixelImage> read_usps_records(std::istream& is, const std::string& name) {
  std::vector<PixelImage> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    PixelImage img;
    img.source_index = out.size();
    img.label = detail::usps_digit(detail::parse_double(tok, where), where);
    img.intensities.assign(kUspsPixels, 0.5);
    int dense = 0;
    bool sparse = false;
    while (ss >> tok) {
      const auto colon = tok.find(':');
      if (colon != std::string::npos) {
        sparse = true;
        const double idx = detail::parse_double(std::string_view(tok).substr(0, colon), where);
        if (idx != std::round(idx) || idx < 1 || idx > kUspsPixels)
          throw MalformedRecordError(where + ": feature index out of range");
        img.intensities[static_cast<std::size_t>(idx) - 1] =
            detail::normalize_usps_value(detail::parse_double(std::string_view(tok).substr(colon + 1), where), where);
      } else {
        if (dense >= kUspsPixels) throw MalformedRecordError(where + ": more than 256 features");
        img.intensities[static_cast<std::size_t>(dense++)] =
            detail::normalize_usps_value(detail::parse_double(tok, where), where);
      }
    }
    if (sparse && dense > 0) throw MalformedRecordError(where + ": mixes dense and sparse features");
    if (!sparse && dense != kUspsPixels)
      throw MalformedRecordError(where + ": expected 256 features, found " + std::to_string(dense));
    out.push_back(std::move(img));
  }
  return out;
}

inline std::vector<PixelImage> read_usps_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingFileError("cannot open dataset file " + path);
  return read_usps_records(is, path);
}

// Keeps the digits in class_filter and relabels them 0..K-1 in ascending digit order.
inline std::vector<PixelImage> filter_classes(const std::vector<PixelImage>& images, const std::vector<int>& digits) {
  std::vector<PixelImage> out;
  for (const auto& img : images) {
    const auto it = std::find(digits.begin(), digits.end(), img.label);
    if (it == digits.end()) continue;
    PixelImage copy = img;
    copy.label = static_cast<int>(it - digits.begin());
    out.push_back(std::move(copy));
  }
  return out;
}

inline std::vector<int> sorted_class_filter(const std::vector<int>& filter) {
  require(!filter.empty(), "class_filter must not be empty");
  std::set<int> s(filter.begin(), filter.end());
  for (int d : s)
    if (d < 0 || d > 9) throw ConfigError("class_filter entries must be digits 0..9");
  return {s.begin(), s.end()};
}

inline UspsSplit load_usps(const DatasetConfig& cfg) {
  UspsSplit split;
  split.digits = sorted_class_filter(cfg.class_filter);
  split.train = filter_classes(read_usps_file(cfg.train_path), split.digits);
  split.test = filter_classes(read_usps_file(cfg.test_path), split.digits);
  return split;
}

// Spike-encodes images; each image uses id (id_offset + source_index) for its
// random stream, so encoding does not depend on filtering or order.
inline std::vector<LabeledExample> encode_all(const std::vector<PixelImage>& images, const EncoderConfig& cfg,
                                              std::uint64_t id_offset) {
  std::vector<LabeledExample> out;
  out.reserve(images.size());
  for (std::size_t k = 0; k < images.size(); ++k)
    out.push_back({encode(images[k], cfg, id_offset + images[k].source_index), images[k].label});
  return out;
}

}  // namespace psnn
