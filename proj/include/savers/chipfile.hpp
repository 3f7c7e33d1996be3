#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "savers/data_types.hpp"
#include "savers/errors.hpp"

namespace savers {

// SAR chip files carry an ASCII key/value header between marker lines,
// followed by big-endian 32-bit float magnitude data (row-major,
// NumberOfRows x NumberOfColumns). A trailing phase block of the same
// size may follow and is ignored. PhoenixHeaderLength gives the byte
// offset of the data block from the start of the file.
inline constexpr const char* kChipHeaderBegin = "[PhoenixHeaderVer";
inline constexpr const char* kChipHeaderEnd = "[EndofPhoenixHeader]";

namespace detail {

inline std::string chip_header_text(std::int64_t header_length,
                                    std::int64_t rows, std::int64_t cols,
                                    double aspect_deg, double depression_deg,
                                    const std::string& target_type) {
  std::ostringstream oss;
  oss.precision(17);
  oss << kChipHeaderBegin << " 0.1]\n";
  oss << "PhoenixHeaderLength= " << header_length << "\n";
  oss << "NumberOfColumns= " << cols << "\n";
  oss << "NumberOfRows= " << rows << "\n";
  oss << "TargetAz= " << aspect_deg << "\n";
  oss << "DesiredDepression= " << depression_deg << "\n";
  if (!target_type.empty()) oss << "TargetType= " << target_type << "\n";
  oss << kChipHeaderEnd << "\n";
  return oss.str();
}

inline double parse_double_field(const std::map<std::string, std::string>& kv,
                                 const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw FormatError("chip header missing required key '" + key + "'");
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    return v;
  } catch (const std::exception&) {
    throw FormatError("chip header key '" + key + "' has non-numeric value '" +
                      it->second + "'");
  }
}

}  // namespace detail

// Parses a chip from in-memory bytes. The image is normalized by the
// per-chip maximum magnitude; class_id is left at 0 for the caller
// (class assignment is a dataset concern).
inline ChipRecord parse_header_chip_bytes(const std::string& bytes,
                                          const std::string& source_name) {
  std::istringstream in(bytes);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind(kChipHeaderBegin, 0) != 0) {
    throw FormatError("chip file '" + source_name +
                          "' does not start with the header marker",
                      0);
  }
  std::map<std::string, std::string> kv;
  bool saw_end = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(kChipHeaderEnd, 0) == 0) {
      saw_end = true;
      break;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto trim = [](std::string& s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.pop_back();
    };
    trim(key);
    trim(value);
    kv[key] = value;
  }
  if (!saw_end) {
    throw FormatError("chip file '" + source_name + "' missing end marker '" +
                      kChipHeaderEnd + "'");
  }

  const auto rows =
      static_cast<std::int64_t>(detail::parse_double_field(kv, "NumberOfRows"));
  const auto cols = static_cast<std::int64_t>(
      detail::parse_double_field(kv, "NumberOfColumns"));
  const auto header_len = static_cast<std::int64_t>(
      detail::parse_double_field(kv, "PhoenixHeaderLength"));
  const double aspect = detail::parse_double_field(kv, "TargetAz");
  const double depression =
      detail::parse_double_field(kv, "DesiredDepression");
  if (rows < 1 || cols < 1) {
    throw FormatError("chip file '" + source_name +
                      "' declares non-positive extents");
  }
  if (header_len < 0 ||
      static_cast<std::size_t>(header_len) > bytes.size()) {
    throw FormatError("chip file '" + source_name +
                          "' declares header length past end of file",
                      static_cast<long long>(bytes.size()));
  }

  const std::int64_t n = rows * cols;
  const std::size_t need = static_cast<std::size_t>(n) * 4;
  if (static_cast<std::size_t>(header_len) + need > bytes.size()) {
    throw FormatError(
        "chip file '" + source_name + "' magnitude data truncated",
        static_cast<long long>(bytes.size()));
  }
  ChipRecord chip;
  chip.image = Tensor({1, rows, cols});
  chip.aspect_deg = aspect;
  chip.depression_deg = depression;
  chip.source_name = source_name;
  const auto* p =
      reinterpret_cast<const unsigned char*>(bytes.data()) + header_len;
  double max_mag = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const std::uint32_t be = (static_cast<std::uint32_t>(p[4 * i]) << 24) |
                             (static_cast<std::uint32_t>(p[4 * i + 1]) << 16) |
                             (static_cast<std::uint32_t>(p[4 * i + 2]) << 8) |
                             static_cast<std::uint32_t>(p[4 * i + 3]);
    float f;
    std::memcpy(&f, &be, sizeof(f));
    chip.image[i] = static_cast<double>(f);
    if (chip.image[i] > max_mag) max_mag = chip.image[i];
  }
  if (max_mag > 0.0) {
    for (std::int64_t i = 0; i < n; ++i) chip.image[i] /= max_mag;
  }
  return chip;
}

inline ChipRecord parse_header_chip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open chip file: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return parse_header_chip_bytes(bytes, path.filename().string());
}

// Serializes a chip; magnitudes are stored as big-endian 32-bit floats.
inline std::string write_header_chip_bytes(const ChipRecord& chip,
                                           const std::string& target_type = "") {
  const std::int64_t rows = chip.image.dim(1);
  const std::int64_t cols = chip.image.dim(2);
  // The header length counts itself; iterate until stable.
  std::int64_t header_length = 0;
  std::string header;
  bool stable = false;
  for (int pass = 0; pass < 6 && !stable; ++pass) {
    header = detail::chip_header_text(header_length, rows, cols,
                                      chip.aspect_deg, chip.depression_deg,
                                      target_type);
    const auto actual = static_cast<std::int64_t>(header.size());
    stable = actual == header_length;
    header_length = actual;
  }
  if (!stable) {
    throw FormatError("chip header length failed to stabilize");
  }
  std::string out = header;
  out.reserve(out.size() + static_cast<std::size_t>(rows * cols) * 4);
  for (std::int64_t i = 0; i < rows * cols; ++i) {
    const auto f = static_cast<float>(chip.image[i]);
    std::uint32_t be;
    std::memcpy(&be, &f, sizeof(be));
    out.push_back(static_cast<char>((be >> 24) & 0xff));
    out.push_back(static_cast<char>((be >> 16) & 0xff));
    out.push_back(static_cast<char>((be >> 8) & 0xff));
    out.push_back(static_cast<char>(be & 0xff));
  }
  return out;
}

inline void write_header_chip(const std::filesystem::path& path,
                              const ChipRecord& chip,
                              const std::string& target_type = "") {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open chip file for writing: " + path.string());
  const std::string bytes = write_header_chip_bytes(chip, target_type);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing chip file: " + path.string());
}

}  // namespace savers
