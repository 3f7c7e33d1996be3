#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "savers/errors.hpp"
#include "savers/net.hpp"

namespace savers {

// Checkpoint file layout (all integers little-endian):
//   magic "SAVERS1" (7 bytes)
//   u32 config length, config as canonical JSON (sorted keys)
//   u32 parameter count
//   per parameter, in lexicographic name order:
//     u32 name length, name bytes
//     u32 rank, u64 extent per dimension
//     f64 data, row-major
inline constexpr char kCheckpointMagic[] = "SAVERS1";

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}

class CheckpointReader {
 public:
  explicit CheckpointReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(
               static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  double f64(const char* what) {
    const std::uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == bytes_.size(); }
  long long offset() const { return static_cast<long long>(pos_); }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(std::string("checkpoint truncated while reading ") +
                            what,
                        static_cast<long long>(pos_));
    }
  }

  std::string bytes_;
  std::size_t pos_ = 0;
};

inline nlohmann::json config_to_json(const SaversConfig& c) {
  nlohmann::json j;
  j["num_classes"] = c.num_classes;
  j["block_channels"] = {c.block_channels[0], c.block_channels[1],
                         c.block_channels[2], c.block_channels[3]};
  j["mid_channels"] = c.mid_channels;
  j["dropout_rate"] = c.dropout_rate;
  j["input_channels"] = c.input_channels;
  j["coarse_pool_window"] = c.coarse_pool_window;
  return j;
}

inline SaversConfig config_from_json(const nlohmann::json& j) {
  SaversConfig c;
  try {
    c.num_classes = j.at("num_classes").get<std::int64_t>();
    const auto& bc = j.at("block_channels");
    if (!bc.is_array() || bc.size() != 4) {
      throw FormatError("checkpoint config block_channels must have 4 entries");
    }
    for (std::size_t i = 0; i < 4; ++i) {
      c.block_channels[i] = bc[i].get<std::int64_t>();
    }
    c.mid_channels = j.at("mid_channels").get<std::int64_t>();
    c.dropout_rate = j.at("dropout_rate").get<double>();
    c.input_channels = j.at("input_channels").get<std::int64_t>();
    c.coarse_pool_window = j.at("coarse_pool_window").get<std::int64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint config invalid: ") + e.what());
  }
  return c;
}

}  // namespace detail

inline std::string serialize_checkpoint(const SaversModel& model) {
  std::string out;
  out.append(kCheckpointMagic, 7);
  // nlohmann::json keeps keys sorted, so dump() is canonical here.
  const std::string config = detail::config_to_json(model.config).dump();
  detail::put_u32(out, static_cast<std::uint32_t>(config.size()));
  out += config;
  detail::put_u32(out, static_cast<std::uint32_t>(model.params.size()));
  for (const auto& [name, tensor] : model.params) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(tensor.rank()));
    for (std::int64_t d : tensor.shape()) {
      detail::put_u64(out, static_cast<std::uint64_t>(d));
    }
    for (std::int64_t i = 0; i < tensor.size(); ++i) {
      detail::put_f64(out, tensor[i]);
    }
  }
  return out;
}

inline SaversModel deserialize_checkpoint(std::string bytes) {
  detail::CheckpointReader r(std::move(bytes));
  const std::string magic = r.str(7, "magic");
  if (magic != kCheckpointMagic) {
    throw FormatError("bad checkpoint magic '" + magic + "'", 0);
  }
  const std::uint32_t config_len = r.u32("config length");
  const std::string config_text = r.str(config_len, "config");
  nlohmann::json j = nlohmann::json::parse(config_text, nullptr,
                                           /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    throw FormatError("checkpoint config is not valid JSON", 7);
  }
  SaversModel model;
  model.config = detail::config_from_json(j);
  model.config.validate();

  const std::uint32_t count = r.u32("parameter count");
  for (std::uint32_t p = 0; p < count; ++p) {
    const std::uint32_t name_len = r.u32("parameter name length");
    const std::string name = r.str(name_len, "parameter name");
    const std::uint32_t rank = r.u32("parameter rank");
    if (rank == 0 || rank > 8) {
      throw FormatError("parameter '" + name + "' has implausible rank " +
                            std::to_string(rank),
                        r.offset());
    }
    std::vector<std::int64_t> shape(rank);
    std::int64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<std::int64_t>(r.u64("parameter extent"));
      if (shape[i] < 1 || shape[i] > (1 << 24)) {
        throw FormatError("parameter '" + name + "' has implausible extent " +
                              std::to_string(shape[i]),
                          r.offset());
      }
      n *= shape[i];
    }
    std::vector<double> data(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) data[static_cast<std::size_t>(i)] = r.f64("parameter data");
    model.params.emplace(name, Tensor(std::move(shape), std::move(data)));
  }
  if (!r.at_end()) {
    throw FormatError("trailing bytes after checkpoint payload", r.offset());
  }

  // Validate parameters against the embedded config before returning.
  const auto expected = expected_param_shapes(model.config);
  if (expected.size() != model.params.size()) {
    throw FormatError("checkpoint holds " +
                      std::to_string(model.params.size()) +
                      " parameters, config implies " +
                      std::to_string(expected.size()));
  }
  for (const auto& [name, shape] : expected) {
    auto it = model.params.find(name);
    if (it == model.params.end()) {
      throw FormatError("checkpoint missing parameter '" + name + "'");
    }
    if (it->second.shape() != shape) {
      throw FormatError("checkpoint parameter '" + name + "' has shape " +
                        it->second.shape_str() + ", config implies " +
                        shape_to_string(shape));
    }
    if (!it->second.all_finite()) {
      throw FormatError("checkpoint parameter '" + name +
                        "' contains non-finite values");
    }
  }
  return model;
}

inline void save_checkpoint(const SaversModel& model,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  const std::string bytes = serialize_checkpoint(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

inline SaversModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return deserialize_checkpoint(std::move(bytes));
}

}  // namespace savers
