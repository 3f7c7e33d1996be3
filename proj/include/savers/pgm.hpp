#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "savers/data_types.hpp"
#include "savers/errors.hpp"
#include "savers/tensor.hpp"

namespace savers {

namespace detail {

inline void pgm_skip_space(std::istream& in) {
  int c = in.peek();
  while (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '#') {
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else {
      in.get();
    }
    c = in.peek();
  }
}

inline std::int64_t pgm_read_int(std::istream& in, const char* what) {
  pgm_skip_space(in);
  std::int64_t v = 0;
  if (!(in >> v)) {
    throw FormatError(std::string("PGM: cannot read ") + what);
  }
  return v;
}

struct PgmRaster {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t maxval = 0;
  std::vector<std::uint32_t> values;  // row-major
};

inline PgmRaster read_pgm_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open PGM: " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") {
    throw FormatError("not a binary PGM (P5): " + path.string(), 0);
  }
  PgmRaster r;
  r.width = pgm_read_int(in, "width");
  r.height = pgm_read_int(in, "height");
  r.maxval = pgm_read_int(in, "maxval");
  if (r.width < 1 || r.height < 1 || r.maxval < 1 || r.maxval > 65535) {
    throw FormatError("PGM header out of range in " + path.string());
  }
  in.get();  // single whitespace byte after maxval
  const std::int64_t n = r.width * r.height;
  const int bytes_per = r.maxval > 255 ? 2 : 1;
  std::vector<char> raw(static_cast<std::size_t>(n * bytes_per));
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
    throw FormatError("PGM pixel data truncated in " + path.string(),
                      static_cast<long long>(in.gcount()));
  }
  r.values.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    if (bytes_per == 2) {
      const auto hi = static_cast<unsigned char>(raw[static_cast<std::size_t>(2 * i)]);
      const auto lo = static_cast<unsigned char>(raw[static_cast<std::size_t>(2 * i + 1)]);
      r.values[static_cast<std::size_t>(i)] =
          (static_cast<std::uint32_t>(hi) << 8) | lo;
    } else {
      r.values[static_cast<std::size_t>(i)] =
          static_cast<unsigned char>(raw[static_cast<std::size_t>(i)]);
    }
  }
  return r;
}

inline void write_pgm_raster(const std::filesystem::path& path,
                             std::int64_t height, std::int64_t width,
                             const std::vector<std::uint32_t>& values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open PGM for writing: " + path.string());
  out << "P5\n" << width << " " << height << "\n65535\n";
  std::vector<char> raw(values.size() * 2);
  for (std::size_t i = 0; i < values.size(); ++i) {
    raw[2 * i] = static_cast<char>((values[i] >> 8) & 0xff);
    raw[2 * i + 1] = static_cast<char>(values[i] & 0xff);
  }
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("failed writing PGM: " + path.string());
}

}  // namespace detail

// Writes a [1,H,W] amplitude image in [0,1] as 16-bit PGM.
inline void write_pgm(const std::filesystem::path& path, const Tensor& image) {
  const std::int64_t H = image.dim(1);
  const std::int64_t W = image.dim(2);
  std::vector<std::uint32_t> values(static_cast<std::size_t>(H * W));
  for (std::int64_t i = 0; i < H * W; ++i) {
    const double v = std::min(std::max(image[i], 0.0), 1.0);
    values[static_cast<std::size_t>(i)] =
        static_cast<std::uint32_t>(v * 65535.0 + 0.5);
  }
  detail::write_pgm_raster(path, H, W, values);
}

// Reads a PGM as a [1,H,W] image scaled to [0,1].
inline Tensor read_pgm(const std::filesystem::path& path) {
  const detail::PgmRaster r = detail::read_pgm_raster(path);
  Tensor image({1, r.height, r.width});
  const double scale = 1.0 / static_cast<double>(r.maxval);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    image[static_cast<std::int64_t>(i)] = r.values[i] * scale;
  }
  return image;
}

// Label images are stored as PGM with pixel value = class index.
inline void write_label_pgm(const std::filesystem::path& path,
                            const LabelImage& labels) {
  std::vector<std::uint32_t> values(labels.labels.size());
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    values[i] = static_cast<std::uint32_t>(labels.labels[i]);
  }
  detail::write_pgm_raster(path, labels.height, labels.width, values);
}

inline LabelImage read_label_pgm(const std::filesystem::path& path,
                                 std::int64_t num_classes) {
  const detail::PgmRaster r = detail::read_pgm_raster(path);
  LabelImage labels(r.height, r.width, num_classes);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (r.values[i] >= static_cast<std::uint32_t>(num_classes)) {
      throw DataError("label PGM value " + std::to_string(r.values[i]) +
                      " at pixel " + std::to_string(i) + " outside [0," +
                      std::to_string(num_classes) + ") in " + path.string());
    }
    labels.labels[i] = static_cast<std::int32_t>(r.values[i]);
  }
  return labels;
}

// Reads a label PGM, inferring the class count from the data.
inline LabelImage read_label_pgm_auto(const std::filesystem::path& path) {
  const detail::PgmRaster r = detail::read_pgm_raster(path);
  std::uint32_t max_label = 0;
  for (std::uint32_t v : r.values) max_label = std::max(max_label, v);
  LabelImage labels(r.height, r.width,
                    std::max<std::int64_t>(2, max_label + 1));
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    labels.labels[i] = static_cast<std::int32_t>(r.values[i]);
  }
  return labels;
}

// Heat image: values in [0,1] rendered as 16-bit gray.
inline void write_heat_pgm(const std::filesystem::path& path,
                           const Tensor& values, std::int64_t height,
                           std::int64_t width) {
  std::vector<std::uint32_t> raster(static_cast<std::size_t>(height * width));
  for (std::int64_t i = 0; i < height * width; ++i) {
    const double v = std::min(std::max(values[i], 0.0), 1.0);
    raster[static_cast<std::size_t>(i)] =
        static_cast<std::uint32_t>(v * 65535.0 + 0.5);
  }
  detail::write_pgm_raster(path, height, width, raster);
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open PPM for writing: " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("failed writing PPM: " + path.string());
}

}  // namespace savers
