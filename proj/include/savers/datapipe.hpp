#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "savers/chipfile.hpp"
#include "savers/data_types.hpp"
#include "savers/errors.hpp"
#include "savers/pgm.hpp"
#include "savers/rng.hpp"
#include "savers/segment.hpp"

namespace savers {

// ---------------------------------------------------------------------------
// Label-image creation
// ---------------------------------------------------------------------------

// Automatic annotation policy for real chips: threshold at a fraction
// of the chip maximum, close small gaps, keep the largest component.
// Synthetic chips bypass this entirely (their masks are exact).
struct LabelPolicy {
  double threshold = 0.4;
  std::int64_t closing_radius = 2;
};

namespace detail {

inline std::vector<char> binary_dilate(const std::vector<char>& mask,
                                       std::int64_t H, std::int64_t W,
                                       std::int64_t radius) {
  std::vector<char> out(mask.size(), 0);
  const std::int64_t r2 = radius * radius;
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      if (!mask[static_cast<std::size_t>(y * W + x)]) continue;
      for (std::int64_t dy = -radius; dy <= radius; ++dy) {
        for (std::int64_t dx = -radius; dx <= radius; ++dx) {
          if (dy * dy + dx * dx > r2) continue;
          const std::int64_t ny = y + dy;
          const std::int64_t nx = x + dx;
          if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          out[static_cast<std::size_t>(ny * W + nx)] = 1;
        }
      }
    }
  }
  return out;
}

inline std::vector<char> binary_erode(const std::vector<char>& mask,
                                      std::int64_t H, std::int64_t W,
                                      std::int64_t radius) {
  std::vector<char> out(mask.size(), 0);
  const std::int64_t r2 = radius * radius;
  for (std::int64_t y = 0; y < H; ++y) {
    for (std::int64_t x = 0; x < W; ++x) {
      bool keep = true;
      for (std::int64_t dy = -radius; keep && dy <= radius; ++dy) {
        for (std::int64_t dx = -radius; keep && dx <= radius; ++dx) {
          if (dy * dy + dx * dx > r2) continue;
          const std::int64_t ny = y + dy;
          const std::int64_t nx = x + dx;
          // Pixels outside the image are treated as background.
          if (ny < 0 || ny >= H || nx < 0 || nx >= W ||
              !mask[static_cast<std::size_t>(ny * W + nx)]) {
            keep = false;
          }
        }
      }
      out[static_cast<std::size_t>(y * W + x)] = keep ? 1 : 0;
    }
  }
  return out;
}

// Largest 8-connected component of a binary mask (first in scan order
// on ties).
inline std::vector<char> largest_component(const std::vector<char>& mask,
                                           std::int64_t H, std::int64_t W) {
  std::vector<std::int32_t> comp(mask.size(), -1);
  std::int32_t next = 0;
  std::int64_t best_size = 0;
  std::int32_t best_comp = -1;
  std::vector<std::int64_t> stack;
  for (std::int64_t start = 0; start < static_cast<std::int64_t>(mask.size());
       ++start) {
    if (!mask[static_cast<std::size_t>(start)] ||
        comp[static_cast<std::size_t>(start)] >= 0) {
      continue;
    }
    const std::int32_t id = next++;
    std::int64_t size = 0;
    stack.push_back(start);
    comp[static_cast<std::size_t>(start)] = id;
    while (!stack.empty()) {
      const std::int64_t idx = stack.back();
      stack.pop_back();
      ++size;
      const std::int64_t y = idx / W;
      const std::int64_t x = idx % W;
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const std::int64_t ny = y + dy;
          const std::int64_t nx = x + dx;
          if (ny < 0 || ny >= H || nx < 0 || nx >= W) continue;
          const std::int64_t nidx = ny * W + nx;
          if (mask[static_cast<std::size_t>(nidx)] &&
              comp[static_cast<std::size_t>(nidx)] < 0) {
            comp[static_cast<std::size_t>(nidx)] = id;
            stack.push_back(nidx);
          }
        }
      }
    }
    if (size > best_size) {
      best_size = size;
      best_comp = id;
    }
  }
  std::vector<char> out(mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    out[i] = comp[i] == best_comp ? 1 : 0;
  }
  return out;
}

}  // namespace detail

inline LabelImage make_label_image(const ChipRecord& chip,
                                   const LabelPolicy& policy,
                                   std::int64_t num_classes) {
  const std::int64_t H = chip.image.dim(1);
  const std::int64_t W = chip.image.dim(2);
  LabelImage labels(H, W, num_classes);
  if (chip.class_id == 0) return labels;  // clutter: all background
  if (chip.class_id < 0 || chip.class_id >= num_classes) {
    throw DataError("chip '" + chip.source_name + "' class " +
                    std::to_string(chip.class_id) + " outside [0," +
                    std::to_string(num_classes) + ")");
  }
  double maxv = 0.0;
  for (std::int64_t i = 0; i < H * W; ++i) maxv = std::max(maxv, chip.image[i]);
  const double cut = policy.threshold * maxv;
  std::vector<char> mask(static_cast<std::size_t>(H * W), 0);
  std::int64_t seeded = 0;
  for (std::int64_t i = 0; i < H * W; ++i) {
    if (chip.image[i] >= cut && chip.image[i] > 0.0) {
      mask[static_cast<std::size_t>(i)] = 1;
      ++seeded;
    }
  }
  if (seeded == 0) {
    throw EmptyMaskError("no pixel of chip '" + chip.source_name +
                         "' reaches threshold " + std::to_string(cut));
  }
  if (policy.closing_radius > 0) {
    mask = detail::binary_dilate(mask, H, W, policy.closing_radius);
    mask = detail::binary_erode(mask, H, W, policy.closing_radius);
  }
  mask = detail::largest_component(mask, H, W);
  for (std::int64_t i = 0; i < H * W; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      labels.labels[static_cast<std::size_t>(i)] =
          static_cast<std::int32_t>(chip.class_id);
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Synthetic chips
// ---------------------------------------------------------------------------

enum class TargetShape { kRectangle, kLShape, kTShape, kDisc, kBar };

inline TargetShape shape_for_class(std::int64_t class_id) {
  static const TargetShape shapes[] = {TargetShape::kRectangle,
                                       TargetShape::kLShape,
                                       TargetShape::kTShape, TargetShape::kDisc,
                                       TargetShape::kBar};
  return shapes[(class_id - 1) % 5];
}

inline std::string shape_class_name(std::int64_t class_id) {
  static const char* names[] = {"Rect", "LShape", "TShape", "Disc", "Bar"};
  std::string name = names[(class_id - 1) % 5];
  if (class_id > 5) name += std::to_string((class_id - 1) / 5 + 1);
  return name;
}

// Manifest-ordered class table for k synthetic target classes:
// Background first, then the shape names lexicographically, matching
// how build_manifest orders a scanned tree.
inline std::vector<std::string> synthetic_class_names(std::int64_t k) {
  std::vector<std::string> names;
  for (std::int64_t c = 1; c <= k; ++c) names.push_back(shape_class_name(c));
  std::sort(names.begin(), names.end());
  names.insert(names.begin(), "Background");
  return names;
}

// Inverse of shape_class_name (numeric suffixes ignored).
inline TargetShape shape_for_name(const std::string& name) {
  if (name.rfind("Rect", 0) == 0) return TargetShape::kRectangle;
  if (name.rfind("LShape", 0) == 0) return TargetShape::kLShape;
  if (name.rfind("TShape", 0) == 0) return TargetShape::kTShape;
  if (name.rfind("Disc", 0) == 0) return TargetShape::kDisc;
  if (name.rfind("Bar", 0) == 0) return TargetShape::kBar;
  throw ConfigError("unknown synthetic class name '" + name + "'");
}

// Generator parameters for one chip. class_id 0 produces clutter only.
struct ChipTemplate {
  std::int64_t class_id = 0;
  std::int64_t num_classes = 2;
  double background_mean = 0.1;
  double footprint_scale = 1.0;      // polygon size relative to the default
  std::optional<TargetShape> shape;  // default: shape_for_class(class_id)
};

namespace detail {

inline std::vector<char> target_footprint(TargetShape shape, std::int64_t size,
                                          std::int64_t cy, std::int64_t cx,
                                          std::int64_t class_id,
                                          double scale = 1.0) {
  std::vector<char> mask(static_cast<std::size_t>(size * size), 0);
  // Sized so that a default target fills roughly a fifth of the chip
  // and keeps its mass around the chip center, where the coarse head
  // pools.
  const double s = static_cast<double>(size) * scale;
  const double long_half = 9.0 * s / 32.0;
  const double short_half = 3.0 * s / 16.0;
  const double arm = 3.0 * s / 16.0;
  auto set = [&](std::int64_t y, std::int64_t x) {
    if (y >= 1 && y < size - 1 && x >= 1 && x < size - 1) {
      mask[static_cast<std::size_t>(y * size + x)] = 1;
    }
  };
  switch (shape) {
    case TargetShape::kRectangle:
      for (std::int64_t y = cy - static_cast<std::int64_t>(short_half);
           y <= cy + static_cast<std::int64_t>(short_half); ++y) {
        for (std::int64_t x = cx - static_cast<std::int64_t>(long_half);
             x <= cx + static_cast<std::int64_t>(long_half); ++x) {
          set(y, x);
        }
      }
      break;
    case TargetShape::kLShape: {
      // Solid square with the upper-right quadrant removed. The draw
      // center is offset so the pixel centroid lands on (cy, cx).
      const auto lh = static_cast<std::int64_t>(long_half);
      const std::int64_t oy = cy - lh / 6;
      const std::int64_t ox = cx + lh / 6;
      for (std::int64_t y = oy - lh; y <= oy + lh; ++y) {
        for (std::int64_t x = ox - lh; x <= ox + lh; ++x) {
          if (y < oy && x > ox) continue;
          set(y, x);
        }
      }
      break;
    }
    case TargetShape::kTShape: {
      const auto lh = static_cast<std::int64_t>(long_half);
      const auto aw = static_cast<std::int64_t>(arm);
      for (std::int64_t y = cy - lh; y <= cy - lh + aw; ++y) {
        for (std::int64_t x = cx - lh; x <= cx + lh; ++x) set(y, x);
      }
      for (std::int64_t y = cy - lh; y <= cy + lh; ++y) {
        for (std::int64_t x = cx - aw / 2; x <= cx + aw / 2; ++x) set(y, x);
      }
      break;
    }
    case TargetShape::kDisc: {
      const double r = long_half;
      for (std::int64_t y = 0; y < size; ++y) {
        for (std::int64_t x = 0; x < size; ++x) {
          const double dy = static_cast<double>(y - cy);
          const double dx = static_cast<double>(x - cx);
          if (dy * dy + dx * dx <= r * r) set(y, x);
        }
      }
      break;
    }
    case TargetShape::kBar: {
      const double angle =
          static_cast<double>(class_id) * 30.0 * 3.14159265358979323846 / 180.0;
      const double ca = std::cos(angle);
      const double sa = std::sin(angle);
      for (std::int64_t y = 0; y < size; ++y) {
        for (std::int64_t x = 0; x < size; ++x) {
          const double dy = static_cast<double>(y - cy);
          const double dx = static_cast<double>(x - cx);
          const double along = dx * ca + dy * sa;
          const double across = -dx * sa + dy * ca;
          if (std::abs(along) <= long_half && std::abs(across) <= arm / 2.0) {
            set(y, x);
          }
        }
      }
      break;
    }
  }
  return mask;
}

}  // namespace detail

struct SynthChip {
  ChipRecord chip;
  LabelImage label;
};

// Deterministic synthetic SAR chip: exponential speckle background,
// a bright class-specific polygon around 3x the background mean, and a
// darker shadow region adjacent to it. The returned label image is the
// exact polygon footprint.
inline SynthChip synth_chip(const ChipTemplate& tmpl, std::int64_t size,
                            std::uint64_t seed) {
  if (size < 16 || size % kGridStride != 0) {
    throw ConfigError("synth chip size must be a positive multiple of " +
                      std::to_string(kGridStride) + ", got " +
                      std::to_string(size));
  }
  Rng rng(seed);
  const double mu = tmpl.background_mean;
  SynthChip out;
  out.chip.class_id = tmpl.class_id;
  out.chip.depression_deg = 15.0;
  out.chip.aspect_deg = rng.uniform() * 360.0;
  out.label = LabelImage(size, size, tmpl.num_classes);

  // Placement jitter first, then the speckle field, then the target
  // texture, so the draw order is independent of the footprint size.
  // The jitter spans a full grid-stride period so the trained network
  // sees every translation phase of the encoder.
  const std::int64_t jitter = size / 8;
  const std::int64_t cy =
      size / 2 + rng.uniform_int(2 * jitter + 1) - jitter;
  const std::int64_t cx =
      size / 2 + rng.uniform_int(2 * jitter + 1) - jitter;

  out.chip.image = Tensor({1, size, size});
  for (std::int64_t i = 0; i < size * size; ++i) {
    out.chip.image[i] = rng.exponential(mu);
  }

  if (tmpl.class_id > 0) {
    const TargetShape shape =
        tmpl.shape ? *tmpl.shape : shape_for_class(tmpl.class_id);
    const std::vector<char> footprint = detail::target_footprint(
        shape, size, cy, cx, tmpl.class_id, tmpl.footprint_scale);
    // Shadow: the footprint translated down-range, behind the target.
    const std::int64_t shadow_shift = size / 8;
    for (std::int64_t y = 0; y < size; ++y) {
      for (std::int64_t x = 0; x < size; ++x) {
        const std::int64_t sy = y - shadow_shift;
        if (sy < 0) continue;
        if (footprint[static_cast<std::size_t>(sy * size + x)] &&
            !footprint[static_cast<std::size_t>(y * size + x)]) {
          out.chip.image[y * size + x] *= 0.15;
        }
      }
    }
    for (std::int64_t i = 0; i < size * size; ++i) {
      if (!footprint[static_cast<std::size_t>(i)]) continue;
      out.chip.image[i] = 3.0 * mu + 0.5 * mu * rng.exponential(1.0);
      out.label.labels[static_cast<std::size_t>(i)] =
          static_cast<std::int32_t>(tmpl.class_id);
    }
  }

  double maxv = 0.0;
  for (std::int64_t i = 0; i < size * size; ++i) {
    maxv = std::max(maxv, out.chip.image[i]);
  }
  if (maxv > 0.0) {
    for (std::int64_t i = 0; i < size * size; ++i) out.chip.image[i] /= maxv;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scene composition
// ---------------------------------------------------------------------------

struct ScenePlacement {
  ChipRecord chip;
  LabelImage label;
  std::int64_t top = 0;
  std::int64_t left = 0;
};

struct SceneBackground {
  std::uint64_t seed = 0;
  double mean = 0.1;
  std::optional<ChipRecord> clutter;  // tiled when present
};

struct Scene {
  Tensor image;  // [1,H,W]
  LabelImage labels;
};

// Fills the canvas with background, copies target-mask pixels of each
// placement (image and label), and blends the remaining chip pixels by
// the max-amplitude rule.
inline Scene compose_scene(std::int64_t canvas_h, std::int64_t canvas_w,
                           const SceneBackground& background,
                           const std::vector<ScenePlacement>& placements) {
  if (canvas_h < kGridStride || canvas_w < kGridStride ||
      canvas_h % kGridStride != 0 || canvas_w % kGridStride != 0) {
    throw ConfigError("scene canvas extents must be positive multiples of " +
                      std::to_string(kGridStride));
  }
  std::int64_t num_classes = 2;
  for (const ScenePlacement& p : placements) {
    num_classes = std::max(num_classes, p.label.num_classes);
  }
  Scene scene;
  scene.image = Tensor({1, canvas_h, canvas_w});
  scene.labels = LabelImage(canvas_h, canvas_w, num_classes);

  if (background.clutter.has_value()) {
    const Tensor& src = background.clutter->image;
    const std::int64_t sh = src.dim(1);
    const std::int64_t sw = src.dim(2);
    for (std::int64_t y = 0; y < canvas_h; ++y) {
      for (std::int64_t x = 0; x < canvas_w; ++x) {
        scene.image.at(0, y, x) = src.at(0, y % sh, x % sw);
      }
    }
  } else {
    Rng rng = Rng(background.seed).substream("scene-background");
    for (std::int64_t i = 0; i < canvas_h * canvas_w; ++i) {
      scene.image[i] = std::min(rng.exponential(background.mean), 1.0);
    }
  }

  for (std::size_t pi = 0; pi < placements.size(); ++pi) {
    const ScenePlacement& p = placements[pi];
    const std::int64_t ch = p.chip.image.dim(1);
    const std::int64_t cw = p.chip.image.dim(2);
    if (p.label.height != ch || p.label.width != cw) {
      throw PlacementError("placement " + std::to_string(pi) +
                           ": label extents do not match the chip");
    }
    if (p.top < 0 || p.left < 0 || p.top + ch > canvas_h ||
        p.left + cw > canvas_w) {
      throw PlacementError("placement " + std::to_string(pi) +
                           " extends outside the canvas");
    }
    for (std::int64_t y = 0; y < ch; ++y) {
      for (std::int64_t x = 0; x < cw; ++x) {
        const std::int64_t sy = p.top + y;
        const std::int64_t sx = p.left + x;
        const std::int32_t cls = p.label.at(y, x);
        if (cls != 0) {
          if (scene.labels.at(sy, sx) != 0) {
            throw PlacementError("placement " + std::to_string(pi) +
                                 " target mask overlaps an earlier target");
          }
          scene.labels.at(sy, sx) = cls;
          scene.image.at(0, sy, sx) = p.chip.image.at(0, y, x);
        } else {
          scene.image.at(0, sy, sx) =
              std::max(scene.image.at(0, sy, sx), p.chip.image.at(0, y, x));
        }
      }
    }
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string chip_path;   // relative to the manifest location
  std::string label_path;  // empty when labels are derived on load
  std::int64_t class_id = 0;
  std::string split;  // "train" | "test"
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;  // index 0 = "Background"
};

struct Exclusion {
  std::string class_name;
  std::string filename;
};

// Target chips excluded from the test split by default.
inline std::vector<Exclusion> default_exclusions() {
  return {
      {"BTR60", "HB03353.003"}, {"BTR60", "HB04933.003"},
      {"BTR60", "HB04999.003"}, {"BTR60", "HB05000.003"},
      {"BTR60", "HB05631.003"},
  };
}

struct ExclusionOutcome {
  DatasetManifest manifest;
  std::int64_t removed = 0;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string path_basename(const std::string& p) {
  const std::size_t slash = p.find_last_of("/\\");
  return slash == std::string::npos ? p : p.substr(slash + 1);
}

}  // namespace detail

// Removes matching test-split entries. Filenames are compared by
// basename, case-insensitively. Unmatched exclusions become warnings.
inline ExclusionOutcome apply_exclusions(
    const DatasetManifest& manifest, const std::vector<Exclusion>& exclusions) {
  ExclusionOutcome out;
  out.manifest.class_names = manifest.class_names;
  std::vector<char> used(exclusions.size(), 0);
  for (const ManifestEntry& entry : manifest.entries) {
    bool drop = false;
    if (entry.split == "test") {
      const std::string base =
          detail::lowercase(detail::path_basename(entry.chip_path));
      for (std::size_t i = 0; i < exclusions.size(); ++i) {
        const Exclusion& ex = exclusions[i];
        const bool class_match =
            entry.class_id <
                static_cast<std::int64_t>(manifest.class_names.size()) &&
            manifest.class_names[static_cast<std::size_t>(entry.class_id)] ==
                ex.class_name;
        if (class_match && detail::lowercase(ex.filename) == base) {
          drop = true;
          used[i] = 1;
          break;
        }
      }
    }
    if (drop) {
      ++out.removed;
    } else {
      out.manifest.entries.push_back(entry);
    }
  }
  for (std::size_t i = 0; i < exclusions.size(); ++i) {
    if (!used[i]) {
      out.warnings.push_back("exclusion not matched: " +
                             exclusions[i].class_name + "/" +
                             exclusions[i].filename);
    }
  }
  return out;
}

// CSV layout: optional "# class <id> <name>" comment lines, a header
// row, then path,label_path,class_id,split rows.
inline void write_manifest_csv(const std::filesystem::path& path,
                               const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path.string());
  for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
    out << "# class " << i << " " << manifest.class_names[i] << "\n";
  }
  out << "path,label_path,class_id,split\n";
  for (const ManifestEntry& e : manifest.entries) {
    out << e.chip_path << "," << e.label_path << "," << e.class_id << ","
        << e.split << "\n";
  }
  if (!out) throw IoError("failed writing manifest: " + path.string());
}

inline DatasetManifest read_manifest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path.string());
  DatasetManifest manifest;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream iss(line.substr(1));
      std::string tag;
      std::size_t id = 0;
      std::string name;
      if (iss >> tag >> id >> name && tag == "class") {
        if (manifest.class_names.size() <= id) {
          manifest.class_names.resize(id + 1);
        }
        manifest.class_names[id] = name;
      }
      continue;
    }
    if (!header_seen) {
      if (line != "path,label_path,class_id,split") {
        throw FormatError("manifest " + path.string() + " line " +
                          std::to_string(line_no) + ": unexpected header '" +
                          line + "'");
      }
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() == 3) fields.insert(fields.begin() + 1, "");
    if (fields.size() != 4) {
      throw FormatError("manifest " + path.string() + " line " +
                        std::to_string(line_no) + ": expected 4 fields");
    }
    ManifestEntry e;
    e.chip_path = fields[0];
    e.label_path = fields[1];
    try {
      e.class_id = std::stoll(fields[2]);
    } catch (const std::exception&) {
      throw FormatError("manifest " + path.string() + " line " +
                        std::to_string(line_no) + ": bad class id '" +
                        fields[2] + "'");
    }
    e.split = fields[3];
    if (e.split != "train" && e.split != "test") {
      throw FormatError("manifest " + path.string() + " line " +
                        std::to_string(line_no) + ": bad split '" + e.split +
                        "'");
    }
    manifest.entries.push_back(std::move(e));
  }
  if (!header_seen) {
    throw FormatError("manifest " + path.string() + " has no header row");
  }
  return manifest;
}

enum class ManifestLayout { kSynthetic, kMstar };

struct ManifestBuildOutcome {
  DatasetManifest manifest;
  std::vector<std::string> warnings;
};

// Scans a directory tree into a manifest with deterministic
// (lexicographic) ordering.
//
// Synthetic layout: root/{train,test}/<ClassName>/*.sar with
// "<stem>_label.pgm" siblings; splits come from the directory names.
//
// MSTAR layout: root/<ClassName>/** chip files; splits come from the
// DesiredDepression header (17 -> train, 15 -> test, anything else is
// skipped with a warning), the default exclusion list is applied to
// the test split, and label paths are left empty so labels are derived
// by make_label_image on load.
inline ManifestBuildOutcome build_manifest(const std::filesystem::path& root,
                                           ManifestLayout layout) {
  namespace fs = std::filesystem;
  ManifestBuildOutcome out;
  if (!fs::is_directory(root)) {
    throw IoError("dataset root is not a directory: " + root.string());
  }

  std::set<std::string> class_dirs;
  if (layout == ManifestLayout::kSynthetic) {
    for (const char* split : {"train", "test"}) {
      const fs::path dir = root / split;
      if (!fs::is_directory(dir)) continue;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) class_dirs.insert(e.path().filename().string());
      }
    }
  } else {
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) class_dirs.insert(e.path().filename().string());
    }
  }

  DatasetManifest& manifest = out.manifest;
  manifest.class_names.push_back("Background");
  for (const std::string& name : class_dirs) {
    if (name != "Background") manifest.class_names.push_back(name);
  }
  std::map<std::string, std::int64_t> class_ids;
  for (std::size_t i = 0; i < manifest.class_names.size(); ++i) {
    class_ids[manifest.class_names[i]] = static_cast<std::int64_t>(i);
  }
  if (class_dirs.count("Background") == 0 &&
      layout == ManifestLayout::kSynthetic) {
    out.warnings.push_back("no Background class directory found");
  }

  auto add_tree = [&](const fs::path& class_dir, const std::string& class_name,
                      const std::string& forced_split) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(class_dir)) {
      if (!e.is_regular_file()) continue;
      const std::string name = e.path().filename().string();
      if (name.size() > 10 &&
          name.substr(name.size() - 10) == "_label.pgm") {
        continue;
      }
      files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) {
      out.warnings.push_back("class directory has no chips: " +
                             class_dir.string());
      return;
    }
    for (const fs::path& f : files) {
      ManifestEntry entry;
      entry.chip_path = fs::relative(f, root).generic_string();
      entry.class_id = class_ids.at(class_name);
      if (layout == ManifestLayout::kSynthetic) {
        entry.split = forced_split;
        fs::path label = f;
        label.replace_filename(f.stem().string() + "_label.pgm");
        if (fs::exists(label)) {
          entry.label_path = fs::relative(label, root).generic_string();
        }
      } else {
        ChipRecord chip;
        try {
          chip = parse_header_chip(f);
        } catch (const Error& err) {
          out.warnings.push_back("unreadable chip " + f.string() + ": " +
                                 err.what());
          continue;
        }
        const auto depression =
            static_cast<std::int64_t>(std::llround(chip.depression_deg));
        if (depression == 17) {
          entry.split = "train";
        } else if (depression == 15) {
          entry.split = "test";
        } else {
          out.warnings.push_back("chip " + f.string() + " at depression " +
                                 std::to_string(depression) +
                                 " matches no split; skipped");
          continue;
        }
      }
      manifest.entries.push_back(std::move(entry));
    }
  };

  if (layout == ManifestLayout::kSynthetic) {
    for (const char* split : {"train", "test"}) {
      const fs::path dir = root / split;
      if (!fs::is_directory(dir)) continue;
      std::vector<fs::path> dirs;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) dirs.push_back(e.path());
      }
      std::sort(dirs.begin(), dirs.end());
      for (const fs::path& d : dirs) {
        add_tree(d, d.filename().string(), split);
      }
    }
  } else {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory()) dirs.push_back(e.path());
    }
    std::sort(dirs.begin(), dirs.end());
    for (const fs::path& d : dirs) add_tree(d, d.filename().string(), "");
  }

  std::sort(manifest.entries.begin(), manifest.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) {
              return a.chip_path < b.chip_path;
            });

  if (layout == ManifestLayout::kMstar) {
    ExclusionOutcome ex = apply_exclusions(manifest, default_exclusions());
    manifest = std::move(ex.manifest);
    for (std::string& w : ex.warnings) out.warnings.push_back(std::move(w));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

namespace detail {

inline bool looks_like_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[2] = {0, 0};
  in.read(magic, 2);
  return in.gcount() == 2 && magic[0] == 'P' && magic[1] == '5';
}

}  // namespace detail

// Reads a chip image from either format (PGM or header-chip binary).
inline Tensor read_chip_image(const std::filesystem::path& path) {
  if (detail::looks_like_pgm(path)) return read_pgm(path);
  return parse_header_chip(path).image;
}

// Materializes manifest entries for one split. Entries without a label
// path get labels derived via the policy.
inline std::vector<Sample> load_split(const DatasetManifest& manifest,
                                      const std::filesystem::path& base_dir,
                                      const std::string& split,
                                      const LabelPolicy& policy = {}) {
  const auto num_classes =
      static_cast<std::int64_t>(manifest.class_names.size());
  if (num_classes < 2) {
    throw DataError("manifest declares fewer than 2 classes");
  }
  std::vector<Sample> samples;
  for (const ManifestEntry& entry : manifest.entries) {
    if (entry.split != split) continue;
    Sample s;
    const std::filesystem::path chip_path = base_dir / entry.chip_path;
    if (detail::looks_like_pgm(chip_path)) {
      s.image = read_pgm(chip_path);
    } else {
      ChipRecord chip = parse_header_chip(chip_path);
      s.image = std::move(chip.image);
    }
    s.class_id = entry.class_id;
    s.source_name = entry.chip_path;
    if (!entry.label_path.empty()) {
      s.label = read_label_pgm(base_dir / entry.label_path, num_classes);
    } else {
      ChipRecord chip;
      chip.image = s.image;
      chip.class_id = entry.class_id;
      chip.source_name = entry.chip_path;
      s.label = make_label_image(chip, policy, num_classes);
    }
    if (s.label.height != s.image.dim(1) || s.label.width != s.image.dim(2)) {
      throw DataError("label extents do not match chip " + entry.chip_path);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

}  // namespace savers
