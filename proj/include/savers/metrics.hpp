#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "savers/data_types.hpp"
#include "savers/errors.hpp"
#include "savers/pgm.hpp"
#include "savers/segment.hpp"
#include "savers/tensor.hpp"

namespace savers {

// Chip-level confusion counts. Rows are the predicted class, columns
// the actual class.
struct ConfusionMatrix {
  std::vector<std::int64_t> counts;  // num_classes x num_classes
  std::vector<std::string> class_names;

  explicit ConfusionMatrix(std::vector<std::string> names)
      : counts(names.size() * names.size(), 0),
        class_names(std::move(names)) {}

  std::int64_t num_classes() const {
    return static_cast<std::int64_t>(class_names.size());
  }
  std::int64_t& at(std::int64_t predicted, std::int64_t actual) {
    return counts[static_cast<std::size_t>(predicted * num_classes() + actual)];
  }
  std::int64_t at(std::int64_t predicted, std::int64_t actual) const {
    return counts[static_cast<std::size_t>(predicted * num_classes() + actual)];
  }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (std::int64_t c : counts) t += c;
    return t;
  }
  std::int64_t row_sum(std::int64_t predicted) const {
    std::int64_t t = 0;
    for (std::int64_t a = 0; a < num_classes(); ++a) t += at(predicted, a);
    return t;
  }
  std::int64_t col_sum(std::int64_t actual) const {
    std::int64_t t = 0;
    for (std::int64_t p = 0; p < num_classes(); ++p) t += at(p, actual);
    return t;
  }
};

inline void accumulate(ConfusionMatrix& cm,
                       const std::vector<std::int64_t>& predictions,
                       const std::vector<std::int64_t>& truths) {
  if (predictions.size() != truths.size()) {
    throw DataError("accumulate: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(truths.size()) +
                    " truths");
  }
  const std::int64_t nc = cm.num_classes();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const std::int64_t p = predictions[i];
    const std::int64_t a = truths[i];
    if (p < 0 || p >= nc || a < 0 || a >= nc) {
      throw DataError("accumulate: class pair (" + std::to_string(p) + "," +
                      std::to_string(a) + ") outside [0," +
                      std::to_string(nc) + ") at index " + std::to_string(i));
    }
    ++cm.at(p, a);
  }
}

// One-vs-rest counts and derived scores for a single class. A zero
// denominator leaves the corresponding metric unset rather than
// coercing it to 0 or 1.
struct ClassMetrics {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
};

inline ClassMetrics class_metrics(const ConfusionMatrix& cm,
                                  std::int64_t class_id) {
  if (class_id < 0 || class_id >= cm.num_classes()) {
    throw DataError("class_metrics: class " + std::to_string(class_id) +
                    " outside [0," + std::to_string(cm.num_classes()) + ")");
  }
  ClassMetrics m;
  m.tp = cm.at(class_id, class_id);
  m.fp = cm.row_sum(class_id) - m.tp;
  m.fn = cm.col_sum(class_id) - m.tp;
  m.tn = cm.total() - m.tp - m.fp - m.fn;
  if (m.tp + m.fp > 0) {
    m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
  }
  if (m.tp + m.fn > 0) {
    m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
  }
  if (m.precision && m.recall) {
    const double p = *m.precision;
    const double r = *m.recall;
    m.f1 = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return m;
}

inline double overall_accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw DataError("overall_accuracy: empty confusion matrix");
  std::int64_t trace = 0;
  for (std::int64_t c = 0; c < cm.num_classes(); ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

// Per-cell fraction of chips whose pre-pooling argmax at that cell
// equals the chip class. All grids must share one shape.
inline Tensor cell_accuracy_map(const std::vector<Tensor>& logit_grids,
                                const std::vector<std::int64_t>& truths) {
  if (logit_grids.empty() || logit_grids.size() != truths.size()) {
    throw DataError("cell_accuracy_map: need equally many grids and truths");
  }
  const std::int64_t gh = logit_grids[0].dim(1);
  const std::int64_t gw = logit_grids[0].dim(2);
  Tensor acc({gh, gw});
  for (std::size_t i = 0; i < logit_grids.size(); ++i) {
    if (logit_grids[i].dim(1) != gh || logit_grids[i].dim(2) != gw) {
      throw DimensionError("cell_accuracy_map: grid " + std::to_string(i) +
                           " has shape " + logit_grids[i].shape_str() +
                           ", expected [*," + std::to_string(gh) + "," +
                           std::to_string(gw) + "]");
    }
    const LabelImage cells = cell_argmax(logit_grids[i]);
    for (std::int64_t j = 0; j < gh * gw; ++j) {
      if (cells.labels[static_cast<std::size_t>(j)] == truths[i]) {
        acc[j] += 1.0;
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(logit_grids.size());
  for (std::int64_t j = 0; j < gh * gw; ++j) acc[j] *= inv;
  return acc;
}

// Distribution of the chip targetness score 1 - p0, split by whether
// the chip actually contains a target.
struct ScoreDistribution {
  std::vector<double> target_values;
  std::vector<double> clutter_values;
  std::int64_t bins = 50;
  std::vector<std::int64_t> target_hist;
  std::vector<std::int64_t> clutter_hist;

  // Empirical CDF over target chips: P(value <= t).
  double target_cdf(double t) const {
    if (target_values.empty()) return 0.0;
    const auto it = std::upper_bound(target_values.begin(),
                                     target_values.end(), t);
    return static_cast<double>(it - target_values.begin()) /
           static_cast<double>(target_values.size());
  }
};

inline ScoreDistribution score_distribution(
    const std::vector<CoarseResult>& results,
    const std::vector<std::int64_t>& truths, std::int64_t bins = 50) {
  if (results.size() != truths.size()) {
    throw DataError("score_distribution: result/truth count mismatch");
  }
  if (bins < 1) throw ConfigError("score_distribution: bins must be >= 1");
  ScoreDistribution dist;
  dist.bins = bins;
  dist.target_hist.assign(static_cast<std::size_t>(bins), 0);
  dist.clutter_hist.assign(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const double value = 1.0 - results[i].pooled_probs[0];
    auto bin = static_cast<std::int64_t>(value * static_cast<double>(bins));
    bin = std::min(std::max<std::int64_t>(bin, 0), bins - 1);
    if (truths[i] == 0) {
      dist.clutter_values.push_back(value);
      ++dist.clutter_hist[static_cast<std::size_t>(bin)];
    } else {
      dist.target_values.push_back(value);
      ++dist.target_hist[static_cast<std::size_t>(bin)];
    }
  }
  std::sort(dist.target_values.begin(), dist.target_values.end());
  std::sort(dist.clutter_values.begin(), dist.clutter_values.end());
  return dist;
}

namespace detail {

inline std::string metric_cell(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream oss;
  oss << std::fixed << std::setprecision(6) << *v;
  return oss.str();
}

}  // namespace detail

// Confusion matrix CSV mirroring the report table: one row per
// predicted class with a trailing precision column, then recall and F1
// rows.
inline void write_confusion_csv(const std::filesystem::path& path,
                                const ConfusionMatrix& cm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "predicted\\actual";
  for (const std::string& name : cm.class_names) out << "," << name;
  out << ",precision\n";
  for (std::int64_t p = 0; p < cm.num_classes(); ++p) {
    out << cm.class_names[static_cast<std::size_t>(p)];
    for (std::int64_t a = 0; a < cm.num_classes(); ++a) {
      out << "," << cm.at(p, a);
    }
    out << "," << detail::metric_cell(class_metrics(cm, p).precision) << "\n";
  }
  out << "recall";
  for (std::int64_t a = 0; a < cm.num_classes(); ++a) {
    out << "," << detail::metric_cell(class_metrics(cm, a).recall);
  }
  out << ",\n";
  out << "f1";
  for (std::int64_t a = 0; a < cm.num_classes(); ++a) {
    out << "," << detail::metric_cell(class_metrics(cm, a).f1);
  }
  out << ",\n";
  if (!out) throw IoError("failed writing " + path.string());
}

// Parses the counts block written by write_confusion_csv (the recall
// and F1 rows are recomputable and ignored).
inline ConfusionMatrix read_confusion_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open confusion CSV: " + path.string());
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError("confusion CSV is empty: " + path.string());
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) header.push_back(field);
  }
  if (header.size() < 3 || header.front() != "predicted\\actual" ||
      header.back() != "precision") {
    throw FormatError("confusion CSV has unexpected header: " + path.string());
  }
  std::vector<std::string> names(header.begin() + 1, header.end() - 1);
  ConfusionMatrix cm(names);
  std::int64_t row = 0;
  while (std::getline(in, line) && row < cm.num_classes()) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    if (field != names[static_cast<std::size_t>(row)]) {
      throw FormatError("confusion CSV row label '" + field +
                        "' does not match class '" +
                        names[static_cast<std::size_t>(row)] + "'");
    }
    for (std::int64_t a = 0; a < cm.num_classes(); ++a) {
      if (!std::getline(ss, field, ',')) {
        throw FormatError("confusion CSV row '" + field + "' too short");
      }
      try {
        cm.at(row, a) = std::stoll(field);
      } catch (const std::exception&) {
        throw FormatError("confusion CSV has non-integer count '" + field +
                          "'");
      }
    }
    ++row;
  }
  if (row != cm.num_classes()) {
    throw FormatError("confusion CSV ended after " + std::to_string(row) +
                      " of " + std::to_string(cm.num_classes()) + " rows");
  }
  return cm;
}

// Per-class metrics CSV (report-table layout).
inline void write_class_metrics_csv(const std::filesystem::path& path,
                                    const ConfusionMatrix& cm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "class,tp,fp,fn,tn,precision,recall,f1\n";
  for (std::int64_t c = 0; c < cm.num_classes(); ++c) {
    const ClassMetrics m = class_metrics(cm, c);
    out << cm.class_names[static_cast<std::size_t>(c)] << "," << m.tp << ","
        << m.fp << "," << m.fn << "," << m.tn << ","
        << detail::metric_cell(m.precision) << ","
        << detail::metric_cell(m.recall) << "," << detail::metric_cell(m.f1)
        << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline void write_distribution_csv(const std::filesystem::path& path,
                                   const ScoreDistribution& dist) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "bin_lo,bin_hi,target_count,clutter_count\n";
  out << std::setprecision(17);
  for (std::int64_t b = 0; b < dist.bins; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(dist.bins);
    const double hi =
        static_cast<double>(b + 1) / static_cast<double>(dist.bins);
    out << lo << "," << hi << ","
        << dist.target_hist[static_cast<std::size_t>(b)] << ","
        << dist.clutter_hist[static_cast<std::size_t>(b)] << "\n";
  }
  out << "\nthreshold,target_cdf\n";
  for (std::int64_t b = 0; b <= dist.bins; ++b) {
    const double t = static_cast<double>(b) / static_cast<double>(dist.bins);
    out << t << "," << dist.target_cdf(t) << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

// Writes the full evaluation bundle. Refuses to write anything for an
// empty evaluation.
inline std::vector<std::filesystem::path> render_reports(
    const ConfusionMatrix& cm, const ScoreDistribution& dist,
    const std::filesystem::path& out_dir, const Tensor* cell_map = nullptr) {
  if (cm.total() == 0) {
    throw DataError("render_reports: confusion matrix is empty");
  }
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  const auto confusion = out_dir / "confusion_matrix.csv";
  write_confusion_csv(confusion, cm);
  written.push_back(confusion);
  const auto metrics = out_dir / "class_metrics.csv";
  write_class_metrics_csv(metrics, cm);
  written.push_back(metrics);
  const auto distribution = out_dir / "score_distribution.csv";
  write_distribution_csv(distribution, dist);
  written.push_back(distribution);
  if (cell_map != nullptr) {
    const auto heat = out_dir / "cell_accuracy.pgm";
    write_heat_pgm(heat, *cell_map, cell_map->dim(0), cell_map->dim(1));
    written.push_back(heat);
  }
  return written;
}

}  // namespace savers
