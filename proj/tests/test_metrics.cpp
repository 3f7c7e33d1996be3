#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "savers/metrics.hpp"

using namespace savers;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("savers_metrics_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string>& mstar_class_names() {
  static const std::vector<std::string> names{
      "Background", "2S1",  "BMP2", "BRDM2",  "BTR60",  "BTR70",
      "D7",         "T62",  "T72",  "ZIL131", "ZSU234"};
  return names;
}

// Published confusion counts for the 2662-chip test set
// (rows = predicted, columns = actual).
ConfusionMatrix published_confusion() {
  const std::int64_t counts[11][11] = {
      {242, 1, 0, 3, 3, 1, 11, 0, 0, 6, 1},
      {0, 272, 1, 1, 0, 1, 0, 1, 0, 0, 0},
      {0, 0, 194, 0, 0, 0, 0, 0, 0, 0, 0},
      {0, 0, 0, 268, 0, 0, 0, 0, 0, 0, 0},
      {0, 0, 0, 0, 185, 0, 0, 0, 0, 0, 0},
      {0, 0, 0, 0, 0, 194, 0, 0, 0, 0, 0},
      {0, 0, 0, 0, 0, 0, 263, 0, 0, 0, 0},
      {0, 1, 0, 0, 2, 0, 0, 269, 0, 0, 0},
      {0, 0, 0, 0, 0, 0, 0, 1, 196, 0, 0},
      {0, 0, 0, 2, 0, 0, 0, 0, 0, 268, 0},
      {0, 0, 0, 0, 0, 0, 0, 2, 0, 0, 273},
  };
  ConfusionMatrix cm(mstar_class_names());
  for (std::int64_t p = 0; p < 11; ++p) {
    for (std::int64_t a = 0; a < 11; ++a) cm.at(p, a) = counts[p][a];
  }
  return cm;
}

struct PublishedRow {
  const char* name;
  double precision;
  double recall;
  double f1;
};

// Published per-class precision / recall / F1 (3 decimal places).
const std::vector<PublishedRow>& published_metrics() {
  static const std::vector<PublishedRow> rows{
      {"Background", 0.903, 1.000, 0.949}, {"2S1", 0.986, 0.993, 0.989},
      {"BMP2", 1.000, 0.995, 0.997},       {"BRDM2", 1.000, 0.978, 0.989},
      {"BTR60", 1.000, 0.974, 0.987},      {"BTR70", 1.000, 0.990, 0.995},
      {"D7", 1.000, 0.960, 0.980},         {"T62", 0.989, 0.985, 0.987},
      {"T72", 0.995, 1.000, 0.997},        {"ZIL131", 0.993, 0.978, 0.985},
      {"ZSU234", 0.993, 0.996, 0.995},
  };
  return rows;
}

TEST(Accumulate, PerfectPredictionsAreDiagonal) {
  ConfusionMatrix cm({"Background", "A", "B"});
  accumulate(cm, {0, 1, 2, 1}, {0, 1, 2, 1});
  EXPECT_EQ(cm.at(0, 0) + cm.at(1, 1) + cm.at(2, 2), 4);
  EXPECT_EQ(cm.total(), 4);
  EXPECT_EQ(cm.at(1, 2), 0);
}

TEST(Accumulate, HandCase) {
  ConfusionMatrix cm({"c0", "c1"});
  accumulate(cm, {0, 1, 1}, {0, 1, 0});
  EXPECT_EQ(cm.at(1, 0), 1);
  EXPECT_EQ(cm.at(0, 0), 1);
  EXPECT_EQ(cm.at(1, 1), 1);
  EXPECT_EQ(cm.at(0, 1), 0);
}

TEST(Accumulate, MarginalsMatchDirectTallies) {
  Rng rng(5);
  const std::int64_t nc = 4;
  std::vector<std::int64_t> preds, truths;
  std::vector<std::int64_t> pred_tally(nc, 0), truth_tally(nc, 0);
  for (int i = 0; i < 200; ++i) {
    preds.push_back(rng.uniform_int(nc));
    truths.push_back(rng.uniform_int(nc));
    ++pred_tally[static_cast<std::size_t>(preds.back())];
    ++truth_tally[static_cast<std::size_t>(truths.back())];
  }
  ConfusionMatrix cm({"a", "b", "c", "d"});
  accumulate(cm, preds, truths);
  for (std::int64_t c = 0; c < nc; ++c) {
    EXPECT_EQ(cm.row_sum(c), pred_tally[static_cast<std::size_t>(c)]);
    EXPECT_EQ(cm.col_sum(c), truth_tally[static_cast<std::size_t>(c)]);
  }
}

TEST(Accumulate, OutOfRangeRejected) {
  ConfusionMatrix cm({"a", "b"});
  EXPECT_THROW(accumulate(cm, {2}, {0}), DataError);
  EXPECT_THROW(accumulate(cm, {0}, {-1}), DataError);
  EXPECT_THROW(accumulate(cm, {0, 1}, {0}), DataError);
}

// Feeding the published confusion counts through class_metrics must
// reproduce every published precision/recall/F1 within rounding.
TEST(ClassMetrics, ReproducesPublishedTable) {
  const ConfusionMatrix cm = published_confusion();
  ASSERT_EQ(cm.total(), 2662);
  const auto& rows = published_metrics();
  for (std::size_t c = 0; c < rows.size(); ++c) {
    const ClassMetrics m = class_metrics(cm, static_cast<std::int64_t>(c));
    ASSERT_TRUE(m.precision && m.recall && m.f1) << rows[c].name;
    EXPECT_NEAR(*m.precision, rows[c].precision, 0.0005) << rows[c].name;
    EXPECT_NEAR(*m.recall, rows[c].recall, 0.0005) << rows[c].name;
    EXPECT_NEAR(*m.f1, rows[c].f1, 0.0005) << rows[c].name;
  }
  // Background one-vs-rest counts.
  const ClassMetrics bg = class_metrics(cm, 0);
  EXPECT_EQ(bg.tp, 242);
  EXPECT_EQ(bg.fp, 26);
  EXPECT_EQ(bg.fn, 0);
  EXPECT_EQ(bg.tp + bg.fp + bg.fn + bg.tn, 2662);
}

TEST(ClassMetrics, D7RecallMatchesPublishedColumn) {
  const ConfusionMatrix cm = published_confusion();
  const ClassMetrics d7 = class_metrics(cm, 6);
  EXPECT_EQ(d7.tp, 263);
  EXPECT_EQ(d7.tp + d7.fn, 274);
  EXPECT_NEAR(*d7.recall, 0.960, 0.0005);
}

TEST(ClassMetrics, AbsentClassIsUndefinedNotZero) {
  ConfusionMatrix cm({"a", "b", "c"});
  accumulate(cm, {0, 0}, {0, 0});
  const ClassMetrics m = class_metrics(cm, 2);
  EXPECT_FALSE(m.precision.has_value());
  EXPECT_FALSE(m.recall.has_value());
  EXPECT_FALSE(m.f1.has_value());
  EXPECT_EQ(m.tn, 2);
}

TEST(ClassMetrics, InvariantsOnRandomMatrices) {
  Rng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    ConfusionMatrix cm({"a", "b", "c", "d"});
    for (std::int64_t p = 0; p < 4; ++p) {
      for (std::int64_t a = 0; a < 4; ++a) {
        cm.at(p, a) = rng.uniform_int(20);
      }
    }
    if (cm.total() == 0) continue;
    std::int64_t tp_sum = 0, tp_fn_sum = 0, trace = 0;
    for (std::int64_t c = 0; c < 4; ++c) {
      const ClassMetrics m = class_metrics(cm, c);
      tp_sum += m.tp;
      tp_fn_sum += m.tp + m.fn;
      trace += cm.at(c, c);
      EXPECT_EQ(m.tp + m.fp + m.fn + m.tn, cm.total());
      if (m.precision) {
        EXPECT_GE(*m.precision, 0.0);
        EXPECT_LE(*m.precision, 1.0);
      }
      if (m.recall) {
        EXPECT_GE(*m.recall, 0.0);
        EXPECT_LE(*m.recall, 1.0);
      }
      if (m.f1) {
        EXPECT_LE(*m.f1, 2.0 * *m.precision + 1e-15);
        EXPECT_LE(*m.f1, 2.0 * *m.recall + 1e-15);
        if (*m.precision == *m.recall) {
          EXPECT_NEAR(*m.f1, *m.precision, 1e-12);
        }
      }
    }
    EXPECT_EQ(tp_sum, trace);
    EXPECT_EQ(tp_fn_sum, cm.total());
  }
}

TEST(OverallAccuracy, PublishedTotals) {
  const ConfusionMatrix cm = published_confusion();
  const double acc = overall_accuracy(cm);
  EXPECT_NEAR(acc, 2624.0 / 2662.0, 1e-15);
  EXPECT_NEAR(std::round(acc * 1000.0) / 1000.0, 0.986, 1e-12);
}

TEST(OverallAccuracy, IdentityAndHalf) {
  ConfusionMatrix identity({"a", "b"});
  accumulate(identity, {0, 1, 0}, {0, 1, 0});
  EXPECT_DOUBLE_EQ(overall_accuracy(identity), 1.0);

  // An always-"a" predictor on balanced 2-class data scores 0.5.
  ConfusionMatrix half({"a", "b"});
  accumulate(half, {0, 0, 0, 0}, {0, 1, 0, 1});
  EXPECT_DOUBLE_EQ(overall_accuracy(half), 0.5);
  EXPECT_THROW(overall_accuracy(ConfusionMatrix({"a", "b"})), DataError);
}

Tensor grid_favoring(std::int64_t cls, std::int64_t nc, std::int64_t gh,
                     std::int64_t gw) {
  Tensor grid({nc, gh, gw});
  for (std::int64_t j = 0; j < gh * gw; ++j) grid[cls * gh * gw + j] = 5.0;
  return grid;
}

// A background-everywhere predictor scores the clutter fraction at
// every cell (the 242/2662 situation from the evaluation analysis).
TEST(CellAccuracyMap, BackgroundPredictorScoresClutterFraction) {
  std::vector<Tensor> grids;
  std::vector<std::int64_t> truths;
  const std::int64_t total = 2662, clutter = 242;
  for (std::int64_t i = 0; i < total; ++i) {
    grids.push_back(grid_favoring(0, 3, 2, 2));
    truths.push_back(i < clutter ? 0 : 1 + i % 2);
  }
  const Tensor acc = cell_accuracy_map(grids, truths);
  for (std::int64_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(acc[j], 242.0 / 2662.0, 1e-12);
    EXPECT_NEAR(acc[j], 0.091, 0.0005);
  }
}

TEST(CellAccuracyMap, PerfectPredictorScoresOne) {
  std::vector<Tensor> grids;
  std::vector<std::int64_t> truths;
  for (std::int64_t i = 0; i < 10; ++i) {
    const std::int64_t cls = i % 3;
    grids.push_back(grid_favoring(cls, 3, 2, 3));
    truths.push_back(cls);
  }
  const Tensor acc = cell_accuracy_map(grids, truths);
  for (std::int64_t j = 0; j < 6; ++j) EXPECT_DOUBLE_EQ(acc[j], 1.0);
}

TEST(CellAccuracyMap, MatchesBruteForceRecount) {
  Rng rng(13);
  std::vector<Tensor> grids;
  std::vector<std::int64_t> truths;
  for (int i = 0; i < 25; ++i) {
    grids.push_back(oracles::random_tensor({4, 3, 3}, rng));
    truths.push_back(rng.uniform_int(4));
  }
  const Tensor acc = cell_accuracy_map(grids, truths);
  for (std::int64_t y = 0; y < 3; ++y) {
    for (std::int64_t x = 0; x < 3; ++x) {
      std::int64_t correct = 0;
      for (std::size_t i = 0; i < grids.size(); ++i) {
        std::int64_t best = 0;
        for (std::int64_t c = 1; c < 4; ++c) {
          if (grids[i].at(c, y, x) > grids[i].at(best, y, x)) best = c;
        }
        if (best == truths[i]) ++correct;
      }
      EXPECT_DOUBLE_EQ(acc.at(y, x) * 25.0, static_cast<double>(correct));
    }
  }
}

TEST(CellAccuracyMap, MixedShapesRejected) {
  std::vector<Tensor> grids{grid_favoring(0, 2, 2, 2),
                            grid_favoring(0, 2, 3, 3)};
  EXPECT_THROW(cell_accuracy_map(grids, {0, 0}), DimensionError);
}

CoarseResult coarse_with_background_prob(double p0) {
  CoarseResult r;
  r.pooled_probs = Tensor({2}, {p0, 1.0 - p0});
  r.pooled_logits = Tensor({2});
  r.logit_grid = Tensor({2, 1, 1});
  r.predicted_class = p0 >= 0.5 ? 0 : 1;
  return r;
}

TEST(ScoreDistribution, OneHotBackgroundLandsInFirstBin) {
  const std::vector<CoarseResult> results{coarse_with_background_prob(1.0)};
  const ScoreDistribution dist = score_distribution(results, {0});
  EXPECT_EQ(dist.clutter_hist[0], 1);
  EXPECT_EQ(dist.clutter_values[0], 0.0);
  EXPECT_TRUE(dist.target_values.empty());
}

TEST(ScoreDistribution, CdfReachesOne) {
  std::vector<CoarseResult> results;
  std::vector<std::int64_t> truths;
  Rng rng(17);
  for (int i = 0; i < 37; ++i) {
    results.push_back(coarse_with_background_prob(rng.uniform()));
    truths.push_back(1);
  }
  const ScoreDistribution dist = score_distribution(results, truths);
  EXPECT_DOUBLE_EQ(dist.target_cdf(1.0), 1.0);
  std::int64_t hist_total = 0;
  for (std::int64_t c : dist.target_hist) hist_total += c;
  EXPECT_EQ(hist_total, 37);
  // Monotone CDF.
  double prev = -1.0;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const double v = dist.target_cdf(t);
    EXPECT_GE(v, prev);
    prev = v;
  }
}

TEST(ScoreDistribution, CdfMatchesCountingOracle) {
  std::vector<CoarseResult> results;
  std::vector<std::int64_t> truths;
  Rng rng(19);
  std::vector<double> values;
  for (int i = 0; i < 64; ++i) {
    const double p0 = rng.uniform();
    results.push_back(coarse_with_background_prob(p0));
    truths.push_back(2);
    values.push_back(1.0 - p0);
  }
  const ScoreDistribution dist = score_distribution(results, truths);
  for (double t : {0.1, 0.25, 0.5, 0.77, 0.9}) {
    std::int64_t count = 0;
    for (double v : values) count += v <= t ? 1 : 0;
    EXPECT_DOUBLE_EQ(dist.target_cdf(t), static_cast<double>(count) / 64.0);
  }
}

TEST(Reports, ClassMetricsCsvRoundTrips) {
  const ConfusionMatrix cm = published_confusion();
  const fs::path dir = scratch_dir("reports_roundtrip");
  write_class_metrics_csv(dir / "class_metrics.csv", cm);

  std::ifstream in(dir / "class_metrics.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "class,tp,fp,fn,tn,precision,recall,f1");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    ASSERT_EQ(fields.size(), 8u);
    const ClassMetrics m = class_metrics(cm, static_cast<std::int64_t>(row));
    EXPECT_EQ(fields[0], cm.class_names[row]);
    EXPECT_EQ(std::stoll(fields[1]), m.tp);
    EXPECT_NEAR(std::stod(fields[5]), *m.precision, 5e-7);
    EXPECT_NEAR(std::stod(fields[6]), *m.recall, 5e-7);
    EXPECT_NEAR(std::stod(fields[7]), *m.f1, 5e-7);
    ++row;
  }
  EXPECT_EQ(row, cm.class_names.size());
}

TEST(Reports, ConfusionCsvRoundTripsCounts) {
  const ConfusionMatrix cm = published_confusion();
  const fs::path dir = scratch_dir("reports_confusion");
  write_confusion_csv(dir / "confusion.csv", cm);
  const ConfusionMatrix back = read_confusion_csv(dir / "confusion.csv");
  ASSERT_EQ(back.class_names, cm.class_names);
  EXPECT_EQ(back.counts, cm.counts);
  // Column sums equal the per-class test counts.
  const std::vector<std::int64_t> want{242, 274, 195, 274, 190, 196,
                                       274, 273, 196, 274, 274};
  for (std::int64_t c = 0; c < back.num_classes(); ++c) {
    EXPECT_EQ(back.col_sum(c), want[static_cast<std::size_t>(c)]);
  }
}

TEST(Reports, EmptyEvaluationWritesNothing) {
  const fs::path dir = scratch_dir("reports_empty");
  const ConfusionMatrix cm(mstar_class_names());
  ScoreDistribution dist;
  dist.target_hist.assign(50, 0);
  dist.clutter_hist.assign(50, 0);
  EXPECT_THROW(render_reports(cm, dist, dir / "out"), DataError);
  EXPECT_FALSE(fs::exists(dir / "out" / "confusion_matrix.csv"));
}

TEST(Reports, BundleWritesAllFiles) {
  const ConfusionMatrix cm = published_confusion();
  std::vector<CoarseResult> results{coarse_with_background_prob(0.9),
                                    coarse_with_background_prob(0.2)};
  const ScoreDistribution dist = score_distribution(results, {0, 1});
  Tensor cell_map({2, 2}, {0.1, 0.5, 0.9, 1.0});
  const fs::path dir = scratch_dir("reports_bundle") / "out";
  const auto written = render_reports(cm, dist, dir, &cell_map);
  EXPECT_EQ(written.size(), 4u);
  for (const auto& p : written) EXPECT_TRUE(fs::exists(p));
}

}  // namespace
