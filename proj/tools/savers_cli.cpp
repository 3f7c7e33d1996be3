// Command-line front end for the SAVERS pipeline: synthetic dataset
// generation, training, evaluation, inference, and scene composition.
// Every command is deterministic given its config, seed, and inputs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "savers/savers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kChipExtension = ".sar";

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw savers::IoError("cannot open JSON file: " + path.string());
  json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) {
    throw savers::FormatError("invalid JSON in " + path.string());
  }
  return j;
}

// Applies config-file values to options the command line left at their
// defaults. Unknown keys are rejected.
void apply_json_config(CLI::App& cmd, const fs::path& path,
                       const std::map<std::string,
                                      std::function<void(const json&)>>& setters) {
  const json j = load_json_file(path);
  if (!j.is_object()) {
    throw savers::ConfigError("config file must hold a JSON object: " +
                              path.string());
  }
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw savers::ConfigError("unknown config key '" + key + "' in " +
                                path.string());
    }
    if (cmd.count("--" + key) == 0) it->second(value);
  }
}

void ensure_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) {
      throw savers::IoError("output path exists and is not a directory: " +
                            dir.string());
    }
    if (!fs::is_empty(dir) && !force) {
      throw savers::ConfigError("output directory " + dir.string() +
                                " is not empty; pass --force to reuse it");
    }
  } else {
    fs::create_directories(dir);
  }
}

std::string format_double(double v) {
  std::ostringstream oss;
  oss << std::setprecision(17) << v;
  return oss.str();
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOptions {
  std::int64_t classes = 4;
  std::int64_t per_class = 50;
  std::int64_t size = 64;
  double train_frac = 0.8;
  double background_mean = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

void run_synth(const SynthOptions& o) {
  if (o.classes < 1) throw savers::ConfigError("--classes must be >= 1");
  if (o.per_class < 1) throw savers::ConfigError("--per-class must be >= 1");
  if (o.size < 16 || o.size % savers::kGridStride != 0) {
    throw savers::ConfigError("--size must be a positive multiple of " +
                              std::to_string(savers::kGridStride) + ", got " +
                              std::to_string(o.size));
  }
  if (!(o.train_frac > 0.0 && o.train_frac < 1.0)) {
    throw savers::ConfigError("--train-frac must be in (0,1)");
  }
  if (o.out.empty()) throw savers::ConfigError("--out is required");

  const fs::path out_dir(o.out);
  ensure_output_dir(out_dir, o.force);

  savers::DatasetManifest manifest;
  manifest.class_names = savers::synthetic_class_names(o.classes);
  const std::int64_t num_classes = o.classes + 1;
  const auto train_count = static_cast<std::int64_t>(
      static_cast<double>(o.per_class) * o.train_frac + 0.5);

  const savers::Rng root(o.seed);
  for (std::int64_t cls = 0; cls <= o.classes; ++cls) {
    const std::string& class_name =
        manifest.class_names[static_cast<std::size_t>(cls)];
    for (std::int64_t i = 0; i < o.per_class; ++i) {
      const bool is_train = i < train_count;
      const std::string split = is_train ? "train" : "test";
      savers::ChipTemplate tmpl;
      tmpl.class_id = cls;
      tmpl.num_classes = num_classes;
      tmpl.background_mean = o.background_mean;
      if (cls > 0) tmpl.shape = savers::shape_for_name(class_name);
      const savers::Rng chip_rng = root.substream(
          "data", static_cast<std::uint64_t>(cls * 1000000 + i));
      savers::SynthChip synth =
          savers::synth_chip(tmpl, o.size, chip_rng.seed());
      synth.chip.depression_deg = is_train ? 17.0 : 15.0;

      std::ostringstream stem;
      stem << "chip_" << std::setfill('0') << std::setw(4) << i;
      const fs::path dir = out_dir / split / class_name;
      fs::create_directories(dir);
      const fs::path chip_path = dir / (stem.str() + kChipExtension);
      const fs::path label_path = dir / (stem.str() + "_label.pgm");
      savers::write_header_chip(chip_path, synth.chip, class_name);
      savers::write_label_pgm(label_path, synth.label);

      savers::ManifestEntry entry;
      entry.chip_path = fs::relative(chip_path, out_dir).generic_string();
      entry.label_path = fs::relative(label_path, out_dir).generic_string();
      entry.class_id = cls;
      entry.split = split;
      manifest.entries.push_back(std::move(entry));
    }
  }

  // The manifest is written last, atomically, so a failed run never
  // leaves a partial one behind.
  const fs::path manifest_tmp = out_dir / "manifest.csv.tmp";
  savers::write_manifest_csv(manifest_tmp, manifest);
  fs::rename(manifest_tmp, out_dir / "manifest.csv");
  std::cout << "wrote " << manifest.entries.size() << " chips under "
            << out_dir.string() << "\n";
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string manifest;
  std::string out;
  std::vector<std::int64_t> channels{32, 64, 128, 256};
  std::int64_t mid_channels = 256;
  std::int64_t pool_window = 2;
  double dropout = 0.5;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::int64_t epochs = 10;
  std::int64_t batch_size = 8;
  std::uint64_t seed = 0;
  bool force = false;
};

void write_history_csv(const fs::path& path,
                       const std::vector<savers::EpochStats>& history) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw savers::IoError("cannot open for writing: " + path.string());
  out << "epoch,mean_train_loss,eval_accuracy\n";
  for (const savers::EpochStats& e : history) {
    out << e.epoch << "," << format_double(e.mean_train_loss) << ","
        << format_double(e.eval_accuracy) << "\n";
  }
  if (!out) throw savers::IoError("failed writing " + path.string());
}

void run_train(const TrainOptions& o) {
  if (o.manifest.empty()) throw savers::ConfigError("--manifest is required");
  if (o.out.empty()) throw savers::ConfigError("--out is required");
  if (o.channels.size() != 4) {
    throw savers::ConfigError("--channels needs exactly 4 values");
  }
  const fs::path manifest_path(o.manifest);
  const savers::DatasetManifest manifest =
      savers::read_manifest_csv(manifest_path);
  const fs::path base_dir = manifest_path.parent_path();

  savers::SaversConfig config;
  config.num_classes = static_cast<std::int64_t>(manifest.class_names.size());
  for (std::size_t i = 0; i < 4; ++i) config.block_channels[i] = o.channels[i];
  config.mid_channels = o.mid_channels;
  config.dropout_rate = o.dropout;
  config.coarse_pool_window = o.pool_window;
  config.validate();

  savers::TrainConfig train_config;
  train_config.learning_rate = o.learning_rate;
  train_config.momentum = o.momentum;
  train_config.epochs = o.epochs;
  train_config.batch_size = o.batch_size;
  train_config.seed = o.seed;
  train_config.dropout_rate = o.dropout;
  train_config.validate();

  const std::vector<savers::Sample> train_set =
      savers::load_split(manifest, base_dir, "train");
  const std::vector<savers::Sample> eval_set =
      savers::load_split(manifest, base_dir, "test");
  if (train_set.empty()) {
    throw savers::ConfigError("manifest has no train-split entries");
  }
  if (eval_set.empty()) {
    throw savers::ConfigError("manifest has no test-split entries to evaluate");
  }

  const fs::path out_dir(o.out);
  ensure_output_dir(out_dir, o.force);

  savers::SaversModel model = savers::build_model(config, o.seed);
  savers::FitResult result =
      savers::fit(model, train_set, eval_set, train_config);

  savers::save_checkpoint(result.best_model, out_dir / "best.ckpt");
  write_history_csv(out_dir / "history.csv", result.history);
  std::cout << "best eval accuracy " << format_double(result.best_accuracy)
            << " at epoch " << result.best_epoch << " ("
            << result.history.size() << " epochs run)\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string out;
  bool force = false;
};

void run_eval(const EvalOptions& o) {
  if (o.checkpoint.empty()) throw savers::ConfigError("--checkpoint is required");
  if (o.manifest.empty()) throw savers::ConfigError("--manifest is required");
  if (o.out.empty()) throw savers::ConfigError("--out is required");
  const savers::SaversModel model = savers::load_checkpoint(o.checkpoint);
  const fs::path manifest_path(o.manifest);
  const savers::DatasetManifest manifest =
      savers::read_manifest_csv(manifest_path);
  if (static_cast<std::int64_t>(manifest.class_names.size()) !=
      model.config.num_classes) {
    throw savers::ConfigError(
        "manifest declares " + std::to_string(manifest.class_names.size()) +
        " classes but the checkpoint was trained for " +
        std::to_string(model.config.num_classes));
  }
  const std::vector<savers::Sample> samples =
      savers::load_split(manifest, manifest_path.parent_path(), o.split);
  if (samples.empty()) {
    throw savers::DataError("no entries in split '" + o.split + "'");
  }

  savers::ConfusionMatrix cm(manifest.class_names);
  std::vector<savers::CoarseResult> results;
  std::vector<std::int64_t> truths;
  results.reserve(samples.size());
  for (const savers::Sample& s : samples) {
    results.push_back(savers::coarse_segment(model, s.image));
    truths.push_back(s.class_id);
    ++cm.at(results.back().predicted_class, s.class_id);
  }
  const savers::ScoreDistribution dist =
      savers::score_distribution(results, truths);

  // The per-cell accuracy map needs one common grid shape.
  bool uniform = true;
  for (const savers::CoarseResult& r : results) {
    if (!r.logit_grid.same_shape(results.front().logit_grid)) {
      uniform = false;
      break;
    }
  }
  std::optional<savers::Tensor> cell_map;
  if (uniform) {
    std::vector<savers::Tensor> grids;
    grids.reserve(results.size());
    for (const savers::CoarseResult& r : results) grids.push_back(r.logit_grid);
    cell_map = savers::cell_accuracy_map(grids, truths);
  } else {
    std::cout << "note: mixed chip sizes, skipping cell accuracy map\n";
  }

  const fs::path out_dir(o.out);
  ensure_output_dir(out_dir, o.force);
  savers::render_reports(cm, dist, out_dir,
                         cell_map ? &*cell_map : nullptr);
  std::cout << "overall accuracy " << format_double(savers::overall_accuracy(cm))
            << " over " << samples.size() << " chips\n";
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferOptions {
  std::string checkpoint;
  std::string image;
  std::string out;
  std::int64_t min_pixels = 8;
  bool force = false;
};

void run_infer(const InferOptions& o) {
  if (o.checkpoint.empty()) throw savers::ConfigError("--checkpoint is required");
  if (o.image.empty()) throw savers::ConfigError("--image is required");
  if (o.out.empty()) throw savers::ConfigError("--out is required");
  const savers::SaversModel model = savers::load_checkpoint(o.checkpoint);
  const savers::Tensor image = savers::read_chip_image(o.image);
  if (image.dim(1) < 16 || image.dim(2) < 16) {
    throw savers::DimensionError("input image must be at least 16x16, got " +
                                 image.shape_str());
  }

  const savers::FineResult fine = savers::fine_segment(model, image);
  const savers::CoarseResult coarse = savers::coarse_segment(model, image);
  const std::vector<savers::DetectedTarget> targets =
      savers::detect_targets(fine, o.min_pixels);
  const savers::CompositeResult views = savers::composite_output(image, fine);

  const fs::path out_dir(o.out);
  ensure_output_dir(out_dir, o.force);
  savers::write_label_pgm(out_dir / "label_map.pgm", fine.label_map);
  savers::write_ppm(out_dir / "label_colors.ppm", views.label_colors);
  savers::write_ppm(out_dir / "composite.ppm", views.composite);
  savers::write_label_pgm(out_dir / "coarse_grid.pgm",
                          savers::cell_argmax(coarse.logit_grid));
  {
    std::ofstream csv(out_dir / "targets.csv", std::ios::trunc);
    if (!csv) throw savers::IoError("cannot write targets.csv");
    csv << "class_id,centroid_row,centroid_col,pixel_count\n";
    for (const savers::DetectedTarget& t : targets) {
      csv << t.class_id << "," << format_double(t.centroid_row) << ","
          << format_double(t.centroid_col) << "," << t.pixel_count << "\n";
    }
    if (!csv) throw savers::IoError("failed writing targets.csv");
  }
  std::cout << "chip class " << coarse.predicted_class << " (p_background "
            << format_double(coarse.pooled_probs[0]) << "); " << targets.size()
            << " targets detected\n";
}

// ---------------------------------------------------------------------------
// compose
// ---------------------------------------------------------------------------

struct ComposeOptions {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;  // overrides the spec's background seed
  bool force = false;
};

void run_compose(const ComposeOptions& o) {
  if (o.spec.empty()) throw savers::ConfigError("--spec is required");
  if (o.out.empty()) throw savers::ConfigError("--out is required");
  const fs::path spec_path(o.spec);
  const json spec = load_json_file(spec_path);
  for (const auto& [key, value] : spec.items()) {
    (void)value;
    if (key != "canvas_h" && key != "canvas_w" && key != "background" &&
        key != "placements") {
      throw savers::ConfigError("unknown scene spec key '" + key + "'");
    }
  }
  if (!spec.contains("canvas_h") || !spec.contains("canvas_w")) {
    throw savers::ConfigError("scene spec needs canvas_h and canvas_w");
  }
  const auto canvas_h = spec["canvas_h"].get<std::int64_t>();
  const auto canvas_w = spec["canvas_w"].get<std::int64_t>();

  savers::SceneBackground background;
  if (spec.contains("background")) {
    const json& bg = spec["background"];
    const std::string kind = bg.value("kind", "speckle");
    if (kind == "speckle") {
      background.seed = bg.value("seed", 0);
      background.mean = bg.value("mean", 0.1);
    } else if (kind == "clutter") {
      if (!bg.contains("chip")) {
        throw savers::ConfigError("clutter background needs a 'chip' path");
      }
      savers::ChipRecord clutter;
      clutter.image = savers::read_chip_image(
          spec_path.parent_path() / bg["chip"].get<std::string>());
      background.clutter = std::move(clutter);
    } else {
      throw savers::ConfigError("unknown background kind '" + kind + "'");
    }
  }
  if (o.seed) background.seed = *o.seed;

  std::vector<savers::ScenePlacement> placements;
  if (spec.contains("placements")) {
    for (const json& p : spec["placements"]) {
      savers::ScenePlacement placement;
      if (!p.contains("chip") || !p.contains("label")) {
        throw savers::ConfigError("each placement needs 'chip' and 'label'");
      }
      placement.chip.image = savers::read_chip_image(
          spec_path.parent_path() / p["chip"].get<std::string>());
      placement.label = savers::read_label_pgm_auto(
          spec_path.parent_path() / p["label"].get<std::string>());
      placement.top = p.value("top", 0);
      placement.left = p.value("left", 0);
      placements.push_back(std::move(placement));
    }
  }

  const savers::Scene scene =
      savers::compose_scene(canvas_h, canvas_w, background, placements);

  const fs::path out_dir(o.out);
  ensure_output_dir(out_dir, o.force);
  savers::write_pgm(out_dir / "scene.pgm", scene.image);
  savers::write_label_pgm(out_dir / "scene_label.pgm", scene.labels);
  std::cout << "composed " << canvas_h << "x" << canvas_w << " scene with "
            << placements.size() << " placements\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOptions {
  std::string confusion;
  std::string out;
  bool force = false;
};

void run_report(const ReportOptions& o) {
  if (o.confusion.empty()) throw savers::ConfigError("--confusion is required");
  if (o.out.empty()) throw savers::ConfigError("--out is required");
  const savers::ConfusionMatrix cm = savers::read_confusion_csv(o.confusion);
  const fs::path out_dir(o.out);
  ensure_output_dir(out_dir, o.force);
  savers::write_class_metrics_csv(out_dir / "class_metrics.csv", cm);
  savers::write_confusion_csv(out_dir / "confusion_matrix.csv", cm);
  std::cout << "overall accuracy " << format_double(savers::overall_accuracy(cm))
            << " over " << cm.total() << " chips\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SAVERS: coarse and fine SAR target segmentation"};
  app.require_subcommand(1);

  SynthOptions synth;
  std::string synth_config;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic chip dataset");
  synth_cmd->add_option("--config", synth_config, "JSON config file");
  synth_cmd->add_option("--classes", synth.classes, "target class count");
  synth_cmd->add_option("--per-class", synth.per_class, "chips per class");
  synth_cmd->add_option("--size", synth.size, "chip extent in pixels");
  synth_cmd->add_option("--train-frac", synth.train_frac,
                        "fraction of chips in the train split");
  synth_cmd->add_option("--background-mean", synth.background_mean,
                        "speckle mean amplitude");
  synth_cmd->add_option("--seed", synth.seed, "root seed");
  synth_cmd->add_option("--out", synth.out, "output directory");
  synth_cmd->add_flag("--force", synth.force, "reuse a non-empty directory");

  TrainOptions train;
  std::string train_config_path;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  train_cmd->add_option("--config", train_config_path, "JSON config file");
  train_cmd->add_option("--manifest", train.manifest, "dataset manifest CSV");
  train_cmd->add_option("--out", train.out, "output directory");
  train_cmd->add_option("--channels", train.channels, "encoder block channels")
      ->delimiter(',')
      ->expected(4);
  train_cmd->add_option("--mid-channels", train.mid_channels,
                        "4x4 conv channels");
  train_cmd->add_option("--pool-window", train.pool_window,
                        "coarse pooling window in cells (0 = whole grid)");
  train_cmd->add_option("--dropout", train.dropout, "dropout rate");
  train_cmd->add_option("--lr", train.learning_rate, "learning rate");
  train_cmd->add_option("--momentum", train.momentum, "SGD momentum");
  train_cmd->add_option("--epochs", train.epochs, "epoch count");
  train_cmd->add_option("--batch", train.batch_size, "batch size");
  train_cmd->add_option("--seed", train.seed, "root seed");
  train_cmd->add_flag("--force", train.force, "reuse a non-empty directory");

  EvalOptions eval;
  std::string eval_config_path;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--config", eval_config_path, "JSON config file");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "model checkpoint");
  eval_cmd->add_option("--manifest", eval.manifest, "dataset manifest CSV");
  eval_cmd->add_option("--split", eval.split, "manifest split to evaluate");
  eval_cmd->add_option("--out", eval.out, "output directory");
  eval_cmd->add_flag("--force", eval.force, "reuse a non-empty directory");

  InferOptions infer;
  std::string infer_config_path;
  CLI::App* infer_cmd =
      app.add_subcommand("infer", "run inference on one image");
  infer_cmd->add_option("--config", infer_config_path, "JSON config file");
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "model checkpoint");
  infer_cmd->add_option("--image", infer.image, "input image (PGM or chip)");
  infer_cmd->add_option("--out", infer.out, "output directory");
  infer_cmd->add_option("--min-pixels", infer.min_pixels,
                        "minimum detected component size");
  infer_cmd->add_flag("--force", infer.force, "reuse a non-empty directory");

  ComposeOptions compose;
  std::uint64_t compose_seed = 0;
  CLI::App* compose_cmd =
      app.add_subcommand("compose", "compose a multi-target scene");
  compose_cmd->add_option("--spec", compose.spec, "scene spec JSON");
  compose_cmd->add_option("--out", compose.out, "output directory");
  CLI::Option* compose_seed_opt =
      compose_cmd->add_option("--seed", compose_seed, "background seed");
  compose_cmd->add_flag("--force", compose.force,
                        "reuse a non-empty directory");

  ReportOptions report;
  CLI::App* report_cmd = app.add_subcommand(
      "report", "recompute metric tables from a confusion matrix CSV");
  report_cmd->add_option("--confusion", report.confusion,
                         "confusion matrix CSV");
  report_cmd->add_option("--out", report.out, "output directory");
  report_cmd->add_flag("--force", report.force, "reuse a non-empty directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth_cmd->parsed()) {
      if (!synth_config.empty()) {
        apply_json_config(
            *synth_cmd, synth_config,
            {{"classes", [&](const json& v) { synth.classes = v.get<std::int64_t>(); }},
             {"per-class", [&](const json& v) { synth.per_class = v.get<std::int64_t>(); }},
             {"size", [&](const json& v) { synth.size = v.get<std::int64_t>(); }},
             {"train-frac", [&](const json& v) { synth.train_frac = v.get<double>(); }},
             {"background-mean", [&](const json& v) { synth.background_mean = v.get<double>(); }},
             {"seed", [&](const json& v) { synth.seed = v.get<std::uint64_t>(); }},
             {"out", [&](const json& v) { synth.out = v.get<std::string>(); }}});
      }
      run_synth(synth);
    } else if (train_cmd->parsed()) {
      if (!train_config_path.empty()) {
        apply_json_config(
            *train_cmd, train_config_path,
            {{"manifest", [&](const json& v) { train.manifest = v.get<std::string>(); }},
             {"out", [&](const json& v) { train.out = v.get<std::string>(); }},
             {"channels", [&](const json& v) { train.channels = v.get<std::vector<std::int64_t>>(); }},
             {"mid-channels", [&](const json& v) { train.mid_channels = v.get<std::int64_t>(); }},
             {"pool-window", [&](const json& v) { train.pool_window = v.get<std::int64_t>(); }},
             {"dropout", [&](const json& v) { train.dropout = v.get<double>(); }},
             {"lr", [&](const json& v) { train.learning_rate = v.get<double>(); }},
             {"momentum", [&](const json& v) { train.momentum = v.get<double>(); }},
             {"epochs", [&](const json& v) { train.epochs = v.get<std::int64_t>(); }},
             {"batch", [&](const json& v) { train.batch_size = v.get<std::int64_t>(); }},
             {"seed", [&](const json& v) { train.seed = v.get<std::uint64_t>(); }}});
      }
      run_train(train);
    } else if (eval_cmd->parsed()) {
      if (!eval_config_path.empty()) {
        apply_json_config(
            *eval_cmd, eval_config_path,
            {{"checkpoint", [&](const json& v) { eval.checkpoint = v.get<std::string>(); }},
             {"manifest", [&](const json& v) { eval.manifest = v.get<std::string>(); }},
             {"split", [&](const json& v) { eval.split = v.get<std::string>(); }},
             {"out", [&](const json& v) { eval.out = v.get<std::string>(); }}});
      }
      run_eval(eval);
    } else if (infer_cmd->parsed()) {
      if (!infer_config_path.empty()) {
        apply_json_config(
            *infer_cmd, infer_config_path,
            {{"checkpoint", [&](const json& v) { infer.checkpoint = v.get<std::string>(); }},
             {"image", [&](const json& v) { infer.image = v.get<std::string>(); }},
             {"out", [&](const json& v) { infer.out = v.get<std::string>(); }},
             {"min-pixels", [&](const json& v) { infer.min_pixels = v.get<std::int64_t>(); }}});
      }
      run_infer(infer);
    } else if (compose_cmd->parsed()) {
      if (compose_seed_opt->count() > 0) compose.seed = compose_seed;
      run_compose(compose);
    } else if (report_cmd->parsed()) {
      run_report(report);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
