#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mmlf/bev_svg.hpp"
#include "mmlf/checkpoint.hpp"
#include "mmlf/errors.hpp"
#include "mmlf/eval.hpp"
#include "mmlf/kitti_io.hpp"
#include "mmlf/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMissing = 2;  // missing files, frames, models, data
constexpr int kExitParse = 3;    // malformed input data

struct CommonOpts {
  std::string config_path;
};

mmlf::RunConfig load_run_config(const CommonOpts& common) {
  std::string path = common.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("MMLF_CONFIG")) {
      path = env;
    }
  }
  if (path.empty()) {
    return mmlf::RunConfig{};
  }
  return mmlf::load_config(mmlf::read_text_file(path));
}

mmlf::Calibration load_calib_for_frame(const fs::path& calib_dir,
                                       const std::string& frame,
                                       const mmlf::RunConfig& cfg) {
  const fs::path path = calib_dir / (frame + ".txt");
  if (!fs::exists(path)) {
    throw mmlf::ParseError(0, "missing calibration file " + path.string());
  }
  mmlf::Calibration calib = mmlf::parse_calib(mmlf::read_text_file(path));
  calib.image_width = cfg.image_width;
  calib.image_height = cfg.image_height;
  return calib;
}

int report_parse_error(const fs::path& file, const mmlf::ParseError& e) {
  std::cerr << "error: " << file.string() << ": " << e.what() << "\n";
  return kExitParse;
}

// ---------------------------------------------------------------- fuse --

struct FuseOpts {
  CommonOpts common;
  std::string det3d_dir, det2d_dir, calib_dir, model_path, out_dir;
  double u_max = -1.0, conf = -1.0, nms = -1.0;
  unsigned jobs = 1;
};

int run_fuse(const FuseOpts& opt) {
  mmlf::RunConfig cfg;
  mmlf::FusionParams params;
  try {
    cfg = load_run_config(opt.common);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  if (opt.u_max >= 0.0) cfg.pipeline.u_max = opt.u_max;
  if (opt.conf >= 0.0) cfg.pipeline.conf_threshold = opt.conf;
  if (opt.nms >= 0.0) cfg.pipeline.nms_iou = opt.nms;

  if (!fs::exists(opt.model_path)) {
    std::cerr << "error: model file " << opt.model_path << " not found\n";
    return kExitMissing;
  }
  try {
    params = mmlf::load_checkpoint(opt.model_path);
  } catch (const mmlf::ParseError& e) {
    return report_parse_error(opt.model_path, e);
  }
  if (params.num_classes != cfg.classes.size()) {
    std::cerr << "error: checkpoint has " << params.num_classes
              << " classes, configuration names " << cfg.classes.size()
              << "\n";
    return kExitMissing;
  }

  std::vector<std::string> frames;
  try {
    frames = mmlf::list_frame_ids(opt.det3d_dir);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  }
  fs::create_directories(opt.out_dir);

  std::vector<std::size_t> counts(frames.size(), 0);
  std::atomic<std::size_t> next{0};
  std::atomic<int> failure{kExitOk};
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= frames.size() || failure.load() != kExitOk) {
        return;
      }
      const std::string& frame = frames[idx];
      const fs::path det3d_path = fs::path(opt.det3d_dir) / (frame + ".txt");
      const fs::path det2d_path = fs::path(opt.det2d_dir) / (frame + ".txt");
      fs::path current = det3d_path;
      try {
        const auto records = mmlf::parse_det3d(
            mmlf::read_text_file(det3d_path), cfg.classes);
        const auto dets3d =
            mmlf::to_detections3d(records, cfg.classes.size());
        std::vector<mmlf::Detection2D> dets2d;
        if (fs::exists(det2d_path)) {
          current = det2d_path;
          dets2d = mmlf::parse_det2d(mmlf::read_text_file(det2d_path),
                                     cfg.classes);
        }
        current = fs::path(opt.calib_dir) / (frame + ".txt");
        const auto calib = load_calib_for_frame(opt.calib_dir, frame, cfg);

        const auto fused =
            mmlf::fuse_frame(dets3d, dets2d, calib, params, cfg.pipeline);
        const auto text = mmlf::write_results(fused, calib, cfg.classes);
        mmlf::write_text_file_atomic(
            fs::path(opt.out_dir) / (frame + ".txt"), text.results);
        mmlf::write_text_file_atomic(
            fs::path(opt.out_dir) / (frame + ".unc.txt"),
            text.uncertainties);
        counts[idx] = fused.size();
      } catch (const mmlf::ParseError& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        report_parse_error(current, e);
        failure.store(kExitParse);
        return;
      } catch (const mmlf::Error& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        std::cerr << "error: frame " << frame << ": " << e.what() << "\n";
        failure.store(kExitParse);
        return;
      }
    }
  };

  const unsigned jobs = std::max(1u, opt.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back(worker);
    }
    for (auto& t : pool) {
      t.join();
    }
  }
  if (failure.load() != kExitOk) {
    return failure.load();
  }

  std::size_t total = 0;
  for (std::size_t idx = 0; idx < frames.size(); ++idx) {
    std::cout << frames[idx] << " " << counts[idx] << "\n";
    total += counts[idx];
  }
  std::cout << "total " << total << " detections in " << frames.size()
            << " frames\n";
  return kExitOk;
}

// --------------------------------------------------------------- train --

struct TrainOpts {
  CommonOpts common;
  std::string det3d_dir, det2d_dir, calib_dir, labels_dir, out_model;
  long epochs = -1;
  long long seed = -1;
};

int run_train(const TrainOpts& opt) {
  mmlf::RunConfig cfg;
  try {
    cfg = load_run_config(opt.common);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  if (opt.epochs >= 0) cfg.epochs = static_cast<std::size_t>(opt.epochs);
  if (opt.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed);

  std::vector<std::string> frames;
  try {
    frames = mmlf::list_frame_ids(opt.det3d_dir);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  }

  std::vector<mmlf::TrainingFrame> training;
  fs::path current;
  try {
    for (const std::string& frame : frames) {
      mmlf::TrainingFrame tf;
      tf.id = frame;
      current = fs::path(opt.det3d_dir) / (frame + ".txt");
      const auto records =
          mmlf::parse_det3d(mmlf::read_text_file(current), cfg.classes);
      tf.dets3d = mmlf::to_detections3d(records, cfg.classes.size());
      const fs::path det2d_path = fs::path(opt.det2d_dir) / (frame + ".txt");
      if (fs::exists(det2d_path)) {
        current = det2d_path;
        tf.dets2d = mmlf::parse_det2d(mmlf::read_text_file(det2d_path),
                                      cfg.classes);
      }
      current = fs::path(opt.calib_dir) / (frame + ".txt");
      tf.calib = load_calib_for_frame(opt.calib_dir, frame, cfg);

      const fs::path label_path = fs::path(opt.labels_dir) / (frame + ".txt");
      if (fs::exists(label_path)) {
        current = label_path;
        for (const auto& gt :
             mmlf::parse_gt_labels(mmlf::read_text_file(label_path))) {
          if (gt.dont_care) continue;
          const int cls = mmlf::class_index(cfg.classes, gt.type);
          if (cls < 0) continue;
          tf.gts.push_back({gt.bbox, cls});
        }
      }
      training.push_back(std::move(tf));
    }
  } catch (const mmlf::ParseError& e) {
    return report_parse_error(current, e);
  }

  std::size_t with_gt = 0;
  for (const auto& tf : training) {
    if (!tf.gts.empty()) ++with_gt;
  }
  if (with_gt == 0) {
    std::cerr << "error: no frames with ground truth to train on\n";
    return kExitMissing;
  }

  mmlf::TrainConfig train_cfg;
  train_cfg.pipeline = cfg.pipeline;
  train_cfg.target_iou_by_class = mmlf::target_iou_table(cfg);
  train_cfg.num_classes = cfg.classes.size();
  train_cfg.epochs = cfg.epochs;
  train_cfg.seed = cfg.seed;
  train_cfg.lr = cfg.lr;

  const auto result = mmlf::train(training, train_cfg);
  for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
    std::printf("epoch=%zu loss=%.6f\n", e + 1, result.epoch_losses[e]);
  }
  if (result.skipped_frames > 0) {
    std::cerr << "warning: skipped " << result.skipped_frames
              << " frames without ground truth\n";
  }
  mmlf::save_checkpoint(opt.out_model, result.params);
  return kExitOk;
}

// ---------------------------------------------------------------- eval --

struct EvalOpts {
  CommonOpts common;
  std::string gt_dir, pred_dir;
  std::string metric = "3d";
  std::string classes_csv;
  int interp = 11;
  std::string json_path = "eval_report.json";
  unsigned jobs = 1;
};

int run_eval(const EvalOpts& opt) {
  mmlf::RunConfig cfg;
  try {
    cfg = load_run_config(opt.common);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  std::vector<std::string> classes = cfg.classes;
  if (!opt.classes_csv.empty()) {
    classes.clear();
    std::istringstream cs(opt.classes_csv);
    std::string name;
    while (std::getline(cs, name, ',')) {
      if (!name.empty()) classes.push_back(name);
    }
  }

  mmlf::Metric metric;
  try {
    metric = mmlf::metric_from_name(opt.metric);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  }

  std::vector<std::string> frames;
  try {
    frames = mmlf::list_frame_ids(opt.gt_dir);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  }

  std::vector<std::vector<mmlf::EvalDetection>> preds(frames.size());
  std::vector<std::vector<mmlf::EvalGroundTruth>> gts(frames.size());
  fs::path current;
  try {
    for (std::size_t f = 0; f < frames.size(); ++f) {
      current = fs::path(opt.gt_dir) / (frames[f] + ".txt");
      for (const auto& gt :
           mmlf::parse_gt_labels(mmlf::read_text_file(current))) {
        mmlf::EvalGroundTruth g;
        g.bbox = gt.bbox;
        g.box = gt.box;
        g.alpha = gt.alpha;
        g.truncation = gt.truncation;
        g.occlusion = gt.occlusion;
        g.dont_care = gt.dont_care;
        g.class_label =
            gt.dont_care ? -1 : mmlf::class_index(cfg.classes, gt.type);
        if (!gt.dont_care && g.class_label < 0) {
          continue;  // class outside the configured list
        }
        gts[f].push_back(g);
      }
      const fs::path pred_path =
          fs::path(opt.pred_dir) / (frames[f] + ".txt");
      if (!fs::exists(pred_path)) {
        continue;
      }
      current = pred_path;
      for (const auto& det : mmlf::parse_det3d(
               mmlf::read_text_file(pred_path), cfg.classes)) {
        mmlf::EvalDetection d;
        d.bbox = det.bbox;
        d.box = det.box;
        d.alpha = det.alpha;
        d.score = det.objectness;
        d.class_label = det.class_label;
        preds[f].push_back(d);
      }
    }
  } catch (const mmlf::ParseError& e) {
    return report_parse_error(current, e);
  }

  const auto& buckets = mmlf::standard_buckets();
  std::vector<std::vector<double>> table(
      classes.size(), std::vector<double>(buckets.size(), 0.0));
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= classes.size() * buckets.size()) return;
      const std::size_t c = idx / buckets.size();
      const std::size_t b = idx % buckets.size();
      const int label = mmlf::class_index(cfg.classes, classes[c]);
      table[c][b] =
          label < 0 ? 0.0
                    : mmlf::evaluate(preds, gts, metric, label, classes[c],
                                     buckets[b], opt.interp);
    }
  };
  const unsigned jobs = std::max(1u, opt.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::printf("%-12s", ("AP-" + opt.metric).c_str());
  for (const auto& bucket : buckets) {
    std::printf(" %10s", bucket.name.c_str());
  }
  std::printf("\n");
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::printf("%-12s", classes[c].c_str());
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      std::printf(" %10.2f", table[c][b]);
    }
    std::printf("\n");
  }

  if (!opt.json_path.empty()) {
    json report;
    report["metric"] = opt.metric;
    report["interp"] = opt.interp;
    for (std::size_t c = 0; c < classes.size(); ++c) {
      for (std::size_t b = 0; b < buckets.size(); ++b) {
        report["ap"][classes[c]][buckets[b].name] = table[c][b];
      }
    }
    mmlf::write_text_file_atomic(opt.json_path, report.dump(2) + "\n");
  }
  return kExitOk;
}

// --------------------------------------------------------------- stats --

struct StatsOpts {
  CommonOpts common;
  std::string pred_dir;
};

int run_stats(const StatsOpts& opt) {
  mmlf::RunConfig cfg;
  try {
    cfg = load_run_config(opt.common);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  std::vector<std::string> frames;
  try {
    frames = mmlf::list_frame_ids(opt.pred_dir);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  }

  std::vector<mmlf::LabeledUncertainty> dets;
  fs::path current;
  try {
    for (const std::string& frame : frames) {
      current = fs::path(opt.pred_dir) / (frame + ".txt");
      const auto records =
          mmlf::parse_det3d(mmlf::read_text_file(current), cfg.classes);
      const fs::path sidecar_path =
          fs::path(opt.pred_dir) / (frame + ".unc.txt");
      if (!fs::exists(sidecar_path)) {
        std::cerr << "error: missing uncertainty sidecar "
                  << sidecar_path.string() << "\n";
        return kExitMissing;
      }
      current = sidecar_path;
      const auto sidecar = mmlf::parse_uncertainty_sidecar(
          mmlf::read_text_file(sidecar_path));
      for (const auto& [index, u] : sidecar) {
        if (index >= records.size()) {
          throw mmlf::ParseError(
              0, "sidecar index " + std::to_string(index) + " out of range");
        }
        dets.push_back({records[index].class_label, u});
      }
    }
  } catch (const mmlf::ParseError& e) {
    return report_parse_error(current, e);
  }

  const auto means = mmlf::mean_uncertainty_per_class(dets);
  std::printf("%-12s %12s\n", "class", "mean-unc");
  for (const auto& [label, mean] : means) {
    const std::string name =
        label >= 0 && static_cast<std::size_t>(label) < cfg.classes.size()
            ? cfg.classes[static_cast<std::size_t>(label)]
            : "unknown";
    std::printf("%-12s %12.5f\n", name.c_str(), mean);
  }
  return kExitOk;
}

// ---------------------------------------------------------------- plot --

struct PlotOpts {
  CommonOpts common;
  std::string pred_dir, frame, out_path, gt_dir;
};

int run_plot(const PlotOpts& opt) {
  mmlf::RunConfig cfg;
  try {
    cfg = load_run_config(opt.common);
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  const fs::path pred_path = fs::path(opt.pred_dir) / (opt.frame + ".txt");
  if (!fs::exists(pred_path)) {
    std::cerr << "error: frame " << opt.frame << " not found in "
              << opt.pred_dir << "\n";
    return kExitMissing;
  }

  std::vector<mmlf::BevPlotBox> boxes;
  fs::path current = pred_path;
  try {
    const auto records =
        mmlf::parse_det3d(mmlf::read_text_file(pred_path), cfg.classes);
    std::map<std::size_t, double> unc;
    const fs::path sidecar_path =
        fs::path(opt.pred_dir) / (opt.frame + ".unc.txt");
    if (fs::exists(sidecar_path)) {
      current = sidecar_path;
      for (const auto& [index, u] : mmlf::parse_uncertainty_sidecar(
               mmlf::read_text_file(sidecar_path))) {
        unc[index] = u;
      }
    }
    for (std::size_t k = 0; k < records.size(); ++k) {
      mmlf::BevPlotBox box;
      box.box = records[k].box;
      box.class_label = records[k].class_label;
      if (auto it = unc.find(k); it != unc.end()) {
        box.uncertainty = it->second;
      }
      boxes.push_back(box);
    }
    if (!opt.gt_dir.empty()) {
      const fs::path gt_path = fs::path(opt.gt_dir) / (opt.frame + ".txt");
      if (fs::exists(gt_path)) {
        current = gt_path;
        for (const auto& gt :
             mmlf::parse_gt_labels(mmlf::read_text_file(gt_path))) {
          if (gt.dont_care) continue;
          mmlf::BevPlotBox box;
          box.box = gt.box;
          box.class_label = mmlf::class_index(cfg.classes, gt.type);
          box.is_ground_truth = true;
          boxes.push_back(box);
        }
      }
    }
  } catch (const mmlf::ParseError& e) {
    return report_parse_error(current, e);
  }

  mmlf::write_text_file_atomic(opt.out_path, mmlf::render_bev_svg(boxes));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "mmlf: evidential late fusion of 2D and 3D detections with "
      "per-detection uncertainty"};
  app.require_subcommand(1);

  FuseOpts fuse_opts;
  auto* fuse = app.add_subcommand(
      "fuse", "Fuse per-frame 2D and 3D detections into 3D results");
  fuse->add_option("--det3d", fuse_opts.det3d_dir, "3D detection directory")
      ->required();
  fuse->add_option("--det2d", fuse_opts.det2d_dir, "2D detection directory")
      ->required();
  fuse->add_option("--calib", fuse_opts.calib_dir, "calibration directory")
      ->required();
  fuse->add_option("--model", fuse_opts.model_path, "checkpoint file")
      ->required();
  fuse->add_option("--out", fuse_opts.out_dir, "output directory")
      ->required();
  fuse->add_option("--config", fuse_opts.common.config_path, "config file");
  fuse->add_option("--u-max", fuse_opts.u_max,
                   "uncertainty filter threshold override")
      ->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--conf", fuse_opts.conf, "confidence threshold override")
      ->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--nms", fuse_opts.nms, "NMS IoU threshold override")
      ->check(CLI::Range(0.0, 1.0));
  fuse->add_option("--jobs", fuse_opts.jobs, "worker threads")
      ->check(CLI::Range(1u, 256u));

  TrainOpts train_opts;
  auto* train = app.add_subcommand(
      "train", "Train the evidence heads and the score network");
  train->add_option("--det3d", train_opts.det3d_dir, "3D detection directory")
      ->required();
  train->add_option("--det2d", train_opts.det2d_dir, "2D detection directory")
      ->required();
  train->add_option("--calib", train_opts.calib_dir, "calibration directory")
      ->required();
  train->add_option("--labels", train_opts.labels_dir,
                    "ground-truth label directory")
      ->required();
  train->add_option("--out-model", train_opts.out_model,
                    "checkpoint output path")
      ->required();
  train->add_option("--epochs", train_opts.epochs, "training epochs")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--seed", train_opts.seed, "initialization seed")
      ->check(CLI::NonNegativeNumber);
  train->add_option("--config", train_opts.common.config_path, "config file");

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand("eval", "Detection AP/AOS evaluation");
  eval->add_option("--gt", eval_opts.gt_dir, "ground-truth label directory")
      ->required();
  eval->add_option("--pred", eval_opts.pred_dir, "prediction directory")
      ->required();
  eval->add_option("--metric", eval_opts.metric, "2d | aos | bev | 3d")
      ->required();
  eval->add_option("--classes", eval_opts.classes_csv,
                   "comma-separated class names (default: configured list)");
  eval->add_option("--interp", eval_opts.interp, "11 or 40 point AP")
      ->check(CLI::IsMember({11, 40}));
  eval->add_option("--json", eval_opts.json_path,
                   "JSON report path (empty to skip)");
  eval->add_option("--config", eval_opts.common.config_path, "config file");
  eval->add_option("--jobs", eval_opts.jobs, "worker threads")
      ->check(CLI::Range(1u, 256u));

  StatsOpts stats_opts;
  auto* stats = app.add_subcommand(
      "stats", "Per-class mean uncertainty of fused results");
  stats->add_option("--pred", stats_opts.pred_dir, "prediction directory")
      ->required();
  stats->add_option("--config", stats_opts.common.config_path, "config file");

  PlotOpts plot_opts;
  auto* plot = app.add_subcommand("plot", "Bird's-eye-view SVG of one frame");
  plot->add_option("--pred", plot_opts.pred_dir, "prediction directory")
      ->required();
  plot->add_option("--frame", plot_opts.frame, "frame id, e.g. 000012")
      ->required();
  plot->add_option("--out", plot_opts.out_path, "output SVG path")
      ->required();
  plot->add_option("--gt", plot_opts.gt_dir, "optional ground-truth overlay");
  plot->add_option("--config", plot_opts.common.config_path, "config file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fuse->parsed()) return run_fuse(fuse_opts);
    if (train->parsed()) return run_train(train_opts);
    if (eval->parsed()) return run_eval(eval_opts);
    if (stats->parsed()) return run_stats(stats_opts);
    if (plot->parsed()) return run_plot(plot_opts);
  } catch (const mmlf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const mmlf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissing;
  }
  return kExitOk;
}
