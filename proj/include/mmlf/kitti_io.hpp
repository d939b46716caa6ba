#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmlf/geometry.hpp"
#include "mmlf/matching.hpp"
#include "mmlf/pipeline.hpp"

namespace mmlf {

// One 15-field label line. `box` folds dimensions, location and rotation_y
// into the usual bottom-center convention.
struct GroundTruthRecord {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  Box2D bbox;
  Box3D box;
  bool dont_care = false;
};

// One detector-output line: the 15 label fields plus an objectness score
// and, in the extended layout, one score per class. class_scores stays
// empty for plain 16-field result lines; class_label is -1 for types
// outside the configured class list.
struct DetectionRecord3D {
  std::string type;
  double truncation = 0.0;
  int occlusion = 0;
  double alpha = 0.0;
  Box2D bbox;
  Box3D box;
  double objectness = 0.0;
  std::vector<double> class_scores;
  int class_label = -1;
};

struct ParseStats {
  std::size_t skipped_unknown_class = 0;
};

// Run configuration: pipeline thresholds plus training and I/O settings.
// Unknown keys are rejected, missing keys keep these defaults.
struct RunConfig {
  PipelineConfig pipeline;
  std::size_t epochs = 20;
  std::uint64_t seed = 0;
  double lr = 0.003;
  double image_width = 1242.0;
  double image_height = 375.0;
  std::vector<std::string> classes = {"Car", "Pedestrian", "Cyclist"};
};

// `KEY: v1 v2 ...` lines; requires P2 (12 values), R0_rect (9) and
// Tr_velo_to_cam (12), accepts the optional image_width/image_height
// extension and ignores other keys. Throws ParseError.
Calibration parse_calib(const std::string& text);
std::string write_calib(const Calibration& c);

// 15-field KITTI label lines, file order preserved, DontCare rows flagged.
std::vector<GroundTruthRecord> parse_gt_labels(const std::string& text);
std::string write_gt_labels(std::span<const GroundTruthRecord> records);

// Extended 3D detector lines (16 + H fields) or plain result lines (16
// fields). Types outside `class_names` are skipped and counted.
std::vector<DetectionRecord3D> parse_det3d(
    const std::string& text, std::span<const std::string> class_names,
    ParseStats* stats = nullptr);
std::string write_det3d(std::span<const DetectionRecord3D> records);

// Adapter for the fusion pipeline. Records without class-score columns get
// objectness * onehot(class_label).
std::vector<Detection3D> to_detections3d(
    std::span<const DetectionRecord3D> records, std::size_t num_classes);

// `class x1 y1 x2 y2 objectness s1 ... sH` lines.
std::vector<Detection2D> parse_det2d(const std::string& text,
                                     std::span<const std::string> class_names,
                                     ParseStats* stats = nullptr);
std::string write_det2d(std::span<const Detection2D> dets,
                        std::span<const std::string> class_names);

// KITTI result lines (15 label fields + score, alpha recomputed as
// ry - atan2(x, z), bbox from the calibrated projection) plus the
// uncertainty sidecar text (`<line-index> <uncertainty>` per line).
struct ResultsText {
  std::string results;
  std::string uncertainties;
};
ResultsText write_results(std::span<const FusedDetection> dets,
                          const Calibration& calib,
                          std::span<const std::string> class_names);

// `<line-index> <uncertainty>` sidecar lines, index into the result file.
std::vector<std::pair<std::size_t, double>> parse_uncertainty_sidecar(
    const std::string& text);

// Line-oriented `key = value` configuration with `#` comments.
// Throws ConfigError for unknown keys and out-of-range values.
RunConfig load_config(const std::string& text);
std::string write_config(const RunConfig& cfg);

// Case-insensitive index into cfg.classes, -1 when absent.
int class_index(std::span<const std::string> class_names,
                const std::string& type);

// Target-assignment IoU threshold per class index: target_iou_car for the
// class named "car", target_iou_small otherwise.
std::vector<double> target_iou_table(const RunConfig& cfg);

// Sorted ids of `NNNNNN.txt` files in a directory.
std::vector<std::string> list_frame_ids(const std::filesystem::path& dir);

std::string read_text_file(const std::filesystem::path& path);

// Writes via a temporary file in the same directory, then renames.
void write_text_file_atomic(const std::filesystem::path& path,
                            const std::string& content);

}  // namespace mmlf
