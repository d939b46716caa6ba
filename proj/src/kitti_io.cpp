#include "mmlf/kitti_io.hpp"

#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mmlf/errors.hpp"

namespace mmlf {

namespace {

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) {
    out.push_back(tok);
  }
  return out;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

double parse_double(const std::string& tok, std::size_t line) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end != begin + tok.size() || tok.empty()) {
    throw ParseError(line, "not a number: '" + tok + "'");
  }
  if (!std::isfinite(v)) {
    throw ParseError(line, "non-finite value: '" + tok + "'");
  }
  return v;
}

int parse_occlusion(const std::string& tok, std::size_t line) {
  const double v = parse_double(tok, line);
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || r < -1.0 || r > 3.0) {
    throw ParseError(line, "occlusion must be an integer in [-1, 3], got '" +
                               tok + "'");
  }
  return static_cast<int>(r);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

std::string fmt_full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Shared 15-field label prefix: type trunc occ alpha bbox(4) hwl xyz ry.
template <typename Record>
void parse_label_prefix(const std::vector<std::string>& tok, std::size_t line,
                        Record& r) {
  r.type = tok[0];
  r.truncation = parse_double(tok[1], line);
  r.occlusion = parse_occlusion(tok[2], line);
  r.alpha = parse_double(tok[3], line);
  r.bbox = Box2D{parse_double(tok[4], line), parse_double(tok[5], line),
                 parse_double(tok[6], line), parse_double(tok[7], line)};
  r.box.h = parse_double(tok[8], line);
  r.box.w = parse_double(tok[9], line);
  r.box.l = parse_double(tok[10], line);
  r.box.x = parse_double(tok[11], line);
  r.box.y = parse_double(tok[12], line);
  r.box.z = parse_double(tok[13], line);
  r.box.ry = parse_double(tok[14], line);
}

template <typename Record>
std::string format_label_prefix(const Record& r) {
  std::string out = r.type;
  for (double v : {r.truncation, static_cast<double>(r.occlusion), r.alpha,
                   r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2, r.box.h,
                   r.box.w, r.box.l, r.box.x, r.box.y, r.box.z, r.box.ry}) {
    out += ' ';
    out += fmt(v);
  }
  return out;
}

}  // namespace

Calibration parse_calib(const std::string& text) {
  Calibration c;
  bool have_p2 = false, have_r0 = false, have_tr = false;

  std::istringstream iss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(iss, raw)) {
    ++line_no;
    if (is_blank(raw)) {
      continue;
    }
    const auto colon = raw.find(':');
    if (colon == std::string::npos) {
      throw ParseError(line_no, "expected 'KEY: values...'");
    }
    const std::string key = raw.substr(0, colon);
    const auto tok = split_tokens(raw.substr(colon + 1));
    auto values = [&](std::size_t n) {
      if (tok.size() != n) {
        throw ParseError(line_no, key + " needs " + std::to_string(n) +
                                      " values, got " +
                                      std::to_string(tok.size()));
      }
      std::vector<double> v(n);
      for (std::size_t k = 0; k < n; ++k) {
        v[k] = parse_double(tok[k], line_no);
      }
      return v;
    };

    if (key == "P2") {
      const auto v = values(12);
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 4; ++k) c.p2[r][k] = v[r * 4 + k];
      have_p2 = true;
    } else if (key == "R0_rect") {
      const auto v = values(9);
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 3; ++k) c.r0[r][k] = v[r * 3 + k];
      have_r0 = true;
    } else if (key == "Tr_velo_to_cam") {
      const auto v = values(12);
      for (int r = 0; r < 3; ++r)
        for (int k = 0; k < 4; ++k) c.tr_velo_to_cam[r][k] = v[r * 4 + k];
      have_tr = true;
    } else if (key == "image_width") {
      c.image_width = values(1)[0];
      if (c.image_width <= 0) {
        throw ParseError(line_no, "image_width must be positive");
      }
    } else if (key == "image_height") {
      c.image_height = values(1)[0];
      if (c.image_height <= 0) {
        throw ParseError(line_no, "image_height must be positive");
      }
    }
    // other keys (P0, P1, P3, Tr_imu_to_velo, ...) are ignored
  }
  if (!have_p2) throw ParseError(0, "missing calibration key P2");
  if (!have_r0) throw ParseError(0, "missing calibration key R0_rect");
  if (!have_tr) throw ParseError(0, "missing calibration key Tr_velo_to_cam");
  return c;
}

std::string write_calib(const Calibration& c) {
  std::string out = "P2:";
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 4; ++k) out += ' ' + fmt_full(c.p2[r][k]);
  out += "\nR0_rect:";
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 3; ++k) out += ' ' + fmt_full(c.r0[r][k]);
  out += "\nTr_velo_to_cam:";
  for (int r = 0; r < 3; ++r)
    for (int k = 0; k < 4; ++k) out += ' ' + fmt_full(c.tr_velo_to_cam[r][k]);
  out += "\nimage_width: " + fmt_full(c.image_width);
  out += "\nimage_height: " + fmt_full(c.image_height);
  out += '\n';
  return out;
}

std::vector<GroundTruthRecord> parse_gt_labels(const std::string& text) {
  std::vector<GroundTruthRecord> records;
  std::istringstream iss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(iss, raw)) {
    ++line_no;
    if (is_blank(raw)) continue;
    const auto tok = split_tokens(raw);
    if (tok.size() != 15) {
      throw ParseError(line_no, "label line needs 15 fields, got " +
                                    std::to_string(tok.size()));
    }
    GroundTruthRecord r;
    parse_label_prefix(tok, line_no, r);
    r.dont_care = r.type == "DontCare";
    records.push_back(std::move(r));
  }
  return records;
}

std::string write_gt_labels(std::span<const GroundTruthRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += format_label_prefix(r);
    out += '\n';
  }
  return out;
}

std::vector<DetectionRecord3D> parse_det3d(
    const std::string& text, std::span<const std::string> class_names,
    ParseStats* stats) {
  const std::size_t H = class_names.size();
  std::vector<DetectionRecord3D> records;
  std::istringstream iss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(iss, raw)) {
    ++line_no;
    if (is_blank(raw)) continue;
    const auto tok = split_tokens(raw);
    if (tok.size() != 16 && tok.size() != 16 + H) {
      throw ParseError(line_no, "detection line needs 16 or " +
                                    std::to_string(16 + H) +
                                    " fields, got " +
                                    std::to_string(tok.size()));
    }
    DetectionRecord3D r;
    parse_label_prefix(tok, line_no, r);
    r.objectness = parse_double(tok[15], line_no);
    if (tok.size() == 16 + H) {
      r.class_scores.resize(H);
      for (std::size_t h = 0; h < H; ++h) {
        r.class_scores[h] = parse_double(tok[16 + h], line_no);
        if (r.class_scores[h] < 0.0) {
          throw ParseError(line_no, "class scores must be >= 0");
        }
      }
    }
    r.class_label = class_index(class_names, r.type);
    if (r.class_label < 0) {
      if (stats) ++stats->skipped_unknown_class;
      continue;
    }
    records.push_back(std::move(r));
  }
  return records;
}

std::string write_det3d(std::span<const DetectionRecord3D> records) {
  std::string out;
  for (const auto& r : records) {
    out += format_label_prefix(r);
    out += ' ';
    out += fmt(r.objectness);
    for (double s : r.class_scores) {
      out += ' ';
      out += fmt(s);
    }
    out += '\n';
  }
  return out;
}

std::vector<Detection3D> to_detections3d(
    std::span<const DetectionRecord3D> records, std::size_t num_classes) {
  std::vector<Detection3D> dets;
  dets.reserve(records.size());
  for (const auto& r : records) {
    Detection3D d;
    d.box = r.box;
    d.objectness = r.objectness;
    d.class_label = r.class_label;
    if (r.class_scores.empty()) {
      d.class_scores.assign(num_classes, 0.0);
      if (r.class_label >= 0 &&
          static_cast<std::size_t>(r.class_label) < num_classes) {
        d.class_scores[static_cast<std::size_t>(r.class_label)] =
            r.objectness;
      }
    } else {
      d.class_scores = r.class_scores;
    }
    dets.push_back(std::move(d));
  }
  return dets;
}

std::vector<Detection2D> parse_det2d(const std::string& text,
                                     std::span<const std::string> class_names,
                                     ParseStats* stats) {
  const std::size_t H = class_names.size();
  std::vector<Detection2D> dets;
  std::istringstream iss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(iss, raw)) {
    ++line_no;
    if (is_blank(raw)) continue;
    const auto tok = split_tokens(raw);
    if (tok.size() != 6 + H) {
      throw ParseError(line_no, "2D detection line needs " +
                                    std::to_string(6 + H) + " fields, got " +
                                    std::to_string(tok.size()));
    }
    Detection2D d;
    d.box = Box2D{parse_double(tok[1], line_no), parse_double(tok[2], line_no),
                  parse_double(tok[3], line_no),
                  parse_double(tok[4], line_no)};
    d.objectness = parse_double(tok[5], line_no);
    d.class_scores.resize(H);
    for (std::size_t h = 0; h < H; ++h) {
      d.class_scores[h] = parse_double(tok[6 + h], line_no);
      if (d.class_scores[h] < 0.0) {
        throw ParseError(line_no, "class scores must be >= 0");
      }
    }
    d.class_label = class_index(class_names, tok[0]);
    if (d.class_label < 0) {
      if (stats) ++stats->skipped_unknown_class;
      continue;
    }
    dets.push_back(std::move(d));
  }
  return dets;
}

std::string write_det2d(std::span<const Detection2D> dets,
                        std::span<const std::string> class_names) {
  std::string out;
  for (const auto& d : dets) {
    out += class_names[static_cast<std::size_t>(d.class_label)];
    for (double v : {d.box.x1, d.box.y1, d.box.x2, d.box.y2, d.objectness}) {
      out += ' ';
      out += fmt(v);
    }
    for (double s : d.class_scores) {
      out += ' ';
      out += fmt(s);
    }
    out += '\n';
  }
  return out;
}

ResultsText write_results(std::span<const FusedDetection> dets,
                          const Calibration& calib,
                          std::span<const std::string> class_names) {
  ResultsText out;
  std::size_t index = 0;
  for (const auto& d : dets) {
    const auto proj = project_to_image(d.box3d, calib);
    const Box2D bbox = proj.value_or(Box2D{});
    const double alpha = d.box3d.ry - std::atan2(d.box3d.x, d.box3d.z);

    std::string line =
        class_names[static_cast<std::size_t>(d.class_label)] + " -1 -1";
    for (double v : {alpha, bbox.x1, bbox.y1, bbox.x2, bbox.y2, d.box3d.h,
                     d.box3d.w, d.box3d.l, d.box3d.x, d.box3d.y, d.box3d.z,
                     d.box3d.ry, d.score}) {
      line += ' ';
      line += fmt(v);
    }
    out.results += line;
    out.results += '\n';

    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu %.6f\n", index, d.uncertainty);
    out.uncertainties += buf;
    ++index;
  }
  return out;
}

std::vector<std::pair<std::size_t, double>> parse_uncertainty_sidecar(
    const std::string& text) {
  std::vector<std::pair<std::size_t, double>> out;
  std::istringstream iss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(iss, raw)) {
    ++line_no;
    if (is_blank(raw)) continue;
    const auto tok = split_tokens(raw);
    if (tok.size() != 2) {
      throw ParseError(line_no, "sidecar line needs 2 fields");
    }
    const double idx = parse_double(tok[0], line_no);
    if (idx < 0 || std::abs(idx - std::round(idx)) > 1e-9) {
      throw ParseError(line_no, "bad line index '" + tok[0] + "'");
    }
    out.emplace_back(static_cast<std::size_t>(idx),
                     parse_double(tok[1], line_no));
  }
  return out;
}

namespace {

void check_range(const std::string& key, double v, double lo, double hi,
                 bool lo_open = false, bool hi_open = false) {
  const bool below = lo_open ? v <= lo : v < lo;
  const bool above = hi_open ? v >= hi : v > hi;
  if (below || above) {
    throw ConfigError(key, "value " + std::to_string(v) + " out of range");
  }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) {
      throw std::invalid_argument("neg");
    }
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a non-negative integer, got '" + value +
                               "'");
  }
}

double parse_config_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (value.empty() || end != begin + value.size() || !std::isfinite(v)) {
    throw ConfigError(key, "expected a number, got '" + value + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

RunConfig load_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream iss(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(iss, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) {
      raw = raw.substr(0, hash);
    }
    if (is_blank(raw)) continue;
    const auto eq = raw.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no),
                        "expected 'key = value'");
    }
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));

    if (key == "conf_threshold") {
      cfg.pipeline.conf_threshold = parse_config_double(key, value);
      check_range(key, cfg.pipeline.conf_threshold, 0.0, 1.0, true, false);
    } else if (key == "nms_iou") {
      cfg.pipeline.nms_iou = parse_config_double(key, value);
      check_range(key, cfg.pipeline.nms_iou, 0.0, 1.0);
    } else if (key == "u_max") {
      cfg.pipeline.u_max = parse_config_double(key, value);
      check_range(key, cfg.pipeline.u_max, 0.0, 1.0, true, false);
    } else if (key == "max_range") {
      cfg.pipeline.max_range = parse_config_double(key, value);
      check_range(key, cfg.pipeline.max_range, 0.0, 1e9, true, false);
    } else if (key == "pairing_floor") {
      cfg.pipeline.pairing_floor = parse_config_double(key, value);
      check_range(key, cfg.pipeline.pairing_floor, 0.0, 1.0, false, true);
    } else if (key == "target_iou_car") {
      cfg.pipeline.target_iou_car = parse_config_double(key, value);
      check_range(key, cfg.pipeline.target_iou_car, 0.0, 1.0, true, false);
    } else if (key == "target_iou_small") {
      cfg.pipeline.target_iou_small = parse_config_double(key, value);
      check_range(key, cfg.pipeline.target_iou_small, 0.0, 1.0, true, false);
    } else if (key == "lambda_anneal_epochs") {
      cfg.pipeline.lambda_anneal_epochs = parse_count(key, value);
    } else if (key == "evidence_scale") {
      cfg.pipeline.evidence_scale = parse_config_double(key, value);
      check_range(key, cfg.pipeline.evidence_scale, 0.0, 1e9, true, false);
    } else if (key == "epochs") {
      cfg.epochs = parse_count(key, value);
    } else if (key == "seed") {
      cfg.seed = static_cast<std::uint64_t>(parse_count(key, value));
    } else if (key == "lr") {
      cfg.lr = parse_config_double(key, value);
      check_range(key, cfg.lr, 0.0, 1e9, true, false);
    } else if (key == "image_width") {
      cfg.image_width = parse_config_double(key, value);
      check_range(key, cfg.image_width, 0.0, 1e9, true, false);
    } else if (key == "image_height") {
      cfg.image_height = parse_config_double(key, value);
      check_range(key, cfg.image_height, 0.0, 1e9, true, false);
    } else if (key == "classes") {
      std::vector<std::string> classes;
      std::istringstream cs(value);
      std::string name;
      while (std::getline(cs, name, ',')) {
        name = trim(name);
        if (!name.empty()) {
          classes.push_back(name);
        }
      }
      if (classes.size() < 2) {
        throw ConfigError(key, "need at least 2 class names");
      }
      cfg.classes = std::move(classes);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  return cfg;
}

std::string write_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "conf_threshold = " << fmt_full(cfg.pipeline.conf_threshold) << '\n'
      << "nms_iou = " << fmt_full(cfg.pipeline.nms_iou) << '\n'
      << "u_max = " << fmt_full(cfg.pipeline.u_max) << '\n'
      << "max_range = " << fmt_full(cfg.pipeline.max_range) << '\n'
      << "pairing_floor = " << fmt_full(cfg.pipeline.pairing_floor) << '\n'
      << "target_iou_car = " << fmt_full(cfg.pipeline.target_iou_car) << '\n'
      << "target_iou_small = " << fmt_full(cfg.pipeline.target_iou_small)
      << '\n'
      << "lambda_anneal_epochs = " << cfg.pipeline.lambda_anneal_epochs
      << '\n'
      << "evidence_scale = " << fmt_full(cfg.pipeline.evidence_scale) << '\n'
      << "epochs = " << cfg.epochs << '\n'
      << "seed = " << cfg.seed << '\n'
      << "lr = " << fmt_full(cfg.lr) << '\n'
      << "image_width = " << fmt_full(cfg.image_width) << '\n'
      << "image_height = " << fmt_full(cfg.image_height) << '\n'
      << "classes = ";
  for (std::size_t i = 0; i < cfg.classes.size(); ++i) {
    if (i > 0) out << ',';
    out << cfg.classes[i];
  }
  out << '\n';
  return out.str();
}

int class_index(std::span<const std::string> class_names,
                const std::string& type) {
  const std::string want = lower(type);
  for (std::size_t i = 0; i < class_names.size(); ++i) {
    if (lower(class_names[i]) == want) {
      return static_cast<int>(i);
    }
  }
  return -1;
}

std::vector<double> target_iou_table(const RunConfig& cfg) {
  std::vector<double> table(cfg.classes.size());
  for (std::size_t i = 0; i < cfg.classes.size(); ++i) {
    table[i] = lower(cfg.classes[i]) == "car" ? cfg.pipeline.target_iou_car
                                              : cfg.pipeline.target_iou_small;
  }
  return table;
}

std::vector<std::string> list_frame_ids(const std::filesystem::path& dir) {
  std::vector<std::string> ids;
  if (!std::filesystem::is_directory(dir)) {
    throw Error("not a directory: " + dir.string());
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.size() == 10 && name.ends_with(".txt") &&
        std::all_of(name.begin(), name.begin() + 6,
                    [](unsigned char c) { return std::isdigit(c); })) {
      ids.push_back(name.substr(0, 6));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("cannot read " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file_atomic(const std::filesystem::path& path,
                            const std::string& content) {
  const auto tmp = path.parent_path() /
                   (path.filename().string() + ".tmp" +
                    std::to_string(static_cast<unsigned long>(::getpid())));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write " + tmp.string());
    }
    out << content;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace mmlf
