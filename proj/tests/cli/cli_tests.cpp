#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mmlf/checkpoint.hpp"
#include "mmlf/kitti_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string bin_path() {
  const char* env = std::getenv("MMLF_BIN");
  REQUIRE(env != nullptr);
  return env;
}

std::string fixtures_path() {
  const char* env = std::getenv("MMLF_FIXTURES");
  REQUIRE(env != nullptr);
  return env;
}

struct RunResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  const fs::path log = fs::temp_directory_path() / "mmlf_cli_out.txt";
  const std::string cmd =
      bin_path() + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Train a tiny model on the fixtures once; reused by several cases.
const fs::path& fixture_model() {
  static fs::path model = [] {
    const fs::path dir = fresh_dir("mmlf_cli_model");
    const fs::path path = dir / "model.ckpt";
    const std::string fx = fixtures_path();
    const auto r = run("train --det3d " + fx + "/det3d --det2d " + fx +
                       "/det2d --calib " + fx + "/calib --labels " + fx +
                       "/label_2 --out-model " + path.string() +
                       " --epochs 3 --seed 11");
    REQUIRE(r.exit_code == 0);
    return path;
  }();
  return model;
}

}  // namespace

TEST_CASE("train: loss log shape, determinism, init-only checkpoints") {
  const std::string fx = fixtures_path();
  const fs::path dir = fresh_dir("mmlf_cli_train");

  const std::string base = "train --det3d " + fx + "/det3d --det2d " + fx +
                           "/det2d --calib " + fx + "/calib --labels " + fx +
                           "/label_2 --out-model ";

  const auto a = run(base + (dir / "a.ckpt").string() + " --epochs 4 --seed 3");
  CHECK(a.exit_code == 0);
  std::size_t lines = 0, pos = 0;
  while ((pos = a.output.find("epoch=", pos)) != std::string::npos) {
    ++lines;
    ++pos;
  }
  CHECK(lines == 4);

  const auto b = run(base + (dir / "b.ckpt").string() + " --epochs 4 --seed 3");
  CHECK(b.exit_code == 0);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

  const auto c = run(base + (dir / "c.ckpt").string() + " --epochs 0 --seed 3");
  CHECK(c.exit_code == 0);
  const auto init = mmlf::parse_checkpoint(slurp(dir / "c.ckpt"));
  CHECK(init.num_classes == 3);

  // a different seed gives a different checkpoint
  const auto d = run(base + (dir / "d.ckpt").string() + " --epochs 4 --seed 4");
  CHECK(d.exit_code == 0);
  CHECK(slurp(dir / "a.ckpt") != slurp(dir / "d.ckpt"));
}

TEST_CASE("train: empty training set exits 2") {
  const fs::path dir = fresh_dir("mmlf_cli_train_empty");
  fs::create_directories(dir / "det3d");
  fs::create_directories(dir / "det2d");
  fs::create_directories(dir / "calib");
  fs::create_directories(dir / "labels");
  const auto r = run("train --det3d " + (dir / "det3d").string() +
                     " --det2d " + (dir / "det2d").string() + " --calib " +
                     (dir / "calib").string() + " --labels " +
                     (dir / "labels").string() + " --out-model " +
                     (dir / "m.ckpt").string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("fuse: outputs, determinism, per-frame counts") {
  const std::string fx = fixtures_path();
  const fs::path out1 = fresh_dir("mmlf_cli_fuse1");
  const fs::path out2 = fresh_dir("mmlf_cli_fuse2");

  const std::string base = "fuse --det3d " + fx + "/det3d --det2d " + fx +
                           "/det2d --calib " + fx + "/calib --model " +
                           fixture_model().string() +
                           " --conf 0.01 --u-max 1.0 --out ";
  const auto a = run(base + out1.string());
  CHECK(a.exit_code == 0);
  CHECK(a.output.find("000000") != std::string::npos);
  CHECK(a.output.find("total") != std::string::npos);
  CHECK(fs::exists(out1 / "000000.txt"));
  CHECK(fs::exists(out1 / "000000.unc.txt"));
  CHECK(fs::exists(out1 / "000002.txt"));

  const auto b = run(base + out2.string());
  CHECK(b.exit_code == 0);
  for (const std::string frame : {"000000", "000001", "000002"}) {
    CHECK(slurp(out1 / (frame + ".txt")) == slurp(out2 / (frame + ".txt")));
    CHECK(slurp(out1 / (frame + ".unc.txt")) ==
          slurp(out2 / (frame + ".unc.txt")));
  }

  // parallel run produces the same bytes
  const fs::path out3 = fresh_dir("mmlf_cli_fuse3");
  const auto c = run(base + out3.string() + " --jobs 3");
  CHECK(c.exit_code == 0);
  for (const std::string frame : {"000000", "000001", "000002"}) {
    CHECK(slurp(out1 / (frame + ".txt")) == slurp(out3 / (frame + ".txt")));
  }
}

TEST_CASE("fuse: empty input directory, missing model, missing calib") {
  const std::string fx = fixtures_path();
  const fs::path empty = fresh_dir("mmlf_cli_empty");
  fs::create_directories(empty / "det3d");
  const fs::path out = fresh_dir("mmlf_cli_empty_out");

  const auto ok = run("fuse --det3d " + (empty / "det3d").string() +
                      " --det2d " + fx + "/det2d --calib " + fx +
                      "/calib --model " + fixture_model().string() +
                      " --out " + out.string());
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.find("total 0") != std::string::npos);

  const auto missing_model = run(
      "fuse --det3d " + fx + "/det3d --det2d " + fx + "/det2d --calib " + fx +
      "/calib --model /nonexistent.ckpt --out " + out.string());
  CHECK(missing_model.exit_code == 2);

  // calib directory without the needed frames
  const fs::path nocal = fresh_dir("mmlf_cli_nocal");
  const auto missing_calib = run(
      "fuse --det3d " + fx + "/det3d --det2d " + fx + "/det2d --calib " +
      nocal.string() + " --model " + fixture_model().string() + " --out " +
      out.string());
  CHECK(missing_calib.exit_code == 3);
}

TEST_CASE("fuse: malformed detection file names the line") {
  const std::string fx = fixtures_path();
  const fs::path dir = fresh_dir("mmlf_cli_badline");
  fs::create_directories(dir / "det3d");
  std::ofstream(dir / "det3d" / "000000.txt")
      << "Car 0 0 0 1 2 3 4 5\n";  // wrong field count
  const fs::path out = fresh_dir("mmlf_cli_badline_out");
  const auto r = run("fuse --det3d " + (dir / "det3d").string() +
                     " --det2d " + fx + "/det2d --calib " + fx +
                     "/calib --model " + fixture_model().string() +
                     " --out " + out.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("000000.txt") != std::string::npos);
  CHECK(r.output.find("line 1") != std::string::npos);
}

TEST_CASE("eval: predictions equal to ground truth score 100") {
  const std::string fx = fixtures_path();
  const fs::path pred = fresh_dir("mmlf_cli_eval_pred");
  // ground truth rewritten as result lines with score 1.0
  for (const std::string frame : {"000000", "000001", "000002"}) {
    const auto gts = mmlf::parse_gt_labels(
        mmlf::read_text_file(fx + "/label_2/" + frame + ".txt"));
    std::ostringstream out;
    for (const auto& gt : gts) {
      if (gt.dont_care) continue;
      out << gt.type << " " << gt.truncation << " " << gt.occlusion << " "
          << gt.alpha << " " << gt.bbox.x1 << " " << gt.bbox.y1 << " "
          << gt.bbox.x2 << " " << gt.bbox.y2 << " " << gt.box.h << " "
          << gt.box.w << " " << gt.box.l << " " << gt.box.x << " " << gt.box.y
          << " " << gt.box.z << " " << gt.box.ry << " 1.0\n";
    }
    std::ofstream(pred / (frame + ".txt")) << out.str();
  }

  const fs::path report = pred / "report.json";
  for (const std::string metric : {"2d", "aos", "bev", "3d"}) {
    const auto r = run("eval --gt " + fx + "/label_2 --pred " +
                       pred.string() + " --metric " + metric + " --json " +
                       report.string());
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("Car") != std::string::npos);
    // every populated bucket reads 100.00
    CHECK(r.output.find("100.00") != std::string::npos);
  }
  CHECK(fs::exists(report));
  const std::string json_text = slurp(report);
  CHECK(json_text.find("\"metric\"") != std::string::npos);
  CHECK(json_text.find("\"Moderate\"") != std::string::npos);

  // empty predictions score zero
  const fs::path none = fresh_dir("mmlf_cli_eval_none");
  const auto zero = run("eval --gt " + fx + "/label_2 --pred " +
                        none.string() + " --metric 3d --json ''");
  CHECK(zero.exit_code == 0);
  CHECK(zero.output.find("100.0") == std::string::npos);
}

TEST_CASE("stats and plot run over fused outputs") {
  const std::string fx = fixtures_path();
  const fs::path out = fresh_dir("mmlf_cli_stats_out");
  const auto fuse = run("fuse --det3d " + fx + "/det3d --det2d " + fx +
                        "/det2d --calib " + fx + "/calib --model " +
                        fixture_model().string() +
                        " --conf 0.01 --u-max 1.0 --out " + out.string());
  REQUIRE(fuse.exit_code == 0);

  const auto stats = run("stats --pred " + out.string());
  CHECK(stats.exit_code == 0);
  CHECK(stats.output.find("mean-unc") != std::string::npos);
  CHECK(stats.output.find("Car") != std::string::npos);

  const fs::path svg = out / "frame0.svg";
  const auto plot = run("plot --pred " + out.string() +
                        " --frame 000000 --gt " + fx + "/label_2 --out " +
                        svg.string());
  CHECK(plot.exit_code == 0);
  const std::string svg_text = slurp(svg);
  CHECK(svg_text.find("<svg") != std::string::npos);
  CHECK(svg_text.find("<polygon") != std::string::npos);

  const auto missing = run("plot --pred " + out.string() +
                           " --frame 999999 --out " + svg.string());
  CHECK(missing.exit_code == 2);
}

TEST_CASE("config file and flag precedence") {
  const std::string fx = fixtures_path();
  const fs::path dir = fresh_dir("mmlf_cli_config");
  std::ofstream(dir / "run.cfg") << "conf_threshold = 0.99\nu_max = 0.001\n";

  // restrictive config filters everything out; flags loosen it again
  const fs::path out_strict = fresh_dir("mmlf_cli_cfg_strict");
  const auto strict = run("fuse --det3d " + fx + "/det3d --det2d " + fx +
                          "/det2d --calib " + fx + "/calib --model " +
                          fixture_model().string() + " --config " +
                          (dir / "run.cfg").string() + " --out " +
                          out_strict.string());
  CHECK(strict.exit_code == 0);
  CHECK(strict.output.find("total 0") != std::string::npos);

  const fs::path out_loose = fresh_dir("mmlf_cli_cfg_loose");
  const auto loose = run("fuse --det3d " + fx + "/det3d --det2d " + fx +
                         "/det2d --calib " + fx + "/calib --model " +
                         fixture_model().string() + " --config " +
                         (dir / "run.cfg").string() +
                         " --conf 0.01 --u-max 1.0 --out " +
                         out_loose.string());
  CHECK(loose.exit_code == 0);
  CHECK(loose.output.find("total 0") == std::string::npos);

  // a bad config value is a structured failure
  std::ofstream(dir / "bad.cfg") << "nms_iou = 1.5\n";
  const auto bad = run("fuse --det3d " + fx + "/det3d --det2d " + fx +
                       "/det2d --calib " + fx + "/calib --model " +
                       fixture_model().string() + " --config " +
                       (dir / "bad.cfg").string() + " --out " +
                       out_loose.string());
  CHECK(bad.exit_code == 3);
  CHECK(bad.output.find("nms_iou") != std::string::npos);
}
