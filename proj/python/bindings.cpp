#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mmlf/bev_svg.hpp"
#include "mmlf/checkpoint.hpp"
#include "mmlf/errors.hpp"
#include "mmlf/eval.hpp"
#include "mmlf/evidence.hpp"
#include "mmlf/fusion_net.hpp"
#include "mmlf/geometry.hpp"
#include "mmlf/kitti_io.hpp"
#include "mmlf/matching.hpp"
#include "mmlf/pipeline.hpp"

namespace py = pybind11;
using namespace mmlf;

PYBIND11_MODULE(_mmlf, m) {
  m.doc() =
      "Evidential late fusion of 2D and 3D object detections: "
      "Dirichlet-evidence opinions, Dempster combination, score fusion, "
      "KITTI-convention I/O and evaluation.";

  py::register_exception<Error>(m, "MmlfError");

  // ---- evidence ----------------------------------------------------
  py::class_<Opinion>(m, "Opinion")
      .def_readonly("belief", &Opinion::belief)
      .def_readonly("uncertainty", &Opinion::uncertainty)
      .def_readonly("alpha", &Opinion::alpha)
      .def_readonly("strength", &Opinion::strength)
      .def_readonly("num_classes", &Opinion::num_classes)
      .def("__repr__", [](const Opinion& o) {
        std::string s = "Opinion(belief=[";
        for (std::size_t h = 0; h < o.belief.size(); ++h) {
          if (h) s += ", ";
          s += std::to_string(o.belief[h]);
        }
        s += "], uncertainty=" + std::to_string(o.uncertainty) + ")";
        return s;
      });

  m.def("vacuous_opinion", &vacuous_opinion, py::arg("num_classes"));
  m.def(
      "opinion_from_evidence",
      [](const std::vector<double>& e, std::size_t h) {
        return opinion_from_evidence(e, h);
      },
      py::arg("evidence"), py::arg("num_classes"));
  m.def("conflict", &conflict, py::arg("a"), py::arg("b"));
  m.def("combine_opinions", &combine_opinions, py::arg("a"), py::arg("b"));
  m.def("evidence_from_opinion", &evidence_from_opinion, py::arg("opinion"));

  // ---- geometry ----------------------------------------------------
  py::class_<Box2D>(m, "Box2D")
      .def(py::init<>())
      .def(py::init([](double x1, double y1, double x2, double y2) {
             return Box2D{x1, y1, x2, y2};
           }),
           py::arg("x1"), py::arg("y1"), py::arg("x2"), py::arg("y2"))
      .def_readwrite("x1", &Box2D::x1)
      .def_readwrite("y1", &Box2D::y1)
      .def_readwrite("x2", &Box2D::x2)
      .def_readwrite("y2", &Box2D::y2)
      .def("area", &Box2D::area);

  py::class_<Box3D>(m, "Box3D")
      .def(py::init<>())
      .def(py::init([](double x, double y, double z, double h, double w,
                       double l, double ry) {
             return Box3D{x, y, z, h, w, l, ry};
           }),
           py::arg("x"), py::arg("y"), py::arg("z"), py::arg("h"),
           py::arg("w"), py::arg("l"), py::arg("ry"))
      .def_readwrite("x", &Box3D::x)
      .def_readwrite("y", &Box3D::y)
      .def_readwrite("z", &Box3D::z)
      .def_readwrite("h", &Box3D::h)
      .def_readwrite("w", &Box3D::w)
      .def_readwrite("l", &Box3D::l)
      .def_readwrite("ry", &Box3D::ry);

  py::class_<Calibration>(m, "Calibration")
      .def(py::init<>())
      .def_readwrite("image_width", &Calibration::image_width)
      .def_readwrite("image_height", &Calibration::image_height);

  m.def("make_pinhole_calibration", &make_pinhole_calibration,
        py::arg("focal"), py::arg("cx"), py::arg("cy"),
        py::arg("image_width"), py::arg("image_height"));
  m.def("box3d_corners", &box3d_corners, py::arg("box"));
  m.def("bev_polygon", &bev_polygon, py::arg("box"));
  m.def("project_to_image", &project_to_image, py::arg("box"),
        py::arg("calibration"));
  m.def("iou_axis_aligned", &iou_axis_aligned, py::arg("a"), py::arg("b"));
  m.def("rotated_bev_iou", &rotated_bev_iou, py::arg("a"), py::arg("b"));
  m.def("iou_3d", &iou_3d, py::arg("a"), py::arg("b"));
  m.def("planar_distance_normalized", &planar_distance_normalized,
        py::arg("box"), py::arg("calibration"), py::arg("max_range"));

  // ---- detections and fusion ---------------------------------------
  py::class_<Detection3D>(m, "Detection3D")
      .def(py::init<>())
      .def(py::init([](const Box3D& box, double objectness,
                       const std::vector<double>& scores, int label) {
             return Detection3D{box, objectness, scores, label};
           }),
           py::arg("box"), py::arg("objectness"), py::arg("class_scores"),
           py::arg("class_label") = 0)
      .def_readwrite("box", &Detection3D::box)
      .def_readwrite("objectness", &Detection3D::objectness)
      .def_readwrite("class_scores", &Detection3D::class_scores)
      .def_readwrite("class_label", &Detection3D::class_label);

  py::class_<Detection2D>(m, "Detection2D")
      .def(py::init<>())
      .def(py::init([](const Box2D& box, double objectness,
                       const std::vector<double>& scores, int label) {
             return Detection2D{box, objectness, scores, label};
           }),
           py::arg("box"), py::arg("objectness"), py::arg("class_scores"),
           py::arg("class_label") = 0)
      .def_readwrite("box", &Detection2D::box)
      .def_readwrite("objectness", &Detection2D::objectness)
      .def_readwrite("class_scores", &Detection2D::class_scores)
      .def_readwrite("class_label", &Detection2D::class_label);

  py::class_<FusedDetection>(m, "FusedDetection")
      .def_readonly("box3d", &FusedDetection::box3d)
      .def_readonly("score", &FusedDetection::score)
      .def_readonly("beliefs", &FusedDetection::beliefs)
      .def_readonly("uncertainty", &FusedDetection::uncertainty)
      .def_readonly("class_label", &FusedDetection::class_label)
      .def_readonly("source_i", &FusedDetection::source_i)
      .def_readonly("source_j", &FusedDetection::source_j);

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("conf_threshold", &PipelineConfig::conf_threshold)
      .def_readwrite("nms_iou", &PipelineConfig::nms_iou)
      .def_readwrite("u_max", &PipelineConfig::u_max)
      .def_readwrite("max_range", &PipelineConfig::max_range)
      .def_readwrite("pairing_floor", &PipelineConfig::pairing_floor)
      .def_readwrite("target_iou_car", &PipelineConfig::target_iou_car)
      .def_readwrite("target_iou_small", &PipelineConfig::target_iou_small)
      .def_readwrite("lambda_anneal_epochs",
                     &PipelineConfig::lambda_anneal_epochs)
      .def_readwrite("evidence_scale", &PipelineConfig::evidence_scale);

  py::class_<FusionParams>(m, "FusionParams")
      .def_readonly("num_classes", &FusionParams::num_classes);

  m.def("init_params", &init_params, py::arg("seed"), py::arg("num_classes"),
        py::arg("evidence_scale") = 25.0);
  m.def("fuse_frame", &fuse_frame, py::arg("dets3d"), py::arg("dets2d"),
        py::arg("calibration"), py::arg("params"), py::arg("config"));
  m.def(
      "apply_evidence_head_3d",
      [](const FusionParams& p, const std::vector<double>& scores) {
        return p.head3d.apply(scores);
      },
      py::arg("params"), py::arg("scores"));
  m.def(
      "score_forward",
      [](const FusionParams& p, double iou, double objs3d, double objs2d,
         double dis, double fused_uncertainty) {
        return score_forward(
            p.net, ObjsFeature{iou, objs3d, objs2d, dis, fused_uncertainty});
      },
      py::arg("params"), py::arg("iou"), py::arg("objs3d"),
      py::arg("objs2d"), py::arg("dis"), py::arg("fused_uncertainty"));
  m.def("ssl_loss",
        [](const std::vector<double>& alpha, std::size_t target,
           double lambda_t) { return ssl_loss(alpha, target, lambda_t); },
        py::arg("alpha"), py::arg("target_class"), py::arg("lambda_t"));

  // ---- training -----------------------------------------------------
  py::class_<GtBox2D>(m, "GtBox2D")
      .def(py::init([](const Box2D& bbox, int label) {
             return GtBox2D{bbox, label};
           }),
           py::arg("bbox"), py::arg("class_label"))
      .def_readwrite("bbox", &GtBox2D::bbox)
      .def_readwrite("class_label", &GtBox2D::class_label);

  py::class_<TrainingFrame>(m, "TrainingFrame")
      .def(py::init<>())
      .def_readwrite("id", &TrainingFrame::id)
      .def_readwrite("dets3d", &TrainingFrame::dets3d)
      .def_readwrite("dets2d", &TrainingFrame::dets2d)
      .def_readwrite("calib", &TrainingFrame::calib)
      .def_readwrite("gts", &TrainingFrame::gts);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("pipeline", &TrainConfig::pipeline)
      .def_readwrite("target_iou_by_class", &TrainConfig::target_iou_by_class)
      .def_readwrite("num_classes", &TrainConfig::num_classes)
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("lr", &TrainConfig::lr);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("epoch_losses", &TrainResult::epoch_losses)
      .def_readonly("skipped_frames", &TrainResult::skipped_frames);

  m.def("train", &train, py::arg("frames"), py::arg("config"),
        py::call_guard<py::gil_scoped_release>());

  // ---- checkpoints and text I/O --------------------------------------
  m.def("format_checkpoint", &format_checkpoint, py::arg("params"));
  m.def("parse_checkpoint", &parse_checkpoint, py::arg("text"));
  m.def("save_checkpoint", &save_checkpoint, py::arg("path"),
        py::arg("params"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def("parse_calib", &parse_calib, py::arg("text"));
  m.def(
      "parse_det2d",
      [](const std::string& text, const std::vector<std::string>& classes) {
        return parse_det2d(text, classes);
      },
      py::arg("text"), py::arg("class_names"));
  m.def(
      "parse_det3d",
      [](const std::string& text, const std::vector<std::string>& classes) {
        const auto records = parse_det3d(text, classes);
        return to_detections3d(records, classes.size());
      },
      py::arg("text"), py::arg("class_names"));

  m.attr("NO_MATCH") = static_cast<std::size_t>(kNoMatch);
  m.attr("NO_MATCH_OBJECTNESS") = kNoMatchObjectness;
  m.attr("__version__") = "0.1.0";
}
