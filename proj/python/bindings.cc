#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drvot/datakit.h"
#include "drvot/evaluation.h"
#include "drvot/features.h"
#include "drvot/model.h"
#include "drvot/segmentation.h"

namespace py = pybind11;
using namespace drvot;

namespace {

ScoreMatrix to_scores(const Eigen::MatrixXd& m) {
  if (m.cols() != 2)
    throw DataError("score matrix must have shape (T, 2)");
  ScoreMatrix s;
  s.scores = m;
  return s;
}

Segmentation to_seg(std::pair<int, int> pair) {
  return Segmentation{pair.first, pair.second};
}

py::dict measurement_dict(const VotMeasurement& m) {
  py::dict d;
  d["vot_ms"] = m.vot_ms;
  d["vot_type"] = to_string(m.vot_type);
  d["y1"] = m.boundaries.y1;
  d["y2"] = m.boundaries.y2;
  d["type_prob"] = m.type_prob;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Voice onset time measurement by structured prediction";
  m.attr("__version__") = kToolVersion;

  m.def(
      "task_loss",
      [](std::pair<int, int> gold, std::pair<int, int> pred, int tau) {
        return task_loss(to_seg(gold), to_seg(pred), TaskLossConfig{tau});
      },
      py::arg("gold"), py::arg("pred"), py::arg("tau") = 2,
      "Tolerance-hinged sum of absolute boundary offsets.");

  m.def(
      "decode",
      [](const Eigen::MatrixXd& scores) {
        const Segmentation seg = decode(to_scores(scores));
        return std::make_pair(seg.y1, seg.y2);
      },
      py::arg("scores"),
      "Exact argmax boundary pair (1-based) of a (T, 2) score matrix.");

  m.def(
      "loss_augmented_decode",
      [](const Eigen::MatrixXd& scores, std::pair<int, int> gold, int tau) {
        const Segmentation seg =
            loss_augmented_decode(to_scores(scores), to_seg(gold), TaskLossConfig{tau});
        return std::make_pair(seg.y1, seg.y2);
      },
      py::arg("scores"), py::arg("gold"), py::arg("tau") = 2);

  m.def(
      "structural_hinge",
      [](const Eigen::MatrixXd& scores, std::pair<int, int> gold, int tau) {
        return structural_hinge(to_scores(scores), to_seg(gold), TaskLossConfig{tau});
      },
      py::arg("scores"), py::arg("gold"), py::arg("tau") = 2);

  m.def(
      "vot_from_segmentation",
      [](std::pair<int, int> seg, const std::string& vot_type,
         double frame_period_ms) {
        return measurement_dict(vot_from_segmentation(
            to_seg(seg), vot_type_from_string(vot_type), frame_period_ms));
      },
      py::arg("segmentation"), py::arg("vot_type"),
      py::arg("frame_period_ms") = 1.0);

  m.def(
      "extract",
      [](const std::vector<double>& samples, int sample_rate_hz) {
        AudioClip clip;
        clip.samples = samples;
        clip.sample_rate_hz = sample_rate_hz;
        return extract(clip, FeatureSpec{}).frames;
      },
      py::arg("samples"), py::arg("sample_rate_hz") = 16000,
      "Per-frame features (T x D) of a mono 16 kHz signal.");

  py::class_<Model>(m, "Model")
      .def_static("load", &Model::load, py::arg("path"))
      .def(
          "predict",
          [](const Model& model, const Eigen::MatrixXd& features,
             double frame_period_ms) {
            FeatureSequence x;
            x.frames = features;
            x.frame_period_ms = frame_period_ms;
            return measurement_dict(model.predict(x));
          },
          py::arg("features"), py::arg("frame_period_ms") = 1.0,
          "Measure VOT for a raw (T x D) feature matrix.")
      .def(
          "encode",
          [](const Model& model, const Eigen::MatrixXd& features) {
            FeatureSequence x;
            x.frames = features;
            return model.encode(apply_norm(x, model.norm()));
          },
          py::arg("features"), "Per-frame embeddings (T x 2h).")
      .def(
          "tag",
          [](const Model& model, const Eigen::MatrixXd& features) {
            FeatureSequence x;
            x.frames = features;
            const Eigen::Vector2d p =
                model.tag(Model::summarize(model.encode(apply_norm(x, model.norm()))));
            return std::make_pair(p(0), p(1));
          },
          py::arg("features"), "(P(positive), P(negative)) for a feature matrix.")
      .def_property_readonly("version", &Model::version_string);

  py::register_exception<DataError>(m, "DataError");
  py::register_exception<ConfigError>(m, "ConfigError");
  py::register_exception<IoError>(m, "IoError");
}
