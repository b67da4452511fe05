#ifndef DRVOT_TYPES_H
#define DRVOT_TYPES_H

#include <Eigen/Dense>
#include <string>

#include "drvot/errors.h"

namespace drvot {

enum class VotType { positive, negative };

inline std::string to_string(VotType t) {
  return t == VotType::positive ? "positive" : "negative";
}

inline VotType vot_type_from_string(const std::string& s) {
  if (s == "positive") return VotType::positive;
  if (s == "negative") return VotType::negative;
  throw DataError("unknown VOT type: '" + s + "'");
}

/// Per-frame acoustic features, one row per frame at a fixed frame period.
struct FeatureSequence {
  Eigen::MatrixXd frames;       // T x D
  double frame_period_ms = 1.0;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

/// Ordered pair of boundary frame indices, 1-based, y1 < y2.
struct Segmentation {
  int y1 = 0;
  int y2 = 0;

  bool operator==(const Segmentation&) const = default;
};

/// Throws if the segmentation violates 1 <= y1 < y2 <= T.
void validate_segmentation(const Segmentation& seg, int num_frames);

struct TaskLossConfig {
  int tau_frames = 2;  // tolerance in frames; at 1 ms/frame this is msec
};

/// Column b in {0, 1} holds the score of placing boundary b+1 at each frame.
struct ScoreMatrix {
  Eigen::MatrixXd scores;  // T x 2

  int num_frames() const { return static_cast<int>(scores.rows()); }
};

struct VotMeasurement {
  double vot_ms = 0.0;
  VotType vot_type = VotType::positive;
  Segmentation boundaries;
  double type_prob = 1.0;  // probability assigned to vot_type
};

}  // namespace drvot

#endif
