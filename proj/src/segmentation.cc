#include "drvot/segmentation.h"

#include <cmath>
#include <string>

namespace drvot {

namespace {

double hinge_pos(double x) { return x > 0.0 ? x : 0.0; }

double boundary_offset_loss(int a, int b, int tau) {
  return hinge_pos(std::abs(a - b) - static_cast<double>(tau));
}

void require_valid(const Segmentation& seg, const char* what) {
  if (seg.y1 < 1 || seg.y1 >= seg.y2)
    throw DataError(std::string(what) + ": segmentation must satisfy 1 <= y1 < y2, got (" +
                    std::to_string(seg.y1) + ", " + std::to_string(seg.y2) + ")");
}

}  // namespace

void validate_segmentation(const Segmentation& seg, int num_frames) {
  require_valid(seg, "segmentation");
  if (seg.y2 > num_frames)
    throw DataError("segmentation (" + std::to_string(seg.y1) + ", " +
                    std::to_string(seg.y2) + ") exceeds sequence length T=" +
                    std::to_string(num_frames));
}

double task_loss(const Segmentation& gold, const Segmentation& pred,
                 const TaskLossConfig& cfg) {
  require_valid(gold, "task_loss gold");
  require_valid(pred, "task_loss pred");
  if (cfg.tau_frames < 0) throw ConfigError("tau_frames must be >= 0");
  return boundary_offset_loss(gold.y1, pred.y1, cfg.tau_frames) +
         boundary_offset_loss(gold.y2, pred.y2, cfg.tau_frames);
}

namespace {

// Shared prefix-max recursion. per_frame(b, t) is an additive per-boundary
// bonus indexed by boundary slot b in {0,1} and 1-based frame t; plain
// decoding passes zero. Strict '>' keeps the earliest maximizer, which
// yields the smallest-y1-then-smallest-y2 tie break.
template <typename Bonus>
Segmentation decode_with_bonus(const ScoreMatrix& scores, Bonus per_frame) {
  const int T = scores.num_frames();
  if (T < 2) throw DataError("decode requires T >= 2, got T=" + std::to_string(T));
  if (scores.scores.cols() != 2)
    throw DataError("ScoreMatrix must have exactly 2 columns");

  // best_first[t] = argmax over y1 <= t of column-0 totals, earliest on ties.
  int best_first = 1;
  double best_first_val = scores.scores(0, 0) + per_frame(0, 1);

  int best_y1 = 1, best_y2 = 2;
  double best_total = best_first_val + scores.scores(1, 1) + per_frame(1, 2);

  for (int y2 = 2; y2 <= T; ++y2) {
    const double total =
        best_first_val + scores.scores(y2 - 1, 1) + per_frame(1, y2);
    if (total > best_total) {
      best_total = total;
      best_y1 = best_first;
      best_y2 = y2;
    }
    // Now admit y1 = y2 as a candidate first boundary for later y2.
    const double cand = scores.scores(y2 - 1, 0) + per_frame(0, y2);
    if (cand > best_first_val) {
      best_first_val = cand;
      best_first = y2;
    }
  }
  return Segmentation{best_y1, best_y2};
}

}  // namespace

Segmentation decode(const ScoreMatrix& scores) {
  return decode_with_bonus(scores, [](int, int) { return 0.0; });
}

Segmentation loss_augmented_decode(const ScoreMatrix& scores,
                                   const Segmentation& gold,
                                   const TaskLossConfig& cfg) {
  validate_segmentation(gold, scores.num_frames());
  if (cfg.tau_frames < 0) throw ConfigError("tau_frames must be >= 0");
  const int tau = cfg.tau_frames;
  return decode_with_bonus(scores, [&](int b, int t) {
    return boundary_offset_loss(t, b == 0 ? gold.y1 : gold.y2, tau);
  });
}

double segmentation_score(const ScoreMatrix& scores, const Segmentation& seg) {
  validate_segmentation(seg, scores.num_frames());
  return scores.scores(seg.y1 - 1, 0) + scores.scores(seg.y2 - 1, 1);
}

HingeDetail structural_hinge_detail(const ScoreMatrix& scores,
                                    const Segmentation& gold,
                                    const TaskLossConfig& cfg) {
  const Segmentation augmented = loss_augmented_decode(scores, gold, cfg);
  const double value = task_loss(gold, augmented, cfg) -
                       segmentation_score(scores, gold) +
                       segmentation_score(scores, augmented);
  return HingeDetail{value, augmented};
}

double structural_hinge(const ScoreMatrix& scores, const Segmentation& gold,
                        const TaskLossConfig& cfg) {
  return structural_hinge_detail(scores, gold, cfg).value;
}

VotMeasurement vot_from_segmentation(const Segmentation& seg, VotType vot_type,
                                     double frame_period_ms, double type_prob) {
  require_valid(seg, "vot_from_segmentation");
  if (frame_period_ms <= 0.0)
    throw ConfigError("frame_period_ms must be positive");
  const double magnitude = (seg.y2 - seg.y1) * frame_period_ms;
  VotMeasurement m;
  m.vot_type = vot_type;
  m.vot_ms = vot_type == VotType::positive ? magnitude : -magnitude;
  m.boundaries = seg;
  m.type_prob = type_prob;
  return m;
}

}  // namespace drvot
