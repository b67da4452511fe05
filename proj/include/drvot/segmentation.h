#ifndef DRVOT_SEGMENTATION_H
#define DRVOT_SEGMENTATION_H

#include "drvot/types.h"

namespace drvot {

/// Tolerance-hinged sum of absolute boundary offsets:
/// [|y1 - y1'| - tau]_+ + [|y2 - y2'| - tau]_+.
double task_loss(const Segmentation& gold, const Segmentation& pred,
                 const TaskLossConfig& cfg);

/// Exact argmax of scores[y1,0] + scores[y2,1] over y1 < y2, O(T) via a
/// running prefix maximum over column 0. Ties break to the smallest y1,
/// then the smallest y2.
Segmentation decode(const ScoreMatrix& scores);

/// Argmax of score + task loss against `gold`; the loss decomposes per
/// boundary so the same prefix-max recursion applies. Tie-break as decode.
Segmentation loss_augmented_decode(const ScoreMatrix& scores,
                                   const Segmentation& gold,
                                   const TaskLossConfig& cfg);

/// Model score of a fixed segmentation: scores[y1,0] + scores[y2,1].
double segmentation_score(const ScoreMatrix& scores, const Segmentation& seg);

struct HingeDetail {
  double value = 0.0;      // the surrogate loss
  Segmentation augmented;  // argmax of the inner maximization
};

/// Max-margin surrogate: l(gold, y^) - score(gold) + score(y^) with
/// y^ = loss_augmented_decode(...). Nonnegative, upper-bounds the task
/// loss of the plain decode.
HingeDetail structural_hinge_detail(const ScoreMatrix& scores,
                                    const Segmentation& gold,
                                    const TaskLossConfig& cfg);

double structural_hinge(const ScoreMatrix& scores, const Segmentation& gold,
                        const TaskLossConfig& cfg);

/// Signed VOT from a decoded boundary pair. Positive type reads the pair as
/// (burst, vowel onset); negative reads it as (prevoicing, burst) and the
/// reported value is negated.
VotMeasurement vot_from_segmentation(const Segmentation& seg, VotType vot_type,
                                     double frame_period_ms,
                                     double type_prob = 1.0);

}  // namespace drvot

#endif
