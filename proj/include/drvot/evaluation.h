#ifndef DRVOT_EVALUATION_H
#define DRVOT_EVALUATION_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drvot/datakit.h"
#include "drvot/types.h"

namespace drvot {

struct VotPrediction {
  std::string utterance_id;
  double vot_ms = 0.0;
  VotType vot_type = VotType::positive;
  Segmentation boundaries;
  double type_prob = 1.0;
  std::string model_version;
};

struct GoldVot {
  double vot_ms = 0.0;
  VotType vot_type = VotType::positive;
  std::string corpus_id;
};

using GoldMap = std::map<std::string, GoldVot>;

/// Collects gold signed VOTs from annotated manifest records; records
/// without an annotation are reported as data errors.
GoldMap golds_from_manifest(const std::vector<ManifestRecord>& records);

struct ToleranceRow {
  std::string stratum;  // "all", "positive", "negative"
  int count = 0;
  std::vector<double> proportions;  // aligned with ToleranceTable::taus
};

/// Proportion of |predicted - gold| signed-VOT differences at or below each
/// tolerance, stratified by gold VOT type. Proportions are non-decreasing
/// in the tolerance by construction.
struct ToleranceTable {
  std::vector<int> taus;
  std::vector<ToleranceRow> rows;
};

/// Requires predictions and golds to be keyed by exactly the same ids;
/// a mismatch raises a data error listing the symmetric difference.
ToleranceTable tolerance_table(const std::vector<VotPrediction>& predictions,
                               const GoldMap& golds,
                               const std::vector<int>& taus);

/// Fraction of utterances whose predicted VOT type matches gold.
double classification_accuracy(const std::vector<VotPrediction>& predictions,
                               const GoldMap& golds);

std::string render_tolerance_table(const ToleranceTable& table);

/// Line-delimited prediction records (header line carries the seed).
void save_predictions(const std::string& path,
                      const std::vector<VotPrediction>& predictions,
                      uint64_t seed);
std::vector<VotPrediction> load_predictions(const std::string& path);

}  // namespace drvot

#endif
