#ifndef DRVOT_TRAINING_H
#define DRVOT_TRAINING_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "drvot/datakit.h"
#include "drvot/evaluation.h"
#include "drvot/features.h"
#include "drvot/model.h"

namespace drvot {

/// One training/evaluation utterance with materialized features.
struct LoadedUtterance {
  std::string utterance_id;
  std::string corpus_id;
  std::string speaker_id;
  FeatureSequence features;  // raw (un-normalized)
  Annotation annotation;
};

/// Loads features for every record (precomputed matrix or audio extraction).
/// Training paths require annotations; pass `require_annotation = false` for
/// prediction-only manifests.
std::vector<LoadedUtterance> load_utterances(
    const std::vector<ManifestRecord>& records, const FeatureSpec& spec,
    bool require_annotation = true);

struct TrainConfig {
  double learning_rate = 0.01;
  int max_epochs = 100;
  int patience = 5;
  int tau_frames = 2;
  double lambda = 0.1;
  int hidden_size = 100;
  int num_layers = 2;
  int branch_hidden = 50;
  bool use_tagger = true;
  bool use_adversary = true;
  uint64_t seed = 1;
  int steps_per_epoch = 0;  // 0 -> one draw per training utterance
  std::vector<int> report_taus = {2, 5, 10, 15};
  double adagrad_eps = 1e-8;
};

/// Inverse class-frequency draw probabilities; a balanced draw in
/// expectation. Requires both VOT classes to be present.
std::vector<double> sampling_weights(const std::vector<VotType>& labels);

/// Per-parameter adaptive gradient accumulation (Adagrad rule).
class Adagrad {
 public:
  Adagrad(const ModelConfig& config, double learning_rate, double eps);
  void step(ModelParams& params, ModelParams& grads);

 private:
  ModelParams accum_;
  double lr_;
  double eps_;
};

struct EpochRecord {
  int epoch = 0;
  double struct_loss = 0.0;
  double tagger_loss = 0.0;
  double adversary_loss = 0.0;
  double total = 0.0;
  double val_task_loss = 0.0;
  std::map<int, double> val_tolerance;  // tau -> proportion within
};

struct TrainResult {
  Model model;  // parameters from the best validation epoch
  std::vector<EpochRecord> log;
  int best_epoch = 0;
};

std::string epoch_record_to_json(const EpochRecord& rec);

/// Joint training of the structural, tagger, and adversary objectives with
/// class-balanced sampling and early stopping on validation mean task loss.
TrainResult train(const std::vector<LoadedUtterance>& train_items,
                  const std::vector<LoadedUtterance>& val_items,
                  const TrainConfig& config);

/// Full inference over a loaded set.
std::vector<VotPrediction> predict_all(const Model& model,
                                       const std::vector<LoadedUtterance>& items);

GoldMap golds_from_loaded(const std::vector<LoadedUtterance>& items);

struct ProbeResult {
  double accuracy = 0.0;
  double chance = 0.0;  // majority-class share of the probe test set
};

/// Post-hoc linear softmax probe: how much corpus identity is readable off
/// frozen encoder summaries.
ProbeResult corpus_probe(const std::vector<Eigen::VectorXd>& train_x,
                         const std::vector<int>& train_y,
                         const std::vector<Eigen::VectorXd>& test_x,
                         const std::vector<int>& test_y, int classes,
                         uint64_t seed);

struct CrossValConfig {
  TrainConfig train;
  SplitFractions fold_split{0.8, 0.1, 0.1};
  std::vector<int> taus = {2, 5, 10, 15};
  bool run_probe = true;
};

struct FoldResult {
  std::string held_out_corpus;
  ToleranceTable within;   // held-out speakers of the training corpora
  ToleranceTable unseen;   // the left-out corpus
  double within_accuracy = 0.0;
  double unseen_accuracy = 0.0;
  ProbeResult probe;
  std::vector<EpochRecord> log;
};

/// Leave-one-corpus-out: one fold per corpus, trained on the others.
std::vector<FoldResult> cross_validate(
    const std::vector<std::vector<ManifestRecord>>& corpora,
    const FeatureSpec& spec, const CrossValConfig& config);

}  // namespace drvot

#endif
