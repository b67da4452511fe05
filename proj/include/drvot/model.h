#ifndef DRVOT_MODEL_H
#define DRVOT_MODEL_H

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "drvot/features.h"
#include "drvot/lstm.h"
#include "drvot/segmentation.h"
#include "drvot/types.h"

namespace drvot {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct AffineParams {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;  // out
};

/// One hidden rectifier layer followed by an affine map into logits.
struct MlpParams {
  AffineParams hidden;
  AffineParams out;
};

struct ModelConfig {
  int input_dim = 0;
  int hidden_size = 100;   // per direction
  int num_layers = 2;
  int branch_hidden = 50;  // tagger / adversary hidden width
  int corpus_count = 0;    // adversary classes (>= 2 when the branch is on)
  double lambda = 0.1;
  bool use_tagger = true;
  bool use_adversary = true;
  std::vector<std::string> corpus_ids;  // label order used in training

  int embedding_dim() const { return 2 * hidden_size; }
};

struct ModelParams {
  std::vector<BiLstmLayer> layers;
  AffineParams head_pos;  // 2 x 2h: one row per boundary slot
  AffineParams head_neg;
  MlpParams tagger;
  MlpParams adversary;
};

struct TensorRef {
  std::string name;
  double* data;
  Eigen::Index size;
};

/// Enumerates every parameter tensor in a fixed order (encoder layers, then
/// heads, tagger, adversary). Optimizer state, gradients, serialization and
/// finite-difference checks all share this order.
std::vector<TensorRef> tensor_refs(ModelParams& params);

/// Caches from an encoder forward pass, consumed by the backward pass.
struct EncodeTrace {
  std::vector<Eigen::MatrixXd> layer_inputs;
  std::vector<BiLstmTrace> layer_traces;

  const Eigen::MatrixXd& embeddings() const { return layer_traces.back().output; }
};

struct BranchTrace {
  Eigen::VectorXd hidden_pre;
  Eigen::VectorXd hidden_act;
  Eigen::VectorXd probs;
};

struct LossBundle {
  double struct_loss = 0.0;
  double tagger_loss = 0.0;
  double adversary_loss = 0.0;
  double lambda = 0.0;
  double total = 0.0;
};

struct LossOptions {
  TaskLossConfig tau{2};
  // When false, the reversal gate is bypassed so the analytic gradient is the
  // true gradient of `total` (used by finite-difference checks only).
  bool reverse_adversary_gradient = true;
};

class Model {
 public:
  Model() = default;

  /// Fresh parameters, every tensor uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
  static Model init(const ModelConfig& config, uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }
  const NormStats& norm() const { return norm_; }
  void set_norm(NormStats stats) { norm_ = std::move(stats); }

  /// Per-frame embeddings (T x 2h) of an already-normalized sequence.
  Eigen::MatrixXd encode(const FeatureSequence& x) const;
  void encode_with_trace(const FeatureSequence& x, EncodeTrace& trace) const;

  /// Boundary scores from one head: T x 2, linear in the embedding rows.
  ScoreMatrix score_frames(const Eigen::MatrixXd& embeddings, VotType head) const;

  /// Utterance summary: forward-direction final state (last frame)
  /// concatenated with backward-direction final state (first frame).
  static Eigen::VectorXd summarize(const Eigen::MatrixXd& embeddings);

  /// [P(pos), P(neg)] from the tagger branch.
  Eigen::Vector2d tag(const Eigen::VectorXd& summary) const;

  /// Corpus posterior from the adversary branch (identity gate forward).
  Eigen::VectorXd adversary_predict(const Eigen::VectorXd& summary) const;

  /// Full inference on raw features: normalization, encoding, tagger head
  /// dispatch (ties go to the positive head), decoding.
  VotMeasurement predict(const FeatureSequence& raw) const;

  /// Joint loss of one training utterance, scored with the gold-type head.
  /// When `grads` is non-null, accumulates d(total)/d(theta) into it (the
  /// adversary contribution to encoder tensors is sign-flipped by the
  /// reversal gate unless options say otherwise).
  LossBundle utterance_loss(const FeatureSequence& normalized,
                            const Segmentation& gold, VotType gold_type,
                            int corpus_label, const LossOptions& options,
                            ModelParams* grads) const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);
  std::string version_string() const;

 private:
  ModelConfig config_;
  ModelParams params_;
  NormStats norm_;
};

/// Zero-initialized tensor set with the same shapes as `like`.
ModelParams make_grads(const ModelConfig& config);

/// Applies fn to the branch input; forward pass caching for backprop.
BranchTrace branch_forward(const MlpParams& mlp, const Eigen::VectorXd& input);

}  // namespace drvot

#endif
