#ifndef DRVOT_DATAKIT_H
#define DRVOT_DATAKIT_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "drvot/types.h"

namespace drvot {

/// Gold times in milliseconds. A present prevoicing onset marks negative VOT.
struct Annotation {
  std::optional<double> t_pv_ms;
  double t_b_ms = 0.0;
  double t_v_ms = 0.0;

  VotType vot_type() const {
    return t_pv_ms ? VotType::negative : VotType::positive;
  }

  /// Signed VOT: vowel minus burst when positive, prevoicing minus burst
  /// (a negative number) when prevoiced.
  double signed_vot_ms() const {
    return t_pv_ms ? *t_pv_ms - t_b_ms : t_v_ms - t_b_ms;
  }
};

/// 1-based frame index of a millisecond time at the given frame period
/// (frame i spans [(i-1), i) * period).
int frame_of_ms(double t_ms, double frame_period_ms);
double ms_of_frame(int frame, double frame_period_ms);

/// The boundary pair the model is trained on: (burst, vowel) for positive
/// VOT, (prevoicing, burst) for negative.
Segmentation gold_segmentation(const Annotation& a, double frame_period_ms,
                               int num_frames);

struct ManifestRecord {
  std::string utterance_id;
  std::string corpus_id;
  std::string speaker_id;
  std::string audio_path;    // exactly one of audio_path / feature_path set
  std::string feature_path;
  std::optional<Annotation> annotation;
};

/// Reads a line-delimited manifest (one JSON record per line; lines holding a
/// "header" object are skipped). Relative source paths are resolved against
/// the manifest's directory. Validates ids, annotation ordering, and source
/// file existence, reporting every offender.
std::vector<ManifestRecord> load_manifest(const std::string& path);

/// Writes records as JSON lines after a header record carrying the seed.
void save_manifest(const std::string& path,
                   const std::vector<ManifestRecord>& records,
                   uint64_t seed = 0);

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct ManifestSplit {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> validation;
  std::vector<ManifestRecord> test;
};

/// Speaker-disjoint split: speakers are shuffled by seed and assigned
/// greedily to the split with the largest remaining utterance deficit.
ManifestSplit split_by_speaker(const std::vector<ManifestRecord>& records,
                               const SplitFractions& fractions, uint64_t seed);

/// Synthetic corpus generator. Designated dimensions carry the recoverable
/// structure: dim 0 rises while voicing is active (prevoicing and vowel),
/// dim 1 carries a short transient at the burst, dim 2 a sustained periodic
/// pattern from the vowel onset. Remaining dimensions are noise. Per-corpus
/// nuisance (offset vector + gain) is applied to every dimension.
struct SyntheticConfig {
  int n_train = 2000;
  int n_validation = 300;
  int n_test = 300;
  double negative_fraction = 0.2;
  int min_frames = 100;
  int max_frames = 300;
  int dim = 8;
  int corpus_count = 1;
  int utterances_per_speaker = 10;
  double cue_amplitude = 3.0;
  double noise_sd = 0.5;
  // Explicit per-corpus nuisance; when empty, drawn from the scales below.
  std::vector<std::vector<double>> corpus_offsets;
  std::vector<double> corpus_gains;
  double nuisance_offset_scale = 0.0;
  double nuisance_gain_spread = 0.0;
  uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<ManifestRecord> train;
  std::vector<ManifestRecord> validation;
  std::vector<ManifestRecord> test;
  std::vector<std::vector<double>> corpus_offsets;  // as applied
  std::vector<double> corpus_gains;
  std::vector<std::string> corpus_ids;
};

/// Writes feature files under <out_dir>/features and manifests
/// (train/validation/test.jsonl) under <out_dir>. Pure function of
/// (config, seed). Speakers never span splits.
SyntheticCorpus generate_synthetic(const SyntheticConfig& config,
                                   const std::string& out_dir);

}  // namespace drvot

#endif
