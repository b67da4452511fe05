#ifndef DRVOT_FEATURES_H
#define DRVOT_FEATURES_H

#include <string>
#include <vector>

#include "drvot/types.h"

namespace drvot {

struct AudioClip {
  std::vector<double> samples;  // mono
  int sample_rate_hz = 16000;

  double duration_ms() const {
    return 1000.0 * static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

/// Reads a 16-bit linear PCM mono WAV file.
AudioClip load_wav(const std::string& path);

/// Frame-level measures computed per analysis window, at a 1 ms frame period:
/// total / low-band / mid-band / high-band log energy, Wiener entropy,
/// spectral centroid, max absolute amplitude, zero-crossing rate — for each
/// window size, plus first differences of everything when `add_deltas`.
struct FeatureSpec {
  std::vector<double> window_sizes_ms = {1.0, 5.0};
  double low_edge_hz = 500.0;    // voicing energy lives below this
  double high_edge_hz = 3000.0;  // burst/frication energy above this
  double energy_floor_db = -80.0;
  bool add_deltas = true;

  static constexpr int kMeasuresPerWindow = 8;

  int dim() const {
    const int base = kMeasuresPerWindow * static_cast<int>(window_sizes_ms.size());
    return add_deltas ? 2 * base : base;
  }
};

/// Converts audio to per-frame features. T = floor(duration_ms); windows are
/// centered on each frame with symmetric zero padding at the clip edges.
/// Requires 16 kHz input.
FeatureSequence extract(const AudioClip& audio, const FeatureSpec& spec);

/// Per-dimension standardization statistics fit on the training split only.
/// Dimensions with zero variance are dropped (recorded via `kept`).
struct NormStats {
  int source_dim = 0;
  std::vector<int> kept;    // indices into the source dimensionality
  Eigen::VectorXd mean;     // per kept dimension
  Eigen::VectorXd stdev;    // per kept dimension, > 0

  int dim() const { return static_cast<int>(kept.size()); }
  bool empty() const { return kept.empty() && source_dim == 0; }
};

NormStats fit_norm(const std::vector<FeatureSequence>& train_features);

FeatureSequence apply_norm(const FeatureSequence& x, const NormStats& stats);

/// Plain text matrix format: header "T D" then T rows of D reals.
FeatureSequence load_feature_matrix(const std::string& path);
void save_feature_matrix(const std::string& path, const FeatureSequence& x);

}  // namespace drvot

#endif
