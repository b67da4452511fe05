// Test-only oracles, deliberately independent of the library's decoding path:
// exhaustive search over every boundary pair.
#ifndef DRVOT_TESTS_BRUTE_FORCE_H
#define DRVOT_TESTS_BRUTE_FORCE_H

#include <random>

#include "drvot/types.h"

namespace drvot::testoracle {

inline double offset_loss(int a, int b, int tau) {
  const double v = std::abs(a - b) - static_cast<double>(tau);
  return v > 0.0 ? v : 0.0;
}

inline double pair_loss(const Segmentation& gold, const Segmentation& pred,
                        int tau) {
  return offset_loss(gold.y1, pred.y1, tau) + offset_loss(gold.y2, pred.y2, tau);
}

struct BruteResult {
  Segmentation best;
  double value = 0.0;
};

// Exhaustive argmax over all y1 < y2; lexicographically smallest pair on ties.
inline BruteResult brute_decode(const Eigen::MatrixXd& scores) {
  const int T = static_cast<int>(scores.rows());
  BruteResult res;
  bool first = true;
  for (int y1 = 1; y1 < T; ++y1) {
    for (int y2 = y1 + 1; y2 <= T; ++y2) {
      const double v = scores(y1 - 1, 0) + scores(y2 - 1, 1);
      if (first || v > res.value) {
        res.value = v;
        res.best = Segmentation{y1, y2};
        first = false;
      }
    }
  }
  return res;
}

inline BruteResult brute_loss_augmented(const Eigen::MatrixXd& scores,
                                        const Segmentation& gold, int tau) {
  const int T = static_cast<int>(scores.rows());
  BruteResult res;
  bool first = true;
  for (int y1 = 1; y1 < T; ++y1) {
    for (int y2 = y1 + 1; y2 <= T; ++y2) {
      const double v = scores(y1 - 1, 0) + scores(y2 - 1, 1) +
                       pair_loss(gold, Segmentation{y1, y2}, tau);
      if (first || v > res.value) {
        res.value = v;
        res.best = Segmentation{y1, y2};
        first = false;
      }
    }
  }
  return res;
}

inline Eigen::MatrixXd random_scores(int T, std::mt19937_64& rng, double scale = 5.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Eigen::MatrixXd m(T, 2);
  for (int t = 0; t < T; ++t) {
    m(t, 0) = dist(rng);
    m(t, 1) = dist(rng);
  }
  return m;
}

inline Segmentation random_gold(int T, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> first(1, T - 1);
  const int y1 = first(rng);
  std::uniform_int_distribution<int> second(y1 + 1, T);
  return Segmentation{y1, second(rng)};
}

}  // namespace drvot::testoracle

#endif
