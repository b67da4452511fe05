#include <doctest.h>

#include <random>

#include "brute_force.h"
#include "drvot/segmentation.h"

using namespace drvot;
namespace oracle = drvot::testoracle;

namespace {

ScoreMatrix scores_from(const Eigen::MatrixXd& m) {
  ScoreMatrix s;
  s.scores = m;
  return s;
}

}  // namespace

TEST_CASE("task loss: worked examples") {
  TaskLossConfig tau2{2};
  CHECK(task_loss({10, 30}, {10, 30}, tau2) == doctest::Approx(0.0));
  CHECK(task_loss({10, 30}, {15, 33}, tau2) == doctest::Approx(4.0));
  CHECK(task_loss({10, 30}, {11, 31}, tau2) == doctest::Approx(0.0));
}

TEST_CASE("task loss: symmetry, nonnegativity, tau monotonicity") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::uniform_int_distribution<int> t_dist(3, 60);
    const int T = t_dist(rng);
    const Segmentation a = oracle::random_gold(T, rng);
    const Segmentation b = oracle::random_gold(T, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (int tau : {0, 1, 2, 5, 9}) {
      const double ab = task_loss(a, b, TaskLossConfig{tau});
      const double ba = task_loss(b, a, TaskLossConfig{tau});
      CHECK(ab == doctest::Approx(ba));
      CHECK(ab >= 0.0);
      CHECK(ab <= prev);
      prev = ab;
    }
  }
}

TEST_CASE("task loss: malformed segmentations are rejected") {
  CHECK_THROWS_AS(task_loss({5, 5}, {1, 2}, TaskLossConfig{2}), DataError);
  CHECK_THROWS_AS(task_loss({0, 3}, {1, 2}, TaskLossConfig{2}), DataError);
  CHECK_THROWS_AS(task_loss({3, 1}, {1, 2}, TaskLossConfig{2}), DataError);
}

TEST_CASE("decode: all-tie matrix breaks ties to (1,2)") {
  const Segmentation seg = decode(scores_from(Eigen::MatrixXd::Zero(3, 2)));
  CHECK(seg == Segmentation{1, 2});
}

TEST_CASE("decode: one-hot columns") {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 2);
  m(1, 0) = 10.0;
  m(3, 1) = 10.0;
  CHECK(decode(scores_from(m)) == Segmentation{2, 4});
}

TEST_CASE("decode: rejects degenerate input") {
  CHECK_THROWS_AS(decode(scores_from(Eigen::MatrixXd::Zero(1, 2))), DataError);
}

TEST_CASE("decode matches exhaustive search on random matrices") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> t_dist(3, 60);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::MatrixXd m = oracle::random_scores(t_dist(rng), rng);
    const auto expected = oracle::brute_decode(m);
    const Segmentation got = decode(scores_from(m));
    CHECK(got == expected.best);
  }
}

TEST_CASE("decode tie-break matches exhaustive search on integer scores") {
  // Coarse integer scores force frequent exact ties.
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> t_dist(3, 12);
  std::uniform_int_distribution<int> v_dist(0, 2);
  for (int trial = 0; trial < 2000; ++trial) {
    const int T = t_dist(rng);
    Eigen::MatrixXd m(T, 2);
    for (int t = 0; t < T; ++t) {
      m(t, 0) = v_dist(rng);
      m(t, 1) = v_dist(rng);
    }
    CHECK(decode(scores_from(m)) == oracle::brute_decode(m).best);
  }
}

TEST_CASE("loss-augmented decode: large tau reduces to plain decode") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> t_dist(3, 30);
    const int T = t_dist(rng);
    const Eigen::MatrixXd m = oracle::random_scores(T, rng);
    const Segmentation gold = oracle::random_gold(T, rng);
    CHECK(loss_augmented_decode(scores_from(m), gold, TaskLossConfig{T}) ==
          decode(scores_from(m)));
  }
}

TEST_CASE("loss-augmented decode: zero scores pick the farthest pair") {
  const Segmentation got = loss_augmented_decode(
      scores_from(Eigen::MatrixXd::Zero(20, 2)), {5, 10}, TaskLossConfig{0});
  const auto expected =
      oracle::brute_loss_augmented(Eigen::MatrixXd::Zero(20, 2), {5, 10}, 0);
  CHECK(got == expected.best);
  CHECK(got == Segmentation{19, 20});
}

TEST_CASE("loss-augmented decode matches exhaustive search") {
  std::mt19937_64 rng(19);
  std::uniform_int_distribution<int> t_dist(3, 50);
  std::uniform_int_distribution<int> tau_dist(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = t_dist(rng);
    const Eigen::MatrixXd m = oracle::random_scores(T, rng);
    const Segmentation gold = oracle::random_gold(T, rng);
    const int tau = tau_dist(rng);
    CHECK(loss_augmented_decode(scores_from(m), gold, TaskLossConfig{tau}) ==
          oracle::brute_loss_augmented(m, gold, tau).best);
  }
}

TEST_CASE("loss-augmented decode validates gold against T") {
  CHECK_THROWS_AS(loss_augmented_decode(scores_from(Eigen::MatrixXd::Zero(5, 2)),
                                        {2, 9}, TaskLossConfig{1}),
                  DataError);
}

TEST_CASE("structural hinge: gold dominant with margin gives zero") {
  // +10 at the gold entries dwarfs any competitor's loss bonus.
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(12, 2);
  const Segmentation gold{4, 9};
  m(gold.y1 - 1, 0) = 10.0;
  m(gold.y2 - 1, 1) = 10.0;
  const auto brute = oracle::brute_loss_augmented(m, gold, 2);
  REQUIRE(brute.best == gold);  // construction check, via the oracle
  CHECK(structural_hinge(scores_from(m), gold, TaskLossConfig{2}) ==
        doctest::Approx(0.0));
}

TEST_CASE("structural hinge: zero scores equal the augmented task loss") {
  const double value = structural_hinge(scores_from(Eigen::MatrixXd::Zero(20, 2)),
                                        {5, 10}, TaskLossConfig{0});
  CHECK(value == doctest::Approx(24.0));
}

TEST_CASE("structural hinge: bounds on random instances") {
  std::mt19937_64 rng(23);
  std::uniform_int_distribution<int> t_dist(3, 50);
  std::uniform_int_distribution<int> tau_dist(0, 6);
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = t_dist(rng);
    const Eigen::MatrixXd m = oracle::random_scores(T, rng);
    const ScoreMatrix s = scores_from(m);
    const Segmentation gold = oracle::random_gold(T, rng);
    const TaskLossConfig cfg{tau_dist(rng)};
    const double hinge = structural_hinge(s, gold, cfg);
    CHECK(hinge >= 0.0);
    CHECK(hinge >= task_loss(gold, decode(s), cfg));
  }
}

TEST_CASE("structural hinge: non-increasing in tau") {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> t_dist(4, 40);
  for (int trial = 0; trial < 300; ++trial) {
    const int T = t_dist(rng);
    const ScoreMatrix s = scores_from(oracle::random_scores(T, rng));
    const Segmentation gold = oracle::random_gold(T, rng);
    double prev = std::numeric_limits<double>::infinity();
    for (int tau : {0, 1, 2, 4, 8}) {
      const double v = structural_hinge(s, gold, TaskLossConfig{tau});
      CHECK(v <= prev + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("vot_from_segmentation: sign and period scaling") {
  const VotMeasurement pos = vot_from_segmentation({10, 45}, VotType::positive, 1.0);
  CHECK(pos.vot_ms == doctest::Approx(35.0));
  CHECK(pos.vot_type == VotType::positive);

  const VotMeasurement neg = vot_from_segmentation({12, 40}, VotType::negative, 1.0);
  CHECK(neg.vot_ms == doctest::Approx(-28.0));

  const VotMeasurement half = vot_from_segmentation({10, 45}, VotType::positive, 0.5);
  CHECK(half.vot_ms == doctest::Approx(17.5));

  CHECK(std::abs(neg.vot_ms) ==
        doctest::Approx((neg.boundaries.y2 - neg.boundaries.y1) * 1.0));
}
