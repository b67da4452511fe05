#include "drvot/training.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

namespace drvot {

using nlohmann::json;

std::vector<LoadedUtterance> load_utterances(
    const std::vector<ManifestRecord>& records, const FeatureSpec& spec,
    bool require_annotation) {
  std::vector<LoadedUtterance> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    if (require_annotation && !rec.annotation)
      throw DataError("'" + rec.utterance_id + "': missing gold annotation");
    LoadedUtterance u;
    u.utterance_id = rec.utterance_id;
    u.corpus_id = rec.corpus_id;
    u.speaker_id = rec.speaker_id;
    if (!rec.feature_path.empty()) {
      u.features = load_feature_matrix(rec.feature_path);
    } else {
      u.features = extract(load_wav(rec.audio_path), spec);
    }
    if (rec.annotation) {
      u.annotation = *rec.annotation;
      // Surfaces bad gold times against the actual sequence length now.
      gold_segmentation(u.annotation, u.features.frame_period_ms,
                        u.features.num_frames());
    }
    out.push_back(std::move(u));
  }
  return out;
}

std::vector<double> sampling_weights(const std::vector<VotType>& labels) {
  if (labels.empty()) throw ConfigError("sampling_weights: empty label list");
  long n_pos = std::count(labels.begin(), labels.end(), VotType::positive);
  long n_neg = static_cast<long>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw ConfigError(
        "class-balanced sampling needs both VOT classes; the dataset contains "
        "only " +
        std::string(n_pos == 0 ? "negative" : "positive") + " examples");
  std::vector<double> weights(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    const long count = labels[i] == VotType::positive ? n_pos : n_neg;
    weights[i] = 1.0 / (2.0 * static_cast<double>(count));
  }
  return weights;
}

Adagrad::Adagrad(const ModelConfig& config, double learning_rate, double eps)
    : accum_(make_grads(config)), lr_(learning_rate), eps_(eps) {}

void Adagrad::step(ModelParams& params, ModelParams& grads) {
  const auto p_refs = tensor_refs(params);
  const auto g_refs = tensor_refs(grads);
  const auto a_refs = tensor_refs(accum_);
  for (size_t i = 0; i < p_refs.size(); ++i) {
    Eigen::Map<Eigen::ArrayXd> p(p_refs[i].data, p_refs[i].size);
    Eigen::Map<Eigen::ArrayXd> g(g_refs[i].data, g_refs[i].size);
    Eigen::Map<Eigen::ArrayXd> a(a_refs[i].data, a_refs[i].size);
    a += g.square();
    p -= lr_ * g / (a.sqrt() + eps_);
  }
}

std::string epoch_record_to_json(const EpochRecord& rec) {
  json j;
  j["epoch"] = rec.epoch;
  j["struct_loss"] = rec.struct_loss;
  j["tagger_loss"] = rec.tagger_loss;
  j["adversary_loss"] = rec.adversary_loss;
  j["total"] = rec.total;
  j["val_task_loss"] = rec.val_task_loss;
  json tol = json::object();
  for (const auto& [tau, prop] : rec.val_tolerance)
    tol[std::to_string(tau)] = prop;
  j["val_tolerance"] = std::move(tol);
  return j.dump();
}

namespace {

struct PreparedItem {
  FeatureSequence normalized;
  Segmentation gold;
  VotType vot_type = VotType::positive;
  int corpus_label = 0;
  double gold_vot_ms = 0.0;
};

std::vector<std::string> distinct_corpora(
    const std::vector<LoadedUtterance>& items) {
  std::set<std::string> ids;
  for (const auto& u : items) ids.insert(u.corpus_id);
  return {ids.begin(), ids.end()};
}

void zero_grads(ModelParams& grads) {
  for (const TensorRef& ref : tensor_refs(grads))
    Eigen::Map<Eigen::ArrayXd>(ref.data, ref.size).setZero();
}

}  // namespace

std::vector<VotPrediction> predict_all(const Model& model,
                                       const std::vector<LoadedUtterance>& items) {
  std::vector<VotPrediction> out;
  out.reserve(items.size());
  for (const auto& u : items) {
    const VotMeasurement m = model.predict(u.features);
    out.push_back(VotPrediction{u.utterance_id, m.vot_ms, m.vot_type,
                                m.boundaries, m.type_prob,
                                model.version_string()});
  }
  return out;
}

GoldMap golds_from_loaded(const std::vector<LoadedUtterance>& items) {
  GoldMap golds;
  for (const auto& u : items)
    golds[u.utterance_id] = GoldVot{u.annotation.signed_vot_ms(),
                                    u.annotation.vot_type(), u.corpus_id};
  return golds;
}

TrainResult train(const std::vector<LoadedUtterance>& train_items,
                  const std::vector<LoadedUtterance>& val_items,
                  const TrainConfig& config) {
  if (train_items.empty()) throw DataError("training split is empty");
  if (val_items.empty()) throw DataError("validation split is empty");

  // Normalization statistics come from the training split only.
  std::vector<FeatureSequence> train_feats;
  train_feats.reserve(train_items.size());
  for (const auto& u : train_items) train_feats.push_back(u.features);
  const NormStats norm = fit_norm(train_feats);
  train_feats.clear();

  const std::vector<std::string> corpora = distinct_corpora(train_items);
  std::map<std::string, int> corpus_label;
  for (size_t i = 0; i < corpora.size(); ++i)
    corpus_label[corpora[i]] = static_cast<int>(i);

  ModelConfig mc;
  mc.input_dim = norm.dim();
  mc.hidden_size = config.hidden_size;
  mc.num_layers = config.num_layers;
  mc.branch_hidden = config.branch_hidden;
  mc.lambda = config.lambda;
  mc.use_tagger = config.use_tagger;
  mc.use_adversary = config.use_adversary && corpora.size() >= 2;
  mc.corpus_count = mc.use_adversary ? static_cast<int>(corpora.size()) : 0;
  mc.corpus_ids = mc.use_adversary ? corpora : std::vector<std::string>{};

  Model model = Model::init(mc, config.seed);
  model.set_norm(norm);

  std::vector<PreparedItem> prepared;
  prepared.reserve(train_items.size());
  std::vector<VotType> labels;
  labels.reserve(train_items.size());
  for (const auto& u : train_items) {
    PreparedItem item;
    item.normalized = apply_norm(u.features, norm);
    item.gold = gold_segmentation(u.annotation, u.features.frame_period_ms,
                                  u.features.num_frames());
    item.vot_type = u.annotation.vot_type();
    item.corpus_label = corpus_label.at(u.corpus_id);
    item.gold_vot_ms = u.annotation.signed_vot_ms();
    prepared.push_back(std::move(item));
    labels.push_back(prepared.back().vot_type);
  }

  const std::vector<double> weights = sampling_weights(labels);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::discrete_distribution<size_t> draw(weights.begin(), weights.end());

  const int steps = config.steps_per_epoch > 0
                        ? config.steps_per_epoch
                        : static_cast<int>(train_items.size());

  LossOptions options;
  options.tau = TaskLossConfig{config.tau_frames};

  Adagrad optimizer(mc, config.learning_rate, config.adagrad_eps);
  ModelParams grads = make_grads(mc);

  const GoldMap val_golds = golds_from_loaded(val_items);

  TrainResult result;
  double best_val = std::numeric_limits<double>::infinity();
  ModelParams best_params = model.params();
  int best_epoch = 0;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    for (int s = 0; s < steps; ++s) {
      const PreparedItem& item = prepared[draw(rng)];
      zero_grads(grads);
      const LossBundle bundle =
          model.utterance_loss(item.normalized, item.gold, item.vot_type,
                               item.corpus_label, options, &grads);
      optimizer.step(model.params(), grads);
      rec.struct_loss += bundle.struct_loss;
      rec.tagger_loss += bundle.tagger_loss;
      rec.adversary_loss += bundle.adversary_loss;
      rec.total += bundle.total;
    }
    rec.struct_loss /= steps;
    rec.tagger_loss /= steps;
    rec.adversary_loss /= steps;
    rec.total /= steps;

    // Validation uses the inference path end to end.
    const std::vector<VotPrediction> val_preds = predict_all(model, val_items);
    double mean_task = 0.0;
    std::map<int, int> within;
    for (int tau : config.report_taus) within[tau] = 0;
    for (size_t i = 0; i < val_preds.size(); ++i) {
      const VotPrediction& p = val_preds[i];
      const LoadedUtterance& item = val_items[i];
      const GoldVot& gold = val_golds.at(p.utterance_id);
      const Segmentation gold_seg =
          gold_segmentation(item.annotation, item.features.frame_period_ms,
                            item.features.num_frames());
      mean_task += task_loss(gold_seg, p.boundaries,
                             TaskLossConfig{config.tau_frames});
      const double diff = std::abs(p.vot_ms - gold.vot_ms);
      for (int tau : config.report_taus)
        if (diff <= tau) ++within[tau];
    }
    mean_task /= static_cast<double>(val_preds.size());
    rec.val_task_loss = mean_task;
    for (int tau : config.report_taus)
      rec.val_tolerance[tau] =
          static_cast<double>(within[tau]) / static_cast<double>(val_preds.size());
    result.log.push_back(rec);

    if (mean_task < best_val) {
      best_val = mean_task;
      best_params = model.params();
      best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
      if (since_best > config.patience) break;
    }
  }

  model.params() = best_params;
  result.model = std::move(model);
  result.best_epoch = best_epoch;
  return result;
}

ProbeResult corpus_probe(const std::vector<Eigen::VectorXd>& train_x,
                         const std::vector<int>& train_y,
                         const std::vector<Eigen::VectorXd>& test_x,
                         const std::vector<int>& test_y, int classes,
                         uint64_t seed) {
  if (train_x.empty() || test_x.empty())
    throw DataError("corpus_probe: empty probe split");
  if (classes < 2) throw ConfigError("corpus_probe needs >= 2 classes");

  const int dim = static_cast<int>(train_x.front().size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(classes, dim);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(classes);
  Eigen::MatrixXd w_acc = Eigen::MatrixXd::Zero(classes, dim);
  Eigen::VectorXd b_acc = Eigen::VectorXd::Zero(classes);

  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (int r = 0; r < classes; ++r)
    for (int c = 0; c < dim; ++c) w(r, c) = dist(rng);

  const double lr = 0.5;
  const int iterations = 300;
  const double n = static_cast<double>(train_x.size());
  for (int it = 0; it < iterations; ++it) {
    Eigen::MatrixXd dw = Eigen::MatrixXd::Zero(classes, dim);
    Eigen::VectorXd db = Eigen::VectorXd::Zero(classes);
    for (size_t i = 0; i < train_x.size(); ++i) {
      Eigen::VectorXd logits = w * train_x[i] + b;
      logits.array() -= logits.maxCoeff();
      Eigen::VectorXd p = logits.array().exp();
      p /= p.sum();
      p(train_y[i]) -= 1.0;
      dw.noalias() += p * train_x[i].transpose() / n;
      db += p / n;
    }
    w_acc.array() += dw.array().square();
    b_acc.array() += db.array().square();
    w.array() -= lr * dw.array() / (w_acc.array().sqrt() + 1e-8);
    b.array() -= lr * db.array() / (b_acc.array().sqrt() + 1e-8);
  }

  int correct = 0;
  std::vector<int> class_counts(classes, 0);
  for (size_t i = 0; i < test_x.size(); ++i) {
    Eigen::Index arg;
    (w * test_x[i] + b).maxCoeff(&arg);
    if (static_cast<int>(arg) == test_y[i]) ++correct;
    ++class_counts[test_y[i]];
  }
  ProbeResult res;
  res.accuracy = static_cast<double>(correct) / test_x.size();
  res.chance = static_cast<double>(
                   *std::max_element(class_counts.begin(), class_counts.end())) /
               test_x.size();
  return res;
}

namespace {

// Speaker-disjoint split of loaded utterances, mirroring split_by_speaker.
void split_loaded(const std::vector<LoadedUtterance>& items,
                  const SplitFractions& fractions, uint64_t seed,
                  std::vector<LoadedUtterance>& train,
                  std::vector<LoadedUtterance>& val,
                  std::vector<LoadedUtterance>& test) {
  std::map<std::string, std::vector<const LoadedUtterance*>> by_speaker;
  for (const auto& u : items) by_speaker[u.speaker_id].push_back(&u);
  if (by_speaker.size() < 3)
    throw ConfigError("corpus split needs at least 3 speakers");

  std::vector<std::string> speakers;
  for (const auto& [spk, _] : by_speaker) speakers.push_back(spk);
  std::mt19937_64 rng(seed);
  std::shuffle(speakers.begin(), speakers.end(), rng);

  const double total = static_cast<double>(items.size());
  const double targets[3] = {fractions.train * total, fractions.validation * total,
                             fractions.test * total};
  double assigned[3] = {0, 0, 0};
  std::vector<LoadedUtterance>* outputs[3] = {&train, &val, &test};
  for (const auto& spk : speakers) {
    int best = 0;
    double best_deficit = targets[0] - assigned[0];
    for (int s = 1; s < 3; ++s) {
      if (targets[s] - assigned[s] > best_deficit) {
        best = s;
        best_deficit = targets[s] - assigned[s];
      }
    }
    for (const LoadedUtterance* u : by_speaker[spk]) outputs[best]->push_back(*u);
    assigned[best] += static_cast<double>(by_speaker[spk].size());
  }
}

}  // namespace

std::vector<FoldResult> cross_validate(
    const std::vector<std::vector<ManifestRecord>>& corpora,
    const FeatureSpec& spec, const CrossValConfig& config) {
  if (corpora.size() < 2)
    throw ConfigError("cross_validate needs at least 2 corpora, got " +
                      std::to_string(corpora.size()));

  std::vector<std::vector<LoadedUtterance>> loaded;
  loaded.reserve(corpora.size());
  for (const auto& records : corpora)
    loaded.push_back(load_utterances(records, spec));

  std::vector<FoldResult> folds;
  for (size_t held = 0; held < loaded.size(); ++held) {
    FoldResult fold;
    fold.held_out_corpus = loaded[held].empty() ? ("corpus" + std::to_string(held))
                                                : loaded[held].front().corpus_id;

    std::vector<LoadedUtterance> fold_train, fold_val, fold_within;
    for (size_t c = 0; c < loaded.size(); ++c) {
      if (c == held) continue;
      split_loaded(loaded[c], config.fold_split,
                   config.train.seed + 1000003ULL * (held + 1) + c, fold_train,
                   fold_val, fold_within);
    }

    TrainConfig tc = config.train;
    tc.seed = config.train.seed + 7919ULL * held;
    const TrainResult trained = train(fold_train, fold_val, tc);
    fold.log = trained.log;

    const auto within_preds = predict_all(trained.model, fold_within);
    const auto unseen_preds = predict_all(trained.model, loaded[held]);
    fold.within = tolerance_table(within_preds, golds_from_loaded(fold_within),
                                  config.taus);
    fold.unseen = tolerance_table(unseen_preds, golds_from_loaded(loaded[held]),
                                  config.taus);
    fold.within_accuracy =
        classification_accuracy(within_preds, golds_from_loaded(fold_within));
    fold.unseen_accuracy =
        classification_accuracy(unseen_preds, golds_from_loaded(loaded[held]));

    if (config.run_probe) {
      // Probe trains on validation-split summaries and tests on the
      // within-fold held-out speakers; labels are training-corpus indices.
      const std::vector<std::string> ids = distinct_corpora(fold_train);
      std::map<std::string, int> label;
      for (size_t i = 0; i < ids.size(); ++i) label[ids[i]] = static_cast<int>(i);
      auto summaries = [&](const std::vector<LoadedUtterance>& items,
                           std::vector<Eigen::VectorXd>& xs, std::vector<int>& ys) {
        for (const auto& u : items) {
          const FeatureSequence x = apply_norm(u.features, trained.model.norm());
          xs.push_back(Model::summarize(trained.model.encode(x)));
          ys.push_back(label.at(u.corpus_id));
        }
      };
      std::vector<Eigen::VectorXd> probe_train_x, probe_test_x;
      std::vector<int> probe_train_y, probe_test_y;
      summaries(fold_val, probe_train_x, probe_train_y);
      summaries(fold_within, probe_test_x, probe_test_y);
      fold.probe = corpus_probe(probe_train_x, probe_train_y, probe_test_x,
                                probe_test_y, static_cast<int>(ids.size()),
                                tc.seed + 17);
    }

    folds.push_back(std::move(fold));
  }
  return folds;
}

}  // namespace drvot
