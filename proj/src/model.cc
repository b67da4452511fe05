#include "drvot/model.h"

#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

namespace drvot {

using nlohmann::json;

namespace {

void init_tensor(Eigen::Ref<Eigen::MatrixXd> m, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(1, fan_in)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
}

LstmParams make_lstm(int input, int hidden) {
  LstmParams p;
  p.w_input = Eigen::MatrixXd::Zero(4 * hidden, input);
  p.w_recur = Eigen::MatrixXd::Zero(4 * hidden, hidden);
  p.bias = Eigen::VectorXd::Zero(4 * hidden);
  return p;
}

AffineParams make_affine(int out, int in) {
  return AffineParams{Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

ModelParams make_params(const ModelConfig& c) {
  ModelParams p;
  int in = c.input_dim;
  for (int l = 0; l < c.num_layers; ++l) {
    BiLstmLayer layer;
    layer.fwd = make_lstm(in, c.hidden_size);
    layer.bwd = make_lstm(in, c.hidden_size);
    p.layers.push_back(std::move(layer));
    in = 2 * c.hidden_size;
  }
  const int emb = c.embedding_dim();
  p.head_pos = make_affine(2, emb);
  p.head_neg = make_affine(2, emb);
  p.tagger.hidden = make_affine(c.branch_hidden, emb);
  p.tagger.out = make_affine(2, c.branch_hidden);
  if (c.use_adversary) {
    p.adversary.hidden = make_affine(c.branch_hidden, emb);
    p.adversary.out = make_affine(c.corpus_count, c.branch_hidden);
  }
  return p;
}

void append_affine(std::vector<TensorRef>& out, const std::string& prefix,
                   AffineParams& a) {
  out.push_back({prefix + ".w", a.w.data(), a.w.size()});
  out.push_back({prefix + ".b", a.b.data(), a.b.size()});
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

}  // namespace

std::vector<TensorRef> tensor_refs(ModelParams& params) {
  std::vector<TensorRef> out;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const std::string base = "layer" + std::to_string(l);
    for (auto* dir : {&params.layers[l].fwd, &params.layers[l].bwd}) {
      const std::string d = dir == &params.layers[l].fwd ? ".fwd" : ".bwd";
      out.push_back({base + d + ".w_input", dir->w_input.data(), dir->w_input.size()});
      out.push_back({base + d + ".w_recur", dir->w_recur.data(), dir->w_recur.size()});
      out.push_back({base + d + ".bias", dir->bias.data(), dir->bias.size()});
    }
  }
  append_affine(out, "head_pos", params.head_pos);
  append_affine(out, "head_neg", params.head_neg);
  append_affine(out, "tagger.hidden", params.tagger.hidden);
  append_affine(out, "tagger.out", params.tagger.out);
  if (params.adversary.hidden.w.size() > 0) {
    append_affine(out, "adversary.hidden", params.adversary.hidden);
    append_affine(out, "adversary.out", params.adversary.out);
  }
  return out;
}

ModelParams make_grads(const ModelConfig& config) { return make_params(config); }

Model Model::init(const ModelConfig& config, uint64_t seed) {
  if (config.input_dim < 1) throw ConfigError("model input_dim must be >= 1");
  if (config.hidden_size < 1) throw ConfigError("model hidden_size must be >= 1");
  if (config.num_layers < 1) throw ConfigError("model num_layers must be >= 1");
  if (config.use_adversary && config.corpus_count < 2)
    throw ConfigError("adversary branch needs corpus_count >= 2, got " +
                      std::to_string(config.corpus_count));
  if (config.lambda < 0.0) throw ConfigError("lambda must be >= 0");

  Model m;
  m.config_ = config;
  m.params_ = make_params(config);

  std::mt19937_64 rng(seed);
  int in = config.input_dim;
  for (auto& layer : m.params_.layers) {
    for (auto* dir : {&layer.fwd, &layer.bwd}) {
      init_tensor(dir->w_input, in, rng);
      init_tensor(dir->w_recur, config.hidden_size, rng);
      Eigen::Map<Eigen::MatrixXd> bias(dir->bias.data(), dir->bias.size(), 1);
      init_tensor(bias, in + config.hidden_size, rng);
    }
    in = 2 * config.hidden_size;
  }
  const int emb = config.embedding_dim();
  auto init_affine = [&](AffineParams& a) {
    init_tensor(a.w, static_cast<int>(a.w.cols()), rng);
    Eigen::Map<Eigen::MatrixXd> bias(a.b.data(), a.b.size(), 1);
    init_tensor(bias, static_cast<int>(a.w.cols()), rng);
  };
  init_affine(m.params_.head_pos);
  init_affine(m.params_.head_neg);
  init_affine(m.params_.tagger.hidden);
  init_affine(m.params_.tagger.out);
  if (config.use_adversary) {
    init_affine(m.params_.adversary.hidden);
    init_affine(m.params_.adversary.out);
  }
  (void)emb;
  return m;
}

void Model::encode_with_trace(const FeatureSequence& x, EncodeTrace& trace) const {
  if (x.num_frames() < 2)
    throw DataError("encode: sequence needs T >= 2, got T=" +
                    std::to_string(x.num_frames()));
  if (x.dim() != config_.input_dim)
    throw DataError("encode: feature dimension " + std::to_string(x.dim()) +
                    " does not match model input_dim " +
                    std::to_string(config_.input_dim));
  if (!x.frames.allFinite()) throw DataError("encode: non-finite feature values");

  trace.layer_inputs.clear();
  trace.layer_traces.assign(params_.layers.size(), BiLstmTrace{});
  trace.layer_inputs.push_back(x.frames);
  for (size_t l = 0; l < params_.layers.size(); ++l) {
    bilstm_forward(params_.layers[l], trace.layer_inputs.back(), trace.layer_traces[l]);
    if (l + 1 < params_.layers.size())
      trace.layer_inputs.push_back(trace.layer_traces[l].output);
  }
}

Eigen::MatrixXd Model::encode(const FeatureSequence& x) const {
  EncodeTrace trace;
  encode_with_trace(x, trace);
  return trace.embeddings();
}

ScoreMatrix Model::score_frames(const Eigen::MatrixXd& embeddings,
                                VotType head) const {
  const AffineParams& a =
      head == VotType::positive ? params_.head_pos : params_.head_neg;
  ScoreMatrix s;
  s.scores = embeddings * a.w.transpose();
  s.scores.rowwise() += a.b.transpose();
  return s;
}

Eigen::VectorXd Model::summarize(const Eigen::MatrixXd& embeddings) {
  if (embeddings.rows() < 1 || embeddings.cols() % 2 != 0)
    throw DataError("summarize: embeddings must be T x 2h with T >= 1");
  const Eigen::Index h = embeddings.cols() / 2;
  Eigen::VectorXd summary(2 * h);
  summary.head(h) = embeddings.row(embeddings.rows() - 1).head(h);
  summary.tail(h) = embeddings.row(0).tail(h);
  return summary;
}

BranchTrace branch_forward(const MlpParams& mlp, const Eigen::VectorXd& input) {
  BranchTrace t;
  t.hidden_pre = mlp.hidden.w * input + mlp.hidden.b;
  t.hidden_act = t.hidden_pre.cwiseMax(0.0);
  t.probs = softmax(mlp.out.w * t.hidden_act + mlp.out.b);
  return t;
}

Eigen::Vector2d Model::tag(const Eigen::VectorXd& summary) const {
  return branch_forward(params_.tagger, summary).probs;
}

Eigen::VectorXd Model::adversary_predict(const Eigen::VectorXd& summary) const {
  if (!config_.use_adversary || config_.corpus_count < 2)
    throw ConfigError("adversary branch is not configured (corpus_count < 2)");
  return branch_forward(params_.adversary, summary).probs;
}

VotMeasurement Model::predict(const FeatureSequence& raw) const {
  const FeatureSequence x = apply_norm(raw, norm_);
  const Eigen::MatrixXd H = encode(x);
  VotType head = VotType::positive;
  double type_prob = 1.0;
  if (config_.use_tagger) {
    const Eigen::Vector2d probs = tag(summarize(H));
    head = probs(0) >= probs(1) ? VotType::positive : VotType::negative;
    type_prob = probs(head == VotType::positive ? 0 : 1);
  }
  const Segmentation seg = decode(score_frames(H, head));
  return vot_from_segmentation(seg, head, raw.frame_period_ms, type_prob);
}

namespace {

// Backprop through one branch MLP. Returns d(loss)/d(input); label gradient
// is softmax minus one-hot, scaled by `weight`.
Eigen::VectorXd branch_backward(const MlpParams& mlp, const Eigen::VectorXd& input,
                                const BranchTrace& t, int label, double weight,
                                MlpParams& grads) {
  Eigen::VectorXd d_logits = t.probs * weight;
  d_logits(label) -= weight;
  grads.out.w.noalias() += d_logits * t.hidden_act.transpose();
  grads.out.b += d_logits;
  Eigen::VectorXd d_hidden = mlp.out.w.transpose() * d_logits;
  d_hidden = (t.hidden_pre.array() > 0.0).select(d_hidden.array(), 0.0).matrix();
  grads.hidden.w.noalias() += d_hidden * input.transpose();
  grads.hidden.b += d_hidden;
  return mlp.hidden.w.transpose() * d_hidden;
}

}  // namespace

LossBundle Model::utterance_loss(const FeatureSequence& normalized,
                                 const Segmentation& gold, VotType gold_type,
                                 int corpus_label, const LossOptions& options,
                                 ModelParams* grads) const {
  EncodeTrace trace;
  encode_with_trace(normalized, trace);
  const Eigen::MatrixXd& H = trace.embeddings();
  const int T = static_cast<int>(H.rows());
  validate_segmentation(gold, T);

  LossBundle bundle;
  bundle.lambda = config_.lambda;

  const AffineParams& head =
      gold_type == VotType::positive ? params_.head_pos : params_.head_neg;
  const ScoreMatrix scores = score_frames(H, gold_type);
  const HingeDetail hinge = structural_hinge_detail(scores, gold, options.tau);
  bundle.struct_loss = hinge.value;

  Eigen::VectorXd summary;
  BranchTrace tagger_trace, adversary_trace;
  const bool need_summary = config_.use_tagger || config_.use_adversary;
  if (need_summary) summary = summarize(H);

  if (config_.use_tagger) {
    tagger_trace = branch_forward(params_.tagger, summary);
    const int label = gold_type == VotType::positive ? 0 : 1;
    bundle.tagger_loss = -std::log(std::max(tagger_trace.probs(label), 1e-300));
  }
  if (config_.use_adversary) {
    if (corpus_label < 0 || corpus_label >= config_.corpus_count)
      throw DataError("corpus label " + std::to_string(corpus_label) +
                      " outside adversary range [0, " +
                      std::to_string(config_.corpus_count) + ")");
    adversary_trace = branch_forward(params_.adversary, summary);
    bundle.adversary_loss =
        -std::log(std::max(adversary_trace.probs(corpus_label), 1e-300));
  }
  bundle.total = bundle.struct_loss + bundle.tagger_loss +
                 bundle.lambda * bundle.adversary_loss;

  if (!grads) return bundle;

  // d(total)/d(embeddings), assembled from the three branches.
  Eigen::MatrixXd dH = Eigen::MatrixXd::Zero(T, H.cols());

  // Structural hinge: +1 at the augmented argmax entries, -1 at gold.
  if (!(hinge.augmented == gold)) {
    AffineParams& head_grads =
        gold_type == VotType::positive ? grads->head_pos : grads->head_neg;
    const auto add_entry = [&](int frame, int slot, double sign) {
      head_grads.w.row(slot) += sign * H.row(frame - 1);
      head_grads.b(slot) += sign;
      dH.row(frame - 1) += sign * head.w.row(slot);
    };
    add_entry(hinge.augmented.y1, 0, +1.0);
    add_entry(hinge.augmented.y2, 1, +1.0);
    add_entry(gold.y1, 0, -1.0);
    add_entry(gold.y2, 1, -1.0);
  }

  if (need_summary) {
    Eigen::VectorXd d_summary = Eigen::VectorXd::Zero(summary.size());
    if (config_.use_tagger) {
      const int label = gold_type == VotType::positive ? 0 : 1;
      d_summary += branch_backward(params_.tagger, summary, tagger_trace, label,
                                   1.0, grads->tagger);
    }
    if (config_.use_adversary) {
      Eigen::VectorXd d_adv =
          branch_backward(params_.adversary, summary, adversary_trace,
                          corpus_label, bundle.lambda, grads->adversary);
      // The reversal gate sits between the summary and the adversary input:
      // identity forward, sign flip backward.
      d_summary += options.reverse_adversary_gradient ? Eigen::VectorXd(-d_adv)
                                                      : d_adv;
    }
    const Eigen::Index h = H.cols() / 2;
    dH.row(T - 1).head(h) += d_summary.head(h);
    dH.row(0).tail(h) += d_summary.tail(h);
  }

  Eigen::MatrixXd d_input = dH;
  for (int l = static_cast<int>(params_.layers.size()) - 1; l >= 0; --l) {
    d_input = bilstm_backward(params_.layers[l], trace.layer_inputs[l],
                              trace.layer_traces[l], d_input, grads->layers[l]);
  }
  return bundle;
}

std::string Model::version_string() const {
  return std::string("drvot/") + kToolVersion + " fmt" +
         std::to_string(kModelFormatVersion);
}

void Model::save(const std::string& path) const {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["tool"] = "drvot";
  j["tool_version"] = kToolVersion;
  j["config"] = {{"input_dim", config_.input_dim},
                 {"hidden_size", config_.hidden_size},
                 {"num_layers", config_.num_layers},
                 {"branch_hidden", config_.branch_hidden},
                 {"corpus_count", config_.corpus_count},
                 {"lambda", config_.lambda},
                 {"use_tagger", config_.use_tagger},
                 {"use_adversary", config_.use_adversary},
                 {"corpus_ids", config_.corpus_ids}};
  if (!norm_.empty()) {
    j["norm"] = {{"source_dim", norm_.source_dim},
                 {"kept", norm_.kept},
                 {"mean", std::vector<double>(norm_.mean.begin(), norm_.mean.end())},
                 {"stdev", std::vector<double>(norm_.stdev.begin(), norm_.stdev.end())}};
  } else {
    j["norm"] = nullptr;
  }

  json tensors = json::object();
  auto& self = const_cast<Model&>(*this);
  for (const TensorRef& ref : tensor_refs(self.params_)) {
    tensors[ref.name] = std::vector<double>(ref.data, ref.data + ref.size);
  }
  j["tensors"] = std::move(tensors);

  std::ofstream out(path);
  if (!out) throw IoError("cannot write model file '" + path + "'");
  out << j.dump() << "\n";
  if (!out) throw IoError("failed writing model file '" + path + "'");
}

Model Model::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file '" + path + "' is not valid JSON: " + e.what());
  }

  if (!j.contains("format_version") || !j["format_version"].is_number_integer())
    throw DataError("model file '" + path + "' lacks a format_version");
  const int version = j["format_version"].get<int>();
  if (version != kModelFormatVersion)
    throw DataError("model file '" + path + "' has format version " +
                    std::to_string(version) + ", this build reads version " +
                    std::to_string(kModelFormatVersion));

  ModelConfig cfg;
  const json& c = j.at("config");
  cfg.input_dim = c.at("input_dim").get<int>();
  cfg.hidden_size = c.at("hidden_size").get<int>();
  cfg.num_layers = c.at("num_layers").get<int>();
  cfg.branch_hidden = c.at("branch_hidden").get<int>();
  cfg.corpus_count = c.at("corpus_count").get<int>();
  cfg.lambda = c.at("lambda").get<double>();
  cfg.use_tagger = c.at("use_tagger").get<bool>();
  cfg.use_adversary = c.at("use_adversary").get<bool>();
  if (c.contains("corpus_ids"))
    cfg.corpus_ids = c.at("corpus_ids").get<std::vector<std::string>>();

  Model m;
  m.config_ = cfg;
  m.params_ = make_params(cfg);

  if (j.contains("norm") && !j["norm"].is_null()) {
    const json& n = j["norm"];
    m.norm_.source_dim = n.at("source_dim").get<int>();
    m.norm_.kept = n.at("kept").get<std::vector<int>>();
    const auto mean = n.at("mean").get<std::vector<double>>();
    const auto sd = n.at("stdev").get<std::vector<double>>();
    if (mean.size() != m.norm_.kept.size() || sd.size() != m.norm_.kept.size())
      throw DataError("model file '" + path + "': inconsistent norm block");
    m.norm_.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    m.norm_.stdev = Eigen::Map<const Eigen::VectorXd>(sd.data(), sd.size());
  }

  const json& tensors = j.at("tensors");
  for (const TensorRef& ref : tensor_refs(m.params_)) {
    if (!tensors.contains(ref.name))
      throw DataError("model file '" + path + "': missing tensor '" + ref.name + "'");
    const auto values = tensors[ref.name].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != ref.size)
      throw DataError("model file '" + path + "': tensor '" + ref.name +
                      "' has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(ref.size));
    std::copy(values.begin(), values.end(), ref.data);
  }
  return m;
}

}  // namespace drvot
