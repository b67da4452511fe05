#include "drvot/datakit.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "drvot/features.h"

namespace drvot {

namespace fs = std::filesystem;
using nlohmann::json;

int frame_of_ms(double t_ms, double frame_period_ms) {
  return static_cast<int>(std::lround(t_ms / frame_period_ms)) + 1;
}

double ms_of_frame(int frame, double frame_period_ms) {
  return (frame - 1) * frame_period_ms;
}

Segmentation gold_segmentation(const Annotation& a, double frame_period_ms,
                               int num_frames) {
  Segmentation seg;
  if (a.t_pv_ms) {
    seg.y1 = frame_of_ms(*a.t_pv_ms, frame_period_ms);
    seg.y2 = frame_of_ms(a.t_b_ms, frame_period_ms);
  } else {
    seg.y1 = frame_of_ms(a.t_b_ms, frame_period_ms);
    seg.y2 = frame_of_ms(a.t_v_ms, frame_period_ms);
  }
  validate_segmentation(seg, num_frames);
  return seg;
}

namespace {

std::string join_errors(const std::vector<std::string>& errors) {
  std::ostringstream out;
  const size_t shown = std::min<size_t>(errors.size(), 20);
  for (size_t i = 0; i < shown; ++i) {
    if (i) out << "; ";
    out << errors[i];
  }
  if (errors.size() > shown)
    out << "; and " << errors.size() - shown << " more";
  return out.str();
}

std::optional<Annotation> parse_annotation(const json& j, const std::string& utt,
                                           std::vector<std::string>& errors) {
  if (!j.contains("annotation") || j["annotation"].is_null()) return std::nullopt;
  const json& a = j["annotation"];
  Annotation ann;
  if (!a.contains("t_b") || !a.contains("t_v")) {
    errors.push_back("'" + utt + "': annotation needs t_b and t_v");
    return std::nullopt;
  }
  ann.t_b_ms = a["t_b"].get<double>();
  ann.t_v_ms = a["t_v"].get<double>();
  if (a.contains("t_pv") && !a["t_pv"].is_null())
    ann.t_pv_ms = a["t_pv"].get<double>();
  if (ann.t_pv_ms && !(*ann.t_pv_ms < ann.t_b_ms && ann.t_b_ms < ann.t_v_ms)) {
    errors.push_back("'" + utt + "': annotation must satisfy t_pv < t_b < t_v");
    return std::nullopt;
  }
  if (!ann.t_pv_ms && !(ann.t_b_ms < ann.t_v_ms)) {
    errors.push_back("'" + utt + "': annotation must satisfy t_b < t_v");
    return std::nullopt;
  }
  if ((ann.t_pv_ms && *ann.t_pv_ms < 0.0) || ann.t_b_ms < 0.0 || ann.t_v_ms < 0.0) {
    errors.push_back("'" + utt + "': annotation times must be nonnegative");
    return std::nullopt;
  }
  return ann;
}

}  // namespace

std::vector<ManifestRecord> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  const fs::path base = fs::path(path).parent_path();

  std::vector<ManifestRecord> records;
  std::vector<std::string> errors;
  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("manifest '" + path + "' line " + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
    }
    if (j.contains("header")) continue;

    ManifestRecord rec;
    if (!j.contains("utterance_id")) {
      errors.push_back("line " + std::to_string(line_no) + ": missing utterance_id");
      continue;
    }
    rec.utterance_id = j["utterance_id"].get<std::string>();
    rec.corpus_id = j.value("corpus_id", std::string{});
    rec.speaker_id = j.value("speaker_id", std::string{});
    rec.audio_path = j.value("audio", std::string{});
    rec.feature_path = j.value("features", std::string{});

    if (!seen_ids.insert(rec.utterance_id).second)
      errors.push_back("'" + rec.utterance_id + "': duplicate utterance_id");

    const bool has_audio = !rec.audio_path.empty();
    const bool has_features = !rec.feature_path.empty();
    if (has_audio == has_features) {
      errors.push_back("'" + rec.utterance_id +
                       "': exactly one of audio/features must be present");
    } else {
      std::string& src = has_audio ? rec.audio_path : rec.feature_path;
      fs::path p(src);
      if (p.is_relative()) src = (base / p).string();
      if (!fs::exists(src))
        errors.push_back("'" + rec.utterance_id + "': source file not found: " + src);
    }

    rec.annotation = parse_annotation(j, rec.utterance_id, errors);
    records.push_back(std::move(rec));
  }
  if (!errors.empty())
    throw DataError("manifest '" + path + "': " + join_errors(errors));
  return records;
}

void save_manifest(const std::string& path,
                   const std::vector<ManifestRecord>& records, uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  json header = {{"header", {{"tool", "drvot"},
                             {"format", "manifest"},
                             {"seed", seed},
                             {"records", records.size()}}}};
  out << header.dump() << "\n";
  for (const auto& rec : records) {
    json j;
    j["utterance_id"] = rec.utterance_id;
    if (!rec.corpus_id.empty()) j["corpus_id"] = rec.corpus_id;
    if (!rec.speaker_id.empty()) j["speaker_id"] = rec.speaker_id;
    if (!rec.audio_path.empty()) j["audio"] = rec.audio_path;
    if (!rec.feature_path.empty()) j["features"] = rec.feature_path;
    if (rec.annotation) {
      json a;
      if (rec.annotation->t_pv_ms) a["t_pv"] = *rec.annotation->t_pv_ms;
      a["t_b"] = rec.annotation->t_b_ms;
      a["t_v"] = rec.annotation->t_v_ms;
      j["annotation"] = std::move(a);
    }
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing manifest '" + path + "'");
}

ManifestSplit split_by_speaker(const std::vector<ManifestRecord>& records,
                               const SplitFractions& fractions, uint64_t seed) {
  const double frac_sum = fractions.train + fractions.validation + fractions.test;
  if (fractions.train < 0 || fractions.validation < 0 || fractions.test < 0 ||
      std::abs(frac_sum - 1.0) > 1e-9)
    throw ConfigError("split fractions must be nonnegative and sum to 1");

  std::map<std::string, std::vector<const ManifestRecord*>> by_speaker;
  for (const auto& rec : records) by_speaker[rec.speaker_id].push_back(&rec);
  if (by_speaker.size() < 3)
    throw ConfigError("split_by_speaker needs at least 3 speakers, got " +
                      std::to_string(by_speaker.size()));

  std::vector<std::string> speakers;
  speakers.reserve(by_speaker.size());
  for (const auto& [spk, _] : by_speaker) speakers.push_back(spk);
  std::mt19937_64 rng(seed);
  std::shuffle(speakers.begin(), speakers.end(), rng);

  const double total = static_cast<double>(records.size());
  const double targets[3] = {fractions.train * total, fractions.validation * total,
                             fractions.test * total};
  double assigned[3] = {0.0, 0.0, 0.0};
  ManifestSplit split;
  std::vector<ManifestRecord>* outputs[3] = {&split.train, &split.validation,
                                             &split.test};
  for (const auto& spk : speakers) {
    int best = 0;
    double best_deficit = targets[0] - assigned[0];
    for (int s = 1; s < 3; ++s) {
      const double deficit = targets[s] - assigned[s];
      if (deficit > best_deficit) {
        best = s;
        best_deficit = deficit;
      }
    }
    for (const ManifestRecord* rec : by_speaker[spk])
      outputs[best]->push_back(*rec);
    assigned[best] += static_cast<double>(by_speaker[spk].size());
  }
  return split;
}

namespace {

struct PlantedUtterance {
  int frames = 0;
  std::optional<int> pv_frame;
  int burst_frame = 0;
  int vowel_frame = 0;
};

// Boundary draws are independent of corpus identity; minimum interior
// segment length is 10 frames.
PlantedUtterance draw_boundaries(int T, bool negative, std::mt19937_64& rng) {
  constexpr int kMargin = 10;
  PlantedUtterance u;
  u.frames = T;
  if (negative) {
    // prevoicing, burst, vowel with >= kMargin between consecutive marks
    const int pv_hi = T - 3 * kMargin;
    std::uniform_int_distribution<int> pv_dist(kMargin, std::max(kMargin, pv_hi));
    const int pv = pv_dist(rng);
    const int b_hi = std::min(pv + 80, T - 2 * kMargin);
    std::uniform_int_distribution<int> b_dist(pv + kMargin, std::max(pv + kMargin, b_hi));
    const int b = b_dist(rng);
    const int v_hi = std::min(b + 80, T - kMargin);
    std::uniform_int_distribution<int> v_dist(b + kMargin, std::max(b + kMargin, v_hi));
    u.pv_frame = pv;
    u.burst_frame = b;
    u.vowel_frame = v_dist(rng);
  } else {
    const int b_hi = T - 2 * kMargin;
    std::uniform_int_distribution<int> b_dist(kMargin, std::max(kMargin, b_hi));
    const int b = b_dist(rng);
    const int v_hi = std::min(b + 80, T - kMargin);
    std::uniform_int_distribution<int> v_dist(b + kMargin, std::max(b + kMargin, v_hi));
    u.burst_frame = b;
    u.vowel_frame = v_dist(rng);
  }
  return u;
}

Eigen::MatrixXd render_features(const PlantedUtterance& u, int dim,
                                double amplitude, double noise_sd,
                                const Eigen::VectorXd& offset, double gain,
                                std::mt19937_64& rng) {
  const int T = u.frames;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(T, dim);
  const double a = amplitude;

  // dim 0: voicing energy — prevoicing plateau (negative class) and vowel.
  if (u.pv_frame) {
    for (int t = *u.pv_frame; t < u.burst_frame; ++t) x(t - 1, 0) = a;
  }
  for (int t = u.vowel_frame; t <= T; ++t) x(t - 1, 0) = a;

  // dim 1: burst transient.
  x(u.burst_frame - 1, 1) = a;
  if (u.burst_frame < T) x(u.burst_frame, 1) = a;
  if (u.burst_frame + 1 < T) x(u.burst_frame + 1, 1) = a / 3.0;

  // dim 2: sustained periodic pattern from the vowel onset.
  for (int t = u.vowel_frame; t <= T; ++t) {
    const double phase = 2.0 * std::numbers::pi * (t - u.vowel_frame) / 8.0;
    x(t - 1, 2) = a * (1.0 + 0.25 * std::sin(phase));
  }

  std::normal_distribution<double> noise(0.0, noise_sd);
  if (noise_sd > 0.0) {
    for (int t = 0; t < T; ++t)
      for (int d = 0; d < dim; ++d) x(t, d) += noise(rng);
  }

  x *= gain;
  x.rowwise() += offset.transpose();
  return x;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& config,
                                   const std::string& out_dir) {
  if (config.negative_fraction <= 0.0 || config.negative_fraction >= 1.0)
    throw ConfigError("negative_fraction must lie strictly inside (0, 1), got " +
                      std::to_string(config.negative_fraction));
  if (config.dim < 3)
    throw ConfigError("synthetic dim must be >= 3 (three cue dimensions)");
  if (config.min_frames < 60 || config.max_frames < config.min_frames)
    throw ConfigError("synthetic frame range must satisfy 60 <= min <= max");
  if (config.corpus_count < 1) throw ConfigError("corpus_count must be >= 1");
  if (config.utterances_per_speaker < 1)
    throw ConfigError("utterances_per_speaker must be >= 1");
  if (config.noise_sd < 0.0) throw ConfigError("noise_sd must be >= 0");

  std::mt19937_64 rng(config.seed);

  SyntheticCorpus out;
  for (int c = 0; c < config.corpus_count; ++c)
    out.corpus_ids.push_back("corpus" + std::to_string(c));

  // Per-corpus nuisance: explicit values win, otherwise drawn from scales.
  if (!config.corpus_offsets.empty()) {
    if (static_cast<int>(config.corpus_offsets.size()) != config.corpus_count ||
        static_cast<int>(config.corpus_gains.size()) != config.corpus_count)
      throw ConfigError("explicit nuisance must list one offset vector and one "
                        "gain per corpus");
    out.corpus_offsets = config.corpus_offsets;
    out.corpus_gains = config.corpus_gains;
    for (const auto& o : out.corpus_offsets)
      if (static_cast<int>(o.size()) != config.dim)
        throw ConfigError("nuisance offset vectors must have length dim");
  } else {
    std::normal_distribution<double> offset_dist(0.0, 1.0);
    std::uniform_real_distribution<double> gain_dist(
        1.0 - config.nuisance_gain_spread, 1.0 + config.nuisance_gain_spread);
    for (int c = 0; c < config.corpus_count; ++c) {
      std::vector<double> offset(config.dim, 0.0);
      for (double& v : offset) v = config.nuisance_offset_scale * offset_dist(rng);
      out.corpus_offsets.push_back(std::move(offset));
      out.corpus_gains.push_back(config.nuisance_gain_spread > 0.0 ? gain_dist(rng)
                                                                   : 1.0);
    }
  }

  fs::create_directories(fs::path(out_dir) / "features");

  std::uniform_int_distribution<int> frames_dist(config.min_frames,
                                                 config.max_frames);
  std::bernoulli_distribution neg_dist(config.negative_fraction);

  int speaker_counter = 0;
  int utterance_counter = 0;
  auto generate_split = [&](int count, const std::string& split_name,
                            std::vector<ManifestRecord>& records) {
    int in_speaker = 0;
    for (int i = 0; i < count; ++i) {
      if (i == 0 || in_speaker == config.utterances_per_speaker) {
        ++speaker_counter;
        in_speaker = 0;
      }
      ++in_speaker;
      const int corpus = (speaker_counter - 1) % config.corpus_count;

      const int T = frames_dist(rng);
      const bool negative = neg_dist(rng);
      const PlantedUtterance u = draw_boundaries(T, negative, rng);
      const Eigen::VectorXd offset = Eigen::Map<const Eigen::VectorXd>(
          out.corpus_offsets[corpus].data(), config.dim);
      const Eigen::MatrixXd feats =
          render_features(u, config.dim, config.cue_amplitude, config.noise_sd,
                          offset, out.corpus_gains[corpus], rng);

      ManifestRecord rec;
      rec.utterance_id = "utt" + std::to_string(utterance_counter++);
      rec.corpus_id = out.corpus_ids[corpus];
      rec.speaker_id = "spk" + std::to_string(speaker_counter - 1);

      Annotation ann;
      if (u.pv_frame) ann.t_pv_ms = ms_of_frame(*u.pv_frame, 1.0);
      ann.t_b_ms = ms_of_frame(u.burst_frame, 1.0);
      ann.t_v_ms = ms_of_frame(u.vowel_frame, 1.0);
      rec.annotation = ann;

      const std::string rel = "features/" + rec.utterance_id + ".feat";
      rec.feature_path = (fs::path(out_dir) / rel).string();
      FeatureSequence seq;
      seq.frames = feats;
      seq.frame_period_ms = 1.0;
      save_feature_matrix(rec.feature_path, seq);
      records.push_back(std::move(rec));
    }
    (void)split_name;
  };

  generate_split(config.n_train, "train", out.train);
  generate_split(config.n_validation, "validation", out.validation);
  generate_split(config.n_test, "test", out.test);

  save_manifest((fs::path(out_dir) / "train.jsonl").string(), out.train, config.seed);
  save_manifest((fs::path(out_dir) / "validation.jsonl").string(), out.validation,
                config.seed);
  save_manifest((fs::path(out_dir) / "test.jsonl").string(), out.test, config.seed);
  return out;
}

}  // namespace drvot
