#include "drvot/features.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace drvot {

namespace {

constexpr double kPowerEps = 1e-30;

struct DftTable {
  // Precomputed one-sided DFT basis for a fixed window length.
  int length = 0;
  Eigen::MatrixXd cos_basis;  // bins x length
  Eigen::MatrixXd sin_basis;
  Eigen::VectorXd bin_hz;

  explicit DftTable(int len, double sample_rate) : length(len) {
    const int bins = len / 2 + 1;
    cos_basis.resize(bins, len);
    sin_basis.resize(bins, len);
    bin_hz.resize(bins);
    for (int k = 0; k < bins; ++k) {
      bin_hz(k) = k * sample_rate / len;
      for (int n = 0; n < len; ++n) {
        const double a = 2.0 * std::numbers::pi * k * n / len;
        cos_basis(k, n) = std::cos(a);
        sin_basis(k, n) = -std::sin(a);
      }
    }
  }
};

double floor_db(double energy, double floor) {
  if (energy <= kPowerEps) return floor;
  return std::max(10.0 * std::log10(energy), floor);
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open audio file '" + path + "'");

  auto read_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (b[1] << 8) | (b[2] << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  };
  auto read_u16 = [&]() {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
  };

  char tag[5] = {0};
  in.read(tag, 4);
  if (std::strncmp(tag, "RIFF", 4) != 0)
    throw DataError("'" + path + "': not a RIFF/WAVE file");
  read_u32();  // chunk size
  in.read(tag, 4);
  if (std::strncmp(tag, "WAVE", 4) != 0)
    throw DataError("'" + path + "': not a RIFF/WAVE file");

  AudioClip clip;
  int channels = 0, bits = 0;
  bool got_fmt = false, got_data = false;
  while (in.read(tag, 4)) {
    const uint32_t size = read_u32();
    if (std::strncmp(tag, "fmt ", 4) == 0) {
      const uint16_t format = read_u16();
      channels = read_u16();
      clip.sample_rate_hz = static_cast<int>(read_u32());
      read_u32();  // byte rate
      read_u16();  // block align
      bits = read_u16();
      if (size > 16) in.seekg(size - 16, std::ios::cur);
      if (format != 1)
        throw DataError("'" + path + "': expected linear PCM (format 1), got format " +
                        std::to_string(format));
      got_fmt = true;
    } else if (std::strncmp(tag, "data", 4) == 0) {
      if (!got_fmt) throw DataError("'" + path + "': data chunk before fmt chunk");
      if (channels != 1)
        throw DataError("'" + path + "': expected mono audio, got " +
                        std::to_string(channels) + " channels");
      if (bits != 16)
        throw DataError("'" + path + "': expected 16-bit samples, got " +
                        std::to_string(bits) + "-bit");
      const size_t n = size / 2;
      clip.samples.resize(n);
      std::vector<int16_t> raw(n);
      in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
      if (!in) throw DataError("'" + path + "': truncated data chunk");
      for (size_t i = 0; i < n; ++i) clip.samples[i] = raw[i] / 32768.0;
      got_data = true;
      break;
    } else {
      in.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!got_data) throw DataError("'" + path + "': missing data chunk");
  return clip;
}

FeatureSequence extract(const AudioClip& audio, const FeatureSpec& spec) {
  if (audio.sample_rate_hz != 16000)
    throw DataError("extract: expected sample rate 16000 Hz, got " +
                    std::to_string(audio.sample_rate_hz));
  if (audio.duration_ms() < 10.0)
    throw DataError("extract: clip shorter than 10 ms (" +
                    std::to_string(audio.duration_ms()) + " ms)");
  for (double s : audio.samples)
    if (!std::isfinite(s)) throw DataError("extract: non-finite sample in input");

  const double sr = audio.sample_rate_hz;
  const int samples_per_ms = 16;
  const int T = static_cast<int>(audio.samples.size()) / samples_per_ms;
  const int n_windows = static_cast<int>(spec.window_sizes_ms.size());
  const int base = FeatureSpec::kMeasuresPerWindow * n_windows;

  std::vector<DftTable> tables;
  tables.reserve(n_windows);
  std::vector<int> lengths;
  for (double w_ms : spec.window_sizes_ms) {
    const int len = std::max(2, static_cast<int>(std::lround(w_ms * samples_per_ms)));
    lengths.push_back(len);
    tables.emplace_back(len, sr);
  }

  Eigen::MatrixXd feats(T, spec.dim());
  Eigen::VectorXd window;
  const int n = static_cast<int>(audio.samples.size());

  for (int t = 1; t <= T; ++t) {
    // Frame t covers [t-1, t) ms; its center sits at (t - 0.5) ms.
    const int center = (t - 1) * samples_per_ms + samples_per_ms / 2;
    int col = 0;
    for (int w = 0; w < n_windows; ++w) {
      const int len = lengths[w];
      window.resize(len);
      const int start = center - len / 2;
      for (int i = 0; i < len; ++i) {
        const int idx = start + i;
        window(i) = (idx >= 0 && idx < n) ? audio.samples[idx] : 0.0;
      }

      const DftTable& dft = tables[w];
      const int bins = static_cast<int>(dft.bin_hz.size());
      Eigen::VectorXd re = dft.cos_basis * window;
      Eigen::VectorXd im = dft.sin_basis * window;
      Eigen::VectorXd power = re.array().square() + im.array().square();

      double total = 0.0, low = 0.0, mid = 0.0, high = 0.0;
      for (int k = 0; k < bins; ++k) {
        total += power(k);
        const double f = dft.bin_hz(k);
        if (f < spec.low_edge_hz)
          low += power(k);
        else if (f < spec.high_edge_hz)
          mid += power(k);
        else
          high += power(k);
      }

      // Wiener entropy over non-DC bins: log of geometric over arithmetic mean.
      double entropy = 0.0;
      if (bins > 1) {
        double log_sum = 0.0, lin_sum = 0.0;
        for (int k = 1; k < bins; ++k) {
          log_sum += std::log(power(k) + kPowerEps);
          lin_sum += power(k);
        }
        const double mean = lin_sum / (bins - 1);
        if (mean > kPowerEps)
          entropy = log_sum / (bins - 1) - std::log(mean);
      }

      double centroid = 0.0;
      if (total > kPowerEps) centroid = dft.bin_hz.dot(power) / total;

      const double max_abs = window.cwiseAbs().maxCoeff();
      int crossings = 0;
      for (int i = 1; i < len; ++i)
        if (window(i - 1) * window(i) < 0.0) ++crossings;
      const double zcr = static_cast<double>(crossings) / (len - 1);

      feats(t - 1, col++) = floor_db(total, spec.energy_floor_db);
      feats(t - 1, col++) = floor_db(low, spec.energy_floor_db);
      feats(t - 1, col++) = floor_db(mid, spec.energy_floor_db);
      feats(t - 1, col++) = floor_db(high, spec.energy_floor_db);
      feats(t - 1, col++) = entropy;
      feats(t - 1, col++) = centroid;
      feats(t - 1, col++) = max_abs;
      feats(t - 1, col++) = zcr;
    }
  }

  if (spec.add_deltas) {
    feats.block(1, base, T - 1, base) =
        feats.block(1, 0, T - 1, base) - feats.block(0, 0, T - 1, base);
    feats.row(0).segment(base, base).setZero();
  }

  FeatureSequence out;
  out.frames = std::move(feats);
  out.frame_period_ms = 1.0;
  return out;
}

NormStats fit_norm(const std::vector<FeatureSequence>& train_features) {
  if (train_features.empty())
    throw DataError("fit_norm: empty training feature list");
  const int dim = train_features.front().dim();
  long total_rows = 0;
  for (const auto& f : train_features) {
    if (f.dim() != dim)
      throw DataError("fit_norm: inconsistent feature dimension (" +
                      std::to_string(f.dim()) + " vs " + std::to_string(dim) + ")");
    total_rows += f.num_frames();
  }

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq_sum = Eigen::VectorXd::Zero(dim);
  for (const auto& f : train_features) {
    sum += f.frames.colwise().sum().transpose();
    sq_sum += f.frames.array().square().colwise().sum().matrix().transpose();
  }
  const Eigen::VectorXd mean = sum / static_cast<double>(total_rows);
  const Eigen::VectorXd var =
      (sq_sum / static_cast<double>(total_rows) - mean.cwiseProduct(mean))
          .cwiseMax(0.0);

  NormStats stats;
  stats.source_dim = dim;
  std::vector<double> kept_mean, kept_sd;
  for (int d = 0; d < dim; ++d) {
    const double sd = std::sqrt(var(d));
    if (sd <= 1e-12) {
      std::cerr << "warning: dropping zero-variance feature dimension " << d
                << "\n";
      continue;
    }
    stats.kept.push_back(d);
    kept_mean.push_back(mean(d));
    kept_sd.push_back(sd);
  }
  if (stats.kept.empty())
    throw DataError("fit_norm: every feature dimension has zero variance");
  stats.mean = Eigen::Map<Eigen::VectorXd>(kept_mean.data(), kept_mean.size());
  stats.stdev = Eigen::Map<Eigen::VectorXd>(kept_sd.data(), kept_sd.size());
  return stats;
}

FeatureSequence apply_norm(const FeatureSequence& x, const NormStats& stats) {
  if (stats.empty()) return x;
  if (x.dim() != stats.source_dim)
    throw DataError("apply_norm: feature dimension " + std::to_string(x.dim()) +
                    " does not match fitted dimension " +
                    std::to_string(stats.source_dim));
  FeatureSequence out;
  out.frame_period_ms = x.frame_period_ms;
  out.frames.resize(x.num_frames(), stats.dim());
  for (int j = 0; j < stats.dim(); ++j) {
    out.frames.col(j) =
        (x.frames.col(stats.kept[j]).array() - stats.mean(j)) / stats.stdev(j);
  }
  return out;
}

FeatureSequence load_feature_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw DataError("'" + path + "': empty feature file");

  int T = 0, D = 0;
  {
    std::istringstream header(line);
    std::string extra;
    if (!(header >> T >> D) || (header >> extra) || T < 1 || D < 1)
      throw DataError("'" + path + "' line 1: malformed header, expected 'T D'");
  }

  FeatureSequence out;
  out.frames.resize(T, D);
  for (int t = 0; t < T; ++t) {
    if (!std::getline(in, line))
      throw DataError("'" + path + "' line " + std::to_string(t + 2) +
                      ": expected " + std::to_string(T) + " rows, found " +
                      std::to_string(t));
    std::istringstream row(line);
    for (int d = 0; d < D; ++d) {
      double v;
      if (!(row >> v))
        throw DataError("'" + path + "' line " + std::to_string(t + 2) +
                        ": expected " + std::to_string(D) + " values");
      if (!std::isfinite(v))
        throw DataError("'" + path + "' line " + std::to_string(t + 2) +
                        ": non-finite value");
      out.frames(t, d) = v;
    }
    double trailing;
    if (row >> trailing)
      throw DataError("'" + path + "' line " + std::to_string(t + 2) +
                      ": more than " + std::to_string(D) + " values");
  }
  return out;
}

void save_feature_matrix(const std::string& path, const FeatureSequence& x) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write feature file '" + path + "'");
  out.precision(17);
  out << x.num_frames() << " " << x.dim() << "\n";
  for (int t = 0; t < x.num_frames(); ++t) {
    for (int d = 0; d < x.dim(); ++d) {
      if (d) out << " ";
      out << x.frames(t, d);
    }
    out << "\n";
  }
  if (!out) throw IoError("failed writing feature file '" + path + "'");
}

}  // namespace drvot
