#include "drvot/evaluation.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace drvot {

using nlohmann::json;

GoldMap golds_from_manifest(const std::vector<ManifestRecord>& records) {
  GoldMap golds;
  std::vector<std::string> missing;
  for (const auto& rec : records) {
    if (!rec.annotation) {
      missing.push_back(rec.utterance_id);
      continue;
    }
    golds[rec.utterance_id] = GoldVot{rec.annotation->signed_vot_ms(),
                                      rec.annotation->vot_type(), rec.corpus_id};
  }
  if (!missing.empty()) {
    std::string msg = "records lack gold annotations:";
    for (size_t i = 0; i < std::min<size_t>(missing.size(), 10); ++i)
      msg += " '" + missing[i] + "'";
    if (missing.size() > 10)
      msg += " and " + std::to_string(missing.size() - 10) + " more";
    throw DataError(msg);
  }
  return golds;
}

namespace {

void check_same_ids(const std::vector<VotPrediction>& predictions,
                    const GoldMap& golds) {
  std::set<std::string> pred_ids, gold_ids;
  for (const auto& p : predictions) pred_ids.insert(p.utterance_id);
  for (const auto& [id, _] : golds) gold_ids.insert(id);
  if (pred_ids == gold_ids) return;

  auto describe = [](const std::set<std::string>& a, const std::set<std::string>& b,
                     const char* what) {
    std::vector<std::string> only;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(only));
    std::string msg;
    if (!only.empty()) {
      msg = std::string(" ") + what + ":";
      for (size_t i = 0; i < std::min<size_t>(only.size(), 10); ++i)
        msg += " '" + only[i] + "'";
      if (only.size() > 10) msg += " and " + std::to_string(only.size() - 10) + " more";
    }
    return msg;
  };
  throw DataError("prediction/gold id mismatch;" +
                  describe(pred_ids, gold_ids, "only in predictions") +
                  describe(gold_ids, pred_ids, "only in golds"));
}

}  // namespace

ToleranceTable tolerance_table(const std::vector<VotPrediction>& predictions,
                               const GoldMap& golds,
                               const std::vector<int>& taus) {
  if (taus.empty()) throw ConfigError("tolerance_table needs at least one tau");
  check_same_ids(predictions, golds);

  ToleranceTable table;
  table.taus = taus;
  const char* strata[3] = {"all", "positive", "negative"};
  int counts[3] = {0, 0, 0};
  std::vector<std::vector<int>> hits(3, std::vector<int>(taus.size(), 0));

  for (const auto& p : predictions) {
    const GoldVot& gold = golds.at(p.utterance_id);
    const double diff = std::abs(p.vot_ms - gold.vot_ms);
    const int stratum = gold.vot_type == VotType::positive ? 1 : 2;
    for (int s : {0, stratum}) {
      ++counts[s];
      for (size_t k = 0; k < taus.size(); ++k)
        if (diff <= static_cast<double>(taus[k])) ++hits[s][k];
    }
  }

  for (int s = 0; s < 3; ++s) {
    ToleranceRow row;
    row.stratum = strata[s];
    row.count = counts[s];
    row.proportions.resize(taus.size(), 0.0);
    if (counts[s] > 0)
      for (size_t k = 0; k < taus.size(); ++k)
        row.proportions[k] = static_cast<double>(hits[s][k]) / counts[s];
    table.rows.push_back(std::move(row));
  }
  return table;
}

double classification_accuracy(const std::vector<VotPrediction>& predictions,
                               const GoldMap& golds) {
  check_same_ids(predictions, golds);
  if (predictions.empty()) throw DataError("no predictions to score");
  int correct = 0;
  for (const auto& p : predictions)
    if (p.vot_type == golds.at(p.utterance_id).vot_type) ++correct;
  return static_cast<double>(correct) / predictions.size();
}

std::string render_tolerance_table(const ToleranceTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "stratum" << std::right << std::setw(7)
      << "count";
  for (int tau : table.taus) {
    std::ostringstream h;
    h << "<=" << tau << "ms";
    out << std::setw(9) << h.str();
  }
  out << "\n";
  for (const auto& row : table.rows) {
    out << std::left << std::setw(10) << row.stratum << std::right << std::setw(7)
        << row.count;
    for (size_t k = 0; k < table.taus.size(); ++k) {
      if (row.count == 0) {
        out << std::setw(9) << "-";
      } else {
        out << std::setw(9) << std::fixed << std::setprecision(3)
            << row.proportions[k];
      }
    }
    out << "\n";
  }
  return out.str();
}

void save_predictions(const std::string& path,
                      const std::vector<VotPrediction>& predictions,
                      uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write predictions file '" + path + "'");
  json header = {{"header", {{"tool", "drvot"},
                             {"format", "predictions"},
                             {"seed", seed},
                             {"records", predictions.size()}}}};
  out << header.dump() << "\n";
  for (const auto& p : predictions) {
    json j;
    j["utterance_id"] = p.utterance_id;
    j["vot_ms"] = p.vot_ms;
    j["vot_type"] = to_string(p.vot_type);
    j["y1"] = p.boundaries.y1;
    j["y2"] = p.boundaries.y2;
    j["type_prob"] = p.type_prob;
    j["model_version"] = p.model_version;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing predictions file '" + path + "'");
}

std::vector<VotPrediction> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open predictions file '" + path + "'");
  std::vector<VotPrediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("predictions '" + path + "' line " + std::to_string(line_no) +
                      ": invalid JSON: " + e.what());
    }
    if (j.contains("header")) continue;
    VotPrediction p;
    p.utterance_id = j.at("utterance_id").get<std::string>();
    p.vot_ms = j.at("vot_ms").get<double>();
    p.vot_type = vot_type_from_string(j.at("vot_type").get<std::string>());
    p.boundaries.y1 = j.at("y1").get<int>();
    p.boundaries.y2 = j.at("y2").get<int>();
    p.type_prob = j.value("type_prob", 1.0);
    p.model_version = j.value("model_version", std::string{});
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace drvot
