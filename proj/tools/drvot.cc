// Command-line surface: synth | train | predict | eval | crossval.
// Exit codes: 0 success, 1 data error, 2 config error, 3 io error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "drvot/datakit.h"
#include "drvot/evaluation.h"
#include "drvot/model.h"
#include "drvot/training.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drvot;

namespace {

void print_resolved(const std::string& command, const json& config) {
  json banner = {{"command", command}, {"resolved_config", config}};
  std::cout << banner.dump() << std::endl;
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"learning_rate", c.learning_rate},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"tau_frames", c.tau_frames},
              {"lambda", c.lambda},
              {"hidden_size", c.hidden_size},
              {"num_layers", c.num_layers},
              {"branch_hidden", c.branch_hidden},
              {"use_tagger", c.use_tagger},
              {"use_adversary", c.use_adversary},
              {"seed", c.seed},
              {"steps_per_epoch", c.steps_per_epoch},
              {"report_taus", c.report_taus}};
}

void train_config_from_json(const json& j, TrainConfig& c) {
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.tau_frames = j.value("tau_frames", c.tau_frames);
  c.lambda = j.value("lambda", c.lambda);
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.branch_hidden = j.value("branch_hidden", c.branch_hidden);
  c.use_tagger = j.value("use_tagger", c.use_tagger);
  c.use_adversary = j.value("use_adversary", c.use_adversary);
  c.seed = j.value("seed", c.seed);
  c.steps_per_epoch = j.value("steps_per_epoch", c.steps_per_epoch);
  if (j.contains("report_taus"))
    c.report_taus = j["report_taus"].get<std::vector<int>>();
}

json synth_config_to_json(const SyntheticConfig& c) {
  return json{{"n_train", c.n_train},
              {"n_validation", c.n_validation},
              {"n_test", c.n_test},
              {"negative_fraction", c.negative_fraction},
              {"min_frames", c.min_frames},
              {"max_frames", c.max_frames},
              {"dim", c.dim},
              {"corpus_count", c.corpus_count},
              {"utterances_per_speaker", c.utterances_per_speaker},
              {"cue_amplitude", c.cue_amplitude},
              {"noise_sd", c.noise_sd},
              {"nuisance_offset_scale", c.nuisance_offset_scale},
              {"nuisance_gain_spread", c.nuisance_gain_spread},
              {"seed", c.seed}};
}

void synth_config_from_json(const json& j, SyntheticConfig& c) {
  c.n_train = j.value("n_train", c.n_train);
  c.n_validation = j.value("n_validation", c.n_validation);
  c.n_test = j.value("n_test", c.n_test);
  c.negative_fraction = j.value("negative_fraction", c.negative_fraction);
  c.min_frames = j.value("min_frames", c.min_frames);
  c.max_frames = j.value("max_frames", c.max_frames);
  c.dim = j.value("dim", c.dim);
  c.corpus_count = j.value("corpus_count", c.corpus_count);
  c.utterances_per_speaker =
      j.value("utterances_per_speaker", c.utterances_per_speaker);
  c.cue_amplitude = j.value("cue_amplitude", c.cue_amplitude);
  c.noise_sd = j.value("noise_sd", c.noise_sd);
  c.nuisance_offset_scale =
      j.value("nuisance_offset_scale", c.nuisance_offset_scale);
  c.nuisance_gain_spread = j.value("nuisance_gain_spread", c.nuisance_gain_spread);
  c.seed = j.value("seed", c.seed);
  if (j.contains("corpus_offsets"))
    c.corpus_offsets = j["corpus_offsets"].get<std::vector<std::vector<double>>>();
  if (j.contains("corpus_gains"))
    c.corpus_gains = j["corpus_gains"].get<std::vector<double>>();
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " +
                      std::string(e.what()));
  }
}

FeatureSpec feature_spec_from_json(const json& j) {
  FeatureSpec spec;
  if (!j.contains("features")) return spec;
  const json& f = j["features"];
  if (f.contains("window_sizes_ms"))
    spec.window_sizes_ms = f["window_sizes_ms"].get<std::vector<double>>();
  spec.low_edge_hz = f.value("low_edge_hz", spec.low_edge_hz);
  spec.high_edge_hz = f.value("high_edge_hz", spec.high_edge_hz);
  spec.energy_floor_db = f.value("energy_floor_db", spec.energy_floor_db);
  spec.add_deltas = f.value("add_deltas", spec.add_deltas);
  return spec;
}

void write_epoch_log(const std::string& path, const std::vector<EpochRecord>& log,
                     const TrainConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write log file '" + path + "'");
  json header = {{"header", {{"tool", "drvot"},
                             {"format", "epoch_log"},
                             {"seed", config.seed},
                             {"config", train_config_to_json(config)}}}};
  out << header.dump() << "\n";
  for (const auto& rec : log) out << epoch_record_to_json(rec) << "\n";
}

json table_to_json(const ToleranceTable& table) {
  json rows = json::array();
  for (const auto& row : table.rows) {
    rows.push_back({{"stratum", row.stratum},
                    {"count", row.count},
                    {"proportions", row.proportions}});
  }
  return json{{"taus", table.taus}, {"rows", rows}};
}

std::vector<int> parse_taus(const std::string& csv) {
  std::vector<int> taus;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      taus.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("bad tolerance list entry '" + item + "'");
    }
  }
  if (taus.empty()) throw ConfigError("empty tolerance list");
  return taus;
}

int run(int argc, char** argv) {
  CLI::App app{"drvot: voice onset time measurement by structured prediction"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  std::string synth_out, synth_config_path;
  SyntheticConfig synth_cfg;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--config", synth_config_path, "JSON config file");
  synth->add_option("--seed", synth_cfg.seed, "random seed");
  synth->add_option("--train", synth_cfg.n_train, "training utterances");
  synth->add_option("--val", synth_cfg.n_validation, "validation utterances");
  synth->add_option("--test", synth_cfg.n_test, "test utterances");
  synth->add_option("--corpora", synth_cfg.corpus_count, "number of corpora");
  synth->add_option("--negative-fraction", synth_cfg.negative_fraction,
                    "share of prevoiced utterances");
  synth->add_option("--noise-sd", synth_cfg.noise_sd, "additive noise sd");
  synth->add_option("--min-frames", synth_cfg.min_frames, "shortest utterance");
  synth->add_option("--max-frames", synth_cfg.max_frames, "longest utterance");
  synth->add_option("--dims", synth_cfg.dim, "feature dimensions");
  synth->add_option("--cue-amplitude", synth_cfg.cue_amplitude,
                    "planted cue amplitude");
  synth->add_option("--nuisance-offset", synth_cfg.nuisance_offset_scale,
                    "per-corpus offset scale");
  synth->add_option("--nuisance-gain", synth_cfg.nuisance_gain_spread,
                    "per-corpus gain spread");
  synth->add_option("--utts-per-speaker", synth_cfg.utterances_per_speaker,
                    "utterances per synthetic speaker");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a model");
  std::string train_manifest, val_manifest, model_out, train_log_path,
      train_config_path;
  TrainConfig train_cfg;
  bool no_tagger = false, no_adversary = false;
  train_cmd->add_option("--train-manifest", train_manifest, "training manifest")
      ->required();
  train_cmd->add_option("--val-manifest", val_manifest, "validation manifest")
      ->required();
  train_cmd->add_option("--out", model_out, "output model file")->required();
  train_cmd->add_option("--log", train_log_path, "epoch log file (JSON lines)");
  train_cmd->add_option("--config", train_config_path, "JSON config file");
  train_cmd->add_option("--seed", train_cfg.seed, "random seed");
  train_cmd->add_option("--lr", train_cfg.learning_rate, "Adagrad learning rate");
  train_cmd->add_option("--epochs", train_cfg.max_epochs, "epoch cap");
  train_cmd->add_option("--patience", train_cfg.patience, "early stopping patience");
  train_cmd->add_option("--tau", train_cfg.tau_frames, "training tolerance (frames)");
  train_cmd->add_option("--lambda", train_cfg.lambda, "adversary loss weight");
  train_cmd->add_option("--hidden", train_cfg.hidden_size, "recurrent width");
  train_cmd->add_option("--layers", train_cfg.num_layers, "recurrent layers");
  train_cmd->add_option("--branch-hidden", train_cfg.branch_hidden,
                        "tagger/adversary hidden width");
  train_cmd->add_option("--steps-per-epoch", train_cfg.steps_per_epoch,
                        "draws per epoch (0 = training-set size)");
  train_cmd->add_flag("--no-tagger", no_tagger, "disable the VOT-type tagger");
  train_cmd->add_flag("--no-adversary", no_adversary, "disable the adversary");

  // ---- predict ----
  auto* predict_cmd = app.add_subcommand("predict", "measure VOT for a manifest");
  std::string predict_model, predict_manifest, predict_out;
  uint64_t predict_seed = 0;
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--manifest", predict_manifest, "input manifest")
      ->required();
  predict_cmd->add_option("--out", predict_out, "output predictions (JSON lines)")
      ->required();
  predict_cmd->add_option("--seed", predict_seed, "recorded in the output header");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold");
  std::string eval_preds, eval_manifest, eval_out, eval_taus = "2,5,10,15";
  eval_cmd->add_option("--predictions", eval_preds, "predictions file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "gold manifest")->required();
  eval_cmd->add_option("--out", eval_out, "report prefix (.json/.txt)")->required();
  eval_cmd->add_option("--taus", eval_taus, "comma-separated tolerances (ms)");

  // ---- crossval ----
  auto* cv_cmd = app.add_subcommand("crossval", "leave-one-corpus-out evaluation");
  std::vector<std::string> cv_manifests;
  std::string cv_out, cv_config_path, cv_taus = "2,5,10,15";
  TrainConfig cv_train_cfg;
  bool cv_no_probe = false, cv_no_tagger = false, cv_no_adversary = false;
  cv_cmd->add_option("--manifest", cv_manifests,
                     "manifest(s); corpora are grouped by corpus_id")
      ->required();
  cv_cmd->add_option("--out", cv_out, "output directory")->required();
  cv_cmd->add_option("--config", cv_config_path, "JSON config file");
  cv_cmd->add_option("--seed", cv_train_cfg.seed, "random seed");
  cv_cmd->add_option("--lr", cv_train_cfg.learning_rate, "Adagrad learning rate");
  cv_cmd->add_option("--epochs", cv_train_cfg.max_epochs, "epoch cap");
  cv_cmd->add_option("--patience", cv_train_cfg.patience, "early stopping patience");
  cv_cmd->add_option("--tau", cv_train_cfg.tau_frames, "training tolerance");
  cv_cmd->add_option("--lambda", cv_train_cfg.lambda, "adversary loss weight");
  cv_cmd->add_option("--hidden", cv_train_cfg.hidden_size, "recurrent width");
  cv_cmd->add_option("--layers", cv_train_cfg.num_layers, "recurrent layers");
  cv_cmd->add_option("--steps-per-epoch", cv_train_cfg.steps_per_epoch,
                     "draws per epoch");
  cv_cmd->add_option("--taus", cv_taus, "comma-separated tolerances (ms)");
  cv_cmd->add_flag("--no-probe", cv_no_probe, "skip the corpus probe");
  cv_cmd->add_flag("--no-tagger", cv_no_tagger, "disable the VOT-type tagger");
  cv_cmd->add_flag("--no-adversary", cv_no_adversary, "disable the adversary");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    const json file_cfg = load_config_file(synth_config_path);
    SyntheticConfig from_file = synth_cfg;
    synth_config_from_json(file_cfg, from_file);
    // CLI flags win over config-file values.
    auto keep = [&](const char* flag) { return synth->count(flag) > 0; };
    SyntheticConfig resolved = from_file;
    if (keep("--seed")) resolved.seed = synth_cfg.seed;
    if (keep("--train")) resolved.n_train = synth_cfg.n_train;
    if (keep("--val")) resolved.n_validation = synth_cfg.n_validation;
    if (keep("--test")) resolved.n_test = synth_cfg.n_test;
    if (keep("--corpora")) resolved.corpus_count = synth_cfg.corpus_count;
    if (keep("--negative-fraction"))
      resolved.negative_fraction = synth_cfg.negative_fraction;
    if (keep("--noise-sd")) resolved.noise_sd = synth_cfg.noise_sd;
    if (keep("--min-frames")) resolved.min_frames = synth_cfg.min_frames;
    if (keep("--max-frames")) resolved.max_frames = synth_cfg.max_frames;
    if (keep("--dims")) resolved.dim = synth_cfg.dim;
    if (keep("--cue-amplitude")) resolved.cue_amplitude = synth_cfg.cue_amplitude;
    if (keep("--nuisance-offset"))
      resolved.nuisance_offset_scale = synth_cfg.nuisance_offset_scale;
    if (keep("--nuisance-gain"))
      resolved.nuisance_gain_spread = synth_cfg.nuisance_gain_spread;
    if (keep("--utts-per-speaker"))
      resolved.utterances_per_speaker = synth_cfg.utterances_per_speaker;

    print_resolved("synth", synth_config_to_json(resolved));
    fs::create_directories(synth_out);
    generate_synthetic(resolved, synth_out);
    std::ofstream cfg_out(fs::path(synth_out) / "synth_config.json");
    cfg_out << synth_config_to_json(resolved).dump(2) << "\n";
    std::cout << "wrote " << synth_out << "/{train,validation,test}.jsonl"
              << std::endl;
    return 0;
  }

  if (train_cmd->parsed()) {
    const json file_cfg = load_config_file(train_config_path);
    TrainConfig resolved = train_cfg;
    train_config_from_json(file_cfg, resolved);
    auto keep = [&](const char* flag) { return train_cmd->count(flag) > 0; };
    if (keep("--seed")) resolved.seed = train_cfg.seed;
    if (keep("--lr")) resolved.learning_rate = train_cfg.learning_rate;
    if (keep("--epochs")) resolved.max_epochs = train_cfg.max_epochs;
    if (keep("--patience")) resolved.patience = train_cfg.patience;
    if (keep("--tau")) resolved.tau_frames = train_cfg.tau_frames;
    if (keep("--lambda")) resolved.lambda = train_cfg.lambda;
    if (keep("--hidden")) resolved.hidden_size = train_cfg.hidden_size;
    if (keep("--layers")) resolved.num_layers = train_cfg.num_layers;
    if (keep("--branch-hidden")) resolved.branch_hidden = train_cfg.branch_hidden;
    if (keep("--steps-per-epoch"))
      resolved.steps_per_epoch = train_cfg.steps_per_epoch;
    if (no_tagger) resolved.use_tagger = false;
    if (no_adversary) resolved.use_adversary = false;

    print_resolved("train", train_config_to_json(resolved));
    const FeatureSpec spec = feature_spec_from_json(file_cfg);
    const auto train_items = load_utterances(load_manifest(train_manifest), spec);
    const auto val_items = load_utterances(load_manifest(val_manifest), spec);
    const TrainResult result = train(train_items, val_items, resolved);
    result.model.save(model_out);
    const std::string log_path =
        train_log_path.empty() ? model_out + ".log.jsonl" : train_log_path;
    write_epoch_log(log_path, result.log, resolved);
    std::cout << "best epoch " << result.best_epoch << "; model written to "
              << model_out << std::endl;
    return 0;
  }

  if (predict_cmd->parsed()) {
    print_resolved("predict", json{{"model", predict_model},
                                   {"manifest", predict_manifest},
                                   {"seed", predict_seed}});
    const Model model = Model::load(predict_model);
    const auto records = load_manifest(predict_manifest);
    const auto items = load_utterances(records, FeatureSpec{}, false);
    const auto preds = predict_all(model, items);
    save_predictions(predict_out, preds, predict_seed);
    std::cout << "wrote " << preds.size() << " predictions to " << predict_out
              << std::endl;
    return 0;
  }

  if (eval_cmd->parsed()) {
    const std::vector<int> taus = parse_taus(eval_taus);
    print_resolved("eval", json{{"predictions", eval_preds},
                                {"manifest", eval_manifest},
                                {"taus", taus}});
    const auto preds = load_predictions(eval_preds);
    const auto golds = golds_from_manifest(load_manifest(eval_manifest));
    const ToleranceTable table = tolerance_table(preds, golds, taus);
    const double accuracy = classification_accuracy(preds, golds);

    json report = {{"tolerance_table", table_to_json(table)},
                   {"classification_accuracy", accuracy}};
    std::ofstream json_out(eval_out + ".json");
    if (!json_out) throw IoError("cannot write '" + eval_out + ".json'");
    json_out << report.dump(2) << "\n";
    std::ofstream text_out(eval_out + ".txt");
    if (!text_out) throw IoError("cannot write '" + eval_out + ".txt'");
    text_out << render_tolerance_table(table);
    text_out << "type accuracy: " << accuracy << "\n";
    std::cout << render_tolerance_table(table) << "type accuracy: " << accuracy
              << std::endl;
    return 0;
  }

  if (cv_cmd->parsed()) {
    const json file_cfg = load_config_file(cv_config_path);
    CrossValConfig cv_cfg;
    train_config_from_json(file_cfg, cv_cfg.train);
    auto keep = [&](const char* flag) { return cv_cmd->count(flag) > 0; };
    if (keep("--seed")) cv_cfg.train.seed = cv_train_cfg.seed;
    if (keep("--lr")) cv_cfg.train.learning_rate = cv_train_cfg.learning_rate;
    if (keep("--epochs")) cv_cfg.train.max_epochs = cv_train_cfg.max_epochs;
    if (keep("--patience")) cv_cfg.train.patience = cv_train_cfg.patience;
    if (keep("--tau")) cv_cfg.train.tau_frames = cv_train_cfg.tau_frames;
    if (keep("--lambda")) cv_cfg.train.lambda = cv_train_cfg.lambda;
    if (keep("--hidden")) cv_cfg.train.hidden_size = cv_train_cfg.hidden_size;
    if (keep("--layers")) cv_cfg.train.num_layers = cv_train_cfg.num_layers;
    if (keep("--steps-per-epoch"))
      cv_cfg.train.steps_per_epoch = cv_train_cfg.steps_per_epoch;
    if (cv_no_tagger) cv_cfg.train.use_tagger = false;
    if (cv_no_adversary) cv_cfg.train.use_adversary = false;
    cv_cfg.taus = parse_taus(cv_taus);
    cv_cfg.run_probe = !cv_no_probe;

    print_resolved("crossval", train_config_to_json(cv_cfg.train));

    // Group records by corpus id across all provided manifests.
    std::map<std::string, std::vector<ManifestRecord>> by_corpus;
    for (const auto& path : cv_manifests)
      for (auto& rec : load_manifest(path))
        by_corpus[rec.corpus_id].push_back(std::move(rec));
    std::vector<std::vector<ManifestRecord>> corpora;
    for (auto& [id, recs] : by_corpus) corpora.push_back(std::move(recs));

    const FeatureSpec spec = feature_spec_from_json(file_cfg);
    const auto folds = cross_validate(corpora, spec, cv_cfg);

    fs::create_directories(cv_out);
    json summary = json::array();
    for (const auto& fold : folds) {
      json fj = {{"held_out_corpus", fold.held_out_corpus},
                 {"within", table_to_json(fold.within)},
                 {"unseen", table_to_json(fold.unseen)},
                 {"within_accuracy", fold.within_accuracy},
                 {"unseen_accuracy", fold.unseen_accuracy}};
      if (cv_cfg.run_probe) {
        fj["probe_accuracy"] = fold.probe.accuracy;
        fj["probe_chance"] = fold.probe.chance;
      }
      summary.push_back(fj);
      std::cout << "fold holding out " << fold.held_out_corpus << "\n"
                << "  within:\n"
                << render_tolerance_table(fold.within) << "  unseen:\n"
                << render_tolerance_table(fold.unseen);
    }
    std::ofstream out(fs::path(cv_out) / "crossval.json");
    if (!out) throw IoError("cannot write crossval report");
    out << summary.dump(2) << "\n";
    std::cout << "wrote " << (fs::path(cv_out) / "crossval.json").string()
              << std::endl;
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
