#include "probekit/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "probekit/classify.hpp"
#include "probekit/corpus.hpp"
#include "probekit/embedding_io.hpp"
#include "probekit/error.hpp"
#include "probekit/features.hpp"
#include "probekit/hashing.hpp"
#include "probekit/icu.hpp"
#include "probekit/probing.hpp"

namespace probekit {

namespace fs = std::filesystem;

namespace {

constexpr const char* kProbeResults = "probe_results.csv";
constexpr const char* kClassifierResults = "classifier_results.csv";

struct GridFlags {
  std::vector<std::size_t> depths{1, 2, 3};
  std::vector<std::size_t> units{10, 100};
  std::vector<double> learning_rates{1e-3, 1e-4};
  std::size_t batch_size = 32;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;

  void attach(CLI::App* cmd) {
    cmd->add_option("--depths", depths, "Hidden-layer counts to search")->delimiter(',');
    cmd->add_option("--units", units, "Units per hidden layer to search")->delimiter(',');
    cmd->add_option("--lr", learning_rates, "Adam learning rates to search")->delimiter(',');
    cmd->add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
    cmd->add_option("--max-epochs", max_epochs)->check(CLI::PositiveNumber);
    cmd->add_option("--patience", patience)->check(CLI::PositiveNumber);
  }

  TrainConfig train_config() const {
    TrainConfig t;
    t.batch_size = batch_size;
    t.max_epochs = max_epochs;
    t.patience = patience;
    return t;
  }

  nlohmann::ordered_json to_json() const {
    return {{"depths", depths},       {"units", units},           {"learning_rates", learning_rates},
            {"batch_size", batch_size}, {"max_epochs", max_epochs}, {"patience", patience}};
  }
};

struct Options {
  std::uint64_t seed = 42;

  std::string corpus;
  std::string out;
  std::string out_dir = ".";
  std::string icu_list;

  std::string task = "all";
  std::string layer = "all";
  std::string probe_dir = ".";
  std::string embeddings;
  std::string bigram_embeddings;
  std::size_t word_targets = 50;
  std::size_t length_bins = 6;
  std::size_t top_classes = 20;

  std::string setting = "all";
  std::string features;
  std::size_t classifier_layer = 0;
  std::size_t folds = 5;

  GridFlags grid;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ValidationError(std::string("missing required input: ") + what);
  if (!fs::is_regular_file(path)) throw IoError(std::string(what) + " not found: '" + path + "'");
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return to_hex(fnv1a64(bytes));
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

/// Records what produced an artifact: command, full configuration, input
/// digests, seed and a hash of the configuration.
void write_manifest(const fs::path& path, const std::string& command, std::uint64_t seed,
                    const nlohmann::ordered_json& config, const std::vector<std::string>& inputs,
                    const std::vector<fs::path>& outputs) {
  nlohmann::ordered_json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = config;
  m["config_hash"] = to_hex(fnv1a64(command + config.dump() + std::to_string(seed)));
  auto& in = m["inputs"] = nlohmann::ordered_json::array();
  for (const auto& p : inputs) in.push_back({{"path", p}, {"fnv1a64", file_digest(p)}});
  auto& out = m["outputs"] = nlohmann::ordered_json::array();
  for (const auto& p : outputs) out.push_back({{"path", p.string()}, {"fnv1a64", file_digest(p)}});
  write_text(path, m.dump(2) + "\n");
}

Corpus load_split_corpus(const std::string& path, std::uint64_t seed) {
  SplitOptions split;
  split.seed = seed;
  return assign_splits(load_corpus(path), split);
}

std::vector<ProbingTask> selected_tasks(const std::string& name) {
  if (name == "all") return {kProbingTasks.begin(), kProbingTasks.end()};
  return {parse_probing_task(name)};
}

fs::path dataset_path(const fs::path& dir, ProbingTask task) {
  return dir / (std::string(to_string(task)) + ".probe.jsonl");
}

int run_extract_features(const Options& o, std::ostream& out) {
  require_file(o.corpus, "corpus");
  if (o.out.empty()) throw ValidationError("missing required output: --out");
  if (!o.icu_list.empty()) require_file(o.icu_list, "ICU word list");

  const auto corpus = load_split_corpus(o.corpus, o.seed);
  const auto icu = o.icu_list.empty() ? IcuMatcher() : IcuMatcher::from_file(o.icu_list);
  RuleVocabulary vocab;
  const auto table = extract_corpus_features(corpus, icu, &vocab);

  std::ostringstream csv;
  write_feature_csv(csv, table);
  write_text(o.out, csv.str());

  nlohmann::ordered_json config{{"corpus", o.corpus}, {"out", o.out}, {"icu_list", o.icu_list}};
  config["vocabulary_source"] = vocab.source();
  config["vocabulary"] = table.schema;
  std::vector<std::string> inputs{o.corpus};
  if (!o.icu_list.empty()) inputs.push_back(o.icu_list);
  write_manifest(o.out + ".manifest.json", "extract-features", o.seed, config, inputs, {o.out});
  out << "wrote " << table.ids.size() << " feature rows x " << table.schema.size() << " features to " << o.out
      << '\n';
  return 0;
}

int run_build_probe(const Options& o, std::ostream& out) {
  require_file(o.corpus, "corpus");
  const auto tasks = selected_tasks(o.task);
  const auto corpus = load_split_corpus(o.corpus, o.seed);
  ProbingConfig cfg;
  cfg.seed = o.seed;
  cfg.word_content_targets = o.word_targets;
  cfg.sentence_length_bins = o.length_bins;
  cfg.top_constituent_classes = o.top_classes;

  std::vector<fs::path> outputs;
  for (auto task : tasks) {
    const auto ds = build_probing_dataset(task, corpus, cfg);
    std::ostringstream s;
    write_probing_dataset(s, ds);
    outputs.push_back(dataset_path(o.out_dir, task));
    write_text(outputs.back(), s.str());
    out << to_string(task) << ": " << ds.instances.size() << " instances, " << ds.n_classes << " classes\n";
    if (task == ProbingTask::BiGramShift) {
      std::ostringstream c;
      write_corpus(c, bigram_shift_corpus(corpus, ds));
      outputs.push_back(fs::path(o.out_dir) / "BiGramShift.corpus.jsonl");
      write_text(outputs.back(), c.str());
    }
  }
  nlohmann::ordered_json config{{"corpus", o.corpus},           {"task", o.task},
                                {"out_dir", o.out_dir},         {"word_targets", o.word_targets},
                                {"length_bins", o.length_bins}, {"top_classes", o.top_classes}};
  write_manifest(fs::path(o.out_dir) / "build-probe.manifest.json", "build-probe", o.seed, config, {o.corpus}, outputs);
  return 0;
}

ProbingDataset load_dataset(const fs::path& path) {
  std::ifstream in(path);
  return read_probing_dataset(in, path.string());
}

int run_train_probe(const Options& o, std::ostream& out) {
  const auto tasks = selected_tasks(o.task);
  const bool needs_main = std::any_of(tasks.begin(), tasks.end(), [](auto t) { return t != ProbingTask::BiGramShift; });
  const bool needs_bigram = std::any_of(tasks.begin(), tasks.end(), [](auto t) { return t == ProbingTask::BiGramShift; });
  for (auto t : tasks) require_file(dataset_path(o.probe_dir, t).string(), "probing dataset");
  if (needs_main) require_file(o.embeddings, "embedding file (--embeddings)");
  if (needs_bigram) require_file(o.bigram_embeddings, "BiGramShift embedding file (--bigram-embeddings)");

  std::optional<EmbeddingStore> main_store, bigram_store;
  if (needs_main) main_store = read_embeddings(fs::path(o.embeddings));
  if (needs_bigram) bigram_store = read_embeddings(fs::path(o.bigram_embeddings));

  ProbeGrid grid;
  grid.depths = o.grid.depths;
  grid.units = o.grid.units;
  grid.learning_rates = o.grid.learning_rates;
  grid.train = o.grid.train_config();

  std::vector<ProbeResult> results;
  for (auto task : tasks) {
    const auto ds = load_dataset(dataset_path(o.probe_dir, task));
    const auto& store = task == ProbingTask::BiGramShift ? *bigram_store : *main_store;
    std::vector<std::size_t> layers;
    if (o.layer == "all") {
      for (std::size_t l = 1; l <= store.n_layers(); ++l) layers.push_back(l);
    } else {
      std::size_t l = 0;
      try {
        l = std::stoul(o.layer);
      } catch (const std::exception&) {
        throw ValidationError("--layer must be a positive integer or 'all'");
      }
      layers.push_back(l);
    }
    for (auto l : layers) {
      results.push_back(run_probe(ds, store, l, grid, o.seed));
      out << to_string(task) << " layer " << l << ": test accuracy " << results.back().accuracy << '\n';
    }
  }

  const fs::path dir(o.out_dir);
  std::ostringstream csv;
  write_probe_results_csv(csv, results);
  write_text(dir / kProbeResults, csv.str());
  const auto rows = probe_report(results);
  write_text(dir / "probe_report.txt", format_probe_table(rows));
  write_text(dir / "probe_report.csv", format_probe_csv(rows));
  out << format_probe_table(rows);

  nlohmann::ordered_json config{{"task", o.task},
                                {"layer", o.layer},
                                {"probe_dir", o.probe_dir},
                                {"embeddings", o.embeddings},
                                {"bigram_embeddings", o.bigram_embeddings},
                                {"out_dir", o.out_dir},
                                {"grid", o.grid.to_json()}};
  std::vector<std::string> inputs;
  for (auto t : tasks) inputs.push_back(dataset_path(o.probe_dir, t).string());
  if (needs_main) inputs.push_back(o.embeddings);
  if (needs_bigram) inputs.push_back(o.bigram_embeddings);
  write_manifest(dir / "train-probe.manifest.json", "train-probe", o.seed, config, inputs,
                 {dir / kProbeResults, dir / "probe_report.txt", dir / "probe_report.csv"});
  return 0;
}

int run_train_classifier(const Options& o, std::ostream& out) {
  std::vector<ModelSetting> settings;
  if (o.setting == "all")
    settings.assign(kModelSettings.begin(), kModelSettings.end());
  else
    settings.push_back(parse_model_setting(o.setting));
  const bool needs_features = std::any_of(settings.begin(), settings.end(), [](auto s) { return s != ModelSetting::EmbeddingOnly; });
  const bool needs_embeddings = std::any_of(settings.begin(), settings.end(), [](auto s) { return s != ModelSetting::FeaturesOnly; });
  require_file(o.corpus, "corpus");
  if (needs_features) require_file(o.features, "feature file (--features)");
  if (needs_embeddings) require_file(o.embeddings, "embedding file (--embeddings)");

  const auto corpus = load_split_corpus(o.corpus, o.seed);
  std::optional<FeatureTable> features;
  std::optional<EmbeddingStore> store;
  if (needs_features) {
    std::ifstream in(o.features);
    features = read_feature_csv(in, o.features);
  }
  if (needs_embeddings) store = read_embeddings(fs::path(o.embeddings));
  const std::optional<std::size_t> layer =
      o.classifier_layer == 0 ? std::nullopt : std::optional<std::size_t>(o.classifier_layer);

  ClassifierOptions options;
  options.depths = o.grid.depths;
  options.units = o.grid.units;
  options.learning_rates = o.grid.learning_rates;
  options.train = o.grid.train_config();
  options.folds = o.folds;

  std::vector<ClassifierReportRow> rows;
  for (auto s : settings) {
    const auto inputs = assemble_inputs(s, corpus, store ? &*store : nullptr, features ? &*features : nullptr, layer);
    const auto r = run_experiment(inputs, options, o.seed);
    rows.push_back({std::string(display_name(s)), r.metrics});
    out << display_name(s) << ": chose " << describe(r.chosen) << ", " << r.final_epochs << " epochs\n";
  }

  const fs::path dir(o.out_dir);
  std::ostringstream csv;
  write_classifier_results_csv(csv, rows);
  write_text(dir / kClassifierResults, csv.str());
  write_text(dir / "classifier_report.txt", format_classifier_table(rows));
  write_text(dir / "classifier_report.csv", format_classifier_csv(rows));
  out << format_classifier_table(rows);

  nlohmann::ordered_json config{{"setting", o.setting},   {"corpus", o.corpus}, {"features", o.features},
                                {"embeddings", o.embeddings}, {"layer", o.classifier_layer}, {"folds", o.folds},
                                {"out_dir", o.out_dir},   {"grid", o.grid.to_json()}};
  std::vector<std::string> inputs{o.corpus};
  if (needs_features) inputs.push_back(o.features);
  if (needs_embeddings) inputs.push_back(o.embeddings);
  write_manifest(dir / "train-classifier.manifest.json", "train-classifier", o.seed, config, inputs,
                 {dir / kClassifierResults, dir / "classifier_report.txt", dir / "classifier_report.csv"});
  return 0;
}

int run_report(const Options& o, std::ostream& out) {
  const fs::path dir(o.out_dir);
  const bool have_probes = fs::is_regular_file(dir / kProbeResults);
  const bool have_classifiers = fs::is_regular_file(dir / kClassifierResults);
  if (!have_probes && !have_classifiers)
    throw ValidationError("no artifacts: neither " + std::string(kProbeResults) + " nor " + kClassifierResults +
                          " found in '" + dir.string() + "'");
  std::string text;
  if (have_probes) {
    std::ifstream in(dir / kProbeResults);
    const auto results = read_probe_results_csv(in, (dir / kProbeResults).string());
    text += "Probing results\n\n" + format_probe_table(probe_report(results));
  }
  if (have_classifiers) {
    std::ifstream in(dir / kClassifierResults);
    const auto rows = read_classifier_results_csv(in, (dir / kClassifierResults).string());
    if (!text.empty()) text += '\n';
    text += "Classification results\n\n" + format_classifier_table(rows);
  }
  write_text(dir / "report.txt", text);
  out << text;
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Linguistic probing and feature-augmented AD classification toolkit", "probekit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file mirroring the command-line flags");
  Options o;
  app.add_option("--seed", o.seed, "Seed for splits, probes and classifiers")->capture_default_str();

  auto* extract = app.add_subcommand("extract-features", "Write the 119-feature CSV for a corpus");
  extract->add_option("--corpus", o.corpus, "Transcript JSONL")->required();
  extract->add_option("--out", o.out, "Feature CSV to write")->required();
  extract->add_option("--icu-list", o.icu_list, "Information content unit list, one word per line");

  auto* build = app.add_subcommand("build-probe", "Build probing datasets");
  build->add_option("--task", o.task, "Probing task or 'all'")->capture_default_str();
  build->add_option("--corpus", o.corpus, "Transcript JSONL")->required();
  build->add_option("--out-dir", o.out_dir)->capture_default_str();
  build->add_option("--word-targets", o.word_targets)->check(CLI::Range(2, 100000));
  build->add_option("--length-bins", o.length_bins)->check(CLI::Range(2, 1000));
  build->add_option("--top-classes", o.top_classes)->check(CLI::Range(2, 100000));

  auto* probe = app.add_subcommand("train-probe", "Train layer-wise probes");
  probe->add_option("--task", o.task, "Probing task or 'all'")->capture_default_str();
  probe->add_option("--layer", o.layer, "Layer index (1-based) or 'all'")->capture_default_str();
  probe->add_option("--probe-dir", o.probe_dir, "Directory holding build-probe output")->capture_default_str();
  probe->add_option("--embeddings", o.embeddings, "Embedding file for the corpus");
  probe->add_option("--bigram-embeddings", o.bigram_embeddings, "Embedding file for the BiGramShift corpus");
  probe->add_option("--out-dir", o.out_dir)->capture_default_str();
  o.grid.attach(probe);

  auto* classify = app.add_subcommand("train-classifier", "Train and evaluate AD classifiers");
  classify->add_option("--setting", o.setting, "features-only, embedding-only, embedding-plus-features or all")
      ->capture_default_str();
  classify->add_option("--corpus", o.corpus, "Transcript JSONL")->required();
  classify->add_option("--features", o.features, "Feature CSV from extract-features");
  classify->add_option("--embeddings", o.embeddings, "Embedding file");
  classify->add_option("--layer", o.classifier_layer, "Embedding layer (default: last)");
  classify->add_option("--folds", o.folds)->check(CLI::Range(2, 100));
  classify->add_option("--out-dir", o.out_dir)->capture_default_str();
  o.grid.attach(classify);

  auto* report = app.add_subcommand("report", "Collate probe and classifier results");
  report->add_option("--out-dir", o.out_dir, "Directory holding results")->capture_default_str();

  std::vector<std::string> storage{"probekit"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 && e.get_exit_code() != 0 ? 2 : code;
  }

  try {
    if (extract->parsed()) return run_extract_features(o, out);
    if (build->parsed()) return run_build_probe(o, out);
    if (probe->parsed()) return run_train_probe(o, out);
    if (classify->parsed()) return run_train_classifier(o, out);
    if (report->parsed()) return run_report(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace probekit
