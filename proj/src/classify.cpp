#include "probekit/classify.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/hashing.hpp"

namespace probekit {

std::string_view display_name(ModelSetting setting) {
  switch (setting) {
    case ModelSetting::FeaturesOnly:
      return "NN + FS1";
    case ModelSetting::EmbeddingOnly:
      return "Fine-tuned BERT";
    case ModelSetting::EmbeddingPlusFeatures:
      return "BERT + FS1";
  }
  return "";
}

std::string_view cli_name(ModelSetting setting) {
  switch (setting) {
    case ModelSetting::FeaturesOnly:
      return "features-only";
    case ModelSetting::EmbeddingOnly:
      return "embedding-only";
    case ModelSetting::EmbeddingPlusFeatures:
      return "embedding-plus-features";
  }
  return "";
}

ModelSetting parse_model_setting(std::string_view name) {
  for (auto s : kModelSettings)
    if (name == cli_name(s) || name == display_name(s)) return s;
  throw ValidationError("unknown model setting '" + std::string(name) + "'");
}

EvalMetrics evaluate(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw ValidationError("predictions (" + std::to_string(predictions.size()) + ") and labels (" +
                          std::to_string(labels.size()) + ") differ in length");
  EvalMetrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if ((labels[i] != 0 && labels[i] != 1) || (predictions[i] != 0 && predictions[i] != 1))
      throw ValidationError("labels and predictions must be binary");
    const bool truth = labels[i] == 1;
    const bool guess = predictions[i] == 1;
    if (truth && guess)
      ++m.tp;
    else if (truth)
      ++m.fn;
    else if (guess)
      ++m.fp;
    else
      ++m.tn;
  }
  auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(m.tp + m.tn, labels.size());
  m.sensitivity = ratio(m.tp, m.tp + m.fn);
  m.specificity = ratio(m.tn, m.tn + m.fp);
  return m;
}

ExperimentInputs assemble_inputs(ModelSetting setting, const Corpus& corpus, const EmbeddingStore* embeddings,
                                 const FeatureTable* features, std::optional<std::size_t> layer) {
  const bool need_features = setting != ModelSetting::EmbeddingOnly;
  const bool need_embeddings = setting != ModelSetting::FeaturesOnly;
  if (need_features && !features)
    throw ValidationError(std::string(cli_name(setting)) + " needs a feature file");
  if (need_embeddings && !embeddings)
    throw ValidationError(std::string(cli_name(setting)) + " needs an embedding file");
  if (!corpus.all_tagged()) throw ValidationError("classification needs split tags on every utterance");

  std::vector<std::string> ids;
  for (const auto& u : corpus.utterances()) ids.push_back(u.id);

  Eigen::MatrixXd feature_rows;
  if (need_features) {
    std::unordered_map<std::string_view, std::size_t> row_of;
    for (std::size_t i = 0; i < features->ids.size(); ++i) row_of.emplace(features->ids[i], i);
    std::vector<std::string> missing;
    feature_rows.resize(static_cast<Eigen::Index>(ids.size()), features->values.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = row_of.find(ids[i]);
      if (it == row_of.end()) {
        missing.push_back(ids[i]);
        continue;
      }
      feature_rows.row(static_cast<Eigen::Index>(i)) = features->values.row(static_cast<Eigen::Index>(it->second));
    }
    if (!missing.empty()) {
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
      throw ValidationError("feature file lacks rows for: " + list);
    }
    std::vector<Eigen::Index> train_rows;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (*corpus[i].split == Split::Train) train_rows.push_back(static_cast<Eigen::Index>(i));
    if (train_rows.empty()) throw ValidationError("train split is empty");
    const Eigen::MatrixXd train_part = feature_rows(train_rows, Eigen::all);
    feature_rows = Standardizer<double>::fit(train_part).apply(feature_rows);
  }

  Eigen::MatrixXd embedding_rows;
  if (need_embeddings) {
    const auto rows = align(*embeddings, ids);
    const auto& m = embeddings->layer(layer.value_or(embeddings->n_layers()));
    embedding_rows.resize(static_cast<Eigen::Index>(ids.size()), m.cols());
    for (std::size_t i = 0; i < ids.size(); ++i)
      embedding_rows.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
  }

  Eigen::MatrixXd design;
  switch (setting) {
    case ModelSetting::FeaturesOnly:
      design = std::move(feature_rows);
      break;
    case ModelSetting::EmbeddingOnly:
      design = std::move(embedding_rows);
      break;
    case ModelSetting::EmbeddingPlusFeatures:
      design.resize(static_cast<Eigen::Index>(ids.size()), embedding_rows.cols() + feature_rows.cols());
      design << embedding_rows, feature_rows;
      break;
  }

  ExperimentInputs in;
  in.setting = setting;
  std::vector<Eigen::Index> split_rows[3];
  for (std::size_t i = 0; i < ids.size(); ++i)
    split_rows[static_cast<int>(*corpus[i].split)].push_back(static_cast<Eigen::Index>(i));
  auto take = [&](Split s) {
    LabeledData<double> d;
    const auto& r = split_rows[static_cast<int>(s)];
    d.features = design(r, Eigen::all);
    for (auto i : r) d.labels.push_back(corpus[static_cast<std::size_t>(i)].label == Label::AD ? 1 : 0);
    return d;
  };
  in.train = take(Split::Train);
  in.val = take(Split::Val);
  in.test = SealedSplit(take(Split::Test));
  for (auto i : split_rows[static_cast<int>(Split::Train)]) in.train_ids.push_back(ids[static_cast<std::size_t>(i)]);
  return in;
}

namespace {

LabeledData<double> subset(const LabeledData<double>& data, const std::vector<Eigen::Index>& rows) {
  LabeledData<double> out;
  out.features = data.features(rows, Eigen::all);
  for (auto r : rows) out.labels.push_back(data.labels[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentInputs& inputs, const ClassifierOptions& options, std::uint64_t seed) {
  const auto& train_set = inputs.train;
  if (options.folds < 2) throw ValidationError("cross-validation needs at least two folds");
  if (train_set.size() < options.folds) throw ValidationError("train split smaller than the fold count");
  if (inputs.train_ids.size() != train_set.size()) throw ValidationError("train ids and rows differ in count");

  const std::uint64_t setting_seed = derive_seed(seed, {static_cast<std::uint64_t>(inputs.setting)});
  const auto grid = inputs.setting == ModelSetting::FeaturesOnly
                        ? architecture_grid(inputs.width(), 2, options.depths, options.units, options.learning_rates,
                                            options.train, setting_seed)
                        : linear_grid(inputs.width(), 2, options.learning_rates, options.train, setting_seed);
  if (grid.empty()) throw ValidationError("classifier hyperparameter grid is empty");

  // Fold of each train row: rank in hash(id, seed) order, modulo k.
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::uint64_t> keys(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) keys[i] = hash_with_seed(inputs.train_ids[i], setting_seed);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return keys[a] != keys[b] ? keys[a] < keys[b] : inputs.train_ids[a] < inputs.train_ids[b];
  });
  std::vector<std::size_t> fold_of(order.size());
  for (std::size_t rank = 0; rank < order.size(); ++rank) fold_of[order[rank]] = rank % options.folds;

  std::vector<LabeledData<double>> fit_parts, held_parts;
  for (std::size_t f = 0; f < options.folds; ++f) {
    std::vector<Eigen::Index> fit, held;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? held : fit).push_back(static_cast<Eigen::Index>(i));
    fit_parts.push_back(subset(train_set, fit));
    held_parts.push_back(subset(train_set, held));
  }

  ExperimentResult result;
  result.setting = inputs.setting;
  double best_score = -1;
  std::size_t best_cell = 0;
  double best_epochs = 0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    double acc_sum = 0, epoch_sum = 0;
    for (std::size_t f = 0; f < options.folds; ++f) {
      auto cfg = grid[c].train;
      cfg.seed = derive_seed(cfg.seed, {f});
      const auto r = train(Mlp<double>::init(grid[c].model), fit_parts[f], held_parts[f], cfg);
      acc_sum += *r.best_val_accuracy;
      epoch_sum += static_cast<double>(r.best_epoch);
    }
    const double score = acc_sum / static_cast<double>(options.folds);
    result.cv_accuracy.push_back(score);
    if (score > best_score) {
      best_score = score;
      best_cell = c;
      best_epochs = epoch_sum / static_cast<double>(options.folds);
    }
  }

  result.chosen = grid[best_cell];
  result.final_epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(best_epochs)));
  auto final_cfg = result.chosen.train;
  final_cfg.max_epochs = result.final_epochs;
  const auto final_fit = train(Mlp<double>::init(result.chosen.model), train_set, LabeledData<double>{}, final_cfg);

  const auto& test = inputs.test.open();
  result.metrics = evaluate(final_fit.model.predict(test.features), test.labels);
  return result;
}

namespace {

std::string two_places(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string full(const std::optional<double>& v) { return v ? csv::format_number(*v) : std::string(); }

}  // namespace

std::string format_classifier_table(std::span<const ClassifierReportRow> rows) {
  std::vector<std::vector<std::string>> cells{{"Model", "Accuracy", "Sensitivity", "Specificity"}};
  for (const auto& r : rows)
    cells.push_back({r.model, two_places(r.metrics.accuracy), two_places(r.metrics.sensitivity),
                     two_places(r.metrics.specificity)});
  std::vector<std::size_t> width(4, 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < 4; ++c) {
      if (c) line += " | ";
      const std::string fill(width[c] - cells[i][c].size(), ' ');
      line += (i > 0 && c > 0) ? fill + cells[i][c] : cells[i][c] + fill;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (i == 0) {
      for (std::size_t c = 0; c < 4; ++c) out += (c ? "-+-" : "") + std::string(width[c], '-');
      out += '\n';
    }
  }
  return out;
}

std::string format_classifier_csv(std::span<const ClassifierReportRow> rows) {
  std::string out = "Model,Accuracy,Sensitivity,Specificity\n";
  for (const auto& r : rows)
    out += csv::join({r.model, two_places(r.metrics.accuracy), two_places(r.metrics.sensitivity),
                      two_places(r.metrics.specificity)}) +
           '\n';
  return out;
}

void write_classifier_results_csv(std::ostream& out, std::span<const ClassifierReportRow> rows) {
  out << "model,accuracy,sensitivity,specificity,tp,fp,tn,fn\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << csv::join({r.model, full(m.accuracy), full(m.sensitivity), full(m.specificity), std::to_string(m.tp),
                      std::to_string(m.fp), std::to_string(m.tn), std::to_string(m.fn)})
        << '\n';
  }
}

std::vector<ClassifierReportRow> read_classifier_results_csv(std::istream& in, const std::string& source) {
  std::vector<ClassifierReportRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto parse = [&](const std::string& f, auto& v) {
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size())
      throw ParseError(source + ":" + std::to_string(line_no) + ": bad number '" + f + "'", line_no);
  };
  auto optional_ratio = [&](const std::string& f) -> std::optional<double> {
    if (f.empty()) return std::nullopt;
    double v = 0;
    parse(f, v);
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 8) throw ParseError(source + ":" + std::to_string(line_no) + ": expected 8 fields", line_no);
    ClassifierReportRow r;
    r.model = f[0];
    r.metrics.accuracy = optional_ratio(f[1]);
    r.metrics.sensitivity = optional_ratio(f[2]);
    r.metrics.specificity = optional_ratio(f[3]);
    parse(f[4], r.metrics.tp);
    parse(f[5], r.metrics.fp);
    parse(f[6], r.metrics.tn);
    parse(f[7], r.metrics.fn);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace probekit
