#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/corpus.hpp"
#include "probekit/embedding_io.hpp"
#include "probekit/features.hpp"
#include "probekit/mlp.hpp"

namespace probekit {

enum class ModelSetting { FeaturesOnly, EmbeddingOnly, EmbeddingPlusFeatures };

inline constexpr std::array<ModelSetting, 3> kModelSettings = {
    ModelSetting::FeaturesOnly, ModelSetting::EmbeddingOnly, ModelSetting::EmbeddingPlusFeatures};

/// Row name in the results table: "NN + FS1", "Fine-tuned BERT", "BERT + FS1".
std::string_view display_name(ModelSetting setting);
/// "features-only", "embedding-only", "embedding-plus-features".
std::string_view cli_name(ModelSetting setting);
ModelSetting parse_model_setting(std::string_view name);

/// Confusion counts with AD as the positive class. Ratios whose denominator
/// is zero are left empty rather than reported as 0.
struct EvalMetrics {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;

  bool operator==(const EvalMetrics&) const = default;
};

/// Labels and predictions are 1 for AD, 0 for Control.
EvalMetrics evaluate(std::span<const int> predictions, std::span<const int> labels);

/// Held-out split that counts how often it is read.
class SealedSplit {
 public:
  SealedSplit() = default;
  explicit SealedSplit(LabeledData<double> data) : data_(std::move(data)) {}

  const LabeledData<double>& open() const {
    ++opens_;
    return data_;
  }
  std::size_t open_count() const { return opens_; }
  std::size_t size() const { return data_.size(); }

 private:
  LabeledData<double> data_;
  mutable std::size_t opens_ = 0;
};

struct ExperimentInputs {
  ModelSetting setting = ModelSetting::FeaturesOnly;
  std::vector<std::string> train_ids;
  LabeledData<double> train;
  LabeledData<double> val;
  SealedSplit test;

  std::size_t width() const { return static_cast<std::size_t>(train.features.cols()); }
};

/// Builds per-split design matrices. Feature columns are z-scored with
/// train-split statistics; embedding rows come from `layer` (1-based, the
/// last layer when empty). EmbeddingPlusFeatures rows are [embedding | features].
ExperimentInputs assemble_inputs(ModelSetting setting, const Corpus& corpus, const EmbeddingStore* embeddings,
                                 const FeatureTable* features, std::optional<std::size_t> layer = std::nullopt);

struct ClassifierOptions {
  std::vector<std::size_t> depths{1, 2, 3};
  std::vector<std::size_t> units{10, 100};
  std::vector<double> learning_rates{1e-3, 1e-4};
  TrainConfig train;
  std::size_t folds = 5;
};

struct ExperimentResult {
  ModelSetting setting = ModelSetting::FeaturesOnly;
  EvalMetrics metrics;
  GridCell chosen;
  /// Mean held-out-fold accuracy per grid cell.
  std::vector<double> cv_accuracy;
  std::size_t final_epochs = 0;
};

/// k-fold grid search inside the train split (folds by hash of id and seed),
/// a final fit on the whole train split for the mean best epoch count of the
/// chosen cell, then one evaluation on the test split. FeaturesOnly searches
/// the hidden-layer grid; the embedding settings use linear heads.
ExperimentResult run_experiment(const ExperimentInputs& inputs, const ClassifierOptions& options, std::uint64_t seed);

struct ClassifierReportRow {
  std::string model;
  EvalMetrics metrics;
};

std::string format_classifier_table(std::span<const ClassifierReportRow> rows);
std::string format_classifier_csv(std::span<const ClassifierReportRow> rows);

/// Full-precision results with confusion counts, for later collation.
void write_classifier_results_csv(std::ostream& out, std::span<const ClassifierReportRow> rows);
std::vector<ClassifierReportRow> read_classifier_results_csv(std::istream& in, const std::string& source = "<stream>");

}  // namespace probekit
