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
#include "probekit/mlp.hpp"

namespace probekit {

enum class ProbingTask { WordContent, SentenceLength, TopConstituents, TreeDepth, BiGramShift };
enum class FeatureType { Surface, Syntactic };

inline constexpr std::array<ProbingTask, 5> kProbingTasks = {
    ProbingTask::WordContent, ProbingTask::SentenceLength, ProbingTask::TopConstituents, ProbingTask::TreeDepth,
    ProbingTask::BiGramShift};

std::string_view to_string(ProbingTask task);
std::string_view to_string(FeatureType type);
/// Accepts "TreeDepth", "tree-depth" or "tree_depth", case-insensitively.
ProbingTask parse_probing_task(std::string_view name);
FeatureType feature_type(ProbingTask task);

struct ProbeInstance {
  std::string id;
  Split split = Split::Train;
  int label = 0;
  /// BiGramShift only: token sequence to re-embed, possibly perturbed.
  std::optional<std::string> perturbed_text;

  bool operator==(const ProbeInstance&) const = default;
};

struct ProbingDataset {
  ProbingTask task = ProbingTask::WordContent;
  std::vector<ProbeInstance> instances;
  std::size_t n_classes = 0;
  std::vector<std::string> class_names;

  bool operator==(const ProbingDataset&) const = default;
};

struct ProbingConfig {
  std::uint64_t seed = 0;
  std::size_t sentence_length_bins = 6;
  /// Most frequent sequences kept, plus one OTHER class.
  std::size_t top_constituent_classes = 20;
  double depth_low_percentile = 5;
  double depth_high_percentile = 95;
  std::size_t word_content_targets = 50;
};

/// Needs split tags on every utterance; the syntactic tasks also need parses.
/// Label statistics (bins, clipping range, frequent sequences, target words)
/// come from the train split only.
ProbingDataset build_probing_dataset(ProbingTask task, const Corpus& corpus, const ProbingConfig& config);

/// Swaps tokens i and i+1.
std::vector<std::string> swap_adjacent(std::vector<std::string> tokens, std::size_t i);

/// Corpus whose texts are the BiGramShift inputs, for re-embedding.
Corpus bigram_shift_corpus(const Corpus& source, const ProbingDataset& dataset);

/// JSONL: id, split, label, class_name, [perturbed_text], task, n_classes.
void write_probing_dataset(std::ostream& out, const ProbingDataset& dataset);
ProbingDataset read_probing_dataset(std::istream& in, const std::string& source = "<stream>");

struct ProbeGrid {
  std::vector<std::size_t> depths{1, 2, 3};
  std::vector<std::size_t> units{10, 100};
  std::vector<double> learning_rates{1e-3, 1e-4};
  TrainConfig train;
};

struct ProbeResult {
  ProbingTask task = ProbingTask::WordContent;
  std::size_t layer = 1;
  double accuracy = 0;
  double val_accuracy = 0;
  GridCell chosen;
  std::vector<double> cell_val_accuracy;
};

/// Grid search on the train/val instances of one layer, then a single pass
/// over the test instances with the selected model.
ProbeResult run_probe(const ProbingDataset& dataset, const EmbeddingStore& embeddings, std::size_t layer,
                      const ProbeGrid& grid, std::uint64_t seed);

struct ProbeReportRow {
  ProbingTask task;
  double accuracy;
  std::size_t layer;
  FeatureType type;
  /// Lowest accuracy among the rows of its feature type.
  bool worst_in_type = false;

  bool operator==(const ProbeReportRow&) const = default;
};

/// Best layer per task (lowest layer on ties), in canonical task order.
std::vector<ProbeReportRow> probe_report(std::span<const ProbeResult> results);

std::string format_probe_table(std::span<const ProbeReportRow> rows);
std::string format_probe_csv(std::span<const ProbeReportRow> rows);

/// One row per (task, layer) result.
void write_probe_results_csv(std::ostream& out, std::span<const ProbeResult> results);
std::vector<ProbeResult> read_probe_results_csv(std::istream& in, const std::string& source = "<stream>");

}  // namespace probekit
