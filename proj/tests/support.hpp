#pragma once

// Synthetic data for tests: random constituency trees, small transcript
// corpora with consistent parses, and embedding stores with planted signal.

#include <cstdint>
#include <string>
#include <vector>

#include "probekit/corpus.hpp"
#include "probekit/embedding_io.hpp"
#include "probekit/hashing.hpp"
#include "probekit/mlp.hpp"
#include "probekit/parse_tree.hpp"

namespace probekit::testing {

/// Random valid tree; every internal node has 1-3 children.
ParseTree random_tree(Rng& rng, int max_depth = 6);

enum class LabelRule {
  Random,
  /// AD exactly when the utterance contains no information content unit.
  IcuAbsent,
};

struct SyntheticCorpusOptions {
  std::size_t size = 500;
  std::uint64_t seed = 1;
  LabelRule labels = LabelRule::Random;
  /// Leave split tags off so assign_splits decides.
  bool tag_splits = true;
  SplitRatios ratios{0.7, 0.1, 0.2};
};

/// Grammar-generated utterances; text, tokens and parse agree.
Corpus synthetic_corpus(const SyntheticCorpusOptions& options);

/// Gaussian noise store over the given ids.
EmbeddingStore noise_store(const std::vector<std::string>& ids, std::size_t n_layers, std::size_t dim,
                           std::uint64_t seed);

/// Standard normal draw via Box-Muller.
double normal(Rng& rng);

std::vector<std::string> ids_of(const Corpus& corpus);

/// Smallest |pre-activation| over every hidden unit and input row. Central
/// differences are only an oracle when no ReLU input sits within the stencil
/// of its kink.
double min_preactivation(const Mlp<double>& model, const Eigen::MatrixXd& inputs);

}  // namespace probekit::testing
