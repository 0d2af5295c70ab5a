#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "probekit/corpus.hpp"
#include "probekit/icu.hpp"
#include "probekit/parse_tree.hpp"

namespace probekit {

inline constexpr std::size_t kRuleFeatureCount = 103;
inline constexpr std::size_t kDepthFeatureCount = 1;
inline constexpr std::size_t kPhrasalFeatureCount = 13;
inline constexpr std::size_t kWordContentFeatureCount = 2;
inline constexpr std::size_t kFeatureCount =
    kRuleFeatureCount + kDepthFeatureCount + kPhrasalFeatureCount + kWordContentFeatureCount;
static_assert(kFeatureCount == 119);

inline constexpr std::size_t kDepthIndex = kRuleFeatureCount;
inline constexpr std::size_t kPhrasalOffset = kDepthIndex + kDepthFeatureCount;
inline constexpr std::size_t kWordContentOffset = kPhrasalOffset + kPhrasalFeatureCount;

/// Top-k production rules of a training corpus. Slots beyond the number of
/// distinct rules hold placeholders that never match.
class RuleVocabulary {
 public:
  struct Entry {
    ProductionRule rule;
    bool placeholder = false;
    bool operator==(const Entry&) const = default;
  };

  RuleVocabulary() = default;
  RuleVocabulary(std::vector<Entry> entries, std::string source);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Hex fingerprint of the trees the vocabulary was built from.
  const std::string& source() const { return source_; }

  /// Slot of `rule`, or -1.
  std::ptrdiff_t index_of(const ProductionRule& rule) const;

  std::vector<std::string> feature_names() const;

 private:
  std::vector<Entry> entries_;
  std::string source_;
};

/// Ranks rules by descending frequency, ties by ascending ProductionRule::key().
RuleVocabulary build_rule_vocabulary(const std::vector<ParseTree>& trees,
                                     std::size_t k = kRuleFeatureCount);

/// Full distribution of rule proportions before projection onto a vocabulary;
/// sums to 1 for any tree with at least one production.
std::vector<std::pair<ProductionRule, double>> rule_proportions(const ParseTree& t);

using FeatureValues = Eigen::Matrix<double, Eigen::Dynamic, 1>;

struct FeatureVector {
  FeatureValues values;
  bool operator==(const FeatureVector& o) const { return values == o.values; }
};

/// 119 names: rule slots, depth, 13 phrasal ratios, 2 ICU features.
std::vector<std::string> feature_schema(const RuleVocabulary& vocab);

/// Layout [rule proportions][depth][phrasal][ICU present, ICU count]. The
/// rule block needs a vocabulary of exactly 103 entries.
FeatureVector extract_features(const Utterance& u, const ParseTree& t, const RuleVocabulary& vocab,
                               const IcuMatcher& icu);
FeatureVector extract_features(const Utterance& u, const ParseTree& t, const RuleVocabulary& vocab);

/// Per-column z-score with population statistics of the fitted rows.
template <typename Scalar>
class Standardizer {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

  static Standardizer fit(const Matrix& rows);

  Matrix apply(const Matrix& rows) const;
  RowVector apply_row(const RowVector& row) const;

  const RowVector& mean() const { return mean_; }
  const RowVector& scale() const { return scale_; }

 private:
  RowVector mean_;
  RowVector scale_;
};

/// Feature table as written to / read from CSV.
struct FeatureTable {
  std::vector<std::string> schema;
  std::vector<std::string> ids;
  std::vector<Label> labels;
  Eigen::MatrixXd values;  // one row per id
};

/// Builds the vocabulary on the corpus' train split and extracts every
/// utterance. Requires parses and split tags on all utterances.
FeatureTable extract_corpus_features(const Corpus& corpus, const IcuMatcher& icu,
                                     RuleVocabulary* vocab_out = nullptr);

void write_feature_csv(std::ostream& out, const FeatureTable& table);
FeatureTable read_feature_csv(std::istream& in, const std::string& source = "<stream>");

}  // namespace probekit

#include "probekit/standardizer.tpp"
