#include "probekit/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/hashing.hpp"

namespace probekit {

RuleVocabulary::RuleVocabulary(std::vector<Entry> entries, std::string source)
    : entries_(std::move(entries)), source_(std::move(source)) {}

std::ptrdiff_t RuleVocabulary::index_of(const ProductionRule& rule) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (!entries_[i].placeholder && entries_[i].rule == rule) return static_cast<std::ptrdiff_t>(i);
  return -1;
}

std::vector<std::string> RuleVocabulary::feature_names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].placeholder) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "rule:<unused_%03zu>", i);
      names.emplace_back(buf);
    } else {
      names.push_back("rule:" + entries_[i].rule.key());
    }
  }
  return names;
}

RuleVocabulary build_rule_vocabulary(const std::vector<ParseTree>& trees, std::size_t k) {
  if (trees.empty()) throw ValidationError("cannot build a rule vocabulary from zero trees");
  if (k == 0) throw ValidationError("rule vocabulary size must be at least 1");

  std::map<ProductionRule, std::size_t> counts;
  std::uint64_t fingerprint = fnv1a64("");
  for (const auto& t : trees) {
    for (auto& r : productions(t)) ++counts[std::move(r)];
    fingerprint = fnv1a64(serialize(t) + "\n", fingerprint);
  }

  struct Ranked {
    std::size_t count;
    std::string key;
    const ProductionRule* rule;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(counts.size());
  for (const auto& [rule, count] : counts) ranked.push_back({count, rule.key(), &rule});
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.key < b.key;
  });

  std::vector<RuleVocabulary::Entry> entries;
  for (std::size_t i = 0; i < k; ++i) {
    if (i < ranked.size())
      entries.push_back({*ranked[i].rule, false});
    else
      entries.push_back({ProductionRule{}, true});
  }
  return RuleVocabulary(std::move(entries), to_hex(fingerprint));
}

std::vector<std::pair<ProductionRule, double>> rule_proportions(const ParseTree& t) {
  const auto rules = productions(t);
  std::map<ProductionRule, std::size_t> counts;
  for (const auto& r : rules) ++counts[r];
  std::vector<std::pair<ProductionRule, double>> out;
  const double total = static_cast<double>(rules.size());
  for (const auto& [rule, count] : counts) out.emplace_back(rule, static_cast<double>(count) / total);
  return out;
}

namespace {

struct PhrasalSlot {
  const char* label;
  bool with_mean_length;
};

constexpr PhrasalSlot kPhrasalSlots[] = {
    {"NP", true}, {"VP", true}, {"PP", true}, {"ADJP", false}, {"ADVP", false}};

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::vector<std::string> feature_schema(const RuleVocabulary& vocab) {
  if (vocab.size() != kRuleFeatureCount)
    throw ValidationError("rule vocabulary must have " + std::to_string(kRuleFeatureCount) + " entries");
  auto names = vocab.feature_names();
  names.emplace_back("tree_depth");
  for (const auto& slot : kPhrasalSlots) {
    const auto base = lower(slot.label);
    names.push_back(base + "_coverage");
    if (slot.with_mean_length) names.push_back(base + "_mean_length");
    names.push_back(base + "_count");
  }
  names.emplace_back("icu_present");
  names.emplace_back("icu_count");
  return names;
}

FeatureVector extract_features(const Utterance& u, const ParseTree& t, const RuleVocabulary& vocab,
                               const IcuMatcher& icu) {
  if (vocab.size() != kRuleFeatureCount)
    throw ValidationError("rule vocabulary must have " + std::to_string(kRuleFeatureCount) + " entries");
  FeatureValues v = FeatureValues::Zero(static_cast<Eigen::Index>(kFeatureCount));

  const auto rules = productions(t);
  if (!rules.empty()) {
    const double total = static_cast<double>(rules.size());
    for (const auto& r : rules) {
      const auto slot = vocab.index_of(r);
      if (slot >= 0) v(slot) += 1.0;
    }
    v.head(kRuleFeatureCount) /= total;
  }

  v(kDepthIndex) = depth(t);

  const double tokens = static_cast<double>(terminal_count(t));
  Eigen::Index i = kPhrasalOffset;
  for (const auto& slot : kPhrasalSlots) {
    const auto stats = phrase_stats(t, slot.label);
    v(i++) = static_cast<double>(stats.token_coverage) / tokens;
    if (slot.with_mean_length) v(i++) = stats.mean_length;
    v(i++) = static_cast<double>(stats.count);
  }

  const auto content = icu.count(u.tokens);
  v(i++) = content.present ? 1.0 : 0.0;
  v(i++) = content.count;
  return FeatureVector{std::move(v)};
}

FeatureVector extract_features(const Utterance& u, const ParseTree& t, const RuleVocabulary& vocab) {
  static const IcuMatcher matcher;
  return extract_features(u, t, vocab, matcher);
}

FeatureTable extract_corpus_features(const Corpus& corpus, const IcuMatcher& icu,
                                     RuleVocabulary* vocab_out) {
  std::vector<std::string> missing;
  for (const auto& u : corpus.utterances())
    if (!u.parse) missing.push_back(u.id);
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 20) list += ", ...";
    throw ValidationError(std::to_string(missing.size()) + " utterances lack a parse: " + list);
  }
  if (!corpus.all_tagged()) throw ValidationError("feature extraction needs split tags on every utterance");

  std::vector<ParseTree> trees;
  trees.reserve(corpus.size());
  std::vector<ParseTree> train_trees;
  for (const auto& u : corpus.utterances()) {
    try {
      trees.push_back(parse_ptb(*u.parse));
    } catch (const ParseError& e) {
      throw ValidationError("utterance '" + u.id + "': " + e.what());
    }
    if (*u.split == Split::Train) train_trees.push_back(trees.back());
  }
  if (train_trees.empty()) throw ValidationError("feature extraction needs at least one train utterance");

  const auto vocab = build_rule_vocabulary(train_trees);
  FeatureTable table;
  table.schema = feature_schema(vocab);
  table.values.resize(static_cast<Eigen::Index>(corpus.size()), static_cast<Eigen::Index>(kFeatureCount));
  for (std::size_t r = 0; r < corpus.size(); ++r) {
    const auto& u = corpus[r];
    table.ids.push_back(u.id);
    table.labels.push_back(u.label);
    table.values.row(static_cast<Eigen::Index>(r)) = extract_features(u, trees[r], vocab, icu).values.transpose();
  }
  if (vocab_out) *vocab_out = vocab;
  return table;
}

void write_feature_csv(std::ostream& out, const FeatureTable& table) {
  std::vector<std::string> header{"id", "label"};
  header.insert(header.end(), table.schema.begin(), table.schema.end());
  out << csv::join(header) << '\n';
  for (std::size_t r = 0; r < table.ids.size(); ++r) {
    out << csv::escape(table.ids[r]) << ',' << to_string(table.labels[r]);
    for (Eigen::Index c = 0; c < table.values.cols(); ++c)
      out << ',' << csv::format_number(table.values(static_cast<Eigen::Index>(r), c));
    out << '\n';
  }
}

FeatureTable read_feature_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": missing header row", 1);
  auto header = csv::split(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label")
    throw ParseError(source + ": header must start with id,label", 1);

  FeatureTable table;
  table.schema.assign(header.begin() + 2, header.end());
  const std::size_t width = table.schema.size();
  std::vector<double> flat;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv::split(line);
    if (fields.size() != width + 2)
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width + 2) +
                           " fields, got " + std::to_string(fields.size()),
                       line_no);
    table.ids.push_back(fields[0]);
    table.labels.push_back(parse_label(fields[1]));
    for (std::size_t c = 2; c < fields.size(); ++c) {
      double v = 0;
      const auto& f = fields[c];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v))
        throw ParseError(source + ":" + std::to_string(line_no) + ": bad number '" + f + "'", line_no);
      flat.push_back(v);
    }
  }
  table.values = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), static_cast<Eigen::Index>(table.ids.size()), static_cast<Eigen::Index>(width));
  return table;
}

}  // namespace probekit
