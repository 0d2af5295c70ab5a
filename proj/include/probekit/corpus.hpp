#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

enum class Label { Control = 0, AD = 1 };
enum class Split { Train, Val, Test };

std::string_view to_string(Label label);
std::string_view to_string(Split split);
Label parse_label(std::string_view s);
Split parse_split(std::string_view s);

/// Lowercases, splits on whitespace, detaches `. , ? ! ; :` and splits
/// apostrophe clitics off before the apostrophe ("it's" -> "it", "'s").
std::vector<std::string> tokenize(std::string_view text);

struct Utterance {
  std::string id;
  std::string speaker_id;
  std::string text;
  std::vector<std::string> tokens;
  Label label = Label::Control;
  std::optional<Split> split;
  std::optional<std::string> parse;

  bool operator==(const Utterance&) const = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::size_t untagged = 0;

  bool operator==(const SplitCounts&) const = default;
};

class Corpus {
 public:
  Corpus() = default;
  /// Validates id uniqueness and nonemptiness.
  explicit Corpus(std::vector<Utterance> utterances);

  const std::vector<Utterance>& utterances() const { return utterances_; }
  std::size_t size() const { return utterances_.size(); }
  bool empty() const { return utterances_.empty(); }
  const Utterance& operator[](std::size_t i) const { return utterances_[i]; }

  SplitCounts split_counts() const;
  bool all_tagged() const;
  bool none_tagged() const;

  /// Index of the utterance with this id, if any.
  std::optional<std::size_t> find(std::string_view id) const;

  bool operator==(const Corpus& other) const { return utterances_ == other.utterances_; }

 private:
  std::vector<Utterance> utterances_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Parses one JSONL transcript stream. `source` names the stream in errors.
Corpus read_corpus(std::istream& in, const std::string& source = "<stream>");
Corpus load_corpus(const std::filesystem::path& path);

void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

struct SplitRatios {
  double train = 0.82;
  double val = 0.09;
  double test = 0.09;
};

struct SplitOptions {
  SplitRatios ratios;
  std::uint64_t seed = 0;
  /// Keep all utterances of a speaker in the same split.
  bool group_by_speaker = false;
};

/// Tags every utterance with a split. Fully pre-tagged corpora pass through
/// unchanged. Val and test receive floor(n * ratio) utterances and train the
/// remainder; membership follows the order of hash(id, seed), so the result
/// does not depend on input order.
Corpus assign_splits(const Corpus& corpus, const SplitOptions& options);

}  // namespace probekit
