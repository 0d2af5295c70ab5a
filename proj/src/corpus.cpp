#include "probekit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "probekit/error.hpp"
#include "probekit/hashing.hpp"

namespace probekit {

std::string_view to_string(Label label) {
  return label == Label::AD ? "AD" : "Control";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Val:
      return "val";
    case Split::Test:
      return "test";
  }
  return "train";
}

Label parse_label(std::string_view s) {
  if (s == "AD") return Label::AD;
  if (s == "Control") return Label::Control;
  throw ValidationError("unknown label '" + std::string(s) + "'");
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(s) + "'");
}

namespace {

bool is_detached_punct(char c) {
  return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':';
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char raw : text) {
    const auto c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (is_detached_punct(c)) {
      flush();
      tokens.emplace_back(1, c);
    } else if (c == '\'' && !current.empty()) {
      flush();
      current.push_back(c);
    } else {
      current.push_back(c);
    }
  }
  flush();
  return tokens;
}

Corpus::Corpus(std::vector<Utterance> utterances) : utterances_(std::move(utterances)) {
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    const auto& id = utterances_[i].id;
    if (id.empty()) throw ValidationError("utterance " + std::to_string(i) + " has an empty id");
    if (!index_.emplace(id, i).second) throw ValidationError("duplicate utterance id '" + id + "'");
  }
}

SplitCounts Corpus::split_counts() const {
  SplitCounts c;
  for (const auto& u : utterances_) {
    if (!u.split) {
      ++c.untagged;
      continue;
    }
    switch (*u.split) {
      case Split::Train:
        ++c.train;
        break;
      case Split::Val:
        ++c.val;
        break;
      case Split::Test:
        ++c.test;
        break;
    }
  }
  return c;
}

bool Corpus::all_tagged() const {
  return std::all_of(utterances_.begin(), utterances_.end(),
                     [](const Utterance& u) { return u.split.has_value(); });
}

bool Corpus::none_tagged() const {
  return std::none_of(utterances_.begin(), utterances_.end(),
                      [](const Utterance& u) { return u.split.has_value(); });
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string required_string(const nlohmann::json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError("line " + std::to_string(line) + ": missing key '" + key + "'", line);
  if (!it->is_string())
    throw ParseError("line " + std::to_string(line) + ": key '" + key + "' is not a string", line);
  return it->get<std::string>();
}

}  // namespace

Corpus read_corpus(std::istream& in, const std::string& source) {
  std::vector<Utterance> utterances;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;

    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError(source + ":" + std::to_string(line_no) + ": record is not an object", line_no);

    Utterance u;
    u.id = required_string(obj, "id", line_no);
    u.speaker_id = required_string(obj, "speaker", line_no);
    u.text = required_string(obj, "text", line_no);
    try {
      u.label = parse_label(required_string(obj, "label", line_no));
      if (obj.contains("split") && !obj["split"].is_null())
        u.split = parse_split(obj["split"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
    if (obj.contains("parse") && !obj["parse"].is_null()) u.parse = required_string(obj, "parse", line_no);
    u.tokens = tokenize(u.text);
    utterances.push_back(std::move(u));
  }
  return Corpus(std::move(utterances));
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file '" + path.string() + "'");
  return read_corpus(in, path.string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& u : corpus.utterances()) {
    nlohmann::ordered_json obj;
    obj["id"] = u.id;
    obj["speaker"] = u.speaker_id;
    obj["text"] = u.text;
    obj["label"] = to_string(u.label);
    if (u.split) obj["split"] = to_string(*u.split);
    if (u.parse) obj["parse"] = *u.parse;
    out << obj.dump() << '\n';
  }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write corpus file '" + path.string() + "'");
  write_corpus(out, corpus);
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

namespace {

struct Allocation {
  std::size_t train, val, test;
};

Allocation allocate(std::size_t n, const SplitRatios& r) {
  // The epsilon absorbs representation error, e.g. 100 * 0.09.
  auto part = [n](double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratio + 1e-9));
  };
  const std::size_t val = part(r.val);
  const std::size_t test = part(r.test);
  return {n - val - test, val, test};
}

void validate_ratios(const SplitRatios& r) {
  if (!(r.train > 0 && r.val > 0 && r.test > 0))
    throw ValidationError("split ratios must be positive");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9)
    throw ValidationError("split ratios must sum to 1");
}

}  // namespace

Corpus assign_splits(const Corpus& corpus, const SplitOptions& options) {
  validate_ratios(options.ratios);
  if (corpus.all_tagged()) return corpus;
  if (!corpus.none_tagged())
    throw ValidationError("corpus is partially split-tagged; tag all utterances or none");

  const std::size_t n = corpus.size();
  const Allocation target = allocate(n, options.ratios);
  std::vector<Utterance> out = corpus.utterances();

  if (!options.group_by_speaker) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<std::uint64_t> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = hash_with_seed(out[i].id, options.seed);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (keys[a] != keys[b]) return keys[a] < keys[b];
      return out[a].id < out[b].id;
    });
    for (std::size_t rank = 0; rank < n; ++rank) {
      Split s = Split::Train;
      if (rank < target.test)
        s = Split::Test;
      else if (rank < target.test + target.val)
        s = Split::Val;
      out[order[rank]].split = s;
    }
    return Corpus(std::move(out));
  }

  // Speaker grouping: walk speakers in hashed order, filling test, then val,
  // then train. Counts are approximate because speakers are indivisible.
  std::map<std::string, std::vector<std::size_t>> by_speaker;
  for (std::size_t i = 0; i < n; ++i) by_speaker[out[i].speaker_id].push_back(i);
  std::vector<std::pair<std::uint64_t, std::string>> speakers;
  for (const auto& [speaker, members] : by_speaker)
    speakers.emplace_back(hash_with_seed(speaker, options.seed), speaker);
  std::sort(speakers.begin(), speakers.end());

  std::size_t filled_test = 0, filled_val = 0;
  for (const auto& [key, speaker] : speakers) {
    const auto& members = by_speaker[speaker];
    Split s = Split::Train;
    if (filled_test < target.test) {
      s = Split::Test;
      filled_test += members.size();
    } else if (filled_val < target.val) {
      s = Split::Val;
      filled_val += members.size();
    }
    for (auto i : members) out[i].split = s;
  }
  return Corpus(std::move(out));
}

}  // namespace probekit
