#include "probekit/parse_tree.hpp"

#include <algorithm>
#include <cctype>
#include <deque>

#include "probekit/error.hpp"

namespace probekit {

ParseTree ParseTree::leaf(std::string label, std::string token) {
  return ParseTree{std::move(label), {}, std::move(token)};
}

ParseTree ParseTree::node(std::string label, std::vector<ParseTree> children) {
  return ParseTree{std::move(label), std::move(children), std::nullopt};
}

std::string ProductionRule::key() const {
  std::string k = lhs + "→";
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (i) k += ' ';
    k += rhs[i];
  }
  return k;
}

namespace {

class PtbReader {
 public:
  explicit PtbReader(std::string_view s) : s_(s) {}

  ParseTree read() {
    skip_space();
    if (pos_ >= s_.size()) fail("empty input");
    ParseTree t = read_node();
    skip_space();
    if (pos_ < s_.size()) {
      if (s_[pos_] == ')') fail("unbalanced brackets: unexpected ')'");
      fail("trailing content after tree");
    }
    return t;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("PTB parse error at offset " + std::to_string(pos_) + ": " + msg, pos_);
  }

  void skip_space() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  std::string read_atom() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && s_[pos_] != '(' && s_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    return std::string(s_.substr(start, pos_ - start));
  }

  ParseTree read_node() {
    if (s_[pos_] != '(') fail("expected '('");
    const std::size_t open = pos_;
    ++pos_;
    skip_space();
    if (pos_ >= s_.size()) fail("unbalanced brackets: input ends inside a node");
    // A bare "( (S ...))" wrapper has an empty label.
    std::string label = s_[pos_] == '(' ? std::string() : read_atom();
    skip_space();

    ParseTree t;
    t.label = std::move(label);
    std::optional<std::string> token;
    while (true) {
      if (pos_ >= s_.size()) fail("unbalanced brackets: node opened at offset " + std::to_string(open) + " is never closed");
      const char c = s_[pos_];
      if (c == ')') {
        ++pos_;
        break;
      }
      if (c == '(') {
        if (token) fail("terminal with children");
        t.children.push_back(read_node());
      } else {
        if (!t.children.empty()) fail("terminal with children");
        if (token) fail("preterminal with more than one terminal");
        token = read_atom();
      }
      skip_space();
    }
    if (t.children.empty() && !token) {
      pos_ = open;
      fail("empty node");
    }
    if (token && t.label.empty()) {
      pos_ = open;
      fail("preterminal without a label");
    }
    t.token = std::move(token);
    return t;
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void serialize_into(const ParseTree& t, std::string& out) {
  out += '(';
  out += t.label;
  if (t.token) {
    out += ' ';
    out += *t.token;
  }
  for (const auto& c : t.children) {
    out += ' ';
    serialize_into(c, out);
  }
  out += ')';
}

void collect_productions(const ParseTree& t, std::vector<ProductionRule>& out) {
  if (t.is_preterminal()) return;
  ProductionRule r{t.label, {}};
  r.rhs.reserve(t.children.size());
  for (const auto& c : t.children) r.rhs.push_back(c.label);
  out.push_back(std::move(r));
  for (const auto& c : t.children) collect_productions(c, out);
}

void collect_terminals(const ParseTree& t, std::vector<std::string>& out) {
  if (t.token) out.push_back(*t.token);
  for (const auto& c : t.children) collect_terminals(c, out);
}

// Returns the terminal yield of t while accumulating stats for `label`.
std::size_t walk_phrases(const ParseTree& t, std::string_view label, bool covered,
                         PhraseStats& stats, std::size_t& total_length) {
  const bool match = t.label == label;
  covered = covered || match;
  std::size_t yield = 0;
  if (t.is_preterminal()) {
    yield = 1;
    if (covered) ++stats.token_coverage;
  } else {
    for (const auto& c : t.children) yield += walk_phrases(c, label, covered, stats, total_length);
  }
  if (match) {
    ++stats.count;
    total_length += yield;
  }
  return yield;
}

}  // namespace

ParseTree parse_ptb(std::string_view s) { return PtbReader(s).read(); }

std::string serialize(const ParseTree& t) {
  std::string out;
  serialize_into(t, out);
  return out;
}

int depth(const ParseTree& t) {
  int deepest = 0;
  for (const auto& c : t.children) deepest = std::max(deepest, depth(c));
  return deepest + 1;
}

std::vector<ProductionRule> productions(const ParseTree& t) {
  std::vector<ProductionRule> out;
  collect_productions(t, out);
  return out;
}

std::vector<std::string> terminals(const ParseTree& t) {
  std::vector<std::string> out;
  collect_terminals(t, out);
  return out;
}

std::size_t terminal_count(const ParseTree& t) {
  if (t.is_preterminal()) return 1;
  std::size_t n = 0;
  for (const auto& c : t.children) n += terminal_count(c);
  return n;
}

std::size_t node_count(const ParseTree& t) {
  std::size_t n = 1;
  for (const auto& c : t.children) n += node_count(c);
  return n;
}

std::vector<std::string> top_constituents(const ParseTree& t) {
  const ParseTree* target = &t;
  std::deque<const ParseTree*> queue{&t};
  while (!queue.empty()) {
    const ParseTree* n = queue.front();
    queue.pop_front();
    if (n->label == "S") {
      target = n;
      break;
    }
    for (const auto& c : n->children) queue.push_back(&c);
  }
  std::vector<std::string> labels;
  for (const auto& c : target->children) labels.push_back(c.label);
  return labels;
}

PhraseStats phrase_stats(const ParseTree& t, std::string_view label) {
  PhraseStats stats;
  std::size_t total_length = 0;
  walk_phrases(t, label, false, stats, total_length);
  if (stats.count > 0)
    stats.mean_length = static_cast<double>(total_length) / static_cast<double>(stats.count);
  return stats;
}

}  // namespace probekit
