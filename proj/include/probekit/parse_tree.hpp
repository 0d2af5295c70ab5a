#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

/// Constituency tree node. Preterminals carry a token and no children;
/// every other node has at least one child and no token.
struct ParseTree {
  std::string label;
  std::vector<ParseTree> children;
  std::optional<std::string> token;

  bool is_preterminal() const { return children.empty(); }

  static ParseTree leaf(std::string label, std::string token);
  static ParseTree node(std::string label, std::vector<ParseTree> children);

  bool operator==(const ParseTree&) const = default;
};

/// Internal expansion LHS -> RHS. Lexical expansions are never rules.
struct ProductionRule {
  std::string lhs;
  std::vector<std::string> rhs;

  /// "LHS→RHS1 RHS2 ..." - also the tie-break key for rule ranking.
  std::string key() const;

  bool operator==(const ProductionRule&) const = default;
  auto operator<=>(const ProductionRule&) const = default;
};

/// Reads a single Penn-Treebank bracketed tree. Throws ParseError carrying
/// the character offset of the problem.
ParseTree parse_ptb(std::string_view s);

/// Single-line bracketed form, one space between siblings.
std::string serialize(const ParseTree& t);

/// Nodes on the longest root-to-preterminal path; the lexical terminal is
/// not counted, so a lone preterminal has depth 1.
int depth(const ParseTree& t);

/// Pre-order internal expansions, duplicates preserved.
std::vector<ProductionRule> productions(const ParseTree& t);

std::vector<std::string> terminals(const ParseTree& t);
std::size_t terminal_count(const ParseTree& t);
std::size_t node_count(const ParseTree& t);

/// Child labels of the shallowest (then leftmost) node labelled S, or of the
/// root when the tree has no S.
std::vector<std::string> top_constituents(const ParseTree& t);

struct PhraseStats {
  std::size_t count = 0;
  /// Terminals dominated by at least one matching node.
  std::size_t token_coverage = 0;
  double mean_length = 0.0;

  bool operator==(const PhraseStats&) const = default;
};

PhraseStats phrase_stats(const ParseTree& t, std::string_view label);

}  // namespace probekit
