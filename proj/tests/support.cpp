#include "support.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "probekit/icu.hpp"

namespace probekit::testing {

namespace {

const std::vector<std::string> kPhrase = {"S", "NP", "VP", "PP", "ADJP", "ADVP", "SBAR"};
const std::vector<std::string> kPos = {"DT", "NN", "VBZ", "JJ", "RB", "IN", ",", "."};
const std::vector<std::string> kWords = {"the", "boy", "cookie", "falls", "a", "jar", "is", "on", "red", "quickly"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

const std::vector<std::string> kIcuNouns = {"boy", "girl", "cookie", "jar", "stool", "sink", "water",
                                            "window", "mother", "plate", "dish", "curtain", "floor", "cupboard"};
const std::vector<std::string> kIcuVerbs = {"takes", "falls", "steals", "spills", "washes", "stands"};
const std::vector<std::string> kPlainNouns = {
    "dog",    "car",     "table",  "book",   "idea",   "house",  "friend", "letter", "phone",  "bird",
    "street", "teacher", "pencil", "river",  "story",  "doctor", "bottle", "ladder", "hat",    "coat",
    "shoe",   "train",   "cat",    "horse",  "farmer", "lamp",   "wall",   "road",   "money",  "piano",
    "song",   "paper",   "garage", "bridge", "island", "rocket", "blanket", "candle", "forest", "engine"};
const std::vector<std::string> kPlainVerbs = {"sees",  "likes", "reads", "finds", "holds", "moves",
                                              "paints", "carries", "follows", "visits", "opens", "builds"};
const std::vector<std::string> kAdjectives = {"red", "big", "small", "old", "happy", "quiet", "green", "tall"};
const std::vector<std::string> kAdverbs = {"quickly", "slowly", "again", "often"};
const std::vector<std::string> kPreps = {"on", "near", "under", "with", "behind"};
const std::vector<std::string> kDets = {"the", "a", "that", "this"};

struct Builder {
  Rng& rng;
  bool icu;
  std::vector<std::string> tokens;
  bool placed = false;

  ParseTree leaf(const std::string& pos, const std::string& word) {
    tokens.push_back(word);
    return ParseTree::leaf(pos, word);
  }

  std::string noun() {
    // The first noun of an ICU utterance is always an ICU noun.
    if (icu && (!placed || rng.uniform() < 0.5)) {
      placed = true;
      return pick(rng, kIcuNouns);
    }
    return pick(rng, kPlainNouns);
  }

  std::string verb() {
    if (icu && rng.uniform() < 0.3) return pick(rng, kIcuVerbs);
    return pick(rng, kPlainVerbs);
  }

  ParseTree np(int budget) {
    const double r = rng.uniform();
    if (budget > 0 && r < 0.2) return ParseTree::node("NP", {np(budget - 1), pp(budget - 1)});
    if (r < 0.5)
      return ParseTree::node("NP", {leaf("DT", pick(rng, kDets)),
                                    ParseTree::node("ADJP", {leaf("JJ", pick(rng, kAdjectives))}),
                                    leaf("NN", noun())});
    return ParseTree::node("NP", {leaf("DT", pick(rng, kDets)), leaf("NN", noun())});
  }

  ParseTree pp(int budget) { return ParseTree::node("PP", {leaf("IN", pick(rng, kPreps)), np(budget)}); }

  ParseTree vp(int budget) {
    const double r = rng.uniform();
    if (r < 0.4) return ParseTree::node("VP", {leaf("VBZ", verb()), np(budget)});
    if (r < 0.6) return ParseTree::node("VP", {leaf("VBZ", verb()), pp(budget)});
    if (r < 0.8) return ParseTree::node("VP", {leaf("VBZ", verb()), ParseTree::node("ADVP", {leaf("RB", pick(rng, kAdverbs))})});
    return ParseTree::node("VP", {leaf("VBZ", verb())});
  }

  ParseTree sentence() {
    const int budget = static_cast<int>(rng.below(3));
    std::vector<ParseTree> kids{np(budget), vp(budget)};
    if (rng.uniform() < 0.8) kids.push_back(leaf(".", "."));
    ParseTree s = ParseTree::node("S", std::move(kids));
    if (rng.coin()) return ParseTree::node("ROOT", {std::move(s)});
    return s;
  }
};

}  // namespace

double normal(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

ParseTree random_tree(Rng& rng, int max_depth) {
  if (max_depth <= 1 || rng.uniform() < 0.25) return ParseTree::leaf(pick(rng, kPos), pick(rng, kWords));
  const auto n = 1 + rng.below(3);
  std::vector<ParseTree> kids;
  for (std::uint64_t i = 0; i < n; ++i) kids.push_back(random_tree(rng, max_depth - 1));
  return ParseTree::node(pick(rng, kPhrase), std::move(kids));
}

Corpus synthetic_corpus(const SyntheticCorpusOptions& options) {
  Rng rng(options.seed);
  std::vector<Utterance> out;
  for (std::size_t i = 0; i < options.size; ++i) {
    Builder b{rng, rng.coin(), {}};
    const ParseTree tree = b.sentence();
    Utterance u;
    u.id = "u" + std::to_string(i);
    u.speaker_id = "s" + std::to_string(i % 97);
    std::string text;
    for (std::size_t k = 0; k < b.tokens.size(); ++k) {
      if (k && b.tokens[k] != ".") text += ' ';
      text += b.tokens[k];
    }
    u.text = text;
    u.tokens = tokenize(text);
    u.parse = serialize(tree);
    u.label = options.labels == LabelRule::Random ? (rng.coin() ? Label::AD : Label::Control)
                                                  : (icu_features(u.tokens).present ? Label::Control : Label::AD);
    out.push_back(std::move(u));
  }
  Corpus corpus(std::move(out));
  if (!options.tag_splits) return corpus;
  SplitOptions split;
  split.ratios = options.ratios;
  split.seed = options.seed;
  return assign_splits(corpus, split);
}

EmbeddingStore noise_store(const std::vector<std::string>& ids, std::size_t n_layers, std::size_t dim,
                           std::uint64_t seed) {
  Rng rng(seed);
  std::vector<EmbeddingStore::LayerMatrix> layers;
  for (std::size_t l = 0; l < n_layers; ++l) {
    EmbeddingStore::LayerMatrix m(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(normal(rng));
    layers.push_back(std::move(m));
  }
  return EmbeddingStore(ids, std::move(layers));
}

std::vector<std::string> ids_of(const Corpus& corpus) {
  std::vector<std::string> ids;
  for (const auto& u : corpus.utterances()) ids.push_back(u.id);
  return ids;
}

double min_preactivation(const Mlp<double>& model, const Eigen::MatrixXd& inputs) {
  double smallest = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd h = inputs;
  for (std::size_t l = 0; l + 1 < model.layers().size(); ++l) {
    const auto& layer = model.layers()[l];
    const Eigen::MatrixXd z = (h * layer.weights).rowwise() + layer.bias.transpose();
    smallest = std::min(smallest, z.cwiseAbs().minCoeff());
    h = z.cwiseMax(0.0);
  }
  return smallest;
}

}  // namespace probekit::testing
