#include "probekit/probing.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "probekit/csv.hpp"
#include "probekit/error.hpp"
#include "probekit/hashing.hpp"
#include "probekit/parse_tree.hpp"

namespace probekit {

std::string_view to_string(ProbingTask task) {
  switch (task) {
    case ProbingTask::WordContent:
      return "WordContent";
    case ProbingTask::SentenceLength:
      return "SentenceLength";
    case ProbingTask::TopConstituents:
      return "TopConstituents";
    case ProbingTask::TreeDepth:
      return "TreeDepth";
    case ProbingTask::BiGramShift:
      return "BiGramShift";
  }
  return "";
}

std::string_view to_string(FeatureType type) { return type == FeatureType::Surface ? "Surface" : "Syntactic"; }

ProbingTask parse_probing_task(std::string_view name) {
  std::string folded;
  for (char c : name)
    if (c != '-' && c != '_') folded += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto task : kProbingTasks) {
    std::string canon;
    for (char c : to_string(task)) canon += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (canon == folded) return task;
  }
  throw ValidationError("unknown probing task '" + std::string(name) + "'");
}

FeatureType feature_type(ProbingTask task) {
  return task == ProbingTask::WordContent || task == ProbingTask::SentenceLength ? FeatureType::Surface
                                                                                  : FeatureType::Syntactic;
}

std::vector<std::string> swap_adjacent(std::vector<std::string> tokens, std::size_t i) {
  if (i + 1 >= tokens.size()) throw ValidationError("no adjacent pair at position " + std::to_string(i));
  std::swap(tokens[i], tokens[i + 1]);
  return tokens;
}

namespace {

constexpr std::uint64_t kBigramSalt = 0x62696772616dULL;

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string id_list(const std::vector<std::string>& ids) {
  std::string list;
  for (std::size_t i = 0; i < ids.size() && i < 20; ++i) list += (i ? ", " : "") + ids[i];
  if (ids.size() > 20) list += ", ... (" + std::to_string(ids.size()) + " total)";
  return list;
}

/// Nearest-rank percentile of sorted values.
template <typename T>
T nearest_rank(const std::vector<T>& sorted, double percentile) {
  const auto m = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * m));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<ParseTree> parse_all(ProbingTask task, const Corpus& corpus) {
  std::vector<std::string> missing;
  for (const auto& u : corpus.utterances())
    if (!u.parse) missing.push_back(u.id);
  if (!missing.empty())
    throw ValidationError(std::string(to_string(task)) + " needs parses; missing for: " + id_list(missing));
  std::vector<ParseTree> trees;
  trees.reserve(corpus.size());
  for (const auto& u : corpus.utterances()) {
    try {
      trees.push_back(parse_ptb(*u.parse));
    } catch (const ParseError& e) {
      throw ValidationError("utterance '" + u.id + "': " + e.what());
    }
  }
  return trees;
}

ProbingDataset sentence_length(const Corpus& corpus, const ProbingConfig& config) {
  const std::size_t bins = config.sentence_length_bins;
  if (bins < 2) throw ValidationError("SentenceLength needs at least two bins");
  std::vector<std::size_t> lengths;
  for (const auto& u : corpus.utterances())
    if (*u.split == Split::Train) lengths.push_back(u.tokens.size());
  std::sort(lengths.begin(), lengths.end());

  // Upper edge of bin b is the (b+1)/bins quantile of train lengths.
  std::vector<std::size_t> edges;
  for (std::size_t b = 1; b < bins; ++b)
    edges.push_back(nearest_rank(lengths, 100.0 * static_cast<double>(b) / static_cast<double>(bins)));

  ProbingDataset ds;
  ds.task = ProbingTask::SentenceLength;
  ds.n_classes = bins;
  for (std::size_t b = 0; b < bins; ++b) {
    if (b == 0)
      ds.class_names.push_back("<=" + std::to_string(edges.front()));
    else if (b + 1 == bins)
      ds.class_names.push_back(">" + std::to_string(edges.back()));
    else
      ds.class_names.push_back(std::to_string(edges[b - 1]) + "<len<=" + std::to_string(edges[b]));
  }
  for (const auto& u : corpus.utterances()) {
    const auto n = u.tokens.size();
    const auto label = std::count_if(edges.begin(), edges.end(), [n](std::size_t e) { return n > e; });
    ds.instances.push_back({u.id, *u.split, static_cast<int>(label), std::nullopt});
  }
  return ds;
}

ProbingDataset tree_depth(const Corpus& corpus, const ProbingConfig& config) {
  const auto trees = parse_all(ProbingTask::TreeDepth, corpus);
  std::vector<int> depths(trees.size());
  std::vector<int> train_depths;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    depths[i] = depth(trees[i]);
    if (*corpus[i].split == Split::Train) train_depths.push_back(depths[i]);
  }
  std::sort(train_depths.begin(), train_depths.end());
  const int lo = nearest_rank(train_depths, config.depth_low_percentile);
  const int hi = nearest_rank(train_depths, config.depth_high_percentile);

  ProbingDataset ds;
  ds.task = ProbingTask::TreeDepth;
  ds.n_classes = static_cast<std::size_t>(hi - lo + 1);
  for (int d = lo; d <= hi; ++d) {
    std::string name = std::to_string(d);
    if (lo != hi && d == lo) name = "<=" + name;
    if (lo != hi && d == hi) name = ">=" + name;
    ds.class_names.push_back(name);
  }
  for (std::size_t i = 0; i < trees.size(); ++i)
    ds.instances.push_back({corpus[i].id, *corpus[i].split, std::clamp(depths[i], lo, hi) - lo, std::nullopt});
  return ds;
}

ProbingDataset top_constituent_sequences(const Corpus& corpus, const ProbingConfig& config) {
  if (config.top_constituent_classes < 2) throw ValidationError("TopConstituents needs at least two classes");
  const auto trees = parse_all(ProbingTask::TopConstituents, corpus);
  std::vector<std::string> sequences;
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 0; i < trees.size(); ++i) {
    auto seq = join(top_constituents(trees[i]), " ");
    if (seq.empty()) seq = "<none>";
    if (*corpus[i].split == Split::Train) ++counts[seq];
    sequences.push_back(std::move(seq));
  }
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [seq, n] : counts) ranked.emplace_back(n, seq);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  const std::size_t kept = std::min(ranked.size(), config.top_constituent_classes - 1);

  ProbingDataset ds;
  ds.task = ProbingTask::TopConstituents;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < kept; ++i) {
    index[ranked[i].second] = static_cast<int>(i);
    ds.class_names.push_back(ranked[i].second);
  }
  ds.class_names.emplace_back("OTHER");
  ds.n_classes = kept + 1;
  const int other = static_cast<int>(kept);
  for (std::size_t i = 0; i < trees.size(); ++i) {
    auto it = index.find(sequences[i]);
    ds.instances.push_back({corpus[i].id, *corpus[i].split, it == index.end() ? other : it->second, std::nullopt});
  }
  return ds;
}

ProbingDataset bigram_shift(const Corpus& corpus, const ProbingConfig& config) {
  ProbingDataset ds;
  ds.task = ProbingTask::BiGramShift;
  ds.n_classes = 2;
  ds.class_names = {"original", "inverted"};
  for (const auto& u : corpus.utterances()) {
    if (u.tokens.size() < 2) continue;
    Rng rng(hash_with_seed(u.id, config.seed ^ kBigramSalt));
    int label = 0;
    auto tokens = u.tokens;
    if (rng.coin()) {
      std::vector<std::size_t> positions;
      for (std::size_t i = 0; i + 1 < tokens.size(); ++i)
        if (tokens[i] != tokens[i + 1]) positions.push_back(i);
      if (!positions.empty()) {
        tokens = swap_adjacent(std::move(tokens), positions[rng.below(positions.size())]);
        label = 1;
      }
    }
    ds.instances.push_back({u.id, *u.split, label, join(tokens, " ")});
  }
  return ds;
}

bool is_word(const std::string& token) {
  return !token.empty() &&
         std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isalpha(c) || c >= 0x80; });
}

ProbingDataset word_content(const Corpus& corpus, const ProbingConfig& config) {
  const std::size_t w = config.word_content_targets;
  if (w < 2) throw ValidationError("WordContent needs at least two target words");
  std::map<std::string, std::size_t> df;
  for (const auto& u : corpus.utterances()) {
    if (*u.split != Split::Train) continue;
    std::set<std::string> seen(u.tokens.begin(), u.tokens.end());
    for (const auto& t : seen)
      if (is_word(t)) ++df[t];
  }
  std::vector<std::pair<std::size_t, std::string>> ranked;
  for (const auto& [word, n] : df) ranked.emplace_back(n, word);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  // Skip the most frequent tenth (function words) and take the next W.
  const std::size_t start = ranked.size() / 10;
  if (ranked.size() - start < w)
    throw ValidationError("WordContent needs " + std::to_string(w) + " mid-frequency words, train split has " +
                          std::to_string(ranked.size() - start));

  ProbingDataset ds;
  ds.task = ProbingTask::WordContent;
  ds.n_classes = w;
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < w; ++i) {
    index[ranked[start + i].second] = static_cast<int>(i);
    ds.class_names.push_back(ranked[start + i].second);
  }
  for (const auto& u : corpus.utterances()) {
    std::set<int> hits;
    for (const auto& t : u.tokens) {
      auto it = index.find(t);
      if (it != index.end()) hits.insert(it->second);
    }
    if (hits.size() == 1) ds.instances.push_back({u.id, *u.split, *hits.begin(), std::nullopt});
  }
  return ds;
}

}  // namespace

ProbingDataset build_probing_dataset(ProbingTask task, const Corpus& corpus, const ProbingConfig& config) {
  if (!corpus.all_tagged()) throw ValidationError("probing datasets need split tags on every utterance");
  if (corpus.split_counts().train == 0) throw ValidationError("probing datasets need a nonempty train split");
  switch (task) {
    case ProbingTask::WordContent:
      return word_content(corpus, config);
    case ProbingTask::SentenceLength:
      return sentence_length(corpus, config);
    case ProbingTask::TopConstituents:
      return top_constituent_sequences(corpus, config);
    case ProbingTask::TreeDepth:
      return tree_depth(corpus, config);
    case ProbingTask::BiGramShift:
      return bigram_shift(corpus, config);
  }
  throw ValidationError("unknown probing task");
}

Corpus bigram_shift_corpus(const Corpus& source, const ProbingDataset& dataset) {
  if (dataset.task != ProbingTask::BiGramShift) throw ValidationError("not a BiGramShift dataset");
  std::vector<Utterance> out;
  for (const auto& inst : dataset.instances) {
    const auto row = source.find(inst.id);
    if (!row) throw ValidationError("BiGramShift instance '" + inst.id + "' not in corpus");
    Utterance u = source[*row];
    u.text = inst.perturbed_text.value_or(u.text);
    u.tokens = tokenize(u.text);
    u.parse.reset();
    out.push_back(std::move(u));
  }
  return Corpus(std::move(out));
}

void write_probing_dataset(std::ostream& out, const ProbingDataset& ds) {
  for (const auto& inst : ds.instances) {
    nlohmann::ordered_json obj;
    obj["id"] = inst.id;
    obj["split"] = to_string(inst.split);
    obj["label"] = inst.label;
    obj["class_name"] = ds.class_names.at(static_cast<std::size_t>(inst.label));
    if (inst.perturbed_text) obj["perturbed_text"] = *inst.perturbed_text;
    obj["task"] = to_string(ds.task);
    obj["n_classes"] = ds.n_classes;
    out << obj.dump() << '\n';
  }
}

ProbingDataset read_probing_dataset(std::istream& in, const std::string& source) {
  ProbingDataset ds;
  std::map<int, std::string> names;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      const auto task = parse_probing_task(obj.at("task").get<std::string>());
      const auto n_classes = obj.at("n_classes").get<std::size_t>();
      if (first) {
        ds.task = task;
        ds.n_classes = n_classes;
        first = false;
      } else if (task != ds.task || n_classes != ds.n_classes) {
        throw ValidationError("mixed tasks or class counts");
      }
      ProbeInstance inst;
      inst.id = obj.at("id").get<std::string>();
      inst.split = parse_split(obj.at("split").get<std::string>());
      inst.label = obj.at("label").get<int>();
      if (inst.label < 0 || static_cast<std::size_t>(inst.label) >= ds.n_classes)
        throw ValidationError("label out of range");
      if (obj.contains("perturbed_text")) inst.perturbed_text = obj["perturbed_text"].get<std::string>();
      names[inst.label] = obj.at("class_name").get<std::string>();
      ds.instances.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (first) throw ValidationError(source + ": probing dataset is empty");
  for (std::size_t c = 0; c < ds.n_classes; ++c) {
    auto it = names.find(static_cast<int>(c));
    ds.class_names.push_back(it == names.end() ? "class_" + std::to_string(c) : it->second);
  }
  return ds;
}

ProbeResult run_probe(const ProbingDataset& dataset, const EmbeddingStore& embeddings, std::size_t layer,
                      const ProbeGrid& grid, std::uint64_t seed) {
  if (grid.depths.empty() || grid.units.empty() || grid.learning_rates.empty())
    throw ValidationError("probe hyperparameter grid is empty");
  const auto& matrix = embeddings.layer(layer);

  std::vector<std::string> ids;
  ids.reserve(dataset.instances.size());
  for (const auto& inst : dataset.instances) ids.push_back(inst.id);
  const auto rows = align(embeddings, ids);

  LabeledData<double> parts[3];
  std::vector<std::size_t> members[3];
  for (std::size_t i = 0; i < dataset.instances.size(); ++i)
    members[static_cast<int>(dataset.instances[i].split)].push_back(i);
  for (int s = 0; s < 3; ++s) {
    auto& part = parts[s];
    part.features.resize(static_cast<Eigen::Index>(members[s].size()), matrix.cols());
    for (std::size_t k = 0; k < members[s].size(); ++k) {
      const auto i = members[s][k];
      part.features.row(static_cast<Eigen::Index>(k)) =
          matrix.row(static_cast<Eigen::Index>(rows[i])).cast<double>();
      part.labels.push_back(dataset.instances[i].label);
    }
  }
  const auto& train_set = parts[static_cast<int>(Split::Train)];
  const auto& val_set = parts[static_cast<int>(Split::Val)];
  const auto& test_set = parts[static_cast<int>(Split::Test)];
  if (train_set.empty() || val_set.empty() || test_set.empty())
    throw ValidationError(std::string(to_string(dataset.task)) + " probe needs train, val and test instances");

  const auto cells = architecture_grid(embeddings.dim(), dataset.n_classes, grid.depths, grid.units,
                                       grid.learning_rates, grid.train,
                                       derive_seed(seed, {static_cast<std::uint64_t>(dataset.task), layer}));
  auto search = grid_search<double>(cells, train_set, val_set);

  ProbeResult r;
  r.task = dataset.task;
  r.layer = layer;
  r.chosen = cells[search.best_index];
  r.val_accuracy = search.val_accuracy[search.best_index];
  r.cell_val_accuracy = std::move(search.val_accuracy);
  r.accuracy = accuracy(search.best.model, test_set);
  return r;
}

std::vector<ProbeReportRow> probe_report(std::span<const ProbeResult> results) {
  std::vector<ProbeReportRow> rows;
  for (auto task : kProbingTasks) {
    const ProbeResult* best = nullptr;
    for (const auto& r : results) {
      if (r.task != task) continue;
      if (!best || r.accuracy > best->accuracy || (r.accuracy == best->accuracy && r.layer < best->layer)) best = &r;
    }
    if (best) rows.push_back({task, best->accuracy, best->layer, feature_type(task), false});
  }
  for (auto type : {FeatureType::Surface, FeatureType::Syntactic}) {
    ProbeReportRow* worst = nullptr;
    for (auto& row : rows)
      if (row.type == type && (!worst || row.accuracy < worst->accuracy)) worst = &row;
    if (worst) worst->worst_in_type = true;
  }
  return rows;
}

namespace {

std::string percent(double accuracy) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * accuracy);
  return buf;
}

std::string aligned_table(const std::vector<std::vector<std::string>>& cells, const std::vector<bool>& right) {
  std::vector<std::size_t> width(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  auto pad = [](const std::string& s, std::size_t w, bool r) {
    const std::string fill(w - s.size(), ' ');
    return r ? fill + s : s + fill;
  };
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    std::string line;
    for (std::size_t c = 0; c < cells[i].size(); ++c) {
      if (c) line += " | ";
      line += pad(cells[i][c], width[c], i > 0 && right[c]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (i == 0) {
      std::string rule;
      for (std::size_t c = 0; c < width.size(); ++c) {
        if (c) rule += "-+-";
        rule += std::string(width[c], '-');
      }
      out += rule + '\n';
    }
  }
  return out;
}

}  // namespace

std::string format_probe_table(std::span<const ProbeReportRow> rows) {
  std::vector<std::vector<std::string>> cells{{"Linguistic Feature", "Highest Accuracy", "Layer", "Feature Type"}};
  for (const auto& r : rows)
    cells.push_back({std::string(to_string(r.task)) + (r.worst_in_type ? " *" : ""), percent(r.accuracy),
                     std::to_string(r.layer), std::string(to_string(r.type))});
  return aligned_table(cells, {false, true, true, false}) + "* worst accuracy within its feature type\n";
}

std::string format_probe_csv(std::span<const ProbeReportRow> rows) {
  std::string out = "Linguistic Feature,Highest Accuracy,Layer,Feature Type,Worst In Type\n";
  for (const auto& r : rows)
    out += csv::join({std::string(to_string(r.task)), percent(r.accuracy), std::to_string(r.layer),
                      std::string(to_string(r.type)), r.worst_in_type ? "1" : "0"}) +
           '\n';
  return out;
}

void write_probe_results_csv(std::ostream& out, std::span<const ProbeResult> results) {
  out << "task,layer,test_accuracy,val_accuracy,hidden_layers,learning_rate\n";
  for (const auto& r : results) {
    std::string hidden;
    for (std::size_t i = 0; i < r.chosen.model.hidden_layers.size(); ++i)
      hidden += (i ? " " : "") + std::to_string(r.chosen.model.hidden_layers[i]);
    out << csv::join({std::string(to_string(r.task)), std::to_string(r.layer), csv::format_number(r.accuracy),
                      csv::format_number(r.val_accuracy), hidden, csv::format_number(r.chosen.train.learning_rate)})
        << '\n';
  }
}

std::vector<ProbeResult> read_probe_results_csv(std::istream& in, const std::string& source) {
  std::vector<ProbeResult> results;
  std::string line;
  std::size_t line_no = 0;
  auto number = [&](const std::string& f) {
    double v = 0;
    auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size())
      throw ParseError(source + ":" + std::to_string(line_no) + ": bad number '" + f + "'", line_no);
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 6) throw ParseError(source + ":" + std::to_string(line_no) + ": expected 6 fields", line_no);
    ProbeResult r;
    r.task = parse_probing_task(f[0]);
    r.layer = static_cast<std::size_t>(number(f[1]));
    r.accuracy = number(f[2]);
    r.val_accuracy = number(f[3]);
    std::istringstream hidden(f[4]);
    std::size_t units;
    while (hidden >> units) r.chosen.model.hidden_layers.push_back(units);
    r.chosen.train.learning_rate = number(f[5]);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace probekit
