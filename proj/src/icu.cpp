#include "probekit/icu.hpp"

#include <array>
#include <cctype>
#include <fstream>

#include "probekit/error.hpp"

namespace probekit {

namespace {

constexpr std::array<std::string_view, 75> kIcuWords = {
    "boy",       "son",       "brother",  "girl",      "daughter",   "sister",   "female",
    "woman",     "adult",     "grownup",  "mother",    "lady",       "cookie",   "biscuit",
    "treat",     "cupboard",  "closet",   "shelf",     "curtain",    "drape",    "drapery",
    "dish",      "cup",       "counter",  "apron",     "dishcloth",  "dishrag",  "towel",
    "rag",       "cloth",     "jar",      "container", "plate",      "sink",     "basin",
    "washbasin", "washbowl",  "washstand", "tap",      "faucet",     "stool",    "seat",
    "chair",     "water",     "dishwater", "liquid",   "window",     "frame",    "glass",
    "floor",     "outside",   "yard",     "outdoors",  "backyard",   "garden",   "driveway",
    "path",      "tree",      "bush",     "exterior",  "kitchen",    "room",     "take",
    "steal",     "fall",      "ignore",   "notice",    "daydream",   "pay",      "overflow",
    "spill",     "wash",      "dry",      "sit",       "stand"};

constexpr std::size_t kMinStem = 3;

bool ends_with(std::string_view w, std::string_view suffix) {
  return w.size() >= suffix.size() && w.substr(w.size() - suffix.size()) == suffix;
}

bool is_vowel(char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; }

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

std::span<const std::string_view> default_icu_words() { return kIcuWords; }

std::string stem(std::string_view word) {
  std::string w(word);
  auto strip = [&](std::size_t n) { w.resize(w.size() - n); };
  auto fits = [&](std::size_t n) { return w.size() >= n + kMinStem; };

  bool verbal = false;
  if (ends_with(w, "ing") && fits(3)) {
    strip(3);
    verbal = true;
  } else if (ends_with(w, "ed") && fits(2)) {
    strip(2);
    verbal = true;
  } else if (ends_with(w, "es") && fits(2) &&
             (ends_with(w, "ses") || ends_with(w, "xes") || ends_with(w, "zes") ||
              ends_with(w, "ches") || ends_with(w, "shes"))) {
    strip(2);
  } else if (ends_with(w, "s") && !ends_with(w, "ss") && fits(1)) {
    strip(1);
  }

  if (verbal && w.size() > kMinStem) {
    const char last = w.back();
    if (last == w[w.size() - 2] && !is_vowel(last) && last != 'l' && last != 's' && last != 'z')
      strip(1);
  }
  if (ends_with(w, "e") && fits(1)) strip(1);
  return w;
}

IcuMatcher::IcuMatcher() : IcuMatcher(default_icu_words()) {}

IcuMatcher::IcuMatcher(std::span<const std::string> words) {
  for (const auto& w : words) stems_.insert(stem(w));
}

IcuMatcher::IcuMatcher(std::span<const std::string_view> words) {
  for (auto w : words) stems_.insert(stem(w));
}

IcuMatcher IcuMatcher::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open ICU word list '" + path.string() + "'");
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto w = trim(line);
    for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!w.empty()) words.push_back(std::move(w));
  }
  if (words.empty()) throw ValidationError("ICU word list '" + path.string() + "' is empty");
  return IcuMatcher(std::span<const std::string>(words));
}

bool IcuMatcher::matches(std::string_view token) const { return stems_.contains(stem(token)); }

IcuCounts IcuMatcher::count(std::span<const std::string> tokens) const {
  IcuCounts c;
  for (const auto& t : tokens)
    if (matches(t)) ++c.count;
  c.present = c.count > 0;
  return c;
}

IcuCounts icu_features(std::span<const std::string> tokens) {
  static const IcuMatcher matcher;
  return matcher.count(tokens);
}

}  // namespace probekit
