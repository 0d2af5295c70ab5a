#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

/// Clinician-identified content words for the Cookie Theft picture.
std::span<const std::string_view> default_icu_words();

/// Suffix-strip stemmer shared by tokens and list entries.
///
/// Strips one of "ing", "ed", "es" (only after s, x, z, ch, sh), "s" (not
/// after "ss") when at least three characters remain. After "ing"/"ed" a
/// doubled final consonant other than l, s, z is undoubled ("sitting" ->
/// "sit"). Finally a trailing "e" is dropped when three characters remain, so
/// "take", "takes" and "taking" share the stem "tak".
std::string stem(std::string_view word);

struct IcuCounts {
  bool present = false;
  int count = 0;

  bool operator==(const IcuCounts&) const = default;
};

class IcuMatcher {
 public:
  /// Uses the bundled list.
  IcuMatcher();
  explicit IcuMatcher(std::span<const std::string> words);
  explicit IcuMatcher(std::span<const std::string_view> words);

  /// One word per line; blank lines and surrounding whitespace ignored.
  static IcuMatcher from_file(const std::filesystem::path& path);

  bool matches(std::string_view token) const;
  IcuCounts count(std::span<const std::string> tokens) const;

  const std::set<std::string, std::less<>>& stems() const { return stems_; }

 private:
  std::set<std::string, std::less<>> stems_;
};

/// Presence flag and number of matching token positions against the bundled list.
IcuCounts icu_features(std::span<const std::string> tokens);

}  // namespace probekit
