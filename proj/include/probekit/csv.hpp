#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace probekit::csv {

/// Quotes a field when it contains a comma, quote or newline.
std::string escape(std::string_view field);

std::string join(const std::vector<std::string>& fields);

/// Splits one record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split(std::string_view line);

/// Shortest round-trippable decimal form of a double.
std::string format_number(double v);

}  // namespace probekit::csv
