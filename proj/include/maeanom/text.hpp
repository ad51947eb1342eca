#pragma once

// Small text helpers shared by the line-delimited file formats.

#include <string>
#include <string_view>
#include <vector>

namespace maeanom::text {

/// Shortest representation that round-trips through parse_double.
std::string format_double(double v);

double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
/// Split on runs of spaces/tabs.
std::vector<std::string> split_ws(std::string_view s);

}  // namespace maeanom::text
