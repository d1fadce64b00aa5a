// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace twin {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

// Strict: the whole token must be a number. Throws ParseError.
double parse_double(std::string_view token);
long long parse_int(std::string_view token);

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
std::vector<std::string_view> split_ws(std::string_view s);

// Plain-text "key = value" documents; '#' starts a comment. Later keys win.
using KeyValues = std::map<std::string, std::string, std::less<>>;
KeyValues parse_key_values(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

}  // namespace twin
