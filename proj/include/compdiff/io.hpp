#pragma once

#include <string>
#include <vector>

#include "compdiff/vec2.hpp"

namespace compdiff {

// Shortest decimal that round-trips a double (17 significant digits).
std::string format_g17(double v);

// Sample CSV: "x0,x1" header, one row per point, LF line endings, 17
// significant digits. Writers create parent directories; both directions
// throw ConfigError on unreadable paths or malformed rows.
void write_samples_csv(const std::string& path, const std::vector<Vec2>& xs);
std::vector<Vec2> read_samples_csv(const std::string& path);

// Byte-exact text file helpers (binary mode, so LF stays LF everywhere).
void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace compdiff
