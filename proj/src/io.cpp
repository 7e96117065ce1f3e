#include "compdiff/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "compdiff/errors.hpp"

namespace compdiff {

namespace fs = std::filesystem;

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    fs::create_directories(parent, ec);
    if (ec)
      throw ConfigError("cannot create directory " + parent.string() + ": " +
                        ec.message());
  }
}

}  // namespace

void write_text_file(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open " + path + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw ConfigError("write failed for " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_samples_csv(const std::string& path, const std::vector<Vec2>& xs) {
  std::string body = "x0,x1\n";
  body.reserve(body.size() + xs.size() * 40);
  for (const Vec2& p : xs) {
    body += format_g17(p.x);
    body += ',';
    body += format_g17(p.y);
    body += '\n';
  }
  write_text_file(path, body);
}

std::vector<Vec2> read_samples_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<Vec2> out;
  std::size_t pos = 0;
  int lineno = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    pos = end + 1;
    ++lineno;
    if (lineno == 1) {
      if (line != "x0,x1")
        throw ConfigError(path + ": expected header \"x0,x1\", got \"" + line +
                          "\"");
      continue;
    }
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    char* rest0 = nullptr;
    char* rest1 = nullptr;
    Vec2 p;
    if (comma != std::string::npos) {
      p.x = std::strtod(line.c_str(), &rest0);
      p.y = std::strtod(line.c_str() + comma + 1, &rest1);
    }
    const bool ok = comma != std::string::npos &&
                    rest0 == line.c_str() + comma && rest1 &&
                    rest1 == line.c_str() + line.size();
    if (!ok)
      throw ConfigError(path + ":" + std::to_string(lineno) +
                        ": malformed sample row \"" + line + "\"");
    out.push_back(p);
  }
  return out;
}

}  // namespace compdiff
