#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gtnet {

// Shortest decimal representation that round-trips bit-exactly.
std::string format_double(double v);
double parse_double(std::string_view s);

// Whitespace-separated tokens of a line.
std::vector<std::string> split_ws(std::string_view line);

// Ordered "key value" text file. Lines starting with '#' are comments.
class KeyValueFile {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  void set(const std::string& key, long long value);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  std::string to_string() const;
  static KeyValueFile parse(const std::string& text);

  void save(const std::filesystem::path& path) const;
  static KeyValueFile load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::map<std::string, std::size_t> index_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace gtnet
