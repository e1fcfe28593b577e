#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cotdistill {

/// Delimited table with a header row. Quoted fields follow RFC 4180 (doubled
/// quotes, embedded delimiters and newlines).
class DelimitedTable {
 public:
  static DelimitedTable read(const std::filesystem::path& path);
  static DelimitedTable parse(std::string_view text, char delimiter);

  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  char delimiter() const { return delimiter_; }

  bool has_column(std::string_view name) const;
  // Throws DataError naming the file when the column is missing.
  std::size_t column(std::string_view name) const;

  void set_source(std::string source) { source_ = std::move(source); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
  char delimiter_ = ',';
  std::string source_;
};

// Tab if the header line contains a tab, else comma.
char sniff_delimiter(std::string_view text);

}  // namespace cotdistill
