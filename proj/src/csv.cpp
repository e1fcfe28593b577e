#include "cotdistill/csv.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "cotdistill/types.hpp"

namespace cotdistill {

char sniff_delimiter(std::string_view text) {
  const auto eol = text.find('\n');
  const auto first_line = text.substr(0, eol);
  return first_line.find('\t') != std::string_view::npos ? '\t' : ',';
}

DelimitedTable DelimitedTable::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  std::string text = buffer.str();
  if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);
  DelimitedTable table = parse(text, sniff_delimiter(text));
  table.set_source(path.string());
  return table;
}

DelimitedTable DelimitedTable::parse(std::string_view text, char delimiter) {
  DelimitedTable table;
  table.delimiter_ = delimiter;

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // Skip blank lines.
    if (!(record.size() == 1 && record.front().empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == delimiter) {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // CRLF: the LF ends the record.
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();

  if (records.empty()) throw DataError("missing header row");
  table.header_ = std::move(records.front());
  for (std::size_t i = 0; i < table.header_.size(); ++i) table.index_.emplace(trim(table.header_[i]), i);
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto& row = records[r];
    row.resize(std::max(row.size(), table.header_.size()));
    table.rows_.push_back(std::move(row));
  }
  return table;
}

bool DelimitedTable::has_column(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t DelimitedTable::column(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) {
    throw DataError("missing required column '" + std::string(name) + "'" +
                    (source_.empty() ? "" : " in '" + source_ + "'"));
  }
  return it->second;
}

}  // namespace cotdistill
