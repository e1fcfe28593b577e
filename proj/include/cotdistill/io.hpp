#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cotdistill {

using json = nlohmann::json;

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file and renames it over `path`, so readers never
// observe a partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

// One compact JSON object per line, LF-terminated. Blank lines are skipped on
// read; a malformed line is a DataError naming the line number.
std::vector<json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<json>& lines);
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines);

std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::filesystem::path& path);

}  // namespace cotdistill
