#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace kwmhn {

/// 17 significant digits (round-trips any double); "nan", "inf" and "-inf"
/// for non-finite values.
std::string fmt_double(double v);

/// Git blob hash ("blob <size>\0" + content, SHA-1, hex).
std::string git_blob_hash(std::string_view content);
std::string git_blob_hash_file(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Creates parent directories as needed and replaces the file.
void write_file(const std::filesystem::path& path, std::string_view content);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws IntegrityError if absent.
  std::size_t column(std::string_view name) const;
  std::vector<double> numeric(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);

}  // namespace kwmhn
