#pragma once

#include <string>
#include <utility>
#include <vector>

namespace cl2o {

/// Header plus string cells. Numbers are rendered with 17 significant
/// digits so a write/read round trip is exact.
class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  std::string str() const;

  static std::string cell(double value);
  static CsvTable parse(const std::string& text);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Ordered `key = value` lines.
class KeyValues {
 public:
  void set(const std::string& key, const std::string& value);
  void set(const std::string& key, double value);
  const std::string* find(const std::string& key) const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }
  std::string str() const;

  /// Parses `key = value` lines; '#' starts a comment, blank lines are
  /// skipped. Duplicate keys are an error.
  static KeyValues parse(const std::string& text, const std::string& origin = "<text>");

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

enum class ResultFormat { Csv, KeyValue };

void write_results(const CsvTable& table, const std::string& path);
void write_results(const KeyValues& report, const std::string& path);

std::string format_double(double value);
double parse_double(const std::string& text, const std::string& what);

}  // namespace cl2o
