#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace hbmv {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column, or -1.
  long column(const std::string& name) const;
};

// RFC-4180 style: comma separated, optional double quotes, header required.
// Ragged rows raise DimensionMismatch; unreadable files IoError.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(std::istream& in, const std::string& source);

// Strict numeric parse; empty / NA fields raise MissingValue, junk ParseError.
double parse_number(const std::string& field, const std::string& context);

std::string format_number(double value);
std::string csv_escape(const std::string& field);

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

// Writes to a temporary sibling then renames, so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace hbmv
