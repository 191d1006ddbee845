#include "clusterfx/csv.hpp"

#include "clusterfx/errors.hpp"
#include "clusterfx/format.hpp"

namespace clusterfx {

CsvWriter::CsvWriter(std::ostream& out, const std::string& schema,
                     std::vector<std::string> columns)
    : out_(out), width_(columns.size()) {
  out_ << "# clusterfx " << schema << " schema v" << kCsvSchemaVersion << '\n';
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out_ << (i ? "," : "") << cell(columns[i]);
  }
  out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != width_) {
    throw StructuralError("csv row has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(width_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << '\n';
}

std::string CsvWriter::cell(double x) { return format_double(x); }

std::string CsvWriter::cell(std::size_t x) { return std::to_string(x); }

std::string CsvWriter::cell(const std::string& x) {
  if (x.find_first_of(",\"\n") == std::string::npos) return x;
  std::string quoted = "\"";
  for (char c : x) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace clusterfx
