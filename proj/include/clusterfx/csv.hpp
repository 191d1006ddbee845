#pragma once

// Versioned CSV output. Every file starts with a comment line naming its
// schema and version, followed by the header row.

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace clusterfx {

inline constexpr int kCsvSchemaVersion = 1;

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::string& schema,
            std::vector<std::string> columns);

  // Throws StructuralError when the cell count differs from the header.
  void row(const std::vector<std::string>& cells);

  static std::string cell(double x);
  static std::string cell(std::size_t x);
  static std::string cell(bool x) { return x ? "1" : "0"; }
  static std::string cell(const std::string& x);

 private:
  std::ostream& out_;
  std::size_t width_;
};

}  // namespace clusterfx
