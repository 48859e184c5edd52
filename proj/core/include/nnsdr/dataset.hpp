#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "nnsdr/linalg.hpp"

namespace nnsdr {

/// n x p predictors (one observation per row) and the n-vector response.
struct DataSet {
  Matrix x;
  Vector y;

  Index n() const noexcept { return x.rows(); }
  Index p() const noexcept { return x.cols(); }

  /// Throws ContractViolation unless n, p >= 1, y has n entries and every
  /// value is finite.
  void validate() const;

  DataSet subset(const std::vector<Index> &rows) const;
};

/// Per-column centering and scaling (x - mean) / scale.
struct Standardizer {
  Vector mean;
  Vector scale;

  static Standardizer fit(const Matrix &x);
  static Standardizer identity(Index p);

  Matrix apply(const Matrix &x) const;
  Vector apply(const Vector &x) const;
};

/// Numeric CSV with a header row.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
};

/// Parses comma-separated numeric data with a header line. Blank lines are
/// skipped. Throws ParseError naming the 1-based line and column of the first
/// malformed cell.
CsvTable read_csv_table(std::istream &in);

/// Dataset CSV: header "Y,X1,...,Xp", one observation per line.
DataSet read_dataset_csv(std::istream &in);
DataSet read_dataset_csv(const std::string &path);

void write_dataset_csv(std::ostream &out, const DataSet &data);
void write_dataset_csv(const std::string &path, const DataSet &data);

/// Shortest round-trip decimal text for a double.
std::string format_double(double v);

} // namespace nnsdr
