#include "nnsdr/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

#include "nnsdr/errors.hpp"

namespace nnsdr {

void DataSet::validate() const {
  if (x.rows() < 1 || x.cols() < 1)
    throw ContractViolation("DataSet: need n >= 1 and p >= 1");
  if (y.size() != x.rows())
    throw ContractViolation("DataSet: response length " + std::to_string(y.size()) +
                            " does not match n = " + std::to_string(x.rows()));
  if (!x.allFinite() || !y.allFinite())
    throw ContractViolation("DataSet: non-finite values");
}

DataSet DataSet::subset(const std::vector<Index> &rows) const {
  DataSet out;
  out.x.resize(static_cast<Index>(rows.size()), p());
  out.y.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.x.row(static_cast<Index>(i)) = x.row(rows[i]);
    out.y(static_cast<Index>(i)) = y(rows[i]);
  }
  return out;
}

Standardizer Standardizer::fit(const Matrix &x) {
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  s.scale.resize(x.cols());
  const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
  for (Index j = 0; j < x.cols(); ++j) {
    const double sd = std::sqrt((x.col(j).array() - s.mean(j)).square().sum() / denom);
    s.scale(j) = sd > 0.0 ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(Index p) {
  return Standardizer{Vector::Zero(p), Vector::Ones(p)};
}

Matrix Standardizer::apply(const Matrix &x) const {
  return (x.rowwise() - mean.transpose()).array().rowwise() / scale.transpose().array();
}

Vector Standardizer::apply(const Vector &x) const {
  return ((x - mean).array() / scale.array()).matrix();
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      return cells;
    }
    cells.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

} // namespace

CsvTable read_csv_table(std::istream &in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<std::vector<double>> rows;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.substr(0, 3) == "\xEF\xBB\xBF")
      view.remove_prefix(3);
    if (trim(view).empty())
      continue;
    auto cells = split_commas(view);
    if (!have_header) {
      for (auto c : cells)
        table.header.emplace_back(c);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError("expected " + std::to_string(table.header.size()) + " cells, found " +
                           std::to_string(cells.size()),
                       line_no, std::min(cells.size(), table.header.size()) + 1);
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = cells[c];
      const char *first = cell.data();
      const char *last = cell.data() + cell.size();
      if (first != last && *first == '+')
        ++first;
      auto [ptr, ec] = std::from_chars(first, last, row[c]);
      if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(row[c]))
        throw ParseError("non-numeric value '" + std::string(cell) + "' in column " +
                             table.header[c],
                         line_no, c + 1);
    }
    rows.push_back(std::move(row));
  }
  if (!have_header)
    throw ParseError("empty input, missing header", line_no + 1, 1);

  table.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(table.header.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      table.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
  return table;
}

DataSet read_dataset_csv(std::istream &in) {
  CsvTable table = read_csv_table(in);
  if (table.header.size() < 2 || table.header.front() != "Y")
    throw ParseError("dataset header must be Y,X1,...,Xp", 1, 1);
  if (table.values.rows() < 1)
    throw ParseError("dataset has no observations", 2, 1);
  DataSet data;
  data.y = table.values.col(0);
  data.x = table.values.rightCols(table.values.cols() - 1);
  return data;
}

DataSet read_dataset_csv(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset_csv(in);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc())
    throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, ptr);
}

void write_dataset_csv(std::ostream &out, const DataSet &data) {
  data.validate();
  out << "Y";
  for (Index j = 0; j < data.p(); ++j)
    out << ",X" << (j + 1);
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out << format_double(data.y(i));
    for (Index j = 0; j < data.p(); ++j)
      out << ',' << format_double(data.x(i, j));
    out << '\n';
  }
}

void write_dataset_csv(const std::string &path, const DataSet &data) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write dataset '" + path + "'");
  write_dataset_csv(out, data);
  if (!out)
    throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace nnsdr
