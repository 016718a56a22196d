#ifndef FBMC_CORE_CSV_HPP
#define FBMC_CORE_CSV_HPP

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string/trim.hpp>
#include <boost/tokenizer.hpp>
#include <fmt/format.h>

#include "fbmc/core/error.hpp"

namespace fbmc::csv {

/// One parsed data row. `line` is the 1-based line number in the file.
struct Row {
  std::size_t line = 0;
  std::vector<std::string> cells;
};

/// A CSV file with a header row, addressed by column name.
class Table {
public:
  static Table read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path.filename().string(), 0, "cannot open file");
    Table table;
    table.file_ = path.filename().string();
    std::string text;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, text)) {
      ++line_no;
      if (!text.empty() && text.back() == '\r') text.pop_back();
      if (line_no == 1 && text.rfind("\xEF\xBB\xBF", 0) == 0) text.erase(0, 3);
      if (boost::algorithm::trim_copy(text).empty()) continue;
      auto cells = split(text);
      if (!have_header) {
        for (std::size_t i = 0; i < cells.size(); ++i) table.columns_[cells[i]] = i;
        table.header_ = std::move(cells);
        have_header = true;
        continue;
      }
      if (cells.size() != table.header_.size())
        throw DataError(table.file_, line_no,
                        fmt::format("expected {} fields, found {}", table.header_.size(),
                                    cells.size()));
      table.rows_.push_back({line_no, std::move(cells)});
    }
    if (!have_header) throw DataError(table.file_, 0, "missing header row");
    return table;
  }

  const std::string& file() const noexcept { return file_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

  std::size_t column(const std::string& name) const {
    auto it = columns_.find(name);
    if (it == columns_.end())
      throw DataError(file_, 1, fmt::format("missing column '{}'", name));
    return it->second;
  }

  const std::string& text(const Row& row, std::size_t col) const { return row.cells[col]; }

  double number(const Row& row, std::size_t col) const {
    const std::string& cell = row.cells[col];
    try {
      std::size_t used = 0;
      double value = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      return value;
    } catch (const std::exception&) {
      throw DataError(file_, row.line,
                      fmt::format("column '{}': '{}' is not a number", header_[col], cell));
    }
  }

private:
  static std::vector<std::string> split(const std::string& text) {
    using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
    Tokenizer tok(text, boost::escaped_list_separator<char>('\\', ',', '"'));
    std::vector<std::string> cells;
    for (const auto& cell : tok) cells.push_back(boost::algorithm::trim_copy(cell));
    return cells;
  }

  std::string file_;
  std::vector<std::string> header_;
  std::map<std::string, std::size_t> columns_;
  std::vector<Row> rows_;
};

/// Shortest round-trip representation of a double; stable across runs.
inline std::string num(double value) {
  if (value == 0.0) return "0";
  return fmt::format("{}", value);
}

/// Accumulates CSV text with a fixed header.
class Writer {
public:
  explicit Writer(const std::vector<std::string>& header) { row(header); }

  Writer& row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    return *this;
  }

  std::string str() const { return out_.str(); }

private:
  std::ostringstream out_;
};

}  // namespace fbmc::csv

#endif  // FBMC_CORE_CSV_HPP
