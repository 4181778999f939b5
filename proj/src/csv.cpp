#include "jtens/csv.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "jtens/fileio.hpp"

namespace jtens {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (end == text.size()) break;
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    const std::size_t end = comma == std::string::npos ? line.size() : comma;
    std::size_t lo = start, hi = end;
    while (lo < hi && std::isspace(static_cast<unsigned char>(line[lo]))) ++lo;
    while (hi > lo && std::isspace(static_cast<unsigned char>(line[hi - 1]))) --hi;
    fields.push_back(line.substr(lo, hi - lo));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double value = std::strtod(begin, &end);
  if (end == begin || end != begin + cell.size())
    throw DataError("csv: non-numeric cell '" + cell + "' in column '" + column + "', row " +
                    std::to_string(row));
  return value;
}

struct Table {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // rows x columns
};

Table load_table(const std::string& path) {
  const std::vector<std::string> lines = split_lines(read_text_file(path));
  if (lines.empty()) throw DataError("csv: '" + path + "' is empty");
  Table table;
  table.columns = split_fields(lines[0]);
  if (lines.size() == 1)
    throw DataError("csv: '" + path + "' has a header but no data rows");

  const std::size_t width = table.columns.size();
  table.values.resize(static_cast<Eigen::Index>(lines.size() - 1),
                      static_cast<Eigen::Index>(width));
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::vector<std::string> cells = split_fields(lines[r]);
    if (cells.size() != width)
      throw DataError("csv: row " + std::to_string(r) + " has " +
                      std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(width));
    for (std::size_t c = 0; c < width; ++c)
      table.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c)) =
          parse_cell(cells[c], r, table.columns[c]);
  }
  return table;
}

Eigen::Index column_index(const Table& table, const std::string& name) {
  for (std::size_t c = 0; c < table.columns.size(); ++c)
    if (table.columns[c] == name) return static_cast<Eigen::Index>(c);
  throw ConfigError("csv: no column named '" + name + "'");
}

void append_cell(std::string& out, double value, bool first = false) {
  if (!first) out.push_back(',');
  out += format_g17(value);
}

}  // namespace

RawDataset load_csv(const std::string& path, const std::string& label_column, bool regression) {
  const Table table = load_table(path);
  const Eigen::Index label_col = column_index(table, label_column);
  const Eigen::Index n = table.values.rows();
  const Eigen::Index d = table.values.cols() - 1;
  if (d < 1) throw DataError("csv: '" + path + "' has no feature columns");

  RawDataset raw;
  raw.regression = regression;
  raw.provenance = "csv:" + path;
  raw.train.features.resize(n, d);
  Eigen::Index out_col = 0;
  for (Eigen::Index c = 0; c < table.values.cols(); ++c) {
    if (c == label_col) continue;
    raw.train.features.col(out_col++) = table.values.col(c);
  }

  if (regression) {
    raw.train.targets = table.values.col(label_col);
    return raw;
  }

  raw.train.labels.resize(n);
  int max_label = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double v = table.values(i, label_col);
    if (v < 0.0 || v != std::rint(v) || v > 1e9)
      throw DataError("csv: label '" + format_g17(v) + "' in row " + std::to_string(i + 1) +
                      " is not a non-negative integer");
    raw.train.labels(i) = static_cast<int>(v);
    max_label = std::max(max_label, raw.train.labels(i));
  }
  raw.num_classes = max_label + 1;
  return raw;
}

void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
  if (trace.epochs.empty()) throw ConfigError("trace csv: empty trace");
  const Eigen::Index m = trace.epochs.front().member_train_err.size();

  std::string out =
      "epoch,lambda,ensemble_kl,avg_member_kl,diversity,"
      "ensemble_train_err,ensemble_val_err,ensemble_test_err";
  for (Eigen::Index j = 0; j < m; ++j) out += ",member_train_err_" + std::to_string(j);
  for (Eigen::Index j = 0; j < m; ++j) out += ",member_test_err_" + std::to_string(j);
  out.push_back('\n');

  for (const EpochStats& e : trace.epochs) {
    out += std::to_string(e.epoch);
    append_cell(out, e.lambda);
    append_cell(out, e.ensemble_kl);
    append_cell(out, e.avg_member_kl);
    append_cell(out, e.diversity);
    append_cell(out, e.ensemble_train_err);
    append_cell(out, e.ensemble_val_err);
    append_cell(out, e.ensemble_test_err);
    for (Eigen::Index j = 0; j < m; ++j) append_cell(out, e.member_train_err(j));
    for (Eigen::Index j = 0; j < m; ++j) append_cell(out, e.member_test_err(j));
    out.push_back('\n');
  }
  write_text_atomic(path, out);
}

TrainingTrace trace_from_csv(const std::string& path) {
  const Table table = load_table(path);
  Eigen::Index members = 0;
  while (true) {
    bool found = false;
    for (const std::string& name : table.columns)
      if (name == "member_train_err_" + std::to_string(members)) found = true;
    if (!found) break;
    ++members;
  }
  if (members == 0) throw DataError("trace csv: no member_train_err_<j> columns");

  const Eigen::Index col_epoch = column_index(table, "epoch");
  const Eigen::Index col_lambda = column_index(table, "lambda");
  const Eigen::Index col_ens = column_index(table, "ensemble_kl");
  const Eigen::Index col_avg = column_index(table, "avg_member_kl");
  const Eigen::Index col_div = column_index(table, "diversity");
  const Eigen::Index col_tr = column_index(table, "ensemble_train_err");
  const Eigen::Index col_val = column_index(table, "ensemble_val_err");
  const Eigen::Index col_te = column_index(table, "ensemble_test_err");

  TrainingTrace trace;
  for (Eigen::Index r = 0; r < table.values.rows(); ++r) {
    EpochStats stats;
    stats.epoch = static_cast<int>(table.values(r, col_epoch));
    stats.lambda = table.values(r, col_lambda);
    stats.ensemble_kl = table.values(r, col_ens);
    stats.avg_member_kl = table.values(r, col_avg);
    stats.diversity = table.values(r, col_div);
    stats.ensemble_train_err = table.values(r, col_tr);
    stats.ensemble_val_err = table.values(r, col_val);
    stats.ensemble_test_err = table.values(r, col_te);
    stats.member_train_err.resize(members);
    stats.member_test_err.resize(members);
    for (Eigen::Index j = 0; j < members; ++j) {
      stats.member_train_err(j) =
          table.values(r, column_index(table, "member_train_err_" + std::to_string(j)));
      stats.member_test_err(j) =
          table.values(r, column_index(table, "member_test_err_" + std::to_string(j)));
    }
    trace.epochs.push_back(std::move(stats));
  }
  trace.best_epoch = static_cast<int>(trace.epochs.size());
  return trace;
}

void write_robustness_csv(const std::string& path, const RobustnessCurve& curve) {
  std::string out = "keep_count,mean_error,std_error\n";
  for (std::size_t k = 0; k < curve.keep_counts.size(); ++k) {
    out += std::to_string(curve.keep_counts[k]);
    append_cell(out, curve.mean_error(static_cast<Eigen::Index>(k)));
    append_cell(out, curve.std_error(static_cast<Eigen::Index>(k)));
    out.push_back('\n');
  }
  write_text_atomic(path, out);
}

}  // namespace jtens
