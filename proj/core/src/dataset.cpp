#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fvi/errors.hpp"
#include "fvi/models.hpp"

namespace fvi {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ConfigError("csv: non-numeric cell '" + cell + "' at data row " + std::to_string(row + 1) +
                      ", column '" + column + "'");
  return v;
}

Dataset take_rows(const Matrix& all, const std::vector<std::size_t>& rows,
                  const std::vector<std::string>& names, long target_col, Split split) {
  Dataset d;
  d.split = split;
  const auto n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index cols = all.cols();
  const Eigen::Index feat = target_col >= 0 ? cols - 1 : cols;
  d.features.resize(n, feat);
  if (target_col >= 0) d.targets = Vector(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double v = all(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]), c);
      if (c == target_col) {
        (*d.targets)[i] = v;
      } else {
        d.features(i, k++) = v;
      }
    }
  }
  for (Eigen::Index c = 0; c < cols; ++c) {
    if (c == target_col) {
      d.target_name = names[static_cast<std::size_t>(c)];
    } else {
      d.feature_names.push_back(names[static_cast<std::size_t>(c)]);
    }
  }
  return d;
}

void apply_stats(Dataset& d, const NormalizationStats& s) {
  const Eigen::Index f = d.features.cols();
  for (Eigen::Index c = 0; c < f; ++c)
    d.features.col(c) = (d.features.col(c).array() - s.mean[c]) / s.sd[c];
  if (d.targets) *d.targets = (d.targets->array() - s.mean[f]) / s.sd[f];
  d.normalization = s;
}

}  // namespace

std::pair<Dataset, Dataset> load_csv_dataset(const std::string& path,
                                             const std::string& target_column, bool normalize,
                                             double split, std::uint64_t seed) {
  if (!(split > 0.0 && split <= 1.0)) throw ConfigError("csv: split fraction must be in (0, 1]");
  std::ifstream in(path);
  if (!in) throw ConfigError("csv: cannot open '" + path + "'");
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_row(line);
      break;
    }
  }
  if (header.empty()) throw ConfigError("csv: empty file '" + path + "'");

  long target_col = -1;
  if (!target_column.empty()) {
    const auto it = std::find(header.begin(), header.end(), target_column);
    if (it == header.end()) throw ConfigError("csv: target column '" + target_column + "' not found");
    target_col = static_cast<long>(it - header.begin());
  }

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = split_row(line);
    if (cells.size() != header.size())
      throw ConfigError("csv: row " + std::to_string(rows.size() + 1) + " has " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(header.size()));
    std::vector<double> r(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) r[c] = parse_cell(cells[c], rows.size(), header[c]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ConfigError("csv: no data rows in '" + path + "'");

  Matrix all(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < header.size(); ++c)
      all(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];

  // Fisher-Yates with our own index draw so the split does not depend on the
  // standard library's distribution implementations.
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_stream(seed, 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(order[i - 1], order[std::min(j, i - 1)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(split * static_cast<double>(rows.size())));
  std::vector<std::size_t> tr(order.begin(), order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> te(order.begin() + static_cast<long>(n_train), order.end());

  Dataset train = take_rows(all, tr, header, target_col, Split::train);
  Dataset test = take_rows(all, te, header, target_col, Split::test);

  if (normalize && train.size() > 0) {
    NormalizationStats s;
    s.columns = train.feature_names;
    if (train.targets) s.columns.push_back(train.target_name);
    Matrix block(train.features.rows(), static_cast<Eigen::Index>(s.columns.size()));
    block.leftCols(train.features.cols()) = train.features;
    if (train.targets) block.col(block.cols() - 1) = *train.targets;
    s.mean = block.colwise().mean().transpose();
    s.sd.resize(block.cols());
    for (Eigen::Index c = 0; c < block.cols(); ++c) {
      const double var = (block.col(c).array() - s.mean[c]).square().mean();
      s.sd[c] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    apply_stats(train, s);
    apply_stats(test, s);
  }
  return {std::move(train), std::move(test)};
}

void write_csv_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("csv: cannot write '" + path + "'");
  out.precision(17);
  for (std::size_t c = 0; c < d.feature_names.size(); ++c) out << (c ? "," : "") << d.feature_names[c];
  if (d.targets) out << (d.feature_names.empty() ? "" : ",") << d.target_name;
  out << "\n";
  for (Eigen::Index i = 0; i < d.features.rows(); ++i) {
    for (Eigen::Index c = 0; c < d.features.cols(); ++c) out << (c ? "," : "") << d.features(i, c);
    if (d.targets) out << (d.features.cols() ? "," : "") << (*d.targets)[i];
    out << "\n";
  }
}

}  // namespace fvi
