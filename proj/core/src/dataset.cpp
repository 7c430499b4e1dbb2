#include "sampa/dataset.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "sampa/errors.hpp"
#include "sampa/format.hpp"

namespace sampa {

void Dataset::validate() const {
  if (features.rows() != targets.size()) {
    throw ConfigError("dataset: " + std::to_string(features.rows()) + " feature rows but " +
                      std::to_string(targets.size()) + " targets");
  }
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (double v : features.row(r)) {
      if (!std::isfinite(v)) throw ConfigError("dataset: non-finite feature in row " + std::to_string(r));
    }
    if (!std::isfinite(targets[r])) throw ConfigError("dataset: non-finite target in row " + std::to_string(r));
  }
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const std::size_t d = data.dim();
  for (std::size_t c = 0; c < d; ++c) out << 'f' << c << ',';
  out << "label\n";
  for (std::size_t r = 0; r < data.size(); ++r) {
    for (double v : data.features.row(r)) out << format_double(v) << ',';
    out << format_double(data.targets[r]) << '\n';
  }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  write_dataset_csv(out, data);
}

Dataset read_dataset_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset csv: empty input");
  std::size_t columns = 1;
  for (char ch : line) columns += (ch == ',');
  if (columns < 2) throw ConfigError("dataset csv line 1: need at least one feature column and a label");
  const std::size_t d = columns - 1;

  std::vector<double> flat;
  std::vector<double> targets;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (!parse_double(cell, v)) {
        throw ConfigError("dataset csv line " + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
      if (col < d) {
        flat.push_back(v);
      } else {
        targets.push_back(v);
      }
      ++col;
    }
    if (col != columns) {
      throw ConfigError("dataset csv line " + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                        " columns, got " + std::to_string(col));
    }
  }
  Dataset data;
  data.features = DenseMatrix(targets.size(), d);
  for (std::size_t r = 0; r < targets.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c) data.features(r, c) = flat[r * d + c];
  }
  data.targets = std::move(targets);
  data.validate();
  return data;
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  return read_dataset_csv(in);
}

}  // namespace sampa
