#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "sampa/vecmath.hpp"

namespace sampa {

/// Synthetic supervised data: one feature row and one target per sample.
struct Dataset {
  DenseMatrix features;         ///< n x d
  std::vector<double> targets;  ///< n labels (0/1) or regression targets

  std::size_t size() const noexcept { return targets.size(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws ConfigError if rows and targets disagree or any entry is non-finite.
  void validate() const;
};

/// CSV with header "f0,...,f{d-1},label" and one row per sample. Numbers are
/// written with 17 significant digits so a dump/load cycle is exact.
void write_dataset_csv(std::ostream& out, const Dataset& data);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Throws ConfigError with the line number on malformed input.
Dataset read_dataset_csv(std::istream& in);
Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace sampa
