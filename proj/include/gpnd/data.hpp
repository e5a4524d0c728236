#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gpnd/kernel.hpp"

namespace gpnd {

struct PredictiveDistribution;  // exact_gp.hpp
struct NegativeSet;             // negcon.hpp

// Per-column z-score constants fitted on a training split. Stored stds are
// strictly positive (constant columns fall back to 1).
struct Standardization {
  Vector x_mean;
  Vector x_std;
  double y_mean = 0.0;
  double y_std = 1.0;
};

// Positive datapairs (X, y). Immutable by convention once built.
struct Dataset {
  Matrix X;  // n x d
  Vector y;  // n
  std::vector<std::string> feature_names;  // may be empty
  std::optional<Standardization> standardization;

  Index size() const { return y.size(); }
  Index dim() const { return X.cols(); }

  // Throws InvalidInputError on shape mismatch or non-finite entries.
  void validate() const;
};

struct CsvLoadReport {
  Dataset data;
  std::size_t dropped_rows = 0;  // malformed rows are dropped, not fatal
};

// Comma-separated numeric table, optional single header row, UTF-8.
// target_column is a header name or a 0-based column index.
CsvLoadReport load_csv(const std::filesystem::path& path,
                       const std::string& target_column, bool has_header);

// Inverse of load_csv for a dataset (feature columns then target column).
void save_csv(const Dataset& data, const std::filesystem::path& path,
              const std::string& target_name = "target");

struct SplitResult {
  Dataset train, valid, test;
};

// Seeded disjoint split; z-score constants fitted on train only and applied
// to all three parts. Fractions must leave every part non-empty.
SplitResult split_standardize(const Dataset& data, double train_frac,
                              double valid_frac, std::uint64_t seed);

// Apply / undo a standardization to a raw dataset (helpers for the CLI).
Dataset standardize_with(const Dataset& raw, const Standardization& st);
Standardization fit_standardization(const Dataset& raw);

// Negative pairs built by pairing m seeded input rows with labels drawn from
// the dataset's own label pool, rejecting draws equal to the row's true label.
// sigma_neg on the result is left at its default; callers attach their own.
NegativeSet shuffle_negatives(const Dataset& data, Index m, std::uint64_t seed);

struct Metrics {
  double nll = 0.0;   // mean negative log-density of truth under N(mean, var + noise)
  double rmse = 0.0;
};

// Computed in whatever units pred/truth are in.
Metrics metrics(const PredictiveDistribution& pred, const Vector& truth,
                double noise_var);

// Convert metrics from standardized to original target units.
Metrics metrics_in_original_units(const Metrics& m, double y_std);

}  // namespace gpnd
