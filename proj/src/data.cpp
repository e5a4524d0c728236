#include "gpnd/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gpnd/errors.hpp"
#include "gpnd/format.hpp"
#include "gpnd/exact_gp.hpp"
#include "gpnd/negcon.hpp"
#include "gpnd/rng.hpp"

namespace gpnd {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

bool parse_double(const std::string& field, double* out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end && std::isfinite(*out);
}

}  // namespace

void Dataset::validate() const {
  if (X.rows() != y.size()) {
    throw InvalidInputError("Dataset: row count of X must match length of y");
  }
  if (!X.allFinite() || !y.allFinite()) {
    throw InvalidInputError("Dataset: entries must be finite");
  }
  if (standardization) {
    if ((standardization->x_std.array() <= 0.0).any() || !(standardization->y_std > 0.0)) {
      throw InvalidInputError("Dataset: stored stds must be positive");
    }
  }
}

CsvLoadReport load_csv(const std::filesystem::path& path,
                       const std::string& target_column, bool has_header) {
  std::ifstream in(path);
  if (!in) {
    throw IngestionError("load_csv: cannot open file: " + path.string());
  }

  std::string line;
  std::vector<std::string> header;
  if (has_header) {
    if (!std::getline(in, line)) {
      throw IngestionError("load_csv: file is empty: " + path.string());
    }
    for (auto& f : split_fields(line)) header.push_back(trim(f));
  }

  // Resolve the target column: header name first, then a 0-based index.
  Index target_idx = -1;
  if (has_header) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == target_column) {
        target_idx = static_cast<Index>(i);
        break;
      }
    }
  }
  if (target_idx < 0) {
    int idx = -1;
    const std::string t = trim(target_column);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), idx);
    if (ec == std::errc() && ptr == t.data() + t.size() && idx >= 0) {
      target_idx = idx;
    }
  }
  if (target_idx < 0) {
    throw IngestionError("load_csv: target column not found: " + target_column);
  }

  std::vector<std::vector<double>> rows;
  std::size_t dropped = 0;
  Index ncols = has_header ? static_cast<Index>(header.size()) : -1;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (ncols < 0) ncols = static_cast<Index>(fields.size());
    if (static_cast<Index>(fields.size()) != ncols) {
      ++dropped;
      continue;
    }
    std::vector<double> vals(fields.size());
    bool ok = true;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (!parse_double(fields[i], &vals[i])) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++dropped;
      continue;
    }
    rows.push_back(std::move(vals));
  }

  if (ncols >= 0 && target_idx >= ncols) {
    throw IngestionError("load_csv: target column index out of range: " + target_column);
  }
  if (rows.empty()) {
    throw IngestionError("load_csv: no usable rows in " + path.string());
  }

  const Index n = static_cast<Index>(rows.size());
  const Index d = ncols - 1;
  CsvLoadReport rep;
  rep.dropped_rows = dropped;
  rep.data.X.resize(n, d);
  rep.data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    Index k = 0;
    for (Index j = 0; j < ncols; ++j) {
      if (j == target_idx) {
        rep.data.y(i) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      } else {
        rep.data.X(i, k++) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
    }
  }
  if (has_header) {
    for (Index j = 0; j < ncols; ++j) {
      if (j != target_idx) rep.data.feature_names.push_back(header[static_cast<std::size_t>(j)]);
    }
  }
  rep.data.validate();
  return rep;
}

void save_csv(const Dataset& data, const std::filesystem::path& path,
              const std::string& target_name) {
  std::ofstream out(path);
  if (!out) {
    throw IngestionError("save_csv: cannot open file for writing: " + path.string());
  }
  for (Index j = 0; j < data.dim(); ++j) {
    if (j < static_cast<Index>(data.feature_names.size())) {
      out << data.feature_names[static_cast<std::size_t>(j)];
    } else {
      out << "x" << j;
    }
    out << ",";
  }
  out << target_name << "\n";
  for (Index i = 0; i < data.size(); ++i) {
    for (Index j = 0; j < data.dim(); ++j) out << format_double(data.X(i, j)) << ",";
    out << format_double(data.y(i)) << "\n";
  }
}

Standardization fit_standardization(const Dataset& raw) {
  const Index n = raw.size();
  const Index d = raw.dim();
  if (n == 0) throw InvalidInputError("fit_standardization: empty dataset");
  Standardization st;
  st.x_mean = raw.X.colwise().mean();
  st.x_std.resize(d);
  for (Index j = 0; j < d; ++j) {
    const double var =
        (raw.X.col(j).array() - st.x_mean(j)).square().sum() / static_cast<double>(n);
    st.x_std(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  st.y_mean = raw.y.mean();
  const double yvar =
      (raw.y.array() - st.y_mean).square().sum() / static_cast<double>(n);
  st.y_std = yvar > 0.0 ? std::sqrt(yvar) : 1.0;
  return st;
}

Dataset standardize_with(const Dataset& raw, const Standardization& st) {
  Dataset out = raw;
  for (Index j = 0; j < out.dim(); ++j) {
    out.X.col(j) = (raw.X.col(j).array() - st.x_mean(j)) / st.x_std(j);
  }
  out.y = (raw.y.array() - st.y_mean) / st.y_std;
  out.standardization = st;
  return out;
}

SplitResult split_standardize(const Dataset& data, double train_frac,
                              double valid_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0) || !(valid_frac > 0.0) || !(train_frac + valid_frac < 1.0)) {
    throw InvalidInputError(
        "split_standardize: fractions must be positive and sum below 1");
  }
  const Index n = data.size();
  const Index n_train = static_cast<Index>(std::floor(train_frac * static_cast<double>(n)));
  const Index n_valid = static_cast<Index>(std::floor(valid_frac * static_cast<double>(n)));
  const Index n_test = n - n_train - n_valid;
  if (n_train < 1 || n_valid < 1 || n_test < 1) {
    throw InvalidInputError("split_standardize: a split would be empty");
  }

  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(idx);

  auto take = [&](Index from, Index count) {
    Dataset part;
    part.X.resize(count, data.dim());
    part.y.resize(count);
    for (Index i = 0; i < count; ++i) {
      part.X.row(i) = data.X.row(idx[static_cast<std::size_t>(from + i)]);
      part.y(i) = data.y(idx[static_cast<std::size_t>(from + i)]);
    }
    part.feature_names = data.feature_names;
    return part;
  };

  SplitResult out;
  out.train = take(0, n_train);
  out.valid = take(n_train, n_valid);
  out.test = take(n_train + n_valid, n_test);

  const Standardization st = fit_standardization(out.train);
  out.train = standardize_with(out.train, st);
  out.valid = standardize_with(out.valid, st);
  out.test = standardize_with(out.test, st);
  return out;
}

NegativeSet shuffle_negatives(const Dataset& data, Index m, std::uint64_t seed) {
  const Index n = data.size();
  if (m < 0 || m > n) {
    throw InvalidInputError("shuffle_negatives: m must be in [0, n]");
  }
  NegativeSet neg;
  neg.X.resize(m, data.dim());
  neg.y.resize(m);
  if (m == 0) return neg;

  bool has_distinct = false;
  for (Index i = 1; i < n && !has_distinct; ++i) {
    has_distinct = data.y(i) != data.y(0);
  }
  if (!has_distinct) {
    throw InvalidInputError(
        "shuffle_negatives: all targets identical, no valid negative exists");
  }

  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(idx);

  for (Index k = 0; k < m; ++k) {
    const Index row = idx[static_cast<std::size_t>(k)];
    neg.X.row(k) = data.X.row(row);
    const double truth = data.y(row);
    bool assigned = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double candidate = data.y(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
      if (candidate != truth) {
        neg.y(k) = candidate;
        assigned = true;
        break;
      }
    }
    if (!assigned) {
      throw GenerationError("shuffle_negatives: resampling cap exceeded for a pair");
    }
  }
  return neg;
}

Metrics metrics(const PredictiveDistribution& pred, const Vector& truth,
                double noise_var) {
  const Index n = truth.size();
  if (pred.means.size() != n || pred.variances.size() != n) {
    throw InvalidInputError("metrics: length mismatch");
  }
  if (n == 0) throw InvalidInputError("metrics: empty inputs");

  double nll = 0.0, sse = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double v = pred.variances(i) + noise_var;
    const double e = truth(i) - pred.means(i);
    nll += 0.5 * (kLog2Pi + std::log(v)) + e * e / (2.0 * v);
    sse += e * e;
  }
  Metrics out;
  out.nll = nll / static_cast<double>(n);
  out.rmse = std::sqrt(sse / static_cast<double>(n));
  return out;
}

Metrics metrics_in_original_units(const Metrics& m, double y_std) {
  if (!(y_std > 0.0)) throw InvalidInputError("metrics_in_original_units: y_std <= 0");
  // Under y_orig = y_std * y + y_mean, densities pick up a 1/y_std Jacobian.
  return Metrics{m.nll + std::log(y_std), m.rmse * y_std};
}

}  // namespace gpnd
