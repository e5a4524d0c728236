#pragma once

#include <string>
#include <vector>

#include "gpnd/data.hpp"

namespace gpnd {

// Exit codes per error class.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUnknown = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIngestion = 3;
inline constexpr int kExitNumerical = 4;
inline constexpr int kExitTraining = 5;

namespace cli {

// Full command-line entry point (fit / predict / scene / sweep / bench).
int run(int argc, const char* const* argv);

}  // namespace cli

// Synthetic discrete-target table for the timing harness: uniform features,
// integer labels in [0, 10].
Dataset make_synthetic_discrete_table(Index rows, Index dim, std::uint64_t seed);

// Paired classical vs GP-ND per-epoch timing (Table-style protocol: fixed
// epoch budget, repeated runs, averaged excess time per epoch).
struct BenchConfig {
  Index rows = 1599;
  Index dim = 4;
  std::vector<Index> m_list{10, 50, 200, 800};
  int epochs = 50;
  int repeats = 10;
  std::string backend = "exact";
  Index inducing = 100;
  double learning_rate = 0.1;
  double beta = 1.0;
  double sigma_neg = 1.0;
  std::uint64_t seed = 0;
};

struct BenchRow {
  Index m = 0;
  int repeat = 0;
  double classical_s_per_epoch = 0.0;
  double gpnd_s_per_epoch = 0.0;
  double delta_t = 0.0;  // gpnd - classical, seconds per epoch
};

std::vector<BenchRow> run_bench(const BenchConfig& config);

}  // namespace gpnd
