#include "gpnd/cli.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpnd/errors.hpp"
#include "gpnd/format.hpp"
#include "gpnd/model.hpp"
#include "gpnd/model_io.hpp"
#include "gpnd/negcon.hpp"
#include "gpnd/rng.hpp"
#include "gpnd/scene.hpp"
#include "gpnd/trainer.hpp"

namespace gpnd {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

void atomic_write(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw IngestionError("cannot write " + tmp.string());
    out << content;
    if (!out.good()) throw IngestionError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

// key,value report used for --report csv.
void write_kv_csv(const fs::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ostringstream os;
  os << "key,value\n";
  for (const auto& [k, v] : kv) os << k << "," << v << "\n";
  atomic_write(path, os.str());
}

std::string fmt(double x) { return format_double(x); }

struct CommonArgs {
  std::string out_dir;
  std::string report_format = "json";
  std::uint64_t seed = 0;
  std::string config_path;  // consumed during pre-parse; registered so the
                            // parser accepts the flag
};

fs::path ensure_out_dir(const std::string& out) {
  if (out.empty()) throw InvalidInputError("--out directory is required");
  fs::path p(out);
  fs::create_directories(p);
  return p;
}

json kernel_report(const KernelParams& kp) {
  return json{{"log_lengthscale", kp.log_lengthscale},
              {"log_signal_var", kp.log_signal_var},
              {"log_noise_var", kp.log_noise_var},
              {"mean_const", kp.mean_const},
              {"lengthscale", kp.lengthscale()},
              {"signal_var", kp.signal_var()},
              {"noise_var", kp.noise_var()}};
}

// ---------------------------------------------------------------------------
// negatives source string: "shuffled:m=200" or "file:<csv>"
struct NegativesSpec {
  enum class Kind { none, shuffled, file } kind = Kind::none;
  Index m = 0;
  std::string path;
};

NegativesSpec parse_negatives(const std::string& s) {
  NegativesSpec spec;
  if (s.empty()) return spec;
  if (s.rfind("shuffled:", 0) == 0) {
    const std::string rest = s.substr(9);
    if (rest.rfind("m=", 0) != 0) {
      throw InvalidInputError("--negatives shuffled requires m=<count>");
    }
    spec.kind = NegativesSpec::Kind::shuffled;
    spec.m = std::stoll(rest.substr(2));
    return spec;
  }
  if (s.rfind("file:", 0) == 0) {
    spec.kind = NegativesSpec::Kind::file;
    spec.path = s.substr(5);
    if (spec.path.empty()) throw InvalidInputError("--negatives file requires a path");
    return spec;
  }
  throw InvalidInputError("--negatives must be shuffled:m=<count> or file:<csv>");
}

// ---------------------------------------------------------------------------
// fit

struct FitArgs {
  CommonArgs common;
  std::string data_path;
  std::string target = "target";
  bool has_header = false;
  std::string backend = "exact";
  std::string mode;  // empty = infer from --negatives
  std::string negatives;
  double beta = 1.0;
  double sigma_neg = 1.0;
  double lr = 0.1;
  int epochs = 400;
  int batch_size = 0;       // 0 = full batch
  Index inducing = 1000;    // capped at n
  bool freeze_inducing = false;
  std::string alternation = "alternating";
  bool early_stop = false;
  double train_frac = 0.0;  // 0 = train on everything
  double valid_frac = 0.0;
  bool no_standardize = false;
};

std::unique_ptr<Model> build_backend(const std::string& backend, const KernelParams& kp,
                                     const Dataset& train, Index inducing,
                                     bool freeze_inducing, std::uint64_t seed) {
  if (backend == "exact") return std::make_unique<ExactGpModel>(kp, train);
  if (backend == "svgp") {
    const Index M = std::min(inducing, train.size());
    auto var = VariationalParams::init(train, M, seed);
    return std::make_unique<SvgpModel>(kp, std::move(var), train, !freeze_inducing);
  }
  throw InvalidInputError("unknown backend: " + backend);
}

json metrics_report(const Model& model, const Dataset& part) {
  const auto pred = model.predict(part.X, false, true);  // observation-space
  const Metrics m = metrics(pred, part.y, 0.0);
  json j{{"nll", m.nll}, {"rmse", m.rmse}};
  if (part.standardization) {
    const Metrics orig = metrics_in_original_units(m, part.standardization->y_std);
    j["nll_original_units"] = orig.nll;
    j["rmse_original_units"] = orig.rmse;
  }
  return j;
}

int cmd_fit(const FitArgs& a) {
  const fs::path out = ensure_out_dir(a.common.out_dir);

  const CsvLoadReport loaded = load_csv(a.data_path, a.target, a.has_header);

  Dataset train, valid, test;
  bool have_split = false;
  if (a.train_frac > 0.0) {
    const double vf = a.valid_frac > 0.0 ? a.valid_frac : (1.0 - a.train_frac) / 2.0;
    SplitResult sp = split_standardize(loaded.data, a.train_frac, vf, a.common.seed);
    train = std::move(sp.train);
    valid = std::move(sp.valid);
    test = std::move(sp.test);
    have_split = true;
  } else if (a.no_standardize) {
    train = loaded.data;
  } else {
    train = standardize_with(loaded.data, fit_standardization(loaded.data));
  }

  const NegativesSpec nspec = parse_negatives(a.negatives);
  Mode mode;
  if (a.mode == "classical") {
    mode = Mode::classical;
  } else if (a.mode == "gp_nd") {
    mode = Mode::gp_nd;
  } else if (a.mode.empty()) {
    mode = nspec.kind == NegativesSpec::Kind::none ? Mode::classical : Mode::gp_nd;
  } else {
    throw InvalidInputError("--mode must be classical or gp_nd");
  }

  NegativeSet neg;
  if (mode == Mode::gp_nd) {
    switch (nspec.kind) {
      case NegativesSpec::Kind::shuffled:
        neg = shuffle_negatives(train, std::min(nspec.m, train.size()), a.common.seed);
        break;
      case NegativesSpec::Kind::file: {
        const CsvLoadReport nl = load_csv(nspec.path, a.target, a.has_header);
        Dataset nd = nl.data;
        if (train.standardization) nd = standardize_with(nl.data, *train.standardization);
        neg.X = nd.X;
        neg.y = nd.y;
        break;
      }
      case NegativesSpec::Kind::none:
        throw InvalidInputError("gp_nd mode requires --negatives");
    }
    neg.sigma_neg = a.sigma_neg;
  }

  TrainConfig cfg;
  cfg.beta = mode == Mode::gp_nd ? a.beta : 0.0;
  cfg.sigma_neg = a.sigma_neg;
  cfg.learning_rate = a.lr;
  cfg.epochs = a.epochs;
  if (a.batch_size > 0) cfg.batch_size = a.batch_size;
  cfg.seed = a.common.seed;
  cfg.mode = mode;
  cfg.alternation = a.alternation == "joint" ? Alternation::joint : Alternation::alternating;
  cfg.early_stop = a.early_stop;
  cfg.validate();

  KernelParams init;
  auto model = build_backend(a.backend, init, train, a.inducing, a.freeze_inducing,
                             a.common.seed);

  const FitReport rep = fit(*model, mode == Mode::gp_nd ? &neg : nullptr, cfg);

  save_model(*model, out / "model.json");

  json report;
  report["command"] = "fit";
  report["backend"] = a.backend;
  report["mode"] = mode == Mode::gp_nd ? "gp_nd" : "classical";
  report["seed"] = a.common.seed;
  report["beta"] = cfg.beta;
  report["sigma_neg"] = cfg.sigma_neg;
  report["learning_rate"] = cfg.learning_rate;
  report["epochs_requested"] = cfg.epochs;
  report["epochs_run"] = static_cast<int>(rep.nll_trace.size());
  report["converged_epoch"] =
      rep.converged_epoch ? json(*rep.converged_epoch) : json(nullptr);
  report["n_train"] = train.size();
  report["n_valid"] = have_split ? valid.size() : 0;
  report["n_test"] = have_split ? test.size() : 0;
  report["n_negatives"] = neg.size();
  report["dropped_rows"] = loaded.dropped_rows;
  report["final_kernel"] = kernel_report(model->kernel());
  report["final_objective"] = rep.nll_trace.empty() ? json(nullptr) : json(rep.nll_trace.back());
  report["metrics_train"] = metrics_report(*model, train);
  if (have_split) {
    report["metrics_valid"] = metrics_report(*model, valid);
    report["metrics_test"] = metrics_report(*model, test);
  }
  report["nll_trace"] = to_json(rep.nll_trace);
  report["penalty_trace"] = to_json(rep.penalty_trace);

  if (a.common.report_format == "csv") {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "fit");
    kv.emplace_back("backend", a.backend);
    kv.emplace_back("mode", report["mode"].get<std::string>());
    kv.emplace_back("epochs_run", std::to_string(rep.nll_trace.size()));
    kv.emplace_back("final_objective", fmt(rep.nll_trace.back()));
    kv.emplace_back("train_nll", fmt(report["metrics_train"]["nll"].get<double>()));
    kv.emplace_back("train_rmse", fmt(report["metrics_train"]["rmse"].get<double>()));
    if (have_split) {
      kv.emplace_back("test_nll", fmt(report["metrics_test"]["nll"].get<double>()));
      kv.emplace_back("test_rmse", fmt(report["metrics_test"]["rmse"].get<double>()));
    }
    write_kv_csv(out / "report.csv", kv);
    std::ostringstream tr;
    tr << "epoch,nll,penalty\n";
    for (std::size_t i = 0; i < rep.nll_trace.size(); ++i) {
      tr << i << "," << format_double(rep.nll_trace[i]) << ","
         << format_double(rep.penalty_trace[i]) << "\n";
    }
    atomic_write(out / "traces.csv", tr.str());
  } else {
    write_json(out / "report.json", report);
  }

  // Wall-clock measurements are inherently run-dependent and live in their
  // own file so every other report stays byte-reproducible.
  json timing;
  timing["wall_clock_per_epoch"] = to_json(rep.wall_clock_per_epoch);
  timing["total_seconds"] = std::accumulate(rep.wall_clock_per_epoch.begin(),
                                            rep.wall_clock_per_epoch.end(), 0.0);
  write_json(out / "timing.json", timing);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictArgs {
  CommonArgs common;
  std::string model_path;
  std::string data_path;
  std::string target = "target";
  bool has_header = false;
  bool no_target = false;
  bool with_noise = false;
  bool standardized_units = false;
};

int cmd_predict(const PredictArgs& a) {
  const fs::path out = ensure_out_dir(a.common.out_dir);
  auto model = load_model(a.model_path);
  const auto& st = model->train_data().standardization;

  Matrix Xraw;
  Vector truth;
  bool have_truth = false;
  if (a.no_target) {
    // All columns are features; reuse the CSV reader with a virtual target.
    const CsvLoadReport lr = load_csv(a.data_path, "0", a.has_header);
    Xraw.resize(lr.data.size(), lr.data.dim() + 1);
    Xraw.col(0) = lr.data.y;
    Xraw.rightCols(lr.data.dim()) = lr.data.X;
  } else {
    const CsvLoadReport lr = load_csv(a.data_path, a.target, a.has_header);
    Xraw = lr.data.X;
    truth = lr.data.y;
    have_truth = true;
  }

  Matrix Xq = Xraw;
  if (st) {
    for (Index j = 0; j < Xq.cols(); ++j) {
      Xq.col(j) = (Xraw.col(j).array() - st->x_mean(j)) / st->x_std(j);
    }
  }

  PredictiveDistribution pred = model->predict(Xq, false, a.with_noise);

  // Report in original units unless asked otherwise.
  Vector mean_out = pred.means;
  Vector var_out = pred.variances;
  if (st && !a.standardized_units) {
    mean_out = (pred.means.array() * st->y_std + st->y_mean).matrix();
    var_out = pred.variances * (st->y_std * st->y_std);
  }

  std::ostringstream os;
  for (Index j = 0; j < Xraw.cols(); ++j) os << "x" << j << ",";
  os << "mean,variance\n";
  for (Index i = 0; i < Xraw.rows(); ++i) {
    for (Index j = 0; j < Xraw.cols(); ++j) os << format_double(Xraw(i, j)) << ",";
    os << format_double(mean_out(i)) << "," << format_double(var_out(i)) << "\n";
  }
  atomic_write(out / "predictions.csv", os.str());

  json report;
  report["command"] = "predict";
  report["n_points"] = Xraw.rows();
  report["with_noise"] = a.with_noise;
  report["units"] = (st && !a.standardized_units) ? "original" : "as-trained";
  if (have_truth) {
    Vector truth_cmp = truth;
    PredictiveDistribution pred_cmp = pred;
    if (st && !a.standardized_units) {
      pred_cmp.means = mean_out;
      pred_cmp.variances = var_out;
    }
    const Metrics m = metrics(pred_cmp, truth_cmp, 0.0);
    report["nll"] = m.nll;
    report["rmse"] = m.rmse;
  }
  if (a.common.report_format == "csv") {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "predict");
    kv.emplace_back("n_points", std::to_string(Xraw.rows()));
    if (have_truth) {
      kv.emplace_back("nll", fmt(report["nll"].get<double>()));
      kv.emplace_back("rmse", fmt(report["rmse"].get<double>()));
    }
    write_kv_csv(out / "report.csv", kv);
  } else {
    write_json(out / "report.json", report);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// scene / sweep

struct SceneArgs {
  CommonArgs common;
  int path_shape = 0;
  Index markers = 250;
  Index obstacles = 10;
  double noise_std = -1.0;
  std::string backend = "exact";
  Index inducing = 50;
  double beta = 3.0;
  double sigma_neg = 0.1;
  double lr = 0.1;
  int epochs = 100;
  std::string betas = "3,0.1";   // sweep only
  std::string sigmas = "3,0.1";  // sweep only
  int jobs = 1;
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw InvalidInputError("empty numeric list: " + s);
  return out;
}

Scene build_scene(const SceneArgs& a) {
  SceneConfig sc;
  sc.path_shape = a.path_shape;
  sc.n_markers = a.markers;
  sc.m_obstacles = a.obstacles;
  sc.noise_std = a.noise_std;
  sc.seed = a.common.seed;
  return make_scene(sc);
}

SceneRunOptions scene_options(const SceneArgs& a) {
  SceneRunOptions opts;
  opts.config.beta = a.beta;
  opts.config.sigma_neg = a.sigma_neg;
  opts.config.learning_rate = a.lr;
  opts.config.epochs = a.epochs;
  opts.config.seed = a.common.seed;
  opts.config.mode = Mode::gp_nd;
  opts.backend = a.backend;
  opts.inducing = a.inducing;
  return opts;
}

json avoidance_to_json(const AvoidanceReport& r) {
  return json{{"min_clearance", r.min_clearance},
              {"mean_clearance", r.mean_clearance},
              {"collisions", r.collisions}};
}

int cmd_scene(const SceneArgs& a) {
  const fs::path out = ensure_out_dir(a.common.out_dir);
  const Scene scene = build_scene(a);
  const SceneRunOptions opts = scene_options(a);
  const SceneRunResult res = run_scene_experiment(scene, opts);

  save_csv(scene.markers, out / "markers.csv", "y");
  {
    Dataset obs;
    obs.X = scene.obstacles.X;
    obs.y = scene.obstacles.y;
    save_csv(obs, out / "obstacles.csv", "y");
  }

  // Dense curve for plotting: truth plus both fitted posteriors.
  {
    const Index grid_n = 400;
    const double x_lo = scene.markers.X.col(0).minCoeff();
    const double x_hi = scene.markers.X.col(0).maxCoeff();
    Matrix grid(grid_n, 1);
    for (Index i = 0; i < grid_n; ++i) {
      grid(i, 0) = x_lo + (x_hi - x_lo) * static_cast<double>(i) /
                             static_cast<double>(grid_n - 1);
    }
    const auto pc = res.classical_model->predict(grid, false, false);
    const auto pn = res.gpnd_model->predict(grid, false, false);
    std::ostringstream os;
    os << "x,ground_truth,classical_mean,classical_var,gpnd_mean,gpnd_var\n";
    for (Index i = 0; i < grid_n; ++i) {
      os << format_double(grid(i, 0)) << ","
         << format_double(scene.ground_truth(grid(i, 0))) << ","
         << format_double(pc.means(i)) << "," << format_double(pc.variances(i))
         << "," << format_double(pn.means(i)) << ","
         << format_double(pn.variances(i)) << "\n";
    }
    atomic_write(out / "curve.csv", os.str());
  }

  json report;
  report["command"] = "scene";
  report["seed"] = a.common.seed;
  report["backend"] = a.backend;
  report["beta"] = a.beta;
  report["sigma_neg"] = a.sigma_neg;
  report["epochs"] = a.epochs;
  report["n_markers"] = scene.markers.size();
  report["m_obstacles"] = scene.obstacles.size();
  report["classical"] = json{{"avoidance", avoidance_to_json(res.classical_avoidance)},
                             {"holdout_rmse", res.classical_holdout.rmse},
                             {"holdout_nll", res.classical_holdout.nll},
                             {"kernel", kernel_report(res.classical_kernel)}};
  report["gp_nd"] = json{{"avoidance", avoidance_to_json(res.gpnd_avoidance)},
                         {"holdout_rmse", res.gpnd_holdout.rmse},
                         {"holdout_nll", res.gpnd_holdout.nll},
                         {"kernel", kernel_report(res.gpnd_kernel)}};

  if (a.common.report_format == "csv") {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("command", "scene");
    kv.emplace_back("classical_min_clearance", fmt(res.classical_avoidance.min_clearance));
    kv.emplace_back("gpnd_min_clearance", fmt(res.gpnd_avoidance.min_clearance));
    kv.emplace_back("classical_holdout_rmse", fmt(res.classical_holdout.rmse));
    kv.emplace_back("gpnd_holdout_rmse", fmt(res.gpnd_holdout.rmse));
    kv.emplace_back("classical_collisions", std::to_string(res.classical_avoidance.collisions));
    kv.emplace_back("gpnd_collisions", std::to_string(res.gpnd_avoidance.collisions));
    write_kv_csv(out / "report.csv", kv);
  } else {
    write_json(out / "report.json", report);
  }
  return kExitOk;
}

int cmd_sweep(const SceneArgs& a) {
  const fs::path out = ensure_out_dir(a.common.out_dir);
  const Scene scene = build_scene(a);
  const SceneRunOptions opts = scene_options(a);
  const auto betas = parse_list(a.betas);
  const auto sigmas = parse_list(a.sigmas);
  const auto cells = sweep(scene, betas, sigmas, opts, a.jobs);

  std::ostringstream os;
  write_sweep_csv(cells, os);
  atomic_write(out / "sweep.csv", os.str());

  json report;
  report["command"] = "sweep";
  report["cells"] = cells.size();
  int failed = 0;
  for (const auto& c : cells) failed += c.failed ? 1 : 0;
  report["failed_cells"] = failed;
  if (a.common.report_format == "csv") {
    write_kv_csv(out / "report.csv", {{"command", "sweep"},
                                      {"cells", std::to_string(cells.size())},
                                      {"failed_cells", std::to_string(failed)}});
  } else {
    write_json(out / "report.json", report);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
  CommonArgs common;
  Index rows = 1599;
  Index dim = 4;
  std::string m_list = "10,50,200,800";
  int epochs = 50;
  int repeats = 10;
  std::string backend = "exact";
  Index inducing = 100;
  double lr = 0.1;
};

int cmd_bench(const BenchArgs& a) {
  const fs::path out = ensure_out_dir(a.common.out_dir);

  BenchConfig bc;
  bc.rows = a.rows;
  bc.dim = a.dim;
  bc.m_list.clear();
  for (double v : parse_list(a.m_list)) bc.m_list.push_back(static_cast<Index>(v));
  bc.epochs = a.epochs;
  bc.repeats = a.repeats;
  bc.backend = a.backend;
  bc.inducing = a.inducing;
  bc.learning_rate = a.lr;
  bc.seed = a.common.seed;

  const auto rows = run_bench(bc);

  std::ostringstream os;
  os << "m,repeat,classical_s_per_epoch,gpnd_s_per_epoch,delta_t\n";
  for (const auto& r : rows) {
    os << r.m << "," << r.repeat << "," << format_double(r.classical_s_per_epoch)
       << "," << format_double(r.gpnd_s_per_epoch) << ","
       << format_double(r.delta_t) << "\n";
  }
  atomic_write(out / "bench.csv", os.str());

  // Mean delta per m.
  json summary;
  summary["command"] = "bench";
  summary["backend"] = a.backend;
  summary["rows"] = a.rows;
  json per_m = json::array();
  for (Index m : bc.m_list) {
    double sum = 0.0;
    int count = 0;
    for (const auto& r : rows) {
      if (r.m == m) {
        sum += r.delta_t;
        ++count;
      }
    }
    per_m.push_back(json{{"m", m}, {"mean_delta_t", count > 0 ? sum / count : 0.0}});
  }
  summary["delta_t_per_m"] = per_m;
  write_json(out / "bench_summary.json", summary);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// config-file merge: JSON keys are long option names; explicit flags win.

std::vector<std::string> merge_config_args(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config_path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config_path = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    }
  }
  if (config_path.empty()) return args;

  std::ifstream in(config_path);
  if (!in) throw IngestionError("cannot open config file: " + config_path);
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw IngestionError(std::string("invalid JSON config: ") + e.what());
  }
  if (!j.is_object()) throw IngestionError("config file must hold a JSON object");

  auto flag_present = [&](const std::string& name) {
    const std::string full = "--" + name;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == full || args[i].rfind(full + "=", 0) == 0) return true;
    }
    return false;
  };

  // Inject right after the subcommand token so they parse in its scope.
  std::vector<std::string> injected;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key == "config" || flag_present(key)) continue;
    if (it->is_boolean()) {
      if (it->get<bool>()) injected.push_back("--" + key);
    } else if (it->is_string()) {
      injected.push_back("--" + key + "=" + it->get<std::string>());
    } else {
      injected.push_back("--" + key + "=" + it->dump());
    }
  }
  std::vector<std::string> merged;
  merged.reserve(args.size() + injected.size());
  merged.push_back(args[0]);
  std::size_t pos = 1;
  if (args.size() > 1 && !args[1].empty() && args[1][0] != '-') {
    merged.push_back(args[1]);  // subcommand
    pos = 2;
  }
  for (auto& s : injected) merged.push_back(std::move(s));
  for (; pos < args.size(); ++pos) merged.push_back(args[pos]);
  return merged;
}

void add_common(CLI::App* sub, CommonArgs& c) {
  sub->add_option("--out", c.out_dir, "output directory")->required();
  sub->add_option("--report", c.report_format, "report format: json or csv")
      ->check(CLI::IsMember({"json", "csv"}));
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_option("--config", c.config_path, "JSON config file (flags win)");
}

json error_record(const std::string& cls, const std::string& message, int code) {
  return json{{"error", json{{"class", cls}, {"message", message}, {"code", code}}}};
}

int emit_error(const std::string& cls, const std::string& message, int code,
               const std::string& out_dir) {
  const json rec = error_record(cls, message, code);
  std::cerr << rec.dump() << std::endl;
  if (!out_dir.empty()) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!ec) {
      std::ofstream f(fs::path(out_dir) / "error.json");
      if (f) f << rec.dump(2) << "\n";
    }
  }
  return code;
}

}  // namespace

Dataset make_synthetic_discrete_table(Index rows, Index dim, std::uint64_t seed) {
  if (rows < 2 || dim < 1) {
    throw InvalidInputError("make_synthetic_discrete_table: rows >= 2, dim >= 1");
  }
  Rng rng(seed);
  Dataset d;
  d.X.resize(rows, dim);
  d.y.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < dim; ++j) d.X(i, j) = rng.uniform();
    const double base = 5.0 + 3.0 * std::sin(6.283185307179586 * d.X(i, 0)) +
                        1.5 * d.X(i, std::min<Index>(1, dim - 1)) + 0.5 * rng.normal();
    d.y(i) = std::clamp(std::round(base), 0.0, 10.0);
  }
  return d;
}

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  if (config.epochs < 1 || config.repeats < 1) {
    throw InvalidInputError("run_bench: epochs and repeats must be >= 1");
  }
  const Dataset raw = make_synthetic_discrete_table(config.rows, config.dim, config.seed);
  const Dataset data = standardize_with(raw, fit_standardization(raw));

  auto make_model = [&](std::uint64_t seed) -> std::unique_ptr<Model> {
    KernelParams kp;
    if (config.backend == "svgp") {
      const Index M = std::min(config.inducing, data.size());
      return std::make_unique<SvgpModel>(kp, VariationalParams::init(data, M, seed), data);
    }
    return std::make_unique<ExactGpModel>(kp, data);
  };

  auto mean_epoch_seconds = [](const FitReport& rep) {
    // Skip the first epoch: it pays one-off allocation costs.
    const auto& w = rep.wall_clock_per_epoch;
    if (w.size() <= 1) return w.empty() ? 0.0 : w[0];
    return std::accumulate(w.begin() + 1, w.end(), 0.0) /
           static_cast<double>(w.size() - 1);
  };

  std::vector<BenchRow> rows;
  for (int r = 0; r < config.repeats; ++r) {
    const std::uint64_t rep_seed = config.seed + static_cast<std::uint64_t>(r);

    TrainConfig classical_cfg;
    classical_cfg.mode = Mode::classical;
    classical_cfg.learning_rate = config.learning_rate;
    classical_cfg.epochs = config.epochs;
    classical_cfg.seed = rep_seed;

    auto classical_model = make_model(rep_seed);
    const FitReport classical_rep = fit(*classical_model, nullptr, classical_cfg);
    const double classical_spe = mean_epoch_seconds(classical_rep);

    for (Index m : config.m_list) {
      NegativeSet neg = shuffle_negatives(data, std::min(m, data.size()), rep_seed);
      neg.sigma_neg = config.sigma_neg;

      TrainConfig nd_cfg = classical_cfg;
      nd_cfg.mode = Mode::gp_nd;
      nd_cfg.beta = config.beta;
      nd_cfg.sigma_neg = config.sigma_neg;

      auto nd_model = make_model(rep_seed);
      const FitReport nd_rep = fit(*nd_model, &neg, nd_cfg);
      const double nd_spe = mean_epoch_seconds(nd_rep);

      rows.push_back(BenchRow{m, r, classical_spe, nd_spe, nd_spe - classical_spe});
    }
  }
  return rows;
}

namespace cli {

int run(int argc, const char* const* argv) {
  FitArgs fit_args;
  PredictArgs predict_args;
  SceneArgs scene_args;
  SceneArgs sweep_args;
  BenchArgs bench_args;
  std::string active_out;

  try {
    const std::vector<std::string> merged = merge_config_args(argc, argv);
    std::vector<const char*> cargv;
    cargv.reserve(merged.size());
    for (const auto& s : merged) cargv.push_back(s.c_str());

    CLI::App app{"Gaussian-process regression with negative datapairs"};
    app.require_subcommand(1);

    // fit
    auto* sfit = app.add_subcommand("fit", "train a model on a CSV dataset");
    add_common(sfit, fit_args.common);
    sfit->add_option("--data", fit_args.data_path, "input CSV")->required();
    sfit->add_option("--target", fit_args.target, "target column name or index");
    sfit->add_flag("--header", fit_args.has_header, "CSV has a header row");
    sfit->add_option("--backend", fit_args.backend)->check(CLI::IsMember({"exact", "svgp"}));
    sfit->add_option("--mode", fit_args.mode)->check(CLI::IsMember({"classical", "gp_nd"}));
    sfit->add_option("--negatives", fit_args.negatives,
                     "shuffled:m=<count> or file:<csv>");
    sfit->add_option("--beta", fit_args.beta);
    sfit->add_option("--sigma-neg", fit_args.sigma_neg);
    sfit->add_option("--lr", fit_args.lr);
    sfit->add_option("--epochs", fit_args.epochs);
    sfit->add_option("--batch-size", fit_args.batch_size);
    sfit->add_option("--inducing", fit_args.inducing);
    sfit->add_flag("--freeze-inducing", fit_args.freeze_inducing);
    sfit->add_option("--alternation", fit_args.alternation)
        ->check(CLI::IsMember({"alternating", "joint"}));
    sfit->add_flag("--early-stop", fit_args.early_stop);
    sfit->add_option("--train-frac", fit_args.train_frac);
    sfit->add_option("--valid-frac", fit_args.valid_frac);
    sfit->add_flag("--no-standardize", fit_args.no_standardize);

    // predict
    auto* spredict = app.add_subcommand("predict", "predict with a saved model");
    add_common(spredict, predict_args.common);
    spredict->add_option("--model", predict_args.model_path, "model file")->required();
    spredict->add_option("--data", predict_args.data_path, "query CSV")->required();
    spredict->add_option("--target", predict_args.target);
    spredict->add_flag("--header", predict_args.has_header);
    spredict->add_flag("--no-target", predict_args.no_target,
                       "query CSV has feature columns only");
    spredict->add_flag("--with-noise", predict_args.with_noise,
                       "add observation noise to variances");
    spredict->add_flag("--standardized-units", predict_args.standardized_units);

    auto add_scene_opts = [&](CLI::App* sub, SceneArgs& sa) {
      add_common(sub, sa.common);
      sub->add_option("--path-shape", sa.path_shape);
      sub->add_option("--markers", sa.markers);
      sub->add_option("--obstacles", sa.obstacles);
      sub->add_option("--noise-std", sa.noise_std);
      sub->add_option("--backend", sa.backend)->check(CLI::IsMember({"exact", "svgp"}));
      sub->add_option("--inducing", sa.inducing);
      sub->add_option("--beta", sa.beta);
      sub->add_option("--sigma-neg", sa.sigma_neg);
      sub->add_option("--lr", sa.lr);
      sub->add_option("--epochs", sa.epochs);
    };

    auto* sscene = app.add_subcommand("scene", "2D obstacle-avoidance experiment");
    add_scene_opts(sscene, scene_args);

    auto* ssweep = app.add_subcommand("sweep", "(beta, sigma_neg) grid on the scene");
    add_scene_opts(ssweep, sweep_args);
    ssweep->add_option("--betas", sweep_args.betas, "comma-separated beta grid");
    ssweep->add_option("--sigmas", sweep_args.sigmas, "comma-separated sigma_neg grid");
    ssweep->add_option("--jobs", sweep_args.jobs, "parallel cells");

    auto* sbench = app.add_subcommand("bench", "paired classical/GP-ND timing");
    add_common(sbench, bench_args.common);
    sbench->add_option("--rows", bench_args.rows);
    sbench->add_option("--dim", bench_args.dim);
    sbench->add_option("--m-list", bench_args.m_list, "comma-separated negative counts");
    sbench->add_option("--epochs", bench_args.epochs);
    sbench->add_option("--repeats", bench_args.repeats);
    sbench->add_option("--backend", bench_args.backend)
        ->check(CLI::IsMember({"exact", "svgp"}));
    sbench->add_option("--inducing", bench_args.inducing);
    sbench->add_option("--lr", bench_args.lr);

    try {
      app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      app.exit(e);
      return emit_error("config", e.what(), kExitConfig, "");
    }

    if (sfit->parsed()) {
      active_out = fit_args.common.out_dir;
      return cmd_fit(fit_args);
    }
    if (spredict->parsed()) {
      active_out = predict_args.common.out_dir;
      return cmd_predict(predict_args);
    }
    if (sscene->parsed()) {
      active_out = scene_args.common.out_dir;
      return cmd_scene(scene_args);
    }
    if (ssweep->parsed()) {
      active_out = sweep_args.common.out_dir;
      return cmd_sweep(sweep_args);
    }
    if (sbench->parsed()) {
      active_out = bench_args.common.out_dir;
      return cmd_bench(bench_args);
    }
    return emit_error("config", "no subcommand given", kExitConfig, "");
  } catch (const InvalidInputError& e) {
    return emit_error("config", e.what(), kExitConfig, active_out);
  } catch (const IngestionError& e) {
    return emit_error("ingestion", e.what(), kExitIngestion, active_out);
  } catch (const GenerationError& e) {
    return emit_error("ingestion", e.what(), kExitIngestion, active_out);
  } catch (const TrainingError& e) {
    return emit_error("training", e.what(), kExitTraining, active_out);
  } catch (const NumericalError& e) {
    return emit_error("numerical", e.what(), kExitNumerical, active_out);
  } catch (const std::exception& e) {
    return emit_error("unknown", e.what(), kExitUnknown, active_out);
  }
}

}  // namespace cli
}  // namespace gpnd
