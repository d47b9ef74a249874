// Command-line front end: data preparation, full-model scores, single
// training runs, grid sweeps and frontier selection.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dynamod/baselines.hpp"
#include "dynamod/data.hpp"
#include "dynamod/dynamod.hpp"
#include "dynamod/serialize.hpp"
#include "dynamod/sweep.hpp"

namespace fs = std::filesystem;
using namespace dynamod;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

/// Raised when a single training run stops without meeting its tolerance.
struct NotConverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
}

F0Scores scores_of(const Ensemble& f0, const Dataset& ds) {
  return F0Scores::from_margins(f0.scores(ds.X), ds.y, F0Scores::Source::Trained);
}

double f0_accuracy(const F0Scores& f0) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < f0.size(); ++i) ok += f0.correct(i) ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(f0.size());
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void print_point(const TradeoffPoint& t) {
  Json j{{"accuracy", t.accuracy}, {"avg_cost", t.avg_cost}, {"frac_to_f0", t.frac_to_f0}};
  std::cout << j.dump() << '\n';
}

// Training knobs shared by `train` and `sweep`.
struct TrainFlags {
  int max_outer = 50;
  double tolerance = 1e-5;
  double init_l2 = 1.0;
  std::string lin_init = "logistic";
  int init_trees = 10;
  int rounds = 5;
  int depth = 4;
  double ridge = 1e-3;
  double f1_l2 = 1e-3;
  int admm_iters = 500;

  void add(CLI::App* app) {
    app->add_option("--max-outer", max_outer, "Outer iterations")->capture_default_str();
    app->add_option("--tolerance", tolerance, "Relative objective change to stop at")->capture_default_str();
    app->add_option("--init-l2", init_l2, "L2 penalty of the initial logistic f1")->capture_default_str();
    app->add_option("--lin-init", lin_init, "Start of the linear loop (lin)")
        ->check(CLI::IsMember({"logistic", "ones"}))
        ->capture_default_str();
    app->add_option("--init-trees", init_trees, "GreedyMiser trees initializing f1 (gbrt)")->capture_default_str();
    app->add_option("--rounds", rounds, "Boosting rounds per outer iteration (gbrt)")->capture_default_str();
    app->add_option("--depth", depth, "Tree depth (gbrt)")->capture_default_str();
    app->add_option("--ridge", ridge, "Gate least-squares ridge (lstsq)")->capture_default_str();
    app->add_option("--f1-l2", f1_l2, "f1 weighted-logistic penalty (lstsq)")->capture_default_str();
    app->add_option("--admm-iters", admm_iters, "ADMM iteration cap (lstsq)")->capture_default_str();
  }

  TrainConfig config() const {
    TrainConfig tc;
    tc.max_outer = max_outer;
    tc.tolerance = tolerance;
    tc.init_l2 = init_l2;
    tc.lin_init = lin_init == "ones" ? LinInit::Ones : LinInit::Logistic;
    tc.init_trees = init_trees;
    tc.rounds = rounds;
    tc.depth = depth;
    tc.ridge = ridge;
    tc.f1_l2 = f1_l2;
    tc.admm.max_iters = admm_iters;
    return tc;
  }
};

int cmd_synth(const std::string& generator, std::uint64_t seed, std::size_t rows, std::size_t dims, bool fresh,
              const fs::path& out_dir) {
  ensure_dir(out_dir);
  Dataset train, val, test;
  if (generator == "synthetic" && fresh) {
    train = gen_synthetic(seed);
    val = gen_synthetic(seed + 1);
    test = gen_synthetic(seed + 2);
  } else {
    Dataset all;
    if (generator == "synthetic") {
      all = gen_synthetic(seed);
    } else if (generator == "nonlinear") {
      all = gen_nonlinear(rows, dims, seed);
    } else if (generator == "wide") {
      all = gen_wide(rows, dims, seed);
    } else {
      throw std::invalid_argument("unknown generator '" + generator + "'");
    }
    SplitSpec spec;
    spec.seed = seed;
    std::tie(train, val, test) = split(all, spec);
  }
  write_csv(train, out_dir / "train.csv");
  write_csv(val, out_dir / "val.csv");
  write_csv(test, out_dir / "test.csv");
  write_costs(CostVector::unit(train.dims()), train.feature_names, out_dir / "costs.csv");
  std::cout << "wrote " << train.rows() << '/' << val.rows() << '/' << test.rows() << " rows to " << out_dir.string()
            << '\n';
  return 0;
}

int cmd_train_f0(const fs::path& train_path, const std::vector<std::string>& others, int trees, int depth, double lr,
                 const fs::path& out_dir) {
  ensure_dir(out_dir);
  const Dataset train = load_csv(train_path);
  const auto gbrt = fit_plain_gbrt(train.X, train.y, trees, depth, lr);
  save_json(ensemble_to_json(gbrt.ensemble), out_dir / "f0_model.json");
  write_f0_scores(gbrt.train_scores, out_dir / "f0_train.csv");
  std::cout << "f0 training accuracy " << f0_accuracy(gbrt.train_scores) << '\n';
  for (const auto& p : others) {
    const fs::path path(p);
    const Dataset ds = load_csv(path);
    if (ds.dims() != train.dims()) throw DataError(path.string() + ": feature count differs from training data");
    const auto scores = scores_of(gbrt.ensemble, ds);
    write_f0_scores(scores, out_dir / ("f0_" + path.stem().string() + ".csv"));
    std::cout << "f0 accuracy on " << path.stem().string() << ' ' << f0_accuracy(scores) << '\n';
  }
  return 0;
}

int cmd_train(const std::string& algorithm, const fs::path& train_path, const fs::path& f0_path,
              const std::string& costs_path, double gamma, double p_full, double lr, const std::string& f1_model,
              double tau, const TrainFlags& flags, const fs::path& out) {
  const Dataset train = load_csv(train_path);
  const F0Scores f0 = load_f0_scores(f0_path, train.rows());
  const CostVector costs = load_costs(opt_path(costs_path), train.feature_names);
  TrainConfig tc = flags.config();
  tc.gamma = gamma;
  tc.p_full = p_full;
  tc.learning_rate = lr;

  TrainResult res;
  switch (parse_algorithm(algorithm)) {
    case Algorithm::Lin: res = train_dynamod_lin(train, f0, costs, tc); break;
    case Algorithm::Gbrt: res = train_dynamod_gbrt(train, f0, costs, tc); break;
    case Algorithm::Lstsq:
      if (f1_model.empty()) {
        res = train_dynamod_lstsq(train, f0, tc);
      } else {
        res = train_dynamod_lstsq_leaf(train, f0, ensemble_from_json(load_json(f1_model)), tau, tc);
      }
      break;
    default: throw std::invalid_argument("train supports lin, gbrt and lstsq; use sweep for baselines");
  }
  save_json(system_to_json(res.system), out);
  std::cout << "objective " << res.trace.back() << " after " << res.iterations << " outer iterations\n";
  print_point(evaluate(res.system, train, f0, costs));
  if (!res.converged) throw NotConverged("no convergence within " + std::to_string(tc.max_outer) + " outer iterations");
  return 0;
}

int cmd_eval(const fs::path& system_path, const fs::path& data_path, const fs::path& f0_path,
             const std::string& costs_path) {
  const AdaptiveSystem sys = system_from_json(load_json(system_path));
  const Dataset ds = load_csv(data_path);
  const F0Scores f0 = load_f0_scores(f0_path, ds.rows());
  const CostVector costs = load_costs(opt_path(costs_path), ds.feature_names);
  print_point(evaluate(sys, ds, f0, costs));
  return 0;
}

struct SweepFlags {
  std::string algorithm = "lin";
  std::string train, val, test, costs;
  std::string f0_train, f0_val, f0_test;
  int f0_trees = 50;
  int f0_depth = 2;
  double f0_lr = 0.1;
  int f1_trees = 0;
  int f1_depth = 4;
  double f1_lr = 0.1;
  double gamma_min = 1e-4;
  double gamma_max = 1.0;
  int gamma_count = 20;
  double p_full_min = 0.1;
  double p_full_max = 0.9;
  int p_full_count = 9;
  std::vector<double> lrs{0.1};
  double budget = 0.0;
  int threads = 1;
  std::uint64_t seed = 0;
  std::string out_dir = "sweep_out";
};

int cmd_sweep(const SweepFlags& f, const TrainFlags& tf) {
  SweepData data;
  data.train = load_csv(f.train);
  data.val = load_csv(f.val);
  data.test = load_csv(f.test);
  if (data.val.dims() != data.train.dims() || data.test.dims() != data.train.dims()) {
    throw DataError("train/val/test feature counts differ");
  }
  data.costs = load_costs(opt_path(f.costs), data.train.feature_names);

  const bool loaded = !f.f0_train.empty() || !f.f0_val.empty() || !f.f0_test.empty();
  if (loaded) {
    if (f.f0_train.empty() || f.f0_val.empty() || f.f0_test.empty()) {
      throw std::invalid_argument("--f0-train, --f0-val and --f0-test go together");
    }
    data.f0_train = load_f0_scores(f.f0_train, data.train.rows());
    data.f0_val = load_f0_scores(f.f0_val, data.val.rows());
    data.f0_test = load_f0_scores(f.f0_test, data.test.rows());
  } else {
    const auto gbrt = fit_plain_gbrt(data.train.X, data.train.y, f.f0_trees, f.f0_depth, f.f0_lr);
    data.f0_train = gbrt.train_scores;
    data.f0_val = scores_of(gbrt.ensemble, data.val);
    data.f0_test = scores_of(gbrt.ensemble, data.test);
  }
  if (f.f1_trees > 0) {
    data.f1_base = fit_plain_gbrt(data.train.X, data.train.y, f.f1_trees, f.f1_depth, f.f1_lr).ensemble;
  }

  SweepConfig cfg;
  cfg.algorithm = parse_algorithm(f.algorithm);
  cfg.gammas = f.gamma_count > 0 ? log_grid(f.gamma_min, f.gamma_max, f.gamma_count) : std::vector<double>{0.0};
  cfg.p_fulls = linear_grid(f.p_full_min, f.p_full_max, f.p_full_count);
  cfg.lrs = f.lrs;
  if (f.budget > 0.0) cfg.budget = f.budget;
  cfg.train = tf.config();
  cfg.threads = f.threads;
  cfg.seed = f.seed;

  const fs::path out_dir(f.out_dir);
  ensure_dir(out_dir);
  const auto report = run_sweep(data, cfg);
  write_sweep_csv(report, out_dir / "sweep.csv");
  write_frontier_csv(report, out_dir / "frontier.csv");
  Json manifest = sweep_manifest(report, cfg);
  manifest["inputs"] = {{"train", f.train}, {"val", f.val}, {"test", f.test}, {"costs", f.costs},
                        {"f0", loaded ? Json{{"train", f.f0_train}, {"val", f.f0_val}, {"test", f.f0_test}}
                                      : Json{{"trees", f.f0_trees}, {"depth", f.f0_depth}, {"lr", f.f0_lr}}},
                        {"f1_base", {{"trees", f.f1_trees}, {"depth", f.f1_depth}, {"lr", f.f1_lr}}}};
  save_json(manifest, out_dir / "manifest.json");

  std::size_t failed = 0;
  for (const auto& p : report.points) failed += p.ok() ? 0 : 1;
  std::cout << report.points.size() << " points (" << failed << " failed), " << report.frontier.size()
            << " on the validation frontier\n";
  if (report.budget_choice) {
    const auto& p = report.points[*report.budget_choice];
    std::cout << "budget choice: gamma=" << p.params.gamma << " p_full=" << p.params.p_full << " lr=" << p.params.lr
              << " val_accuracy=" << p.val.accuracy << " val_cost=" << p.val.avg_cost
              << " test_accuracy=" << p.test.accuracy << " test_cost=" << p.test.avg_cost << '\n';
  } else if (cfg.budget) {
    std::cout << "no point meets the budget on validation\n";
  }
  return 0;
}

// Recomputes the frontier from the validation rows of a sweep.csv.
int cmd_frontier(const fs::path& input, const fs::path& out) {
  std::ifstream in(input);
  if (!in) throw DataError("cannot open " + input.string());
  std::string header;
  std::getline(in, header);
  const std::string expected = "algorithm,gamma,p_full,lr,seed,split,accuracy,avg_cost,frac_to_f0,objective,converged";
  if (!header.empty() && header.back() == '\r') header.pop_back();
  if (header != expected) throw DataError(input.string() + ": unexpected header");

  std::vector<std::string> lines;
  std::vector<TradeoffPoint> points;
  std::string line;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != 11) throw DataError(input.string() + ": row " + std::to_string(row) + " has wrong arity");
    if (cells[5] != "val" || cells[6] == "nan") continue;
    try {
      points.push_back({std::stod(cells[6]), std::stod(cells[7]), std::stod(cells[8]), {}});
    } catch (const std::exception&) {
      throw DataError(input.string() + ": row " + std::to_string(row) + " has a bad number");
    }
    lines.push_back(line);
  }
  if (points.empty()) throw DataError(input.string() + ": no usable validation rows");
  std::ofstream o(out);
  if (!o) throw DataError("cannot write " + out.string());
  o << expected << '\n';
  const auto front = pareto_frontier(points);
  for (const auto k : front) o << lines[k] << '\n';
  std::cout << front.size() << " of " << points.size() << " points on the frontier\n";
  return 0;
}

// CLI11 does not read config files attached to a subcommand, so the sweep INI is
// expanded into flags here. Flags given on the command line win.
std::vector<std::string> expand_sweep_config(std::vector<std::string> args) {
  if (args.size() < 2 || args[1] != "sweep") return args;
  auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end() || it + 1 == args.end()) return args;
  const std::string path = *(it + 1);
  args.erase(it, it + 2);
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::vector<std::string> extra;
  for (const auto& item : CLI::ConfigINI().from_config(in)) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string flag = "--" + item.name;
    if (std::find(args.begin(), args.end(), flag) != args.end()) continue;
    extra.push_back(flag);
    extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
  }
  args.insert(args.begin() + 2, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budgeted adaptive prediction: gate + cheap model + full model"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "Generate train/val/test CSVs and unit costs");
  std::string generator = "synthetic";
  std::uint64_t synth_seed = 0;
  std::size_t rows = 5000, dims = 10;
  bool fresh = false;
  std::string synth_out;
  synth->add_option("--generator", generator, "synthetic | nonlinear | wide")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator and split seed")->capture_default_str();
  synth->add_option("--rows", rows, "Rows (nonlinear, wide)")->capture_default_str();
  synth->add_option("--dims", dims, "Features (nonlinear, wide)")->capture_default_str();
  synth->add_flag("--fresh-splits", fresh, "Synthetic only: draw each split as its own 70-row sample");
  synth->add_option("--out-dir", synth_out, "Output directory")->required();

  auto* train_f0 = app.add_subcommand("train-f0", "Fit the internal full model and export its scores");
  std::string f0_train_path, f0_out;
  std::vector<std::string> f0_others;
  int f0_trees = 50, f0_depth = 2;
  double f0_lr = 0.1;
  train_f0->add_option("--train", f0_train_path, "Training CSV")->required();
  train_f0->add_option("--score", f0_others, "Further CSVs to score (e.g. val.csv test.csv)");
  train_f0->add_option("--trees", f0_trees, "Trees")->capture_default_str();
  train_f0->add_option("--depth", f0_depth, "Tree depth")->capture_default_str();
  train_f0->add_option("--lr", f0_lr, "Learning rate")->capture_default_str();
  train_f0->add_option("--out-dir", f0_out, "Output directory")->required();

  auto* train = app.add_subcommand("train", "Train one system");
  std::string algorithm = "lin", train_path, f0_path, costs_path, f1_model, system_out;
  double gamma = 0.0, p_full = 0.5, lr = 0.1, tau = 0.0;
  TrainFlags train_flags;
  train->add_option("--algorithm", algorithm, "lin | gbrt | lstsq")->capture_default_str();
  train->add_option("--train", train_path, "Training CSV")->required();
  train->add_option("--f0-scores", f0_path, "Full-model scores for the training rows")->required();
  train->add_option("--costs", costs_path, "feature,cost CSV (unit costs when absent)");
  train->add_option("--gamma", gamma, "Feature-cost penalty")->capture_default_str();
  train->add_option("--p-full", p_full, "Cap on the fraction routed to f0")->capture_default_str();
  train->add_option("--lr", lr, "Boosting learning rate")->capture_default_str();
  train->add_option("--f1-model", f1_model, "lstsq: boosted f1 JSON; switches to leaf features");
  train->add_option("--tau", tau, "lstsq leaf mode: initial confidence threshold")->capture_default_str();
  train->add_option("--out", system_out, "System JSON")->required();
  train_flags.add(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a saved system");
  std::string eval_system, eval_data, eval_f0, eval_costs;
  eval->add_option("--system", eval_system, "System JSON")->required();
  eval->add_option("--data", eval_data, "CSV to evaluate on")->required();
  eval->add_option("--f0-scores", eval_f0, "Full-model scores for those rows")->required();
  eval->add_option("--costs", eval_costs, "feature,cost CSV (unit costs when absent)");

  auto* sweep = app.add_subcommand("sweep", "Grid sweep with validation frontier and test report");
  SweepFlags sf;
  TrainFlags sweep_train_flags;
  std::string sweep_config;
  sweep->add_option("--config", sweep_config, "INI file with any of these options (key = value)");
  sweep->add_option("--algorithm", sf.algorithm, "lin | gbrt | lstsq | greedy | confidence | uniform")
      ->capture_default_str();
  sweep->add_option("--train", sf.train, "Training CSV")->required();
  sweep->add_option("--val", sf.val, "Validation CSV")->required();
  sweep->add_option("--test", sf.test, "Test CSV")->required();
  sweep->add_option("--costs", sf.costs, "feature,cost CSV (unit costs when absent)");
  sweep->add_option("--f0-train", sf.f0_train, "Loaded full-model scores (with --f0-val, --f0-test)");
  sweep->add_option("--f0-val", sf.f0_val, "Loaded full-model scores, validation");
  sweep->add_option("--f0-test", sf.f0_test, "Loaded full-model scores, test");
  sweep->add_option("--f0-trees", sf.f0_trees, "Internal full model: trees")->capture_default_str();
  sweep->add_option("--f0-depth", sf.f0_depth, "Internal full model: depth")->capture_default_str();
  sweep->add_option("--f0-lr", sf.f0_lr, "Internal full model: learning rate")->capture_default_str();
  sweep->add_option("--f1-trees", sf.f1_trees, "Boosted cheap model for lstsq/confidence/uniform (0 = none)")
      ->capture_default_str();
  sweep->add_option("--f1-depth", sf.f1_depth, "Boosted cheap model: depth")->capture_default_str();
  sweep->add_option("--f1-lr", sf.f1_lr, "Boosted cheap model: learning rate")->capture_default_str();
  sweep->add_option("--gamma-min", sf.gamma_min, "Smallest gamma")->capture_default_str();
  sweep->add_option("--gamma-max", sf.gamma_max, "Largest gamma")->capture_default_str();
  sweep->add_option("--gamma-count", sf.gamma_count, "Log-spaced gamma count (0 = gamma 0 only)")
      ->capture_default_str();
  sweep->add_option("--p-full-min", sf.p_full_min, "Smallest p_full")->capture_default_str();
  sweep->add_option("--p-full-max", sf.p_full_max, "Largest p_full")->capture_default_str();
  sweep->add_option("--p-full-count", sf.p_full_count, "Evenly spaced p_full count")->capture_default_str();
  sweep->add_option("--lrs", sf.lrs, "Boosting learning rates")->capture_default_str();
  sweep->add_option("--budget", sf.budget, "Validation cost budget (0 = none)")->capture_default_str();
  sweep->add_option("--threads", sf.threads, "Worker threads")->capture_default_str();
  sweep->add_option("--seed", sf.seed, "Seed recorded with every point")->capture_default_str();
  sweep->add_option("--out-dir", sf.out_dir, "Output directory")->capture_default_str();
  sweep_train_flags.add(sweep);

  auto* frontier = app.add_subcommand("frontier", "Recompute the validation frontier of a sweep.csv");
  std::string frontier_in, frontier_out;
  frontier->add_option("--input", frontier_in, "sweep.csv")->required();
  frontier->add_option("--out", frontier_out, "Output CSV")->required();

  try {
    auto args = expand_sweep_config(std::vector<std::string>(argv, argv + argc));
    args.erase(args.begin());
    std::reverse(args.begin(), args.end());  // CLI11 takes the arguments back to front
    app.parse(args);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(generator, synth_seed, rows, dims, fresh, synth_out);
    if (*train_f0) return cmd_train_f0(f0_train_path, f0_others, f0_trees, f0_depth, f0_lr, f0_out);
    if (*train) {
      return cmd_train(algorithm, train_path, f0_path, costs_path, gamma, p_full, lr, f1_model, tau, train_flags,
                       system_out);
    }
    if (*eval) return cmd_eval(eval_system, eval_data, eval_f0, eval_costs);
    if (*sweep) return cmd_sweep(sf, sweep_train_flags);
    if (*frontier) return cmd_frontier(frontier_in, frontier_out);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NotConverged& e) {
    std::cerr << "solver: " << e.what() << '\n';
    return kExitSolver;
  } catch (const Json::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "solver: " << e.what() << '\n';
    return kExitSolver;
  }
  return kExitUsage;
}
