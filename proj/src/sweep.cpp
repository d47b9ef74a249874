#include "dynamod/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <thread>

#include "csv_util.hpp"

#ifndef DYNAMOD_BUILD_TAG
#define DYNAMOD_BUILD_TAG "unknown"
#endif

namespace dynamod {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

SweepPoint make_point(const SweepData& data, const SweepConfig& cfg, AdaptiveSystem sys, double objective,
                      bool converged) {
  SweepPoint p;
  p.algorithm = sys.algorithm;
  p.params = sys.params;
  p.seed = cfg.seed;
  p.val = evaluate(sys, data.val, data.f0_val, data.costs);
  p.test = evaluate(sys, data.test, data.f0_test, data.costs);
  p.objective = objective;
  p.converged = converged;
  p.system = std::move(sys);
  return p;
}

SweepPoint failed_point(const SweepConfig& cfg, RunParams params, std::string error) {
  SweepPoint p;
  p.algorithm = to_string(cfg.algorithm);
  p.params = params;
  p.seed = cfg.seed;
  p.val = {kNaN, kNaN, kNaN, params};
  p.test = p.val;
  p.objective = kNaN;
  p.error = std::move(error);
  return p;
}

using Task = std::function<std::vector<SweepPoint>()>;

std::vector<Task> build_tasks(const SweepData& data, const SweepConfig& cfg) {
  std::vector<Task> tasks;
  auto guarded = [&cfg](RunParams params, std::function<std::vector<SweepPoint>()> body) -> Task {
    return [&cfg, params, body = std::move(body)]() -> std::vector<SweepPoint> {
      try {
        return body();
      } catch (const std::exception& e) {
        return {failed_point(cfg, params, e.what())};
      }
    };
  };

  switch (cfg.algorithm) {
    case Algorithm::Lin:
      for (const double gamma : cfg.gammas) {
        for (const double p : cfg.p_fulls) {
          const RunParams rp{gamma, p, 0.0};
          tasks.push_back(guarded(rp, [&data, &cfg, rp] {
            TrainConfig tc = cfg.train;
            tc.gamma = rp.gamma;
            tc.p_full = rp.p_full;
            tc.seed = cfg.seed;
            auto res = train_dynamod_lin(data.train, data.f0_train, data.costs, tc);
            return std::vector{make_point(data, cfg, std::move(res.system), res.trace.back(), res.converged)};
          }));
        }
      }
      break;
    case Algorithm::Gbrt:
      for (const double gamma : cfg.gammas) {
        for (const double p : cfg.p_fulls) {
          for (const double lr : cfg.lrs) {
            const RunParams rp{gamma, p, lr};
            tasks.push_back(guarded(rp, [&data, &cfg, rp] {
              TrainConfig tc = cfg.train;
              tc.gamma = rp.gamma;
              tc.p_full = rp.p_full;
              tc.learning_rate = rp.lr;
              tc.seed = cfg.seed;
              auto res = train_dynamod_gbrt(data.train, data.f0_train, data.costs, tc);
              return std::vector{make_point(data, cfg, std::move(res.system), res.trace.back(), res.converged)};
            }));
          }
        }
      }
      break;
    case Algorithm::Lstsq:
      for (const double p : cfg.p_fulls) {
        const RunParams rp{0.0, p, 0.0};
        tasks.push_back(guarded(rp, [&data, &cfg, rp] {
          TrainConfig tc = cfg.train;
          tc.p_full = rp.p_full;
          tc.seed = cfg.seed;
          TrainResult res;
          if (data.f1_base) {
            const double tau = margin_quantile(*data.f1_base, data.train.X, rp.p_full);
            res = train_dynamod_lstsq_leaf(data.train, data.f0_train, *data.f1_base, tau, tc);
          } else {
            res = train_dynamod_lstsq(data.train, data.f0_train, tc);
          }
          return std::vector{make_point(data, cfg, std::move(res.system), res.trace.back(), res.converged)};
        }));
      }
      break;
    case Algorithm::Greedy:
      tasks.push_back(guarded({}, [&data, &cfg] {
        std::vector<SweepPoint> out;
        for (auto& gs : greedy_l1_pipeline(data.train, cfg.greedy)) {
          out.push_back(make_point(data, cfg, std::move(gs.system), kNaN, true));
        }
        return out;
      }));
      break;
    case Algorithm::Confidence:
      for (const double p : cfg.p_fulls) {
        const RunParams rp{0.0, p, 0.0};
        tasks.push_back(guarded(rp, [&data, &cfg, rp] {
          if (!data.f1_base) throw std::invalid_argument("confidence sweep needs a boosted f1");
          auto sys = confidence_gate(*data.f1_base, margin_quantile(*data.f1_base, data.train.X, rp.p_full));
          sys.params = rp;
          return std::vector{make_point(data, cfg, std::move(sys), kNaN, true)};
        }));
      }
      break;
    case Algorithm::Uniform:
      for (const double p : cfg.p_fulls) {
        const RunParams rp{0.0, p, 0.0};
        tasks.push_back(guarded(rp, [&data, &cfg, rp] {
          Scorer f1 = data.f1_base ? Scorer(EnsembleScorer{*data.f1_base})
                                   : Scorer(LinearScorer{fit_logistic(data.train.X, data.train.y, cfg.greedy.l2)});
          return std::vector{make_point(data, cfg, uniform_gate(f1, rp.p_full, cfg.seed), kNaN, true)};
        }));
      }
      break;
  }
  return tasks;
}

std::string fmt(double v) { return std::isnan(v) ? "nan" : detail::format_double(v); }

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Lin: return "lin";
    case Algorithm::Gbrt: return "gbrt";
    case Algorithm::Lstsq: return "lstsq";
    case Algorithm::Greedy: return "greedy";
    case Algorithm::Confidence: return "confidence";
    case Algorithm::Uniform: return "uniform";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (const auto a : {Algorithm::Lin, Algorithm::Gbrt, Algorithm::Lstsq, Algorithm::Greedy, Algorithm::Confidence,
                       Algorithm::Uniform}) {
    if (to_string(a) == name) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

std::vector<double> log_grid(double lo, double hi, int count) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) throw std::invalid_argument("log_grid: need 0 < lo <= hi, count >= 1");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) {
    const double t = count == 1 ? 0.0 : static_cast<double>(k) / (count - 1);
    out.push_back(std::pow(10.0, std::log10(lo) + t * (std::log10(hi) - std::log10(lo))));
  }
  return out;
}

std::vector<double> linear_grid(double lo, double hi, int count) {
  if (count < 1 || !(hi >= lo)) throw std::invalid_argument("linear_grid: need lo <= hi, count >= 1");
  std::vector<double> out;
  for (int k = 0; k < count; ++k) out.push_back(count == 1 ? lo : lo + (hi - lo) * k / (count - 1));
  return out;
}

void SweepConfig::validate() const {
  if (gammas.empty() || p_fulls.empty() || lrs.empty()) throw std::invalid_argument("sweep: grids must be nonempty");
  if (budget && !(*budget > 0.0)) throw std::invalid_argument("sweep: budget must be > 0");
  if (threads < 1) throw std::invalid_argument("sweep: threads must be >= 1");
  for (const double p : p_fulls) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("sweep: p_full values must lie in [0, 1]");
  }
  for (const double g : gammas) {
    if (!(g >= 0.0)) throw std::invalid_argument("sweep: gamma values must be >= 0");
  }
  for (const double lr : lrs) {
    if (!(lr > 0.0)) throw std::invalid_argument("sweep: learning rates must be > 0");
  }
}

std::vector<std::size_t> pareto_frontier(const std::vector<TradeoffPoint>& points) {
  if (points.empty()) throw std::invalid_argument("pareto_frontier: no points");
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return points[a].avg_cost < points[b].avg_cost;
  });

  // Within a group of equal cost only the group's best accuracy can survive,
  // and only if it beats everything strictly cheaper.
  std::vector<std::size_t> keep;
  double best_cheaper = -std::numeric_limits<double>::infinity();
  for (std::size_t lo = 0; lo < order.size();) {
    std::size_t hi = lo;
    double group_best = -std::numeric_limits<double>::infinity();
    while (hi < order.size() && points[order[hi]].avg_cost == points[order[lo]].avg_cost) {
      group_best = std::max(group_best, points[order[hi]].accuracy);
      ++hi;
    }
    if (group_best > best_cheaper) {
      for (std::size_t k = lo; k < hi; ++k) {
        if (points[order[k]].accuracy == group_best) keep.push_back(order[k]);
      }
      best_cheaper = group_best;
    }
    lo = hi;
  }
  return keep;
}

SweepReport run_sweep(const SweepData& data, const SweepConfig& cfg) {
  cfg.validate();
  const auto tasks = build_tasks(data, cfg);
  std::vector<std::vector<SweepPoint>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) slots[k] = tasks[k]();
  };
  const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), tasks.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  SweepReport report;
  for (auto& s : slots) {
    for (auto& p : s) report.points.push_back(std::move(p));
  }

  std::vector<std::size_t> ok;
  std::vector<TradeoffPoint> val;
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    if (report.points[i].ok()) {
      ok.push_back(i);
      val.push_back(report.points[i].val);
    }
  }
  if (!val.empty()) {
    for (const auto k : pareto_frontier(val)) report.frontier.push_back(ok[k]);
  }
  if (cfg.budget) {
    for (const auto i : ok) {
      const auto& v = report.points[i].val;
      if (v.avg_cost > *cfg.budget) continue;
      if (!report.budget_choice) {
        report.budget_choice = i;
        continue;
      }
      const auto& b = report.points[*report.budget_choice].val;
      if (v.accuracy > b.accuracy || (v.accuracy == b.accuracy && v.avg_cost < b.avg_cost)) report.budget_choice = i;
    }
  }
  return report;
}

void write_sweep_csv(const SweepReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "algorithm,gamma,p_full,lr,seed,split,accuracy,avg_cost,frac_to_f0,objective,converged\n";
  for (const auto& p : report.points) {
    auto row = [&](const char* split, const TradeoffPoint& t) {
      out << p.algorithm << ',' << fmt(p.params.gamma) << ',' << fmt(p.params.p_full) << ',' << fmt(p.params.lr) << ','
          << p.seed << ',' << split << ',' << fmt(t.accuracy) << ',' << fmt(t.avg_cost) << ',' << fmt(t.frac_to_f0)
          << ',' << fmt(p.objective) << ',' << (p.converged ? "true" : "false") << '\n';
    };
    row("val", p.val);
    if (p.ok()) row("test", p.test);
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_frontier_csv(const SweepReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "algorithm,gamma,p_full,lr,seed,val_accuracy,val_avg_cost,val_frac_to_f0,test_accuracy,test_avg_cost,"
         "test_frac_to_f0\n";
  for (const auto i : report.frontier) {
    const auto& p = report.points[i];
    out << p.algorithm << ',' << fmt(p.params.gamma) << ',' << fmt(p.params.p_full) << ',' << fmt(p.params.lr) << ','
        << p.seed << ',' << fmt(p.val.accuracy) << ',' << fmt(p.val.avg_cost) << ',' << fmt(p.val.frac_to_f0) << ','
        << fmt(p.test.accuracy) << ',' << fmt(p.test.avg_cost) << ',' << fmt(p.test.frac_to_f0) << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

Json sweep_manifest(const SweepReport& report, const SweepConfig& cfg) {
  const auto& t = cfg.train;
  Json j{{"build_tag", build_tag()},
         {"algorithm", to_string(cfg.algorithm)},
         {"seed", cfg.seed},
         {"threads", cfg.threads},
         {"grid", {{"gamma", cfg.gammas}, {"p_full", cfg.p_fulls}, {"lr", cfg.lrs}}},
         {"train",
          {{"max_outer", t.max_outer},
           {"tolerance", t.tolerance},
           {"init_l2", t.init_l2},
           {"lin_init", t.lin_init == LinInit::Ones ? "ones" : "logistic"},
           {"init_trees", t.init_trees},
           {"rounds", t.rounds},
           {"depth", t.depth},
           {"min_leaf", t.min_leaf},
           {"ridge", t.ridge},
           {"f1_l2", t.f1_l2},
           {"prox", {{"max_iters", t.prox.max_iters}, {"tolerance", t.prox.tolerance}}},
           {"admm", {{"rho", t.admm.rho}, {"max_iters", t.admm.max_iters}, {"tolerance", t.admm.tolerance}}}}},
         {"greedy", {{"c_grid", cfg.greedy.c_grid}, {"class_weights", cfg.greedy.class_weights}, {"l2", cfg.greedy.l2}}},
         {"frontier", report.frontier}};
  if (cfg.budget) j["budget"] = *cfg.budget;
  if (report.budget_choice) j["budget_choice"] = *report.budget_choice;
  Json errors = Json::array();
  for (std::size_t i = 0; i < report.points.size(); ++i) {
    if (!report.points[i].ok()) errors.push_back({{"point", i}, {"error", report.points[i].error}});
  }
  j["errors"] = std::move(errors);
  return j;
}

std::string build_tag() { return DYNAMOD_BUILD_TAG; }

}  // namespace dynamod
