#pragma once

// Command orchestration: each cmd_* runs one study from a StudyConfig and
// returns its output files as (name -> bytes). Contents depend only on the
// config and seed; wall-clock data goes to meta.json via write_outputs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bounds.hpp"
#include "cascade.hpp"
#include "config.hpp"
#include "diagnostics.hpp"

namespace polycascade {

using Json = nlohmann::ordered_json;
using OutputFiles = std::map<std::string, std::string>;

namespace detail {

inline std::string csv_number(double v) { return format_double(v); }

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : width_(header.size()) { row_strings(header); }

  template <class... Cells>
  void row(const Cells&... cells) {
    static_assert(sizeof...(Cells) > 0);
    std::vector<std::string> fields{cell(cells)...};
    if (fields.size() != width_) throw UsageError("CSV row width mismatch");
    row_strings(fields);
  }

  const std::string& str() const noexcept { return text_; }

 private:
  static std::string cell(double v) { return csv_number(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "pass" : "fail"; }
  static std::string cell(const char* v) { return v; }
  static std::string cell(const std::string& v) { return v; }

  void row_strings(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) text_ += ',';
      text_ += fields[i];
    }
    text_ += '\n';
  }

  std::size_t width_;
  std::string text_;
};

inline Json estimate_json(const Estimate& e) { return Json{{"value", e.value}, {"std_err", e.std_err}}; }

inline Json header_json(const char* command, const StudyConfig& c) {
  return Json{{"command", command}, {"config", echo_config(c)}, {"seed", c.seed}};
}

inline StudyOptions study_options(const StudyConfig& c) {
  StudyOptions o;
  o.replicas = c.replicas;
  o.seed = c.seed;
  o.workers = c.workers;
  o.theta_min = c.theta_min;
  o.tolerance = c.golden_tolerance;
  o.curve_points = c.theta_grid_size;
  return o;
}

inline Json comparisons_json(const std::vector<PairedComparison>& list) {
  Json out = Json::array();
  for (const auto& c : list) {
    out.push_back({{"from", c.from}, {"to", c.to}, {"difference", c.difference}, {"std_err", c.std_err}, {"holds", c.holds}});
  }
  return out;
}

template <int D>
OutputFiles bound_files(const StudyConfig& c) {
  const auto model = c.model();
  const auto options = study_options(c);
  Json report = header_json("bound", c);
  report["budgets"] = {{"replicas", options.replicas},
                       {"final_replicas", options.replicas * options.final_factor},
                       {"theta_min", options.theta_min},
                       {"golden_tolerance", options.tolerance},
                       {"theta_grid_size", options.curve_points}};
  report["studies"] = Json::array();
  CsvTable curves({"beta", "m", "theta", "v_hat", "std_err"});
  CsvTable tree({"beta", "m", "theta_star", "boundary_minimum", "p_tree", "p_tree_std_err", "p_tree_per_step",
                 "ci", "moment", "moment_std_err", "heavy_tail", "slope_at_one", "slope_std_err", "running_inf"});
  CsvTable lower({"beta", "n", "mean_log_w_per_step", "ci"});

  for (double beta : c.betas) {
    const BoundReport r = bound_study<D>(model, beta, c.m_list, c.n_list, options);
    Json study{{"beta", beta}};
    Json rows = Json::array();
    for (const auto& row : r.tree.rows) {
      rows.push_back({{"m", row.m},
                      {"theta_star", row.theta_star},
                      {"boundary_minimum", row.boundary_minimum},
                      {"p_tree", row.p_tree},
                      {"p_tree_std_err", row.p_tree_std_err},
                      {"p_tree_per_step", row.per_step},
                      {"ci", row.per_step_std_err},
                      {"moment", row.moment},
                      {"moment_std_err", row.moment_std_err},
                      {"heavy_tail", row.heavy_tail},
                      {"slope_at_one", estimate_json(row.slope_at_one)},
                      {"running_inf", row.running_inf}});
      tree.row(beta, row.m, row.theta_star, row.boundary_minimum ? std::string("true") : std::string("false"), row.p_tree,
               row.p_tree_std_err, row.per_step, row.per_step_std_err, row.moment, row.moment_std_err,
               row.heavy_tail ? std::string("true") : std::string("false"), row.slope_at_one.value,
               row.slope_at_one.std_err, row.running_inf);
    }
    study["rows"] = rows;
    study["running_inf"] = r.tree.running_inf;
    study["running_inf_ci"] = r.tree.running_inf_std_err;
    study["running_inf_m"] = r.tree.running_inf_m;
    study["doubling"] = comparisons_json(r.tree.doubling);

    Json lower_rows = Json::array();
    for (const auto& row : r.lower.rows) {
      lower_rows.push_back({{"n", row.n}, {"mean_log_w_per_step", row.mean_per_step}, {"ci", row.std_err}});
      lower.row(beta, row.n, row.mean_per_step, row.std_err);
    }
    study["lower_rows"] = lower_rows;
    study["lower_sup"] = r.lower.lower_sup;
    study["lower_sup_ci"] = r.lower.lower_sup_std_err;
    study["lower_sup_n"] = r.lower.lower_sup_n;
    study["lower_monotone"] = comparisons_json(r.lower.monotone);

    if (r.certificate) {
      const auto& cert = *r.certificate;
      study["certificate"] = {{"m", cert.m},       {"theta", cert.theta},       {"moment", cert.moment},
                              {"ci", cert.std_err}, {"replicas", cert.replicas}, {"escalated", cert.escalated},
                              {"certified", cert.certified}};
    } else {
      study["certificate"] = nullptr;
    }
    study["sandwich"] = {{"gap", r.sandwich.gap}, {"slack", r.sandwich.slack}, {"holds", r.sandwich.holds}};

    Json seeds = Json::object();
    for (const auto& [name, s] : r.tree.seeds) seeds[name] = s;
    for (const auto& [name, s] : r.lower.seeds) seeds[name] = s;
    study["seeds"] = seeds;
    report["studies"].push_back(study);

    for (const auto& curve : r.tree.curves) {
      for (std::size_t i = 0; i < curve.theta_grid.size(); ++i) {
        curves.row(beta, curve.m, curve.theta_grid[i], curve.v_hat[i], curve.std_err[i]);
      }
    }
  }
  return {{"report.json", report.dump(2) + "\n"},
          {"curves.csv", curves.str()},
          {"tree_rows.csv", tree.str()},
          {"lower_rows.csv", lower.str()}};
}

template <int D>
OutputFiles beta_c_files(const StudyConfig& c) {
  const auto options = study_options(c);
  const BetaBracket b = estimate_beta_c_m<D>(c.model(), c.beta_c_m, c.beta_c_lo, c.beta_c_hi, c.beta_c_tolerance, options);
  Json report = header_json("beta-c", c);
  Json queries = Json::array();
  for (const auto& q : b.queries) {
    queries.push_back({{"beta", q.beta}, {"slope_at_one", estimate_json(q.slope)}, {"replicas", q.replicas},
                       {"verdict", to_string(q.verdict)}});
  }
  report["m"] = b.m;
  report["bracket"] = {b.lo, b.hi};
  report["width"] = b.hi - b.lo;
  report["tolerance"] = b.tolerance;
  report["flagged"] = b.flagged;
  report["queries"] = queries;
  report["seeds"] = {{"beta_c", derive_seed(c.seed, "beta-c")}};
  return {{"report.json", report.dump(2) + "\n"}};
}

template <int D>
OutputFiles cascade_files(const StudyConfig& c) {
  if (c.betas.size() != 1 && c.cascade_law != "uniform") throw UsageError("cascade takes a single beta");
  const double beta = c.betas.front();
  WeightVectorSampler sampler;
  std::size_t branching = c.cascade_n;
  if (c.cascade_law == "rem") {
    sampler = rem_sampler(beta);
  } else if (c.cascade_law == "uniform") {
    sampler = uniform_sampler();
  } else {
    if (c.cascade_m < 1) throw UsageError("cascade.m must be >= 1");
    sampler = polymer_sampler<D>(c.model(), beta, c.cascade_m);
    branching = slice_size<D>(c.cascade_m);
  }

  std::vector<std::vector<double>> logs(c.cascade_trees);
  const std::uint64_t seed = derive_seed(c.seed, "cascade");
  parallel_for(c.cascade_trees, c.workers, [&](std::size_t t) {
    logs[t] = cascade_log_martingale_path(sampler, branching, c.cascade_depths, derive_seed(seed, "tree", t));
  });

  CsvTable table({"tree", "n", "log_w", "p_n"});
  Json rows = Json::array();
  for (std::size_t k = 0; k < c.cascade_depths.size(); ++k) {
    const int n = c.cascade_depths[k];
    std::vector<double> p(logs.size());
    for (std::size_t t = 0; t < logs.size(); ++t) {
      p[t] = logs[t][k] / n;
      table.row(t, n, logs[t][k], p[t]);
    }
    Json row{{"n", n}, {"p_n", sample_mean(p)}};
    row["std_err"] = p.size() >= 2 ? Json(mean_estimate(p).std_err) : Json(nullptr);
    rows.push_back(row);
  }

  Json report = header_json("cascade", c);
  report["law"] = c.cascade_law;
  report["branching"] = branching;
  report["trees"] = c.cascade_trees;
  report["rows"] = rows;
  if (c.cascade_law == "rem") {
    // inf over theta of ln N / theta - ln N + (theta - 1) beta^2 / 2.
    const double ln_n = std::log(static_cast<double>(branching));
    const double star = beta > 0.0 ? std::sqrt(2.0 * ln_n) / beta : 2.0;
    report["limit"] = star < 1.0 ? beta * std::sqrt(2.0 * ln_n) - ln_n - 0.5 * beta * beta : 0.0;
  } else if (c.cascade_law == "uniform") {
    report["limit"] = 0.0;
  }
  report["seeds"] = {{"cascade", seed}};
  return {{"report.json", report.dump(2) + "\n"}, {"cascade.csv", table.str()}};
}

template <int D>
OutputFiles overlap_files(const StudyConfig& c) {
  const auto model = c.model();
  if (c.overlap_n < 1) throw UsageError("overlap.n must be >= 1");
  CsvTable table({"beta", "k", "i_k", "cesaro"});
  Json report = header_json("overlap", c);
  report["n"] = c.overlap_n;
  report["slabs"] = c.overlap_slabs;
  report["studies"] = Json::array();
  const std::uint64_t seed = derive_seed(c.seed, "overlap");
  for (double beta : c.betas) {
    std::vector<OverlapSeries> series(c.overlap_slabs);
    parallel_for(c.overlap_slabs, c.workers, [&](std::size_t s) {
      const EnvironmentSlab<D> slab(model, replica_seed(seed, s), c.overlap_n);
      series[s] = overlap_series(slab, beta, c.overlap_n);
    });
    for (int k = 1; k <= c.overlap_n; ++k) {
      double i_k = 0.0, cesaro = 0.0;
      for (const auto& s : series) {
        i_k += s.i_k[k - 1];
        cesaro += s.cesaro[k - 1];
      }
      table.row(beta, k, i_k / series.size(), cesaro / series.size());
    }
    std::vector<double> final_cesaro;
    for (const auto& s : series) final_cesaro.push_back(s.cesaro.back());
    Json study{{"beta", beta}, {"cesaro_n", sample_mean(final_cesaro)}};
    study["cesaro_n_std_err"] = final_cesaro.size() >= 2 ? Json(mean_estimate(final_cesaro).std_err) : Json(nullptr);
    report["studies"].push_back(study);
  }
  report["seeds"] = {{"overlap", seed}};
  return {{"report.json", report.dump(2) + "\n"}, {"overlap.csv", table.str()}};
}

template <int D>
OutputFiles concentration_files(const StudyConfig& c) {
  const auto model = c.model();
  const auto options = study_options(c);
  CsvTable table({"beta", "lambda", "empirical", "std_err", "bound", "verdict"});
  Json report = header_json("concentration", c);
  report["n"] = c.concentration_n;
  report["studies"] = Json::array();
  bool all_pass = true;
  for (double beta : c.betas) {
    const auto t = concentration_check<D>(model, beta, c.concentration_n, c.concentration_lambdas, options);
    Json rows = Json::array();
    for (const auto& row : t.rows) {
      table.row(beta, row.lambda, row.empirical, row.std_err, row.bound, row.pass);
      rows.push_back({{"lambda", row.lambda}, {"empirical", row.empirical}, {"std_err", row.std_err},
                      {"bound", row.bound}, {"verdict", row.pass ? "pass" : "fail"}});
      all_pass = all_pass && row.pass;
    }
    report["studies"].push_back({{"beta", beta}, {"mean_log_w", t.mean_log_w}, {"rows", rows}});
  }
  report["all_pass"] = all_pass;
  report["seeds"] = {{"concentration", derive_seed(c.seed, "concentration")}};
  return {{"report.json", report.dump(2) + "\n"}, {"concentration.csv", table.str()}};
}

template <template <int> class Job>
OutputFiles dispatch(const StudyConfig& c) {
  switch (c.d) {
    case 1: return Job<1>::run(c);
    case 2: return Job<2>::run(c);
    case 3: return Job<3>::run(c);
    default: throw UsageError("d must be 1, 2 or 3");
  }
}

template <int D> struct BoundJob { static OutputFiles run(const StudyConfig& c) { return bound_files<D>(c); } };
template <int D> struct BetaCJob { static OutputFiles run(const StudyConfig& c) { return beta_c_files<D>(c); } };
template <int D> struct CascadeJob { static OutputFiles run(const StudyConfig& c) { return cascade_files<D>(c); } };
template <int D> struct OverlapJob { static OutputFiles run(const StudyConfig& c) { return overlap_files<D>(c); } };
template <int D> struct ConcentrationJob {
  static OutputFiles run(const StudyConfig& c) { return concentration_files<D>(c); }
};

}  // namespace detail

inline OutputFiles cmd_bound(const StudyConfig& c) { return detail::dispatch<detail::BoundJob>(c); }
inline OutputFiles cmd_beta_c(const StudyConfig& c) { return detail::dispatch<detail::BetaCJob>(c); }
inline OutputFiles cmd_cascade(const StudyConfig& c) { return detail::dispatch<detail::CascadeJob>(c); }
inline OutputFiles cmd_overlap(const StudyConfig& c) { return detail::dispatch<detail::OverlapJob>(c); }
inline OutputFiles cmd_concentration(const StudyConfig& c) { return detail::dispatch<detail::ConcentrationJob>(c); }

inline OutputFiles run_command(const std::string& command, const StudyConfig& c) {
  if (command == "bound") return cmd_bound(c);
  if (command == "beta-c") return cmd_beta_c(c);
  if (command == "cascade") return cmd_cascade(c);
  if (command == "overlap") return cmd_overlap(c);
  if (command == "concentration") return cmd_concentration(c);
  throw UsageError("unknown command '" + command + "'");
}

// Writes every file under `dir` plus meta.json with wall-clock metadata.
inline void write_outputs(const std::filesystem::path& dir, const OutputFiles& files, const std::string& command,
                          const StudyConfig& c, double wall_seconds) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& bytes) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
    out << bytes;
  };
  for (const auto& [name, bytes] : files) write(name, bytes);
  const auto now = std::chrono::system_clock::now();
  Json meta{{"command", command},
            {"wall_seconds", wall_seconds},
            {"finished_unix", std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()},
            {"workers", c.workers},
            {"config", echo_config(c)},
            {"seed", c.seed}};
  write("meta.json", meta.dump(2) + "\n");
}

}  // namespace polycascade
