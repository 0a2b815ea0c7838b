#include "cstrans/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cstrans/data.hpp"
#include "cstrans/fit.hpp"
#include "cstrans/inference.hpp"
#include "cstrans/information.hpp"
#include "cstrans/simulate.hpp"

namespace cstrans {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("CSTRANS_OUT_DIR"); env && *env)
    return env;
  return ".";
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "'");
}

std::string basename_of(const std::string& path) {
  return std::filesystem::path(path).filename().string();
}

double parse_lambda(const std::string& text) {
  if (text == "auto") return -1.0;
  try {
    std::size_t used = 0;
    const double x = std::stod(text, &used);
    if (used != text.size() || !(x > 0.0)) throw std::invalid_argument(text);
    return x;
  } catch (const std::logic_error&) {
    throw ConfigError("--lambda must be 'auto' or a positive number");
  }
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

void write_manifest(const std::string& dir, const std::string& subcommand,
                    const std::vector<std::string>& argv, std::uint64_t seed,
                    const json& inputs, const json& config,
                    const std::vector<std::string>& outputs,
                    const Clock::time_point& start) {
  const double seconds =
      std::chrono::duration<double>(Clock::now() - start).count();
  json names = json::array();
  for (const auto& p : outputs) names.push_back(basename_of(p));
  const json manifest{{"subcommand", subcommand}, {"argv", argv},
                      {"seed", seed},             {"inputs", inputs},
                      {"config", config},         {"outputs", names},
                      {"version", kToolVersion},  {"duration_seconds", seconds}};
  const std::string path = dir + "/manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << manifest.dump(2) << '\n';
}

json fit_to_json(const FitResult& res, const LinkFamily& family, int n, int d) {
  json diag{{"converged", res.diag.converged},
            {"outer_iterations", res.diag.outer_iterations},
            {"fenchel_ineq", res.diag.fenchel_ineq},
            {"fenchel_eq", res.diag.fenchel_eq},
            {"grad_norm", res.diag.grad_norm},
            {"warnings", res.diag.warnings}};
  json smooth{{"a", res.params.h.basis.a()},
              {"b", res.params.h.basis.b()},
              {"interior", res.params.h.basis.interior()},
              {"coeffs", vec_to_json(res.params.h.coeffs)},
              {"offset", res.params.h.center_offset}};
  json transform{{"sites", res.params.H.sites()},
                 {"values", res.params.H.values()}};
  return json{{"family", family.name()}, {"n", n},
              {"d", d},                  {"lambda", res.lambda},
              {"beta", vec_to_json(res.params.beta)},
              {"smooth", smooth},        {"transform", transform},
              {"loglik", res.loglik},    {"penalty", res.penalty},
              {"objective", res.objective}, {"diagnostics", diag}};
}

struct FitArgs {
  std::string data;
  std::string link = "cloglog";
  std::string lambda = "auto";
  int knots = -1;
  std::uint64_t seed = 0;
  std::string out;
};

int run_fit(const FitArgs& a, const std::vector<std::string>& argv) {
  const auto start = Clock::now();
  const std::string dir = resolve_out(a.out);
  ensure_dir(dir);
  const LinkFamily family = LinkFamily::parse(a.link);
  const Dataset data = read_csv(a.data);
  const json inputs{{basename_of(a.data), file_digest(a.data)}};

  FitConfig fc;
  fc.lambda = parse_lambda(a.lambda);
  fc.interior_knots = a.knots;
  fc.seed = a.seed;
  const FitResult res = fit(data, family, fc);

  std::vector<std::string> outputs;
  {
    Eigen::MatrixXd rows(data.d(), 2);
    for (int r = 0; r < data.d(); ++r) {
      rows(r, 0) = r + 1;
      rows(r, 1) = res.params.beta[r];
    }
    outputs.push_back(dir + "/beta.csv");
    write_table(outputs.back(), {"index", "estimate"}, rows);
  }
  {
    const int grid = 101;
    const double a_w = res.params.h.basis.a(), b_w = res.params.h.basis.b();
    Eigen::MatrixXd rows(grid, 2);
    for (int j = 0; j < grid; ++j) {
      const double w =
          j + 1 == grid ? b_w : a_w + (b_w - a_w) * j / (grid - 1);
      rows(j, 0) = w;
      rows(j, 1) = res.params.h(w);
    }
    outputs.push_back(dir + "/h_curve.csv");
    write_table(outputs.back(), {"w", "h"}, rows);
  }
  {
    const auto& sites = res.params.H.sites();
    const auto& values = res.params.H.values();
    Eigen::MatrixXd rows(sites.size(), 2);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      rows(static_cast<int>(i), 0) = sites[i];
      rows(static_cast<int>(i), 1) = values[i];
    }
    outputs.push_back(dir + "/H_step.csv");
    write_table(outputs.back(), {"v", "H"}, rows);
  }
  {
    outputs.push_back(dir + "/fit.json");
    std::ofstream out(outputs.back());
    if (!out) throw DataError("cannot write '" + outputs.back() + "'");
    out << fit_to_json(res, family, data.n(), data.d()).dump(2) << '\n';
  }

  const json config{{"link", a.link},
                    {"lambda", res.lambda},
                    {"knots", res.params.h.basis.interior()}};
  write_manifest(dir, "fit", argv, a.seed, inputs, config, outputs, start);
  std::cout << "fit: n=" << data.n() << " d=" << data.d()
            << " objective=" << res.objective
            << " converged=" << (res.diag.converged ? "true" : "false")
            << '\n';
  for (const auto& warning : res.diag.warnings)
    std::cout << "warning: " << warning << '\n';
  return 0;
}

struct JackknifeArgs {
  std::string data;
  std::string link = "cloglog";
  std::string lambda = "auto";
  int knots = -1;
  int m = 10;
  double level = 0.95;
  bool center_at_full = false;
  std::uint64_t seed = 0;
  std::string out;
};

int run_jackknife(const JackknifeArgs& a, const std::vector<std::string>& argv) {
  const auto start = Clock::now();
  const std::string dir = resolve_out(a.out);
  ensure_dir(dir);
  const LinkFamily family = LinkFamily::parse(a.link);
  const Dataset data = read_csv(a.data);
  const json inputs{{basename_of(a.data), file_digest(a.data)}};

  JackknifeConfig jc;
  jc.m = a.m;
  jc.level = a.level;
  jc.center_at_full = a.center_at_full;
  jc.seed = a.seed;
  jc.fit.lambda = parse_lambda(a.lambda);
  jc.fit.interior_knots = a.knots;
  jc.fit.seed = a.seed;
  const JackknifeResult res = block_jackknife(data, family, jc);
  const int d = res.dim();

  std::vector<std::string> outputs;
  {
    Eigen::MatrixXd rows(res.m, d + 1);
    for (int j = 0; j < res.m; ++j) {
      rows(j, 0) = j + 1;
      for (int r = 0; r < d; ++r) rows(j, r + 1) = res.block_betas(j, r);
    }
    std::vector<std::string> columns{"block"};
    for (int r = 0; r < d; ++r) columns.push_back("beta" + std::to_string(r + 1));
    outputs.push_back(dir + "/block_betas.csv");
    write_table(outputs.back(), columns, rows);
  }
  {
    std::vector<std::string> columns;
    for (int r = 0; r < d; ++r) columns.push_back("beta" + std::to_string(r + 1));
    outputs.push_back(dir + "/scatter.csv");
    write_table(outputs.back(), columns, res.scatter);
  }
  {
    const double crit = res.critical(a.level);
    json halfwidths = json::array();
    for (int r = 0; r < d; ++r) halfwidths.push_back(res.marginal_halfwidth(r));
    const json j{{"beta_hat", vec_to_json(res.beta_hat)},
                 {"m", res.m},
                 {"k", res.k},
                 {"n", res.n},
                 {"n_used", res.n_used},
                 {"level", res.level},
                 {"region",
                  json{{"center", vec_to_json(res.beta_hat)},
                       {"scatter", mat_to_json(res.scatter)},
                       {"radius2", crit}}},
                 {"marginal_halfwidths", halfwidths},
                 {"reliable", res.reliable},
                 {"failed_blocks", res.failed_blocks}};
    outputs.push_back(dir + "/jackknife.json");
    std::ofstream out(outputs.back());
    if (!out) throw DataError("cannot write '" + outputs.back() + "'");
    out << j.dump(2) << '\n';
  }

  const json config{{"link", a.link},       {"m", a.m},
                    {"level", a.level},     {"center_at_full", a.center_at_full},
                    {"lambda", a.lambda}};
  write_manifest(dir, "jackknife", argv, a.seed, inputs, config, outputs, start);
  std::cout << "jackknife: m=" << res.m << " k=" << res.k
            << " reliable=" << (res.reliable ? "true" : "false") << '\n';
  return 0;
}

struct SimulateArgs {
  int n = 400;
  bool n_given = false;
  int reps = 200;
  bool reps_given = false;
  std::uint64_t seed = 1;
  std::vector<int> m_values{10, 40};
  double level = 0.95;
  int workers = 1;
  bool bias = false;
  std::string out;
};

int run_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const auto start = Clock::now();
  const std::string dir = resolve_out(a.out);
  ensure_dir(dir);

  if (a.bias) {
    BiasConfig bc;
    bc.n = a.n_given ? a.n : 20000;
    bc.reps = a.reps_given ? a.reps : 500;
    bc.seed = a.seed;
    const BiasResult res = bias_experiment(bc);
    const auto outputs = write_bias_outputs(res, dir);
    const json config{{"mode", "bias"}, {"n", bc.n}, {"reps", bc.reps}};
    write_manifest(dir, "simulate", argv, a.seed, json::object(), config,
                   outputs, start);
    std::cout << "bias: n=" << bc.n << " reps=" << bc.reps
              << " mean_at_first=" << res.mean_first()
              << " freq_low(0.05)=" << res.freq_low(0.05) << '\n';
    return 0;
  }

  StudyConfig sc;
  sc.n = a.n;
  sc.reps = a.reps;
  sc.seed = a.seed;
  sc.m_values = a.m_values;
  sc.level = a.level;
  sc.workers = a.workers;
  const StudyResult res = run_study(sc);
  const auto outputs = write_study_outputs(res, dir);

  const json config{{"mode", "study"},
                    {"n", sc.n},
                    {"reps", sc.reps},
                    {"m", sc.m_values},
                    {"level", sc.level},
                    {"workers", sc.workers},
                    {"failed_fits", res.failed_fits},
                    {"k0", sc.design.k0},
                    {"k0_recomputed", sc.design.k0_recomputed()}};
  write_manifest(dir, "simulate", argv, a.seed, json::object(), config,
                 outputs, start);

  const Eigen::VectorXd mean = res.beta_mean();
  const Eigen::VectorXd sd = res.beta_sd();
  std::cout << "simulate: n=" << sc.n << " reps=" << sc.reps
            << " failed=" << res.failed_fits << '\n';
  for (int r = 0; r < mean.size(); ++r)
    std::cout << "  beta" << r + 1 << ": mean=" << mean[r] << " sd=" << sd[r]
              << '\n';
  for (std::size_t mi = 0; mi < sc.m_values.size(); ++mi) {
    const CoverageSummary cov = res.coverage(static_cast<int>(mi));
    std::cout << "  m=" << cov.m << ": joint=" << cov.joint;
    for (int r = 0; r < cov.marginal.size(); ++r)
      std::cout << " beta" << r + 1 << "=" << cov.marginal[r];
    std::cout << " (used " << cov.used << ")\n";
  }
  return 0;
}

struct InfoArgs {
  std::string preset = "sec9";
  int grid = 201;
  double tol = 1e-8;
  int max_terms = 200;
  std::string out;
};

int run_info(const InfoArgs& a, const std::vector<std::string>& argv) {
  const auto start = Clock::now();
  const std::string dir = resolve_out(a.out);
  ensure_dir(dir);
  if (a.preset != "sec9")
    throw ConfigError("unknown preset '" + a.preset + "' (available: sec9)");

  const DesignSpec spec = study_design(a.grid);
  const HStarResult hstar = hstar_series(spec, a.tol, a.max_terms);
  const EfficientScorePieces pieces = efficient_information(spec, hstar);
  const int d = spec.d();

  std::vector<std::string> outputs;
  std::vector<std::string> zcols;
  for (int r = 0; r < d; ++r) zcols.push_back("z" + std::to_string(r + 1));
  {
    Eigen::MatrixXd rows(spec.w.points.size(), d + 1);
    rows.col(0) = spec.w.points;
    rows.rightCols(d) = pieces.h_tilde;
    std::vector<std::string> columns{"w"};
    for (const auto& c : zcols) columns.push_back("h_tilde_" + c);
    outputs.push_back(dir + "/h_tilde.csv");
    write_table(outputs.back(), columns, rows);
  }
  {
    Eigen::MatrixXd rows(spec.v.points.size(), d + 1);
    rows.col(0) = spec.v.points;
    rows.rightCols(d) = pieces.q_tilde;
    std::vector<std::string> columns{"v"};
    for (const auto& c : zcols) columns.push_back("q_tilde_" + c);
    outputs.push_back(dir + "/q_tilde.csv");
    write_table(outputs.back(), columns, rows);
  }
  const Eigen::MatrixXd inv =
      pieces.I0.llt().solve(Eigen::MatrixXd::Identity(d, d));
  outputs.push_back(dir + "/I0.csv");
  write_table(outputs.back(), zcols, pieces.I0);
  outputs.push_back(dir + "/I0_inv.csv");
  write_table(outputs.back(), zcols, inv);
  {
    const json j{{"preset", a.preset},
                 {"grid", a.grid},
                 {"tol", a.tol},
                 {"series_terms", pieces.series_terms},
                 {"series_increment", pieces.series_increment},
                 {"I0", mat_to_json(pieces.I0)},
                 {"I0_inv", mat_to_json(inv)}};
    outputs.push_back(dir + "/info.json");
    std::ofstream out(outputs.back());
    if (!out) throw DataError("cannot write '" + outputs.back() + "'");
    out << j.dump(2) << '\n';
  }

  const json config{{"preset", a.preset},
                    {"grid", a.grid},
                    {"tol", a.tol},
                    {"max_terms", a.max_terms}};
  write_manifest(dir, "info", argv, 0, json::object(), config, outputs, start);
  std::cout << "info: series_terms=" << pieces.series_terms << " I0_diag=";
  for (int r = 0; r < d; ++r)
    std::cout << (r ? "," : "") << pieces.I0(r, r);
  std::cout << '\n';
  return 0;
}

struct CheckArgs {
  std::string link;
  double lo = -10.0;
  double hi = 10.0;
  double step = 0.01;
  std::string out;
};

int run_check(const CheckArgs& a, const std::vector<std::string>& argv) {
  const auto start = Clock::now();
  const std::string dir = resolve_out(a.out);
  ensure_dir(dir);
  const LinkFamily family = LinkFamily::parse(a.link);
  const B5dReport rep = family.check_b5d(a.lo, a.hi, a.step);

  std::cout << "family: " << family.name() << '\n'
            << "B5(d): " << (rep.satisfied ? "satisfied" : "violated") << '\n'
            << "min event-side margin: " << rep.min_event
            << " at t=" << rep.argmin_event << '\n'
            << "min censored-side margin: " << rep.min_censored
            << " at t=" << rep.argmin_censored << '\n';

  std::vector<std::string> outputs;
  {
    const json j{{"family", family.name()},
                 {"satisfied", rep.satisfied},
                 {"min_event", rep.min_event},
                 {"argmin_event", rep.argmin_event},
                 {"min_censored", rep.min_censored},
                 {"argmin_censored", rep.argmin_censored},
                 {"lo", a.lo},
                 {"hi", a.hi},
                 {"step", a.step}};
    outputs.push_back(dir + "/check.json");
    std::ofstream out(outputs.back());
    if (!out) throw DataError("cannot write '" + outputs.back() + "'");
    out << j.dump(2) << '\n';
  }
  const json config{{"link", a.link}, {"lo", a.lo}, {"hi", a.hi},
                    {"step", a.step}};
  write_manifest(dir, "check-family", argv, 0, json::object(), config, outputs,
                 start);
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Partly linear transformation models for current status data"};
  app.require_subcommand(1);

  FitArgs fa;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "Penalized maximum likelihood fit of one dataset");
  fit_cmd->add_option("--data", fa.data, "input CSV (v,delta,z1..zd,w)")
      ->required();
  fit_cmd->add_option("--link", fa.link,
                      "cloglog|logit|pareto:<g>|probit|gnorm:<g>|cauchy");
  fit_cmd->add_option("--lambda", fa.lambda, "penalty level, 'auto' = n^(-1/3)");
  fit_cmd->add_option("--knots", fa.knots, "interior knot count override");
  fit_cmd->add_option("--seed", fa.seed, "RNG seed");
  fit_cmd->add_option("--out", fa.out, "output directory");

  JackknifeArgs ja;
  CLI::App* jk_cmd = app.add_subcommand(
      "jackknife", "Block jackknife confidence region for beta");
  jk_cmd->add_option("--data", ja.data, "input CSV (v,delta,z1..zd,w)")
      ->required();
  jk_cmd->add_option("--link", ja.link,
                     "cloglog|logit|pareto:<g>|probit|gnorm:<g>|cauchy");
  jk_cmd->add_option("--lambda", ja.lambda, "penalty level, 'auto' = n^(-1/3)");
  jk_cmd->add_option("--knots", ja.knots, "interior knot count override");
  jk_cmd->add_option("--m", ja.m, "number of blocks");
  jk_cmd->add_option("--level", ja.level, "confidence level");
  jk_cmd->add_flag("--center-at-full", ja.center_at_full,
                   "center the scatter at the full-sample estimate");
  jk_cmd->add_option("--seed", ja.seed, "RNG seed for the block permutation");
  jk_cmd->add_option("--out", ja.out, "output directory");

  SimulateArgs sa;
  CLI::App* sim_cmd = app.add_subcommand(
      "simulate", "Monte Carlo study of the estimator and its regions");
  sim_cmd->add_option("--n", sa.n, "sample size per replicate");
  sim_cmd->add_option("--reps", sa.reps, "number of replicates");
  sim_cmd->add_option("--seed", sa.seed, "master seed");
  sim_cmd->add_option("--m", sa.m_values, "jackknife block counts")
      ->delimiter(',');
  sim_cmd->add_option("--level", sa.level, "confidence level");
  sim_cmd->add_option("--workers", sa.workers, "worker thread count");
  sim_cmd->add_flag("--bias", sa.bias,
                    "run the boundary-bias experiment instead of the study");
  sim_cmd->add_option("--out", sa.out, "output directory");

  InfoArgs ia;
  CLI::App* info_cmd = app.add_subcommand(
      "info", "Efficient information for a named design preset");
  info_cmd->add_option("--preset", ia.preset, "design preset name");
  info_cmd->add_option("--grid", ia.grid, "marginal grid size");
  info_cmd->add_option("--tol", ia.tol, "series truncation tolerance");
  info_cmd->add_option("--max-terms", ia.max_terms, "series term cap");
  info_cmd->add_option("--out", ia.out, "output directory");

  CheckArgs ca;
  CLI::App* check_cmd = app.add_subcommand(
      "check-family", "Curvature diagnostics for a link family");
  check_cmd->add_option("--link", ca.link, "family to check")->required();
  check_cmd->add_option("--lo", ca.lo, "grid lower end");
  check_cmd->add_option("--hi", ca.hi, "grid upper end");
  check_cmd->add_option("--step", ca.step, "grid step");
  check_cmd->add_option("--out", ca.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  sa.n_given = sim_cmd->count("--n") > 0;
  sa.reps_given = sim_cmd->count("--reps") > 0;

  try {
    if (fit_cmd->parsed()) return run_fit(fa, args);
    if (jk_cmd->parsed()) return run_jackknife(ja, args);
    if (sim_cmd->parsed()) return run_simulate(sa, args);
    if (info_cmd->parsed()) return run_info(ia, args);
    if (check_cmd->parsed()) return run_check(ca, args);
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}

int dispatch(const std::vector<std::string>& args) {
  std::vector<std::string> full{"cstrans"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> ptrs;
  ptrs.reserve(full.size());
  for (const auto& s : full) ptrs.push_back(s.c_str());
  return dispatch(static_cast<int>(ptrs.size()), ptrs.data());
}

}  // namespace cstrans
