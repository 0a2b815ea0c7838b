#include "cstrans/simulate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <thread>

#include "cstrans/isotonic.hpp"
#include "cstrans/rng.hpp"

namespace cstrans {

namespace {

constexpr std::uint64_t kBiasTag = 0x62696173ULL;

std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

Eigen::VectorXd linspace(double a, double b, int n) {
  Eigen::VectorXd g(n);
  for (int i = 0; i < n; ++i)
    g[i] = i + 1 == n ? b : a + (b - a) * i / (n - 1);
  return g;
}

// Type-7 quantile of an already sorted sample.
double percentile(const std::vector<double>& sorted, double p) {
  const int n = static_cast<int>(sorted.size());
  if (n == 1) return sorted[0];
  const double pos = p * (n - 1);
  const int lo = static_cast<int>(pos);
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (pos - lo) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

Dataset gen_study_data(const StudyConfig& config, int replicate) {
  if (replicate < 0) throw ConfigError("replicate index must be nonnegative");
  const StudyDesign& dz = config.design;
  const int n = config.n;
  Rng rng(config.seed, static_cast<std::uint64_t>(replicate));

  Eigen::VectorXd v(n), w(n);
  Eigen::VectorXi delta(n);
  Eigen::MatrixXd z(n, 2);
  const double e_lo = std::exp(-dz.censor_lo);
  const double e_hi = std::exp(-dz.censor_hi);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.uniform(0.5, 1.5);
    z(i, 1) = rng.bernoulli(0.5);
    w[i] = rng.uniform(1.0, 10.0);
    // A0(T) = E * exp(-beta0'z - h0(w)) with E standard exponential.
    const double s = rng.exponential() *
                     std::exp(-(dz.beta0.dot(z.row(i)) + dz.h0(w[i])));
    const double t = dz.inverse_A0(s);
    // Censoring: standard exponential conditioned on [lo, hi], by inversion.
    const double c = -std::log(e_lo - rng.uniform() * (e_lo - e_hi));
    v[i] = c;
    delta[i] = t <= c ? 1 : 0;
  }
  return Dataset::from_columns(std::move(v), std::move(delta), std::move(z),
                               std::move(w));
}

Eigen::VectorXd StudyResult::beta_mean() const {
  const int d = static_cast<int>(config.design.beta0.size());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(d);
  int used = 0;
  for (const auto& rep : replicates)
    if (rep.converged) {
      sum += rep.beta_hat;
      ++used;
    }
  if (used == 0) return Eigen::VectorXd::Constant(d, std::nan(""));
  return sum / used;
}

Eigen::VectorXd StudyResult::beta_sd() const {
  const int d = static_cast<int>(config.design.beta0.size());
  const Eigen::VectorXd mean = beta_mean();
  Eigen::VectorXd ss = Eigen::VectorXd::Zero(d);
  int used = 0;
  for (const auto& rep : replicates)
    if (rep.converged) {
      ss += (rep.beta_hat - mean).cwiseAbs2();
      ++used;
    }
  if (used < 2) return Eigen::VectorXd::Constant(d, std::nan(""));
  return (ss / (used - 1)).cwiseSqrt();
}

CoverageSummary StudyResult::coverage(int m_index) const {
  const int d = static_cast<int>(config.design.beta0.size());
  CoverageSummary s;
  s.m = config.m_values.at(m_index);
  s.marginal = Eigen::VectorXd::Zero(d);
  for (const auto& rep : replicates) {
    if (!rep.converged) continue;
    const RegionOutcome& reg = rep.regions.at(m_index);
    if (!reg.reliable) continue;
    ++s.used;
    s.joint += reg.joint_cover ? 1.0 : 0.0;
    for (int r = 0; r < d; ++r)
      s.marginal[r] += reg.marginal_cover[r] ? 1.0 : 0.0;
  }
  if (s.used > 0) {
    s.joint /= s.used;
    s.marginal /= s.used;
  }
  return s;
}

StudyResult run_study(const StudyConfig& config) {
  if (config.n < 10) throw ConfigError("study needs n >= 10");
  if (config.reps < 1) throw ConfigError("study needs at least one replicate");
  for (int m : config.m_values)
    if (m <= static_cast<int>(config.design.beta0.size()))
      throw ConfigError("every jackknife m must exceed the beta dimension");

  const LinkFamily family = LinkFamily::extreme_value();
  StudyResult result;
  result.config = config;
  result.w_grid = linspace(1.0, 10.0, config.curve_points);
  result.t_grid =
      linspace(config.design.censor_lo, config.design.censor_hi,
               config.curve_points);
  result.replicates.resize(config.reps);

  const int d = static_cast<int>(config.design.beta0.size());
  const int grid = config.curve_points;

  auto run_one = [&](int r) {
    ReplicateOutcome& out = result.replicates[r];
    out.replicate = r;
    const Dataset data = gen_study_data(config, r);

    FitResult full;
    try {
      full = fit(data, family, config.fit);
    } catch (const std::exception&) {
      out.converged = false;
      return;
    }
    out.converged = full.diag.converged;
    out.beta_hat = full.params.beta;
    out.h_curve.resize(grid);
    out.A_curve.resize(grid);
    for (int j = 0; j < grid; ++j) {
      out.h_curve[j] = full.params.h(result.w_grid[j]);
      out.A_curve[j] = std::exp(full.params.H(result.t_grid[j]));
    }

    out.regions.resize(config.m_values.size());
    for (std::size_t mi = 0; mi < config.m_values.size(); ++mi) {
      RegionOutcome& reg = out.regions[mi];
      reg.m = config.m_values[mi];
      reg.marginal_cover.assign(d, 0);
      reg.halfwidth = Eigen::VectorXd::Zero(d);
      JackknifeConfig jc;
      jc.m = reg.m;
      jc.level = config.level;
      jc.center_at_full = true;
      jc.seed = splitmix64(splitmix64(config.seed) ^
                           splitmix64((static_cast<std::uint64_t>(r) << 16) |
                                      static_cast<std::uint64_t>(reg.m)));
      jc.fit = config.fit;
      jc.fit.warm = &full.params;  // jackknife's own full fit starts converged
      try {
        const JackknifeResult jk = block_jackknife(data, family, jc);
        reg.reliable = jk.reliable;
        reg.joint_cover = jk.covers(config.design.beta0);
        for (int rr = 0; rr < d; ++rr) {
          reg.marginal_cover[rr] =
              jk.covers_marginal(rr, config.design.beta0[rr]) ? 1 : 0;
          reg.halfwidth[rr] = jk.marginal_halfwidth(rr);
        }
      } catch (const std::exception&) {
        reg.reliable = false;
      }
    }
  };

  const int workers = std::max(1, config.workers);
  if (workers == 1 || config.reps == 1) {
    for (int r = 0; r < config.reps; ++r) run_one(r);
  } else {
    std::vector<std::thread> pool;
    for (int t = 1; t < workers; ++t)
      pool.emplace_back([&, t] {
        for (int r = t; r < config.reps; r += workers) run_one(r);
      });
    for (int r = 0; r < config.reps; r += workers) run_one(r);
    for (auto& th : pool) th.join();
  }

  for (const auto& rep : result.replicates)
    if (!rep.converged) ++result.failed_fits;
  return result;
}

double BiasResult::freq_low(double eps) const {
  const double bound = truth_low - eps;
  const auto hits =
      (at_first.array() <= bound).cast<double>().sum();
  return at_first.size() > 0 ? hits / at_first.size() : 0.0;
}

BiasResult bias_experiment(const BiasConfig& config) {
  if (config.n < 100) throw ConfigError("bias experiment needs n >= 100");
  if (config.reps < 1) throw ConfigError("bias experiment needs reps >= 1");

  BiasResult result;
  result.config = config;
  result.at_first.resize(config.reps);
  result.at_last.resize(config.reps);

  std::vector<double> v(config.n);
  std::vector<int> delta(config.n), order(config.n), delta_sorted(config.n);
  for (int r = 0; r < config.reps; ++r) {
    Rng rng(config.seed, kBiasTag + static_cast<std::uint64_t>(r));
    for (int i = 0; i < config.n; ++i) {
      const double u = rng.uniform(0.0, 2.0);
      v[i] = rng.uniform(0.5, 1.5);
      delta[i] = u <= v[i] ? 1 : 0;
    }
    for (int i = 0; i < config.n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return v[a] < v[b]; });
    for (int i = 0; i < config.n; ++i) delta_sorted[i] = delta[order[i]];
    const std::vector<double> g = npmle_single_sample(delta_sorted);
    result.at_first[r] = g.front();
    result.at_last[r] = g.back();
  }
  return result;
}

std::vector<std::string> write_study_outputs(const StudyResult& result,
                                             const std::string& dir) {
  const StudyConfig& config = result.config;
  const int d = static_cast<int>(config.design.beta0.size());
  const int n_m = static_cast<int>(config.m_values.size());
  std::vector<std::string> paths;

  std::vector<CoverageSummary> cov(n_m);
  for (int mi = 0; mi < n_m; ++mi) cov[mi] = result.coverage(mi);

  {
    const std::string path = dir + "/table1.csv";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "quantity,mean,sd";
    for (int mi = 0; mi < n_m; ++mi)
      out << ",cover_m" << config.m_values[mi] << ",used_m"
          << config.m_values[mi];
    out << '\n';
    const Eigen::VectorXd mean = result.beta_mean();
    const Eigen::VectorXd sd = result.beta_sd();
    for (int r = 0; r < d; ++r) {
      out << "beta" << r + 1 << ',' << fmt17(mean[r]) << ',' << fmt17(sd[r]);
      for (int mi = 0; mi < n_m; ++mi)
        out << ',' << fmt17(cov[mi].marginal[r]) << ',' << cov[mi].used;
      out << '\n';
    }
    out << "joint,,";
    for (int mi = 0; mi < n_m; ++mi)
      out << ',' << fmt17(cov[mi].joint) << ',' << cov[mi].used;
    out << '\n';
    paths.push_back(path);
  }

  {
    std::vector<std::string> columns{"replicate", "converged"};
    for (int r = 0; r < d; ++r) columns.push_back("beta" + std::to_string(r + 1));
    for (int m : config.m_values) {
      const std::string tag = "_m" + std::to_string(m);
      columns.push_back("reliable" + tag);
      columns.push_back("joint" + tag);
      for (int r = 0; r < d; ++r)
        columns.push_back("cover" + std::to_string(r + 1) + tag);
      for (int r = 0; r < d; ++r)
        columns.push_back("halfwidth" + std::to_string(r + 1) + tag);
    }
    Eigen::MatrixXd rows(config.reps, columns.size());
    rows.setConstant(std::nan(""));
    for (int i = 0; i < config.reps; ++i) {
      const ReplicateOutcome& rep = result.replicates[i];
      int c = 0;
      rows(i, c++) = rep.replicate;
      rows(i, c++) = rep.converged ? 1 : 0;
      for (int r = 0; r < d; ++r)
        rows(i, c++) = rep.beta_hat.size() == d ? rep.beta_hat[r] : std::nan("");
      for (int mi = 0; mi < n_m; ++mi) {
        const bool have = mi < static_cast<int>(rep.regions.size());
        const RegionOutcome* reg = have ? &rep.regions[mi] : nullptr;
        rows(i, c++) = reg && reg->reliable ? 1 : 0;
        rows(i, c++) = reg && reg->joint_cover ? 1 : 0;
        for (int r = 0; r < d; ++r)
          rows(i, c++) = reg && reg->reliable ? reg->marginal_cover[r] : 0;
        for (int r = 0; r < d; ++r)
          rows(i, c++) = reg && reg->reliable ? reg->halfwidth[r] : std::nan("");
      }
    }
    const std::string path = dir + "/replicates.csv";
    write_table(path, columns, rows);
    paths.push_back(path);
  }

  std::vector<std::vector<double>> betas(d);
  for (const auto& rep : result.replicates)
    if (rep.converged)
      for (int r = 0; r < d; ++r) betas[r].push_back(rep.beta_hat[r]);
  const int n_used = static_cast<int>(betas.empty() ? 0 : betas[0].size());

  {
    const int bins = 20;
    Eigen::MatrixXd rows(bins * d, 4);
    for (int r = 0; r < d; ++r) {
      double lo = 0.0, hi = 1.0;
      if (n_used > 0) {
        lo = *std::min_element(betas[r].begin(), betas[r].end());
        hi = *std::max_element(betas[r].begin(), betas[r].end());
      }
      if (!(hi > lo)) hi = lo + 1e-12;
      const double width = (hi - lo) / bins;
      for (int b = 0; b < bins; ++b) {
        int count = 0;
        const double b_lo = lo + b * width;
        const double b_hi = b + 1 == bins ? hi : lo + (b + 1) * width;
        for (double x : betas[r])
          if ((x >= b_lo && x < b_hi) || (b + 1 == bins && x == hi)) ++count;
        rows(r * bins + b, 0) = r + 1;
        rows(r * bins + b, 1) = b_lo;
        rows(r * bins + b, 2) = b_hi;
        rows(r * bins + b, 3) = count;
      }
    }
    const std::string path = dir + "/beta_hist.csv";
    write_table(path, {"parameter", "bin_lo", "bin_hi", "count"}, rows);
    paths.push_back(path);
  }

  {
    Eigen::MatrixXd rows(n_used, d);
    for (int i = 0; i < n_used; ++i)
      for (int r = 0; r < d; ++r) rows(i, r) = betas[r][i];
    std::vector<std::string> columns;
    for (int r = 0; r < d; ++r) columns.push_back("beta" + std::to_string(r + 1));
    const std::string path = dir + "/beta_scatter.csv";
    write_table(path, columns, rows);
    paths.push_back(path);
  }

  const std::vector<std::string> curve_cols{
      "x",    "truth",        "mean",         "sd",
      "p2_5", "p97_5",        "mean_minus_2sd", "mean_plus_2sd"};
  auto write_curve = [&](const std::string& name, const Eigen::VectorXd& grid,
                         const std::function<double(double)>& truth,
                         const std::function<double(const ReplicateOutcome&,
                                                    int)>& value) {
    Eigen::MatrixXd rows(grid.size(), 8);
    std::vector<double> vals;
    for (int j = 0; j < grid.size(); ++j) {
      vals.clear();
      for (const auto& rep : result.replicates)
        if (rep.converged) vals.push_back(value(rep, j));
      double mean = std::nan(""), sd = std::nan(""), lo = std::nan(""),
             hi = std::nan("");
      if (!vals.empty()) {
        mean = 0.0;
        for (double x : vals) mean += x;
        mean /= vals.size();
        if (vals.size() > 1) {
          double ss = 0.0;
          for (double x : vals) ss += (x - mean) * (x - mean);
          sd = std::sqrt(ss / (vals.size() - 1));
        }
        std::sort(vals.begin(), vals.end());
        lo = percentile(vals, 0.025);
        hi = percentile(vals, 0.975);
      }
      rows(j, 0) = grid[j];
      rows(j, 1) = truth(grid[j]);
      rows(j, 2) = mean;
      rows(j, 3) = sd;
      rows(j, 4) = lo;
      rows(j, 5) = hi;
      rows(j, 6) = mean - 2 * sd;
      rows(j, 7) = mean + 2 * sd;
    }
    const std::string path = dir + "/" + name;
    write_table(path, curve_cols, rows);
    paths.push_back(path);
  };

  write_curve("h_curve.csv", result.w_grid,
              [&](double w) { return config.design.h0(w); },
              [](const ReplicateOutcome& rep, int j) { return rep.h_curve[j]; });
  write_curve("A_curve.csv", result.t_grid,
              [&](double t) { return config.design.A0(t); },
              [](const ReplicateOutcome& rep, int j) { return rep.A_curve[j]; });

  return paths;
}

std::vector<std::string> write_bias_outputs(const BiasResult& result,
                                            const std::string& dir) {
  std::vector<std::string> paths;
  {
    Eigen::MatrixXd rows(result.config.reps, 3);
    for (int r = 0; r < result.config.reps; ++r) {
      rows(r, 0) = r;
      rows(r, 1) = result.at_first[r];
      rows(r, 2) = result.at_last[r];
    }
    const std::string path = dir + "/bias_replicates.csv";
    write_table(path, {"replicate", "at_first", "at_last"}, rows);
    paths.push_back(path);
  }
  {
    Eigen::MatrixXd row(1, 8);
    row << result.config.n, result.config.reps, result.truth_low,
        result.truth_high, result.mean_first(), result.mean_last(),
        result.freq_low(0.05), result.freq_low(0.10);
    const std::string path = dir + "/bias_summary.csv";
    write_table(path,
                {"n", "reps", "truth_low", "truth_high", "mean_first",
                 "mean_last", "freq_low_eps05", "freq_low_eps10"},
                row);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace cstrans
