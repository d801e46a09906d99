#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "svie/bounds.hpp"
#include "svie/config.hpp"
#include "svie/frac_calc.hpp"
#include "svie/malliavin.hpp"
#include "svie/parallel.hpp"

namespace svie {

inline constexpr const char* kVersion = "svie 0.1.0";

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string timestamp;
  std::map<std::string, std::string> checksums;
  bool complete = true;
};

namespace detail {

inline std::string csv_render(const ResultTable& t) {
  std::string out;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (c) out += ',';
    out += t.columns[c];
  }
  out += '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out += ',';
      out += format_g17(row[c]);
    }
    out += '\n';
  }
  return out;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream ofs(path, std::ios::binary);
  ofs.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!ofs) throw std::runtime_error("write failed: " + path);
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

} // namespace detail

/// Writes paths.csv (plus any extra tables), summary.json, and manifest.json
/// into out_dir, recording a checksum of every written file in the manifest.
inline void write_results(
    const std::vector<std::pair<std::string, ResultTable>>& tables,
    const nlohmann::json& summary, RunManifest& manifest,
    const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (const auto& [name, table] : tables) {
    const std::string bytes = detail::csv_render(table);
    detail::write_file(out_dir + "/" + name, bytes);
    manifest.checksums[name] = detail::hex64(detail::fnv1a64(bytes));
  }
  const std::string sj = summary.dump(2) + "\n";
  detail::write_file(out_dir + "/summary.json", sj);
  manifest.checksums["summary.json"] = detail::hex64(detail::fnv1a64(sj));

  nlohmann::json mj;
  mj["config_hash"] = manifest.config_hash;
  mj["version"] = manifest.version;
  mj["timestamp"] = manifest.timestamp;
  mj["complete"] = manifest.complete;
  mj["checksums"] = manifest.checksums;
  detail::write_file(out_dir + "/manifest.json", mj.dump(2) + "\n");
}

namespace detail {

struct PathResults {
  std::vector<std::vector<double>> rows;
  std::vector<int> failed;
};

/// Runs fn(i) for each path index on the worker pool. Failed paths are
/// recorded, not fatal; surviving rows keep index order so output bytes do
/// not depend on the worker count.
template <typename F>
PathResults run_paths(int count, int workers, F&& fn) {
  PathResults res;
  res.rows.resize(count);
  std::vector<char> failed(count, 0);
  parallel_for(count, workers, [&](int i) {
    try {
      res.rows[i] = fn(i);
    } catch (...) {
      failed[i] = 1;
    }
  });
  for (int i = 0; i < count; ++i)
    if (failed[i]) res.failed.push_back(i);
  return res;
}

inline ResultTable collect_rows(std::vector<std::string> columns,
                                const PathResults& pr) {
  ResultTable t;
  t.columns = std::move(columns);
  for (std::size_t i = 0; i < pr.rows.size(); ++i)
    if (!pr.rows[i].empty()) t.rows.push_back(pr.rows[i]);
  return t;
}

inline BoundParams bound_params_for(const ExperimentConfig& cfg,
                                    const HypothesisConstants& c,
                                    const TimeGrid& grid) {
  BoundParams p;
  p.T = cfg.T;
  p.alpha = cfg.params.alpha;
  p.beta = cfg.params.beta;
  p.L = c.L;
  p.L0 = c.L0;
  p.K = c.K;
  p.C = cfg.C;
  p.B0alpha = b0_alpha([&](double, double) { return c.b0_const; },
                       cfg.params.alpha, cfg.T, grid);
  if (c.sigma_bounded) p.sigma_sup = c.sigma_sup;
  p.h_sup = c.db_sup;
  p.f_sup = c.dsigma_sup;
  return p;
}

} // namespace detail

/// Executes the configured experiment: derives one RNG stream per path from
/// (seed, index), schedules paths over `workers` threads, merges rows in
/// index order and persists CSV/JSON outputs. Byte-identical results for
/// identical (config, seed) at any worker count.
inline RunManifest run_experiment(const ExperimentConfig& cfg) {
  const TimeGrid grid = make_uniform_grid(cfg.T, cfg.n);
  const Family family =
      make_family(cfg.family, cfg.family_params, cfg.d, cfg.m, cfg.T);
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(cfg.d, cfg.x0);
  const double alpha = cfg.params.alpha;
  const double H = cfg.params.H;
  const int workers = std::max(1, cfg.workers);

  RunManifest manifest;
  manifest.config_hash = detail::hex64(cfg.hash());
  manifest.version = kVersion;
  manifest.timestamp = detail::iso_timestamp();

  std::vector<std::pair<std::string, ResultTable>> tables;
  nlohmann::json summary;
  summary["experiment"] = experiment_kind_name(cfg.kind);
  summary["config_hash"] = manifest.config_hash;
  summary["paths_requested"] = cfg.paths;

  detail::PathResults pr;

  switch (cfg.kind) {
    case ExperimentKind::FbmValidate: {
      const GaussianSampler sampler(grid, H);
      const int nodes = grid.node_count();
      std::vector<std::vector<double>> traces(cfg.paths);
      pr = detail::run_paths(cfg.paths, workers, [&](int i) {
        const SampledPath w = sampler.sample(cfg.m, derive_stream(cfg.seed, i));
        auto& tr = traces[i];
        tr.resize(nodes);
        for (int k = 0; k < nodes; ++k) tr[k] = w.at(k, 0);
        return std::vector<double>{static_cast<double>(i),
                                   w.at(grid.subintervals(), 0), sup_norm(w)};
      });
      // covariance accumulated in index order after the pool: deterministic
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(nodes, nodes);
      int used = 0;
      for (int i = 0; i < cfg.paths; ++i) {
        if (traces[i].empty()) continue;
        ++used;
        for (int a = 1; a < nodes; ++a)
          for (int b = 1; b <= a; ++b) sums(a, b) += traces[i][a] * traces[i][b];
      }
      double max_err = 0.0, max_se_units = 0.0;
      for (int a = 1; a < nodes; ++a)
        for (int b = 1; b <= a; ++b) {
          const double ta = grid.node(a), tb = grid.node(b);
          const double exact = covariance_rh(ta, tb, H);
          const double err = std::abs(sums(a, b) / used - exact);
          const double se = std::sqrt(
              (covariance_rh(ta, ta, H) * covariance_rh(tb, tb, H) +
               exact * exact) /
              used);
          max_err = std::max(max_err, err);
          max_se_units = std::max(max_se_units, err / se);
        }
      summary["max_cov_abs_err"] = max_err;
      summary["max_cov_err_se_units"] = max_se_units;
      summary["pass_4se"] = max_se_units <= 4.0;
      tables.push_back(
          {"paths.csv",
           detail::collect_rows({"path", "terminal", "sup_abs"}, pr)});
      break;
    }

    case ExperimentKind::IntegralValidate: {
      const GaussianSampler sampler(grid, H);
      pr = detail::run_paths(cfg.paths, workers, [&](int i) {
        const SampledPath w = sampler.sample(1, derive_stream(cfg.seed, i));
        SampledPath f(grid, 1);
        for (int k = 0; k < grid.node_count(); ++k)
          f.at(k) = std::cos(w.at(k));
        const double fp = rs_integral_forpart(f, w, 0.0, cfg.T, alpha)(0);
        const double sm = rs_integral_sums(f, w, 0.0, cfg.T)(0);
        const double gap = std::abs(fp - sm);
        const double rel = gap / std::max(1e-12, std::abs(sm));
        return std::vector<double>{static_cast<double>(i), fp, sm, gap, rel};
      });
      double max_rel = 0.0, max_abs = 0.0;
      for (const auto& r : pr.rows)
        if (!r.empty()) {
          max_abs = std::max(max_abs, r[3]);
          max_rel = std::max(max_rel, r[4]);
        }
      summary["max_abs_gap"] = max_abs;
      summary["max_rel_gap"] = max_rel;
      tables.push_back(
          {"paths.csv",
           detail::collect_rows({"path", "forpart", "sums", "abs_gap", "rel_gap"},
                                pr)});
      break;
    }

    case ExperimentKind::BoundCheck31:
    case ExperimentKind::BoundCheck32:
    case ExperimentKind::BoundCheck34: {
      const auto& c = family.constants();
      const BoundKind bkind = cfg.kind == ExperimentKind::BoundCheck31
                                  ? BoundKind::BoundedSigmaPoly
                                  : cfg.kind == ExperimentKind::BoundCheck32
                                        ? BoundKind::GeneralExp
                                        : BoundKind::LinearSystem;
      if (bkind == BoundKind::BoundedSigmaPoly && !c.sigma_bounded)
        throw std::invalid_argument(
            "BoundCheck31 requires a bounded-sigma family");
      if (bkind == BoundKind::BoundedSigmaPoly && !c.drift_bounded)
        throw std::invalid_argument(
            "BoundCheck31 requires a bounded-drift family");
      if (bkind == BoundKind::LinearSystem && !c.sigma_bounded)
        throw std::invalid_argument(
            "BoundCheck34 requires a bounded-sigma family");
      if (c.mu != 1.0)
        throw std::invalid_argument(
            "bound checks require time-Lipschitz coefficients (mu = 1)");
      BoundParams params = detail::bound_params_for(cfg, c, grid);
      const Eigen::VectorXd w0vec = Eigen::VectorXd::Constant(cfg.d, cfg.w0);
      if (bkind == BoundKind::LinearSystem) params.w_sup = w0vec.norm();
      const GaussianSampler sampler(grid, H);
      const double x0n = x0.norm();
      pr = std::visit(
          [&](const auto& model) {
            return detail::run_paths(cfg.paths, workers, [&](int i) {
              const SampledPath w =
                  sampler.sample(cfg.m, derive_stream(cfg.seed, i));
              const SampledPath x = solve_svie(model, x0, w, grid);
              const double gnorm = holder_norm(w, 1.0 - alpha);
              double measured;
              if (bkind == BoundKind::LinearSystem) {
                const SensitivitySystem<std::decay_t<decltype(model)>> sys{
                    model, w0vec};
                measured = sup_norm(solve_linear_z(sys, x, w, grid));
              } else {
                measured = sup_norm(x);
              }
              return std::vector<double>{static_cast<double>(i), measured,
                                         gnorm};
            });
          },
          family.model);
      std::vector<double> indices;
      std::vector<MeasuredPoint> ensemble;
      for (const auto& r : pr.rows)
        if (!r.empty()) {
          indices.push_back(r[0]);
          ensemble.push_back({r[1], r[2], x0n});
        }
      const BoundReport report = make_bound_report(bkind, params, ensemble);
      summary["max_ratio"] = report.max_ratio;
      if (report.calibration_failed) {
        summary["calibrated_C"] = nullptr;
        summary["calibration_failed"] = true;
      } else {
        summary["calibrated_C"] = report.calibrated_C;
      }
      const char* mcol = bkind == BoundKind::LinearSystem ? "sup_z" : "sup_x";
      ResultTable t;
      t.columns = {"path", mcol, "g_holder", "rhs", "ratio"};
      for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        t.rows.push_back(
            {indices[i], row.measured_sup, row.g_norm, row.rhs, row.ratio});
      }
      tables.push_back({"paths.csv", t});
      break;
    }

    case ExperimentKind::GradientCheck: {
      const GaussianSampler sampler(grid, H);
      const SampledPath h =
          sample_vector(grid, cfg.m, [&](double t) {
            return Eigen::VectorXd::Constant(cfg.m, t);
          });
      const int ne = static_cast<int>(cfg.epsilon_ladder.size());
      pr = std::visit(
          [&](const auto& model) {
            return detail::run_paths(cfg.paths, workers, [&](int i) {
              const SampledPath w =
                  sampler.sample(cfg.m, derive_stream(cfg.seed, i));
              const auto rep =
                  fd_gradient_check(model, x0, w, h, cfg.epsilon_ladder);
              std::vector<double> row{static_cast<double>(i), rep.slope,
                                      rep.linear_exact ? 1.0 : 0.0};
              for (double g : rep.gaps) row.push_back(g);
              return row;
            });
          },
          family.model);
      double min_slope = 1e300, max_slope = -1e300;
      int exact = 0, pass = 0, total = 0;
      for (const auto& r : pr.rows)
        if (!r.empty()) {
          ++total;
          if (r[2] > 0.5) {
            ++exact;
            ++pass;
            continue;
          }
          min_slope = std::min(min_slope, r[1]);
          max_slope = std::max(max_slope, r[1]);
          if (r[1] >= 0.8 && r[1] <= 1.2) ++pass;
        }
      summary["linear_exact_paths"] = exact;
      if (total > exact) {
        summary["min_slope"] = min_slope;
        summary["max_slope"] = max_slope;
      }
      summary["pass_fraction"] =
          total ? static_cast<double>(pass) / total : 0.0;
      std::vector<std::string> cols{"path", "slope", "linear_exact"};
      for (int e = 0; e < ne; ++e) cols.push_back("gap_eps_" + std::to_string(e));
      tables.push_back({"paths.csv", detail::collect_rows(cols, pr)});
      break;
    }

    case ExperimentKind::DensityStudy: {
      if (cfg.paths < 100)
        throw std::invalid_argument(
            "DensityStudy needs at least 100 paths for the KDE");
      const GaussianSampler sampler(grid, H);
      const double teval = cfg.t_eval < 0.0 ? cfg.T : cfg.t_eval;
      const int tindex = grid.nearest_node(teval);
      pr = std::visit(
          [&](const auto& model) {
            return detail::run_paths(cfg.paths, workers, [&](int i) {
              const SampledPath w =
                  sampler.sample(cfg.m, derive_stream(cfg.seed, i));
              const SampledPath x = solve_svie(model, x0, w, grid);
              const auto field = malliavin_field(model, x, w, grid);
              const auto gamma = malliavin_matrix(field, tindex, H);
              const auto spec = gamma_spectrum(gamma);
              std::vector<double> row{static_cast<double>(i)};
              for (int cdim = 0; cdim < cfg.d; ++cdim)
                row.push_back(x.at(tindex, cdim));
              row.push_back(spec.min_eigenvalue);
              row.push_back(spec.determinant);
              return row;
            });
          },
          family.model);
      std::vector<const std::vector<double>*> ok;
      for (const auto& r : pr.rows)
        if (!r.empty()) ok.push_back(&r);
      int positive = 0;
      Eigen::MatrixXd samples(cfg.d, ok.size());
      for (std::size_t i = 0; i < ok.size(); ++i) {
        for (int cdim = 0; cdim < cfg.d; ++cdim)
          samples(cdim, i) = (*ok[i])[1 + cdim];
        if ((*ok[i])[1 + cfg.d] > 0.0) ++positive;
      }
      summary["gamma_min_eig_positive_fraction"] =
          ok.empty() ? 0.0 : static_cast<double>(positive) / ok.size();
      summary["t_eval"] = grid.node(tindex);
      Eigen::VectorXd bw;
      if (cfg.bandwidth > 0.0)
        bw = Eigen::VectorXd::Constant(cfg.d, cfg.bandwidth);
      const Lattice lat = auto_lattice(samples, cfg.lattice_points);
      const DensityEstimate est = kde_density(samples, bw, lat);
      summary["kde_mass"] = est.mass();
      {
        nlohmann::json jb = nlohmann::json::array();
        for (int i = 0; i < est.bandwidth.size(); ++i)
          jb.push_back(est.bandwidth(i));
        summary["kde_bandwidth"] = jb;
      }
      ResultTable dens;
      for (int cdim = 0; cdim < cfg.d; ++cdim)
        dens.columns.push_back("x_" + std::to_string(cdim + 1));
      dens.columns.push_back("density");
      for (int p = 0; p < lat.total(); ++p) {
        std::vector<double> row;
        const Eigen::VectorXd pt = lat.point(p);
        for (int cdim = 0; cdim < cfg.d; ++cdim) row.push_back(pt(cdim));
        row.push_back(est.values(p));
        dens.rows.push_back(row);
      }
      std::vector<std::string> cols{"path"};
      for (int cdim = 0; cdim < cfg.d; ++cdim)
        cols.push_back("x_" + std::to_string(cdim + 1));
      cols.push_back("gamma_min_eig");
      cols.push_back("gamma_det");
      tables.push_back({"paths.csv", detail::collect_rows(cols, pr)});
      tables.push_back({"density.csv", dens});
      break;
    }

    case ExperimentKind::ScalingStudy: {
      const GaussianSampler sampler(grid, H);
      const SampledPath base_g = sampler.sample(cfg.m, derive_stream(cfg.seed, 0));
      const ScalingReport rep = std::visit(
          [&](const auto& model) {
            return scaling_experiment(model, x0, base_g, cfg.lambda_ladder,
                                      grid);
          },
          family.model);
      ResultTable t;
      t.columns = {"lambda", "sup_x"};
      for (std::size_t i = 0; i < rep.lambdas.size(); ++i)
        t.rows.push_back({rep.lambdas[i], rep.sup_norms[i]});
      summary["poly_slope"] = rep.poly_slope;
      summary["exp_slope"] = rep.exp_slope;
      summary["ss_poly"] = rep.ss_poly;
      summary["ss_exp"] = rep.ss_exp;
      summary["prefers_exponential"] = rep.prefers_exponential;
      summary["truncated"] = rep.truncated;
      tables.push_back({"paths.csv", t});
      break;
    }
  }

  manifest.complete = pr.failed.empty();
  summary["failed_paths"] = static_cast<int>(pr.failed.size());
  write_results(tables, summary, manifest, cfg.out_dir);
  return manifest;
}

} // namespace svie
