/**
 * @file pamlab.cpp
 * @brief Command-line front end: covariance info, constants compute, chi
 *        solve, variance-scan, simulate, clt-test, ergodicity-test and report.
 *
 * Every run writes its outputs and a manifest.json into a run directory
 * below --out.  Numeric CSV files carry no timestamps, so identical configs
 * and seeds reproduce identical bytes.  Exit codes: 0 success, 2 config
 * error, 3 numerical failure, 4 acceptance-check failure.
 */
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "pam/chi.hpp"
#include "pam/cli.hpp"
#include "pam/constants.hpp"
#include "pam/covariance.hpp"
#include "pam/parallel.hpp"
#include "pam/stats.hpp"

namespace fs = std::filesystem;
using namespace pam;
using cli::json;

namespace {

/// Formats a double with round-trip precision ("inf"/"nan" spelled out).
std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// A table written both as CSV and as aligned text.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> r) { rows.push_back(std::move(r)); }

  std::string csv() const {
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
  }

  std::string text() const {
    std::vector<std::size_t> w(header.size(), 0);
    auto widen = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size() && i < w.size(); ++i) w[i] = std::max(w[i], r[i].size());
    };
    widen(header);
    for (const auto& r : rows) widen(r);
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) {
        os << r[i];
        if (i + 1 < r.size()) os << std::string(w[i] - r[i].size() + 2, ' ');
      }
      os << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
  }
};

/// Shared state of one invocation.
struct Run {
  json cfg;
  std::string subcommand;
  std::string out_root = "runs";
  int threads = 1;
  bool dry_run = false;
  fs::path dir;
  cli::RunManifest manifest;

  void open() {
    manifest.subcommand = subcommand;
    manifest.config = cfg;
    manifest.config_hash = cli::hex64(cli::fnv1a64(cli::canonical(cfg)));
    manifest.started = cli::utc_now();
    std::string stamp = manifest.started;
    std::erase_if(stamp, [](char c) { return c == ':' || c == '-'; });
    std::string name = subcommand;
    std::replace(name.begin(), name.end(), ' ', '-');
    dir = fs::path(out_root) / (name + "_" + manifest.config_hash.substr(0, 12) + "_" + stamp);
    for (int k = 1; fs::exists(dir); ++k)
      dir = fs::path(out_root) / (name + "_" + manifest.config_hash.substr(0, 12) + "_" + stamp + "_" + std::to_string(k));
    fs::create_directories(dir);
    const GridSpec g = cli::parse_grid(cfg);
    manifest.seed_lineage = {{"master_seed", g.master_seed},
                             {"counter_layout", "philox stream per (master_seed, replica, step, purpose)"},
                             {"purposes", {{"noise", 1}, {"bridge", 2}, {"calibration", 3}, {"synthetic", 4}}}};
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream(dir / name, std::ios::binary) << bytes;
    manifest.checksums[name] = cli::hex64(cli::fnv1a64(bytes));
  }

  void write_binary(const std::string& name, const std::vector<double>& values) {
    std::ofstream out(dir / name, std::ios::binary);
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double)));
    out.close();
    manifest.checksums[name] = cli::file_checksum(dir / name);
  }

  int close(int code) {
    manifest.exit_code = code;
    manifest.finished = cli::utc_now();
    std::ofstream(dir / "manifest.json") << manifest.to_json().dump(2) << "\n";
    std::cout << "run directory: " << dir.string() << "\n";
    return code;
  }
};

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int covariance_info(Run& run) {
  const auto m = cli::parse_model(run.cfg);
  const auto lambdas = cli::parse_positive_list(run.cfg, "lambda_list");
  run.open();
  Table t{{"label", "quantity", "parameter", "value"}, {}};
  for (double l : lambdas) t.add({"dalang-functional", "upsilon", num(l), num(covariance::upsilon(m, l))});
  const bool dalang = covariance::dalang_satisfied(m);
  t.add({"dalang-condition", "upsilon(1) finite", "", dalang ? "PASSED" : "FAILED"});
  t.add({"ergodicity-criterion", "no spectral atom at 0", "", covariance::ergodic_condition(m) ? "PASSED" : "FAILED"});
  const bool rfin = covariance::r_functional_finite(m);
  t.add({"r-finiteness-criterion", "int |z|^-1 f^(dz) finite", "", rfin ? "PASSED" : "FAILED"});
  t.add({"r-functional", "R(f)", "", num(rfin ? covariance::r_functional(m) : std::numeric_limits<double>::infinity())});
  t.add({"rajchman", "declared f^ -> 0 at infinity", "", m.rajchman ? "true" : "false"});
  t.add({"total-mass", "f(R^d)", "", num(m.total_mass)});
  std::string regime = "none (hypotheses fail)";
  try {
    regime = constants::predicted_variance(m, 1.0).regime;
  } catch (const Error& e) {
    regime = std::string("none: ") + e.what();
  }
  t.add({"variance-regime", "asymptotic regime", "", "\"" + regime + "\""});
  std::cout << "model: " << kind_name(m.kind) << " d=" << m.dimension << "\n" << t.text();
  if (!dalang) std::cout << "Dalang condition FAILED: Upsilon(1) = infinity, no mild solution exists\n";
  run.write("covariance_info.csv", t.csv());
  run.manifest.summary = {{"dalang", dalang}, {"regime", regime}};
  return run.close(cli::kSuccess);
}

int constants_compute(Run& run) {
  const auto m = cli::parse_model(run.cfg);
  const auto lambdas = cli::parse_positive_list(run.cfg, "lambda_list");
  const auto orders = cli::parse_positive_list(run.cfg, "moment_orders");
  const double t = cli::parse_grid(run.cfg).t_end;
  run.open();
  Table tab{{"label", "quantity", "parameter", "value"}, {}};
  auto guarded = [&](const std::string& label, const std::string& q, const std::string& p, auto&& fn) {
    try {
      tab.add({label, q, p, num(fn())});
    } catch (const Error& e) {
      tab.add({label, q, p, "n/a"});
      std::cerr << label << " " << q << " " << p << ": " << e.what() << "\n";
    }
  };
  for (double l : lambdas) guarded("dalang-functional", "upsilon", num(l), [&] { return covariance::upsilon(m, l); });
  for (double k : orders) {
    guarded("bdg-constant", "z_k", num(k), [&] { return constants::bdg_constant(k); });
    guarded("beta-eps-k", "beta_{1/2,k}", num(k), [&] { return constants::beta_eps_k(m, 0.5, k); });
    guarded("moment-bound", "log c_{t,k} (min over eps)", num(k), [&] { return constants::log_moment_bound_min(m, t, k); });
    guarded("malliavin-constant", "log C_{t,k}", num(k), [&] { return constants::log_malliavin_constant(m, t, k); });
  }
  if (m.kind == CovarianceKind::RieszKernel) {
    const double b = m.riesz_exponent;
    const int d = m.dimension;
    guarded("riesz-constant", "kappa_{beta,d}", num(b), [&] { return m.riesz_constant; });
    if (b < 1.0) guarded("riesz-subcritical", "sigma_0", num(b), [&] { return constants::sigma0(b, d); });
    if (b == 1.0) guarded("riesz-critical", "sigma_1", num(b), [&] { return constants::sigma1(d); });
    if (b > 1.0) guarded("riesz-supercritical", "sigma_2", num(b), [&] { return constants::sigma2(b, d); });
  }
  try {
    const auto p = constants::predicted_variance(m, t);
    tab.add({p.regime, "variance exponent", "", num(p.exponent)});
    tab.add({p.regime, "log power", "", num(p.log_power)});
    tab.add({p.regime, "limit constant (low)", num(t), num(p.constant_lo)});
    tab.add({p.regime, "limit constant (high)", num(t), num(p.constant_hi)});
  } catch (const Error& e) {
    std::cerr << "variance prediction: " << e.what() << "\n";
  }
  std::cout << tab.text();
  run.write("constants.csv", tab.csv());
  return run.close(cli::kSuccess);
}

ChiGrid chi_grid(const json& cfg, int threads) {
  const json& c = cfg.at("experiment").at("chi");
  ChiGrid g;
  g.n_time = c.at("n_time").get<int>();
  g.n_space = c.at("n_space").get<int>();
  g.r_max = c.value("r_max", 0.0);
  g.threads = threads;
  return g;
}

int chi_solve(Run& run) {
  const auto m = cli::parse_model(run.cfg);
  const double t = cli::parse_grid(run.cfg).t_end;
  const auto grid = chi_grid(run.cfg, run.threads);
  run.open();
  const bool refine = run.cfg.at("experiment").at("chi").value("refine", false);
  const auto tab = refine ? chi::solve_chi_refined(m, t, grid) : chi::solve_chi(m, t, grid);
  std::ostringstream os;
  os << "# two-point covariance chi_s(r) of U\n"
     << "# model=" << kind_name(m.kind) << " d=" << m.dimension << " t=" << num(t) << "\n"
     << "# n_time=" << tab.times.size() - 1 << " n_space=" << tab.radii.size() << " r_max=" << num(tab.r_max())
     << " reliable_radius=" << num(tab.reliable_radius) << " tail_fraction=" << num(tab.tail_fraction)
     << " decay_exponent=" << num(tab.decay_exponent) << "\n"
     << "label,level,s,r,chi\n";
  for (std::size_t i = 0; i < tab.times.size(); ++i)
    for (std::size_t k = 0; k < tab.radii.size(); ++k)
      os << "chi-renewal," << i << "," << num(tab.times[i]) << "," << num(tab.radii[k]) << "," << num(tab.values[i][k])
         << "\n";
  run.write("chi_table.csv", os.str());
  std::cout << "chi_t(0) = " << num(tab(0.0)) << "  (t = " << num(t) << ", reliable radius " << num(tab.reliable_radius)
            << ", tail fraction " << num(tab.tail_fraction) << ")\n";
  run.manifest.summary = {{"chi_t_0", tab(0.0)}, {"reliable_radius", tab.reliable_radius}};
  return run.close(cli::kSuccess);
}

int variance_scan(Run& run) {
  const auto m = cli::parse_model(run.cfg);
  const double t = cli::parse_grid(run.cfg).t_end;
  const auto Ns = cli::parse_N_list(run.cfg);
  run.open();
  std::optional<ChiTable> tab;
  try {
    tab = chi::solve_chi(m, t, chi_grid(run.cfg, run.threads));
  } catch (const Error& e) {
    std::cerr << "chi table unavailable, V^(1) only: " << e.what() << "\n";
  }
  const auto rows = chi::asymptotic_check(m, t, Ns, tab ? &*tab : nullptr);
  Table out{{"label", "N", "v1", "full", "rescaled", "predicted", "relative_gap", "rate"}, {}};
  for (const auto& r : rows)
    out.add({r.regime, num(r.N), num(r.v1), num(r.full), num(r.rescaled), num(r.predicted), num(r.relative_gap),
             "\"" + r.rate + "\""});
  std::cout << out.text();
  run.write("variance_scan.csv", out.csv());
  return run.close(cli::kSuccess);
}

stats::EnsembleSpec ensemble(const Run& run) {
  stats::EnsembleSpec s;
  s.model = cli::parse_model(run.cfg);
  s.grid = cli::window_grid(run.cfg);
  s.replicas = cli::parse_replicas(run.cfg);
  s.scheme = cli::parse_scheme(run.cfg);
  s.threads = run.threads;
  return s;
}

std::string describe(const stats::EnsembleSpec& s, const std::vector<double>& Ns) {
  std::ostringstream os;
  os << "model " << kind_name(s.model.kind) << " d=" << s.model.dimension << "; scheme " << stats::scheme_name(s.scheme)
     << "; grid L=" << num(s.grid.L) << " M=" << s.grid.M << " dx=" << num(s.grid.dx()) << " t0=" << num(s.grid.t0)
     << " t=" << num(s.grid.t_end) << " J=" << s.grid.J
     << (s.grid.spacing == TimeSpacing::Geometric ? " (geometric)" : " (uniform)") << "; replicas " << s.replicas
     << "; N =";
  for (double N : Ns) os << " " << num(N);
  return os.str();
}

/// Flat row-major index of the cell at the origin (index M/2 on every axis).
std::size_t origin_index(const GridSpec& g) {
  std::size_t idx = 0;
  for (int k = 0; k < g.d; ++k) idx = idx * g.M + g.M / 2;
  return idx;
}

int simulate(Run& run) {
  const auto spec = ensemble(run);
  const auto Ns = cli::parse_N_list(run.cfg);
  const int dump = run.cfg.at("experiment").value("dump_fields", 1);
  if (run.dry_run) {
    std::cout << "dry run: " << describe(spec, Ns) << "\n";
    return cli::kSuccess;
  }
  run.open();
  const auto R = static_cast<std::size_t>(spec.replicas);
  std::vector<double> origin(R);
  std::vector<std::vector<double>> S(Ns.size(), std::vector<double>(R));
  std::vector<std::vector<double>> fields(std::min<std::size_t>(R, std::max(dump, 0)));
  std::vector<double> negative(R);
  stats::for_each_replica(spec, [&](std::size_t r, const SolutionField& f) {
    origin[r] = f.U[origin_index(f.grid)];
    for (std::size_t k = 0; k < Ns.size(); ++k) S[k][r] = stats::spatial_average(f, Ns[k]);
    negative[r] = f.negative_fraction;
    if (r < fields.size()) fields[r] = f.U;
  });
  std::ostringstream os;
  os << "label,replica,U_origin,negative_fraction";
  for (double N : Ns) os << ",S_N=" << num(N);
  os << "\n";
  for (std::size_t r = 0; r < R; ++r) {
    os << "spatial-average," << r << "," << num(origin[r]) << "," << num(negative[r]);
    for (std::size_t k = 0; k < Ns.size(); ++k) os << "," << num(S[k][r]);
    os << "\n";
  }
  run.write("samples.csv", os.str());
  if (!fields.empty()) {
    std::vector<double> flat;
    for (const auto& f : fields) flat.insert(flat.end(), f.begin(), f.end());
    run.write_binary("fields.bin", flat);
    const json side = {{"dtype", "float64"},
                       {"endianness", "native (little on x86-64)"},
                       {"layout", "replica-major, then row-major M^d cells"},
                       {"d", spec.grid.d},
                       {"M", spec.grid.M},
                       {"L", spec.grid.L},
                       {"t", spec.grid.t_end},
                       {"replicas", fields.size()},
                       {"scheme", stats::scheme_name(spec.scheme)},
                       {"cell_coordinate", "x_n = -L/2 + n L/M"},
                       {"quantity", "U(t, x) = u(t, x) / p_t(x)"}};
    run.write("fields.json", side.dump(2) + "\n");
  }
  stats::RunningMoments mo;
  for (double u : origin) mo.add(u);
  std::cout << "E[U(t,0)] = " << num(mo.mean) << " +- " << num(mo.standard_error()) << "\n";
  run.manifest.summary = {{"mean_U_origin", mo.mean}, {"se", mo.standard_error()}};
  return run.close(cli::kSuccess);
}

int clt_test(Run& run) {
  const auto spec = ensemble(run);
  const auto Ns = cli::parse_N_list(run.cfg);
  const double t = spec.grid.t_end;
  const auto pred = constants::predicted_variance(spec.model, t);
  if (run.dry_run) {
    std::cout << "dry run: " << describe(spec, Ns) << "\n"
              << "target: " << pred.regime << ", rate " << constants::rate_name(pred.leading_rate)
              << ", constant [" << num(pred.constant_lo) << ", " << num(pred.constant_hi) << "]\n"
              << "planned work: " << spec.replicas << " replicas x " << spec.grid.J << " steps x "
              << spec.grid.cells() << " cells; nothing executed\n";
    return cli::kSuccess;
  }
  run.open();
  const json& e = run.cfg.at("experiment");
  stats::CltConfig cfg;
  cfg.Ns = Ns;
  cfg.rate_tolerance = e.value("rate_tolerance", 0.15);
  cfg.constant_tolerance = e.value("constant_tolerance", 0.40);
  cfg.normality_level = e.value("normality_level", 0.01);
  const auto samples = stats::window_samples(spec, Ns);
  const auto rep = stats::make_clt_report(pred, stats::variance_scaling(samples, Ns), cfg);
  Table tab{{"label", "N", "variance", "se", "rescaled", "ks", "ks_p", "ad", "ad_p"}, {}};
  for (std::size_t k = 0; k < Ns.size(); ++k) {
    const auto& sc = rep.scaling;
    std::vector<std::string> row{rep.regime, num(Ns[k]), num(sc.variances[k]), num(sc.ses[k]), num(rep.rescaled[k])};
    if (k < sc.normality.size()) {
      const auto& n = sc.normality[k];
      row.insert(row.end(), {num(n.ks), num(n.ks_p), num(n.ad), num(n.ad_p)});
    } else {
      row.insert(row.end(), {"nan", "nan", "nan", "nan"});
    }
    tab.add(row);
  }
  std::ostringstream dump;
  dump << "label,replica";
  for (double N : Ns) dump << ",S_N=" << num(N);
  dump << "\n";
  for (std::size_t r = 0; r < samples.front().size(); ++r) {
    dump << "spatial-average," << r;
    for (const auto& s : samples) dump << "," << num(s[r]);
    dump << "\n";
  }
  const json verdict = {{"label", rep.regime},
                        {"target_rate", rep.target_rate},
                        {"variance_exponent", rep.variance_exponent},
                        {"prefactor_exponent", rep.prefactor_exponent},
                        {"target_delta", rep.target_delta},
                        {"target_constant", {rep.target_constant_lo, rep.target_constant_hi}},
                        {"fitted_gamma", rep.scaling.gamma},
                        {"fitted_gamma_se", rep.scaling.gamma_se},
                        {"fitted_delta", rep.scaling.delta},
                        {"fitted_C", rep.scaling.C},
                        {"log_margin", rep.scaling.margin},
                        {"rescaled", rep.rescaled},
                        {"replicas", rep.scaling.replicas},
                        {"rate_pass", rep.rate_pass},
                        {"log_pass", rep.log_pass},
                        {"constant_pass", rep.constant_pass},
                        {"normality_pass", rep.normality_pass},
                        {"pass", rep.pass()},
                        {"caveat", "normality is judged by KS/AD distances; total variation is not estimable from samples"}};
  std::cout << describe(spec, Ns) << "\n" << tab.text() << "fit: gamma = " << num(rep.scaling.gamma) << " +- "
            << num(rep.scaling.gamma_se) << ", delta = " << rep.scaling.delta << ", C = " << num(rep.scaling.C)
            << "\nverdict: " << (rep.pass() ? "PASS" : "FAIL") << "\n";
  run.write("scaling.csv", tab.csv());
  run.write("samples.csv", dump.str());
  run.write("verdict.json", verdict.dump(2) + "\n");
  run.manifest.summary = verdict;
  return run.close(rep.pass() ? cli::kSuccess : cli::kAcceptanceFailure);
}

int ergodicity_test(Run& run) {
  const auto spec = ensemble(run);
  const auto Ns = cli::parse_N_list(run.cfg);
  const auto fns = cli::parse_test_functions(run.cfg);
  const auto shifts = cli::parse_shifts(run.cfg, fns.size(), spec.grid.d);
  if (run.dry_run) {
    std::cout << "dry run: " << describe(spec, Ns) << "\n";
    return cli::kSuccess;
  }
  run.open();
  const auto t = stats::ergodicity_check(spec, Ns, fns, shifts);
  Table tab{{"label", "N", "V_N", "se", "mean_abs_S", "mean_abs_S_se"}, {}};
  for (std::size_t k = 0; k < Ns.size(); ++k)
    tab.add({"ergodicity-functional", num(Ns[k]), num(t.V[k]), num(t.se[k]), num(t.mean_abs_S[k]),
             num(t.mean_abs_S_se[k])});
  const bool pass = t.strictly_decreasing && t.decay_ratio < 0.5;
  const json verdict = {{"label", "ergodicity-functional"},
                        {"decay_ratio", t.decay_ratio},
                        {"strictly_decreasing", t.strictly_decreasing},
                        {"replicas", t.replicas},
                        {"pass", pass}};
  std::cout << describe(spec, Ns) << "\n" << tab.text() << "decay ratio V(N_max)/V(N_min) = " << num(t.decay_ratio)
            << "\nverdict: " << (pass ? "PASS" : "FAIL") << "\n";
  run.write("ergodicity.csv", tab.csv());
  run.write("verdict.json", verdict.dump(2) + "\n");
  run.manifest.summary = verdict;
  return run.close(pass ? cli::kSuccess : cli::kAcceptanceFailure);
}

int report(Run& run) {
  Table tab{{"run", "subcommand", "config_hash", "exit_code", "pass", "started"}, {}};
  std::vector<fs::path> dirs;
  if (fs::exists(run.out_root))
    for (const auto& entry : fs::directory_iterator(run.out_root))
      if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    json m;
    try {
      std::ifstream(d / "manifest.json") >> m;
    } catch (const json::exception&) {
      continue;
    }
    if (m.value("subcommand", "") == "report") continue;
    std::string pass = "";
    if (m.contains("summary") && m["summary"].is_object() && m["summary"].contains("pass"))
      pass = m["summary"]["pass"].get<bool>() ? "true" : "false";
    tab.add({d.filename().string(), "\"" + m.value("subcommand", "") + "\"", m.value("config_hash", ""),
             std::to_string(m.value("exit_code", -1)), pass, m.value("started", "")});
  }
  run.open();
  std::cout << tab.text();
  run.write("report.csv", tab.csv());
  run.manifest.summary = {{"runs", tab.rows.size()}};
  return run.close(cli::kSuccess);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pamlab: parabolic Anderson model experiments (delta initial condition, Gaussian noise)"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> sets;
  int threads = parallel::default_threads();
  long long seed = -1;
  bool dry_run = false;
  auto add_common = [&](CLI::App* a) {
    a->add_option("--config", config_path, "JSON run configuration");
    a->add_option("--set", sets, "override a dotted key, e.g. --set model.a=0.5")->take_all();
    a->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    a->add_option("--out", out_dir, "root directory for run outputs");
    a->add_flag("--dry-run", dry_run, "validate and print the plan without computing");
    a->add_option("--seed", seed, "master seed (overrides grid.master_seed)")->check(CLI::NonNegativeNumber);
  };
  add_common(&app);
  std::string chosen;
  auto* cov = app.add_subcommand("covariance", "covariance model queries");
  auto* cov_info = cov->add_subcommand("info", "Upsilon table, R(f) and predicates");
  auto* cons = app.add_subcommand("constants", "closed-form constants");
  auto* cons_compute = cons->add_subcommand("compute", "BDG, moment and Riesz constants");
  auto* chi_cmd = app.add_subcommand("chi", "two-point covariance solver");
  auto* chi_solve_cmd = chi_cmd->add_subcommand("solve", "solve the chi renewal equation");
  auto* scan = app.add_subcommand("variance-scan", "chi/spectral variance asymptotics");
  auto* sim = app.add_subcommand("simulate", "Monte Carlo replicas of U(t, .)");
  auto* clt = app.add_subcommand("clt-test", "scaling fit and normality of S_{N,t}");
  auto* erg = app.add_subcommand("ergodicity-test", "decay of the ergodicity functional V_N(t)");
  auto* rep = app.add_subcommand("report", "aggregate prior runs");
  for (auto* a : {cov, cov_info, cons, cons_compute, chi_cmd, chi_solve_cmd, scan, sim, clt, erg, rep}) add_common(a);
  cov->require_subcommand(1);
  cons->require_subcommand(1);
  chi_cmd->require_subcommand(1);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }
  Run run;
  run.threads = threads;
  run.dry_run = dry_run;
  try {
    run.cfg = cli::load_config(config_path);
    for (const auto& s : sets) cli::apply_override(run.cfg, s);
    if (seed >= 0) run.cfg["grid"]["master_seed"] = seed;
    if (!out_dir.empty()) run.cfg["output"] = out_dir;
    cli::validate_config(run.cfg);
    run.out_root = run.cfg.at("output").get<std::string>();
    if (cov_info->parsed()) {
      run.subcommand = "covariance info";
      return covariance_info(run);
    }
    if (cons_compute->parsed()) {
      run.subcommand = "constants compute";
      return constants_compute(run);
    }
    if (chi_solve_cmd->parsed()) {
      run.subcommand = "chi solve";
      return chi_solve(run);
    }
    if (scan->parsed()) {
      run.subcommand = "variance-scan";
      return variance_scan(run);
    }
    if (sim->parsed()) {
      run.subcommand = "simulate";
      return simulate(run);
    }
    if (clt->parsed()) {
      run.subcommand = "clt-test";
      return clt_test(run);
    }
    if (erg->parsed()) {
      run.subcommand = "ergodicity-test";
      return ergodicity_test(run);
    }
    if (rep->parsed()) {
      run.subcommand = "report";
      return report(run);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error at " << e.what() << "\n";
    return cli::kConfigError;
  } catch (const UnsupportedRegimeError& e) {
    std::cerr << "unsupported regime: " << e.what() << "\n";
    return cli::kConfigError;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    if (!run.dir.empty()) run.close(cli::kNumericalFailure);
    return cli::kNumericalFailure;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kConfigError;
  }
  return cli::kConfigError;
}
