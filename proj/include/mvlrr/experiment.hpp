#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "mvlrr/clustering.hpp"
#include "mvlrr/dataset.hpp"
#include "mvlrr/error.hpp"
#include "mvlrr/graph.hpp"
#include "mvlrr/metrics.hpp"
#include "mvlrr/random.hpp"
#include "mvlrr/solver.hpp"

namespace mvlrr {

/// Error tagged with the pipeline stage that raised it.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& message)
      : Error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct SyntheticSource {
  int n = 90;
  int k = 3;
  int views = 3;
  std::vector<int> dims{10, 15, 20};
  double noise_sigma = 0.05;
};

struct Corruption {
  double fraction = 0.2;
  double low = -5.0;
  double high = 5.0;
};

enum class Method { proposed, shared_lrr };

inline const char* to_string(Method m) { return m == Method::proposed ? "proposed" : "shared_lrr"; }

struct ExperimentSpec {
  std::variant<std::filesystem::path, SyntheticSource> source = SyntheticSource{};
  std::optional<Corruption> corruption;
  SolverConfig solver;
  double tau = 1e-3;
  std::vector<double> sweep_lambda3;
  std::vector<double> sweep_beta;
  int repeat = 1;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out_dir;
  bool trace = false;
  bool dump_graphs = false;
  bool dump_affinity = false;

  void validate() const {
    if (repeat < 1) throw Error("repeat must be at least 1");
    if (sweep_lambda3.empty() != sweep_beta.empty())
      throw Error("sweep grid needs both a lambda3 list and a beta list");
    if (!(tau >= 0)) throw Error("tau must be nonnegative");
    solver.validate();
  }
  bool sweeping() const { return !sweep_lambda3.empty(); }
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  double acc = std::numeric_limits<double>::quiet_NaN();
  double nmi = std::numeric_limits<double>::quiet_NaN();
  int iterations = 0;
  bool converged = false;
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  std::vector<int> labels;
  // filled only when tracing
  std::vector<double> residual_trace;
  std::vector<double> objective_trace;
  std::vector<double> mu_trace;
  std::vector<std::vector<double>> xi_trace;
};

struct Report {
  Method method = Method::proposed;
  std::string dataset;
  std::vector<TrialResult> trials;
  double acc_mean = 0, acc_std = 0, nmi_mean = 0, nmi_std = 0;
};

struct SweepCell {
  double lambda3 = 0;
  double beta = 0;
  Report report;
};

// ---------------------------------------------------------------------------
// key=value configuration

namespace detail {

inline double parse_double(std::string_view key, std::string_view value) {
  double v = 0;
  auto t = trim(value);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw Error("invalid number '" + std::string(value) + "' for " + std::string(key));
  return v;
}

inline long long parse_int(std::string_view key, std::string_view value) {
  long long v = 0;
  auto t = trim(value);
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw Error("invalid integer '" + std::string(value) + "' for " + std::string(key));
  return v;
}

inline std::vector<double> parse_double_list(std::string_view key, std::string_view text) {
  std::vector<double> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_double(key, text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline SigmaMode parse_sigma_mode(std::string_view text) {
  const auto colon = text.find(':');
  const auto kind = detail::trim(text.substr(0, colon));
  const auto arg = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (kind == "self_tuning")
    return SelfTuning{arg.empty() ? 7 : static_cast<int>(detail::parse_int("sigma_mode", arg))};
  if (kind == "global") return GlobalSigma{detail::parse_double("sigma_mode", arg)};
  throw Error("unknown sigma_mode '" + std::string(text) + "' (self_tuning:K or global:SIGMA)");
}

inline std::string format_sigma_mode(const SigmaMode& mode) {
  if (const auto* st = std::get_if<SelfTuning>(&mode)) return "self_tuning:" + std::to_string(st->k);
  return "global:" + detail::format_double(std::get<GlobalSigma>(mode).sigma);
}

inline ViewSweep parse_view_sweep(std::string_view text) {
  if (text == "jacobi") return ViewSweep::jacobi;
  if (text == "gauss_seidel") return ViewSweep::gauss_seidel;
  throw Error("unknown view sweep '" + std::string(text) + "' (jacobi or gauss_seidel)");
}

/// Applies one solver key; returns false for keys it does not own.
inline bool apply_solver_key(SolverConfig& cfg, std::string_view key, std::string_view value) {
  using detail::parse_double;
  using detail::parse_int;
  if (key == "lambda1") cfg.lambda1 = parse_double(key, value);
  else if (key == "lambda2") cfg.lambda2 = parse_double(key, value);
  else if (key == "lambda3") cfg.lambda3 = parse_double(key, value);
  else if (key == "beta") cfg.beta = parse_double(key, value);
  else if (key == "mu0") cfg.mu0 = parse_double(key, value);
  else if (key == "mu_max") cfg.mu_max = parse_double(key, value);
  else if (key == "rho") cfg.rho = parse_double(key, value);
  else if (key == "xi_safety") cfg.xi_safety = parse_double(key, value);
  else if (key == "eps_primal") cfg.eps_primal = parse_double(key, value);
  else if (key == "max_iter") cfg.max_iter = static_cast<int>(parse_int(key, value));
  else if (key == "view_sweep") cfg.view_sweep = parse_view_sweep(detail::trim(value));
  else if (key == "neighbors") cfg.neighbors = static_cast<int>(parse_int(key, value));
  else if (key == "sigma_mode") cfg.sigma_mode = parse_sigma_mode(value);
  else if (key == "threads") cfg.threads = static_cast<int>(parse_int(key, value));
  else return false;
  return true;
}

/// Reads `key=value` lines; blank lines and `#` comments are skipped.
inline SolverConfig parse_solver_config(std::istream& in, SolverConfig cfg = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw Error("config line " + std::to_string(line_no) + ": expected key=value");
    const auto key = detail::trim(t.substr(0, eq));
    const auto value = detail::trim(t.substr(eq + 1));
    // experiment-level keys in a provenance dump are tolerated
    static const char* const kForeign[] = {"tau", "repeat", "seed", "source", "corruption",
                                           "sweep_lambda3", "sweep_beta", "method"};
    if (!apply_solver_key(cfg, key, value)) {
      bool foreign = false;
      for (const char* f : kForeign) foreign = foreign || key == f;
      if (!foreign)
        throw Error("config line " + std::to_string(line_no) + ": unknown key '" +
                    std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

inline SolverConfig load_solver_config(const std::filesystem::path& path, SolverConfig cfg = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  return parse_solver_config(in, cfg);
}

inline std::string format_solver_config(const SolverConfig& cfg) {
  using detail::format_double;
  std::ostringstream out;
  out << "lambda1=" << format_double(cfg.lambda1) << '\n'
      << "lambda2=" << format_double(cfg.lambda2) << '\n'
      << "lambda3=" << format_double(cfg.lambda3) << '\n'
      << "beta=" << format_double(cfg.beta) << '\n'
      << "mu0=" << format_double(cfg.mu0) << '\n'
      << "mu_max=" << format_double(cfg.mu_max) << '\n'
      << "rho=" << format_double(cfg.rho) << '\n'
      << "xi_safety=" << format_double(cfg.xi_safety) << '\n'
      << "eps_primal=" << format_double(cfg.eps_primal) << '\n'
      << "max_iter=" << cfg.max_iter << '\n'
      << "view_sweep=" << to_string(cfg.view_sweep) << '\n'
      << "neighbors=" << cfg.neighbors << '\n'
      << "sigma_mode=" << format_sigma_mode(cfg.sigma_mode) << '\n'
      << "threads=" << cfg.threads << '\n';
  return out.str();
}

/// Every resolved setting of an experiment, one key=value per line.
inline std::string format_experiment(const ExperimentSpec& spec) {
  using detail::format_double;
  std::ostringstream out;
  if (const auto* path = std::get_if<std::filesystem::path>(&spec.source)) {
    out << "source=data:" << path->string() << '\n';
  } else {
    const auto& s = std::get<SyntheticSource>(spec.source);
    out << "source=synth:" << s.n << ',' << s.k << ',' << s.views << ',';
    for (std::size_t i = 0; i < s.dims.size(); ++i) out << (i ? ":" : "") << s.dims[i];
    out << ',' << format_double(s.noise_sigma) << '\n';
  }
  if (spec.corruption) {
    out << "corruption=" << format_double(spec.corruption->fraction) << ','
        << format_double(spec.corruption->low) << ',' << format_double(spec.corruption->high)
        << '\n';
  } else {
    out << "corruption=none\n";
  }
  out << format_solver_config(spec.solver);
  out << "tau=" << format_double(spec.tau) << '\n'
      << "repeat=" << spec.repeat << '\n'
      << "seed=" << spec.seed << '\n';
  auto list = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + detail::format_double(v[i]);
    return s.empty() ? std::string("none") : s;
  };
  out << "sweep_lambda3=" << list(spec.sweep_lambda3) << '\n'
      << "sweep_beta=" << list(spec.sweep_beta) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// pipeline

/// Sub-seed streams within one trial.
enum class SeedStream : std::uint64_t { trial = 0, synthesis = 1, corruption = 2, clustering = 3 };

inline std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return derive_seed(seed, static_cast<std::uint64_t>(SeedStream::trial),
                     static_cast<std::uint64_t>(trial));
}

inline std::uint64_t stream_seed(std::uint64_t trial_seed, SeedStream stream) {
  return derive_seed(trial_seed, static_cast<std::uint64_t>(stream), 0);
}

inline std::string dataset_label(const ExperimentSpec& spec) {
  if (const auto* path = std::get_if<std::filesystem::path>(&spec.source)) {
    auto name = path->filename().string();
    return name.empty() ? path->parent_path().filename().string() : name;
  }
  const auto& s = std::get<SyntheticSource>(spec.source);
  return "synthetic_n" + std::to_string(s.n) + "_k" + std::to_string(s.k) + "_v" +
         std::to_string(s.views);
}

namespace detail {

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(stage, e.what());
  }
}

inline void summarize(Report& r) {
  auto stats = [&](auto field, double& mean, double& sd) {
    mean = 0;
    for (const auto& t : r.trials) mean += field(t);
    mean /= static_cast<double>(r.trials.size());
    sd = 0;
    for (const auto& t : r.trials) sd += (field(t) - mean) * (field(t) - mean);
    sd = std::sqrt(sd / static_cast<double>(r.trials.size()));
  };
  stats([](const TrialResult& t) { return t.acc; }, r.acc_mean, r.acc_std);
  stats([](const TrialResult& t) { return t.nmi; }, r.nmi_mean, r.nmi_std);
}

inline std::filesystem::path output_path(const ExperimentSpec& spec, const std::string& name) {
  return *spec.out_dir / name;
}

}  // namespace detail

/// Loads a directory dataset once; synthetic sources are regenerated per trial.
inline std::optional<MultiViewDataset> load_source(const ExperimentSpec& spec) {
  if (const auto* path = std::get_if<std::filesystem::path>(&spec.source))
    return detail::staged("load", [&] { return load_dataset(*path); });
  return std::nullopt;
}

/// One trial of data -> graphs -> solve -> fuse -> cluster -> metrics.
inline TrialResult run_trial(const ExperimentSpec& spec, Method method, int trial,
                             const std::optional<MultiViewDataset>& loaded) {
  TrialResult out;
  out.trial = trial;
  out.seed = trial_seed(spec.seed, trial);

  MultiViewDataset ds = detail::staged("data", [&] {
    if (loaded) return *loaded;
    const auto& s = std::get<SyntheticSource>(spec.source);
    return synthesize_multiview(s.n, s.k, s.views, s.dims, s.noise_sigma,
                                stream_seed(out.seed, SeedStream::synthesis));
  });
  if (spec.corruption) {
    ds = detail::staged("corrupt", [&] {
      return corrupt_features(ds, spec.corruption->fraction, spec.corruption->low,
                              spec.corruption->high, stream_seed(out.seed, SeedStream::corruption));
    });
  }

  std::vector<MatrixXd> representations;
  if (method == Method::proposed) {
    const auto graphs = detail::staged("graph", [&] { return build_graphs(ds, spec.solver); });
    if (spec.dump_graphs && spec.out_dir) {
      for (std::size_t i = 0; i < graphs.size(); ++i)
        write_csv_matrix(detail::output_path(spec, "graph_view" + std::to_string(i) + "_trial" +
                                                       std::to_string(trial) + ".csv"),
                         graphs[i].weights);
    }
    SolverResult r = detail::staged("solve", [&] { return solve(ds, graphs, spec.solver); });
    out.iterations = r.iterations;
    out.converged = r.converged;
    if (!r.residual_trace.empty()) out.final_residual = r.residual_trace.back();
    if (spec.trace) {
      out.residual_trace = r.residual_trace;
      out.objective_trace = r.objective_trace;
      out.mu_trace = r.mu_trace;
      out.xi_trace = r.xi_trace;
    }
    representations = std::move(r.z);
  } else {
    SharedLrrResult r = detail::staged("solve", [&] { return solve_shared_lrr(ds, spec.solver); });
    out.iterations = r.iterations;
    out.converged = r.converged;
    if (!r.residual_trace.empty()) out.final_residual = r.residual_trace.back();
    if (spec.trace) {
      out.residual_trace = r.residual_trace;
      out.objective_trace = r.objective_trace;
      double mu = spec.solver.mu0;
      for (std::size_t i = 0; i < r.residual_trace.size(); ++i) {
        out.mu_trace.push_back(mu);
        mu = std::min(spec.solver.mu_max, spec.solver.rho * mu);
      }
    }
    representations.push_back(std::move(r.z));
  }

  ClusteringResult clustered = detail::staged("cluster", [&] {
    return cluster_representations(representations, ds.num_clusters, spec.tau,
                                   stream_seed(out.seed, SeedStream::clustering));
  });
  out.labels = clustered.labels;
  if (spec.dump_affinity && spec.out_dir)
    write_csv_matrix(detail::output_path(spec, std::string(to_string(method)) + "_affinity_trial" +
                                                   std::to_string(trial) + ".csv"),
                     clustered.fused);
  if (ds.labels) {
    detail::staged("metrics", [&] {
      out.acc = accuracy(out.labels, *ds.labels);
      out.nmi = nmi(out.labels, *ds.labels);
      return 0;
    });
  }
  return out;
}

inline Report run_method(const ExperimentSpec& spec, Method method) {
  detail::staged("config", [&] {
    spec.validate();
    return 0;
  });
  const auto loaded = load_source(spec);
  if (spec.out_dir) std::filesystem::create_directories(*spec.out_dir);
  Report report;
  report.method = method;
  report.dataset = dataset_label(spec);
  for (int t = 0; t < spec.repeat; ++t) report.trials.push_back(run_trial(spec, method, t, loaded));
  detail::summarize(report);
  return report;
}

/// Repeated runs of the proposed pipeline.
inline Report run_single(const ExperimentSpec& spec) { return run_method(spec, Method::proposed); }

/// Repeated runs of the shared-representation baseline.
inline Report run_baseline(const ExperimentSpec& spec) {
  return run_method(spec, Method::shared_lrr);
}

/// Every (lambda3, beta) pair of the grid, lambda3-major. All cells share the
/// trial seeds, so differences between cells come from the parameters alone.
inline std::vector<SweepCell> run_sweep(const ExperimentSpec& spec) {
  detail::staged("config", [&] {
    spec.validate();
    return 0;
  });
  if (!spec.sweeping()) throw PipelineError("config", "sweep grid is empty");
  std::vector<SweepCell> cells;
  for (double l3 : spec.sweep_lambda3) {
    for (double b : spec.sweep_beta) {
      ExperimentSpec cell = spec;
      cell.solver.lambda3 = l3;
      cell.solver.beta = b;
      cell.sweep_lambda3.clear();
      cell.sweep_beta.clear();
      cells.push_back({l3, b, run_single(cell)});
    }
  }
  return cells;
}

// ---------------------------------------------------------------------------
// report output

inline const char* kResultsHeader =
    "method,dataset,trial,seed,acc,nmi,acc_std,nmi_std,iterations,converged,final_residual";

/// Trial rows followed by one `mean` row carrying the standard deviations.
inline std::string format_results_csv(const Report& r) {
  using detail::format_double;
  std::ostringstream out;
  out << kResultsHeader << '\n';
  for (const auto& t : r.trials) {
    out << to_string(r.method) << ',' << r.dataset << ',' << t.trial << ',' << t.seed << ','
        << format_double(t.acc) << ',' << format_double(t.nmi) << ",,," << t.iterations << ','
        << (t.converged ? 1 : 0) << ',' << format_double(t.final_residual) << '\n';
  }
  out << to_string(r.method) << ',' << r.dataset << ",mean,," << format_double(r.acc_mean) << ','
      << format_double(r.nmi_mean) << ',' << format_double(r.acc_std) << ','
      << format_double(r.nmi_std) << ",,,\n";
  return out.str();
}

/// Method x dataset table of ACC and NMI in percent.
inline std::string format_summary(const std::vector<Report>& reports) {
  std::ostringstream out;
  out << std::left << std::setw(14) << "method" << std::setw(34) << "dataset" << std::right
      << std::setw(16) << "ACC (%)" << std::setw(16) << "NMI (%)" << '\n';
  out << std::fixed << std::setprecision(2);
  for (const auto& r : reports) {
    std::ostringstream acc, nm;
    acc << std::fixed << std::setprecision(2) << 100 * r.acc_mean << " +- " << 100 * r.acc_std;
    nm << std::fixed << std::setprecision(2) << 100 * r.nmi_mean << " +- " << 100 * r.nmi_std;
    out << std::left << std::setw(14) << to_string(r.method) << std::setw(34) << r.dataset
        << std::right << std::setw(16) << acc.str() << std::setw(16) << nm.str() << '\n';
  }
  return out.str();
}

inline std::string format_sweep_csv(const std::vector<SweepCell>& cells) {
  using detail::format_double;
  std::ostringstream out;
  out << "lambda3,beta,acc_mean,acc_std,nmi_mean,nmi_std\n";
  for (const auto& c : cells)
    out << format_double(c.lambda3) << ',' << format_double(c.beta) << ','
        << format_double(c.report.acc_mean) << ',' << format_double(c.report.acc_std) << ','
        << format_double(c.report.nmi_mean) << ',' << format_double(c.report.nmi_std) << '\n';
  return out.str();
}

/// iteration, residual, objective, mu, then xi for each view.
inline std::string format_trace_csv(const TrialResult& t) {
  using detail::format_double;
  std::ostringstream out;
  const std::size_t views = t.xi_trace.empty() ? 0 : t.xi_trace.front().size();
  out << "iteration,residual,objective,mu";
  for (std::size_t v = 0; v < views; ++v) out << ",xi_" << v;
  out << '\n';
  for (std::size_t i = 0; i < t.residual_trace.size(); ++i) {
    out << i + 1 << ',' << format_double(t.residual_trace[i]) << ','
        << (i < t.objective_trace.size() ? format_double(t.objective_trace[i]) : "") << ','
        << (i < t.mu_trace.size() ? format_double(t.mu_trace[i]) : "");
    if (i < t.xi_trace.size())
      for (double xi : t.xi_trace[i]) out << ',' << format_double(xi);
    out << '\n';
  }
  return out.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw PipelineError("output", "cannot write " + path.string());
  out << text;
}

/// Results CSV, per-trial labels and, when tracing, per-trial trace CSVs.
inline void write_report(const ExperimentSpec& spec, const Report& r) {
  if (!spec.out_dir) return;
  std::filesystem::create_directories(*spec.out_dir);
  const std::string m = to_string(r.method);
  write_text(*spec.out_dir / (m + "_results.csv"), format_results_csv(r));
  for (const auto& t : r.trials) {
    std::ostringstream labels;
    for (int l : t.labels) labels << l << '\n';
    write_text(*spec.out_dir / (m + "_labels_trial" + std::to_string(t.trial) + ".txt"), labels.str());
    if (spec.trace)
      write_text(*spec.out_dir / (m + "_trace_trial" + std::to_string(t.trial) + ".csv"),
                 format_trace_csv(t));
  }
}

}  // namespace mvlrr
