#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <exception>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "mvlrr/dataset.hpp"
#include "mvlrr/error.hpp"
#include "mvlrr/graph.hpp"
#include "mvlrr/proximal.hpp"

namespace mvlrr {

enum class ViewSweep { jacobi, gauss_seidel };

inline const char* to_string(ViewSweep s) { return s == ViewSweep::jacobi ? "jacobi" : "gauss_seidel"; }

struct SolverConfig {
  double lambda1 = 2.0;   // |E_i|_1
  double lambda2 = 0.08;  // |G_i|_1
  double lambda3 = 0.5;   // Tr(Z_i^T L_i Z_i)
  double beta = 0.1;      // views agreement
  double mu0 = 0.1;
  double mu_max = 1e10;
  double rho = 1.1;
  double xi_safety = 1.02;
  double eps_primal = 1e-6;
  int max_iter = 300;
  ViewSweep view_sweep = ViewSweep::jacobi;
  // graph construction
  int neighbors = 20;
  SigmaMode sigma_mode = SelfTuning{7};
  // jacobi sweeps only; results do not depend on the thread count
  int threads = 1;
  bool record_objective = true;

  void validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || beta < 0)
      throw Error("solver config: weights must be nonnegative");
    if (!(mu0 > 0)) throw Error("solver config: mu0 must be positive");
    if (!(mu_max >= mu0)) throw Error("solver config: mu_max must be >= mu0");
    if (!(rho >= 1)) throw Error("solver config: rho must be >= 1");
    if (!(xi_safety > 1)) throw Error("solver config: xi_safety must exceed 1");
    if (!(eps_primal > 0)) throw Error("solver config: eps_primal must be positive");
    if (max_iter < 0) throw Error("solver config: max_iter must be nonnegative");
    if (neighbors < 1) throw Error("solver config: neighbors must be positive");
    if (threads < 1) throw Error("solver config: threads must be positive");
  }
};

/// Per-view LADMAP variables.
struct ViewState {
  MatrixXd z;   // n x n representation
  MatrixXd e;   // d_i x n sparse error
  MatrixXd g;   // n x n, nonnegative copy of z carrying the l1 term
  MatrixXd k1;  // multiplier for X = XZ + E
  MatrixXd k2;  // multiplier for Z = G
};

/// Constant per-view quantities: data, Laplacian and the two spectral bounds.
struct ViewProblem {
  const MatrixXd* x = nullptr;
  MatrixXd laplacian;
  double laplacian_max_eig = 0.0;
  double data_norm_sq = 0.0;  // |X_i|_2^2
};

struct SolverResult {
  std::vector<MatrixXd> z;
  std::vector<ViewState> states;
  int iterations = 0;
  std::vector<double> residual_trace;
  std::vector<double> objective_trace;
  std::vector<double> mu_trace;
  std::vector<std::vector<double>> xi_trace;  // [iteration][view]
  bool converged = false;
};

inline std::vector<ViewState> init_states(const MultiViewDataset& ds) {
  const Index n = ds.num_objects();
  std::vector<ViewState> states;
  states.reserve(ds.views.size());
  for (const auto& v : ds.views) {
    const Index d = v.data.rows();
    states.push_back({MatrixXd::Zero(n, n), MatrixXd::Zero(d, n), MatrixXd::Zero(n, n),
                      MatrixXd::Zero(d, n), MatrixXd::Zero(n, n)});
  }
  return states;
}

/// Largest-eigenvalue estimate for the step bound. Falls back to the
/// Gershgorin bound 2 max_j D_jj, which is never an underestimate.
inline double laplacian_bound(const MatrixXd& l) {
  try {
    return largest_eigenvalue(l);
  } catch (const ConvergenceError&) {
    return 2.0 * l.diagonal().maxCoeff();
  }
}

inline std::vector<SimilarityGraph> build_graphs(const MultiViewDataset& ds,
                                                 const SolverConfig& cfg) {
  const int s = static_cast<int>(std::min<Index>(cfg.neighbors, ds.num_objects() - 1));
  std::vector<SimilarityGraph> graphs;
  graphs.reserve(ds.views.size());
  for (const auto& v : ds.views) graphs.push_back(knn_similarity(v.data, s, cfg.sigma_mode));
  return graphs;
}

inline std::vector<ViewProblem> make_problems(const MultiViewDataset& ds,
                                              std::span<const SimilarityGraph> graphs) {
  if (graphs.size() != ds.views.size()) throw ShapeError("one graph per view required");
  std::vector<ViewProblem> problems;
  problems.reserve(ds.views.size());
  for (std::size_t i = 0; i < ds.views.size(); ++i) {
    const MatrixXd& x = ds.views[i].data;
    if (graphs[i].laplacian.rows() != x.cols())
      throw ShapeError("graph size does not match view '" + ds.views[i].name + "'");
    const double norm = spectral_norm(x);
    problems.push_back({&x, graphs[i].laplacian, laplacian_bound(graphs[i].laplacian), norm * norm});
  }
  return problems;
}

/// xi_i = safety * (2 lambda3 e(L_i) + mu (1 + |X_i|_2^2)).
inline double proximal_weight(const ViewProblem& p, const SolverConfig& cfg, double mu) {
  return cfg.xi_safety * (2.0 * cfg.lambda3 * p.laplacian_max_eig + mu * (1.0 + p.data_norm_sq));
}

/// Gradient of the smooth part of the Z_i subproblem at the current Z_i:
///   lambda3 (L + L^T) Z + mu X^T (XZ - X + E - K1/mu) + mu (Z - G + K2/mu)
///   + beta sum_{j != i} (Z - Z_j)
/// `others` holds the Z_j of every other view.
inline MatrixXd gradient_ql(const MatrixXd& x, const MatrixXd& l, const ViewState& st,
                            std::span<const MatrixXd* const> others, const SolverConfig& cfg,
                            double mu) {
  const Index n = st.z.rows();
  if (x.cols() != n || l.rows() != n || st.e.rows() != x.rows() || st.k1.rows() != x.rows())
    throw ShapeError("gradient_ql: inconsistent shapes");
  MatrixXd fit = x * st.z - x + st.e - st.k1 / mu;
  MatrixXd grad = mu * (x.transpose() * fit);
  grad += mu * (st.z - st.g + st.k2 / mu);
  if (cfg.lambda3 != 0.0) grad += cfg.lambda3 * ((l + l.transpose()) * st.z);
  if (cfg.beta != 0.0) {
    for (const MatrixXd* zj : others) {
      if (zj->rows() != n || zj->cols() != n) throw ShapeError("gradient_ql: view Z shape mismatch");
      grad += cfg.beta * (st.z - *zj);
    }
  }
  return grad;
}

/// Convenience form reading the other views' Z from `states`.
inline MatrixXd gradient_ql(std::size_t i, std::span<const ViewState> states,
                            std::span<const SimilarityGraph> graphs, const MultiViewDataset& ds,
                            const SolverConfig& cfg, double mu) {
  std::vector<const MatrixXd*> others;
  for (std::size_t j = 0; j < states.size(); ++j)
    if (j != i) others.push_back(&states[j].z);
  return gradient_ql(ds.views[i].data, graphs[i].laplacian, states[i], others, cfg, mu);
}

inline MatrixXd update_z(const ViewProblem& p, const ViewState& st,
                         std::span<const MatrixXd* const> others, const SolverConfig& cfg,
                         double mu) {
  const double xi = proximal_weight(p, cfg, mu);
  const MatrixXd grad = gradient_ql(*p.x, p.laplacian, st, others, cfg, mu);
  MatrixXd target = st.z - grad / xi;
  // left for the caller's divergence check; the SVD would only fail on it
  if (!target.allFinite()) return target;
  return svt(target, 1.0 / xi);
}

/// E_i = S_{lambda1/mu}(X - XZ + K1/mu).
inline MatrixXd update_e(const MatrixXd& x, const ViewState& st, const SolverConfig& cfg,
                         double mu) {
  return soft_threshold(x - x * st.z + st.k1 / mu, cfg.lambda1 / mu);
}

/// G_i = max(S_{lambda2/mu}(Z + K2/mu), 0).
inline MatrixXd update_g(const ViewState& st, const SolverConfig& cfg, double mu) {
  return soft_threshold(st.z + st.k2 / mu, cfg.lambda2 / mu).cwiseMax(0.0);
}

/// Dual ascent; returns the max-abs primal residuals (data fit, Z - G).
inline std::pair<double, double> update_multipliers(const MatrixXd& x, ViewState& st,
                                                    double mu) {
  const MatrixXd r1 = x - x * st.z - st.e;
  const MatrixXd r2 = st.z - st.g;
  st.k1 += mu * r1;
  st.k2 += mu * r2;
  return {r1.cwiseAbs().maxCoeff(), r2.cwiseAbs().maxCoeff()};
}

/// max over views of |X_i - X_i Z_i - E_i|_inf and |Z_i - G_i|_inf.
inline double primal_residual(const MultiViewDataset& ds, std::span<const ViewState> states) {
  double r = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const MatrixXd& x = ds.views[i].data;
    r = std::max(r, (x - x * states[i].z - states[i].e).cwiseAbs().maxCoeff());
    r = std::max(r, (states[i].z - states[i].g).cwiseAbs().maxCoeff());
  }
  return r;
}

inline double nuclear_norm(const MatrixXd& a) {
  if (a.size() == 0) return 0.0;
  return Eigen::BDCSVD<MatrixXd>(a).singularValues().sum();
}

/// Full multi-view objective, with the l1 term on Z measured on G.
inline double objective(std::span<const ViewProblem> problems, std::span<const ViewState> states,
                        const SolverConfig& cfg) {
  double total = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    const auto& st = states[i];
    total += nuclear_norm(st.z) + cfg.lambda1 * st.e.cwiseAbs().sum() +
             cfg.lambda2 * st.g.cwiseAbs().sum() +
             cfg.lambda3 * graph_regularizer(st.z, problems[i].laplacian);
    for (std::size_t j = 0; j < states.size(); ++j)
      if (j != i) total += 0.5 * cfg.beta * (st.z - states[j].z).squaredNorm();
  }
  return total;
}

struct StepResult {
  double residual = 0.0;
  double next_mu = 0.0;
  std::vector<double> xi;
};

namespace detail {

inline bool all_finite(const ViewState& st) {
  return st.z.allFinite() && st.e.allFinite() && st.g.allFinite() && st.k1.allFinite() &&
         st.k2.allFinite();
}

/// Z, E, G and multiplier updates for one view; returns its max primal residual.
inline double update_view(const ViewProblem& p, ViewState& st,
                          std::span<const MatrixXd* const> others, const SolverConfig& cfg,
                          double mu) {
  st.z = update_z(p, st, others, cfg, mu);
  st.e = update_e(*p.x, st, cfg, mu);
  st.g = update_g(st, cfg, mu);
  auto [r1, r2] = update_multipliers(*p.x, st, mu);
  return std::max(r1, r2);
}

template <typename Fn>
void for_each_view(std::size_t count, int threads, Fn&& fn) {
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// One sweep over all views followed by the penalty update mu' = min(mu_max, rho mu).
inline StepResult step(std::vector<ViewState>& states, std::span<const ViewProblem> problems,
                       const SolverConfig& cfg, double mu, int iteration = 0) {
  const std::size_t views = states.size();
  StepResult out;
  out.xi.resize(views);
  std::vector<double> residuals(views, 0.0);

  if (cfg.view_sweep == ViewSweep::jacobi) {
    std::vector<MatrixXd> snapshot;
    if (cfg.beta != 0.0 && views > 1) {
      snapshot.reserve(views);
      for (const auto& st : states) snapshot.push_back(st.z);
    }
    detail::for_each_view(views, cfg.threads, [&](std::size_t i) {
      std::vector<const MatrixXd*> others;
      if (!snapshot.empty())
        for (std::size_t j = 0; j < views; ++j)
          if (j != i) others.push_back(&snapshot[j]);
      out.xi[i] = proximal_weight(problems[i], cfg, mu);
      residuals[i] = detail::update_view(problems[i], states[i], others, cfg, mu);
    });
  } else {
    for (std::size_t i = 0; i < views; ++i) {
      std::vector<const MatrixXd*> others;
      for (std::size_t j = 0; j < views; ++j)
        if (j != i) others.push_back(&states[j].z);
      out.xi[i] = proximal_weight(problems[i], cfg, mu);
      residuals[i] = detail::update_view(problems[i], states[i], others, cfg, mu);
    }
  }

  for (std::size_t i = 0; i < views; ++i) {
    if (!detail::all_finite(states[i]) || !std::isfinite(residuals[i]))
      throw DivergenceError("solver diverged: non-finite value in view " + std::to_string(i) +
                                " at iteration " + std::to_string(iteration),
                            static_cast<std::size_t>(iteration));
    out.residual = std::max(out.residual, residuals[i]);
  }
  out.next_mu = std::min(cfg.mu_max, cfg.rho * mu);
  return out;
}

/// Runs the multi-view solver on prebuilt graphs.
inline SolverResult solve(const MultiViewDataset& ds, std::span<const SimilarityGraph> graphs,
                          const SolverConfig& cfg) {
  cfg.validate();
  validate(ds);
  const auto problems = make_problems(ds, graphs);
  SolverResult result;
  result.states = init_states(ds);
  double mu = cfg.mu0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const StepResult s = step(result.states, problems, cfg, mu, it);
    result.iterations = it;
    result.residual_trace.push_back(s.residual);
    result.mu_trace.push_back(mu);
    result.xi_trace.push_back(s.xi);
    if (cfg.record_objective) result.objective_trace.push_back(objective(problems, result.states, cfg));
    mu = s.next_mu;
    if (s.residual < cfg.eps_primal) {
      result.converged = true;
      break;
    }
  }
  result.z.reserve(result.states.size());
  for (const auto& st : result.states) result.z.push_back(st.z);
  return result;
}

/// Builds the s-NN graphs from the config, then solves.
inline SolverResult solve(const MultiViewDataset& ds, const SolverConfig& cfg) {
  cfg.validate();
  validate(ds);
  const auto graphs = build_graphs(ds, cfg);
  return solve(ds, graphs, cfg);
}

struct SharedLrrResult {
  MatrixXd z;
  int iterations = 0;
  std::vector<double> residual_trace;
  std::vector<double> objective_trace;
  bool converged = false;
};

struct SharedLrrOptions {
  /// Split Z against a nonnegative copy G as the multi-view solver does. With
  /// one view this makes the baseline coincide with `solve` at
  /// lambda2 = lambda3 = beta = 0.
  bool nonnegative = false;
};

/// Shared-representation baseline: min |Z|_* + lambda1 sum_i |E_i|_1 subject to
/// X_i = X_i Z + E_i, solved with the same linearized scheme: one Z update
/// aggregating every view's data term, then per-view E and multiplier updates.
inline SharedLrrResult solve_shared_lrr(const MultiViewDataset& ds, const SolverConfig& cfg,
                                        SharedLrrOptions opts = {}) {
  cfg.validate();
  validate(ds);
  const Index n = ds.num_objects();
  const std::size_t views = ds.views.size();

  double lipschitz = opts.nonnegative ? 1.0 : 0.0;
  for (const auto& v : ds.views) {
    const double s = spectral_norm(v.data);
    lipschitz += s * s;
  }
  if (lipschitz == 0.0) lipschitz = 1.0;  // all-zero data; Z stays at 0

  MatrixXd z = MatrixXd::Zero(n, n), g = MatrixXd::Zero(n, n), k2 = MatrixXd::Zero(n, n);
  std::vector<MatrixXd> e, k1;
  for (const auto& v : ds.views) {
    e.push_back(MatrixXd::Zero(v.data.rows(), n));
    k1.push_back(MatrixXd::Zero(v.data.rows(), n));
  }

  SharedLrrResult result;
  double mu = cfg.mu0;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const double xi = cfg.xi_safety * mu * lipschitz;
    MatrixXd grad = opts.nonnegative ? MatrixXd(mu * (z - g + k2 / mu)) : MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < views; ++i) {
      const MatrixXd& x = ds.views[i].data;
      grad += mu * (x.transpose() * (x * z - x + e[i] - k1[i] / mu));
    }
    const MatrixXd target = z - grad / xi;
    if (!target.allFinite())
      throw DivergenceError("shared LRR diverged at iteration " + std::to_string(it),
                            static_cast<std::size_t>(it));
    z = svt(target, 1.0 / xi);
    double residual = 0.0;
    for (std::size_t i = 0; i < views; ++i) {
      const MatrixXd& x = ds.views[i].data;
      const MatrixXd xz = x * z;
      e[i] = soft_threshold(x - xz + k1[i] / mu, cfg.lambda1 / mu);
      const MatrixXd r1 = x - xz - e[i];
      k1[i] += mu * r1;
      residual = std::max(residual, r1.cwiseAbs().maxCoeff());
    }
    if (opts.nonnegative) {
      g = (z + k2 / mu).cwiseMax(0.0);
      const MatrixXd r2 = z - g;
      k2 += mu * r2;
      residual = std::max(residual, r2.cwiseAbs().maxCoeff());
    }

    if (!z.allFinite() || !std::isfinite(residual))
      throw DivergenceError("shared LRR diverged at iteration " + std::to_string(it),
                            static_cast<std::size_t>(it));
    result.iterations = it;
    result.residual_trace.push_back(residual);
    if (cfg.record_objective) {
      double obj = nuclear_norm(z);
      for (const auto& ei : e) obj += cfg.lambda1 * ei.cwiseAbs().sum();
      result.objective_trace.push_back(obj);
    }
    mu = std::min(cfg.mu_max, cfg.rho * mu);
    if (residual < cfg.eps_primal) {
      result.converged = true;
      break;
    }
  }
  result.z = std::move(z);
  return result;
}

}  // namespace mvlrr
