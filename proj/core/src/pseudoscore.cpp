#include "mnarsens/pseudoscore.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "mnarsens/errors.hpp"

namespace mnarsens {

SensitivityGrid SensitivityGrid::uniform(double a, double b, int n_points) {
  if (!(a < b)) throw validation_error("grid requires a < b");
  if (n_points < 2) throw validation_error("grid requires at least 2 points");
  SensitivityGrid g;
  g.a = a;
  g.b = b;
  g.points.resize(static_cast<std::size_t>(n_points));
  const double h = (b - a) / (n_points - 1);
  if (a == -b && n_points % 2 == 1) {
    // mirror construction: exact 0 midpoint and exact +/- pairs
    const int mid = (n_points - 1) / 2;
    g.points[static_cast<std::size_t>(mid)] = 0.0;
    for (int k = 1; k <= mid; ++k) {
      const double v = k * h;
      g.points[static_cast<std::size_t>(mid + k)] = v;
      g.points[static_cast<std::size_t>(mid - k)] = -v;
    }
    g.points.front() = a;
    g.points.back() = b;
  } else {
    for (int k = 0; k < n_points; ++k) g.points[static_cast<std::size_t>(k)] = a + k * h;
    g.points.back() = b;
    if (a <= 0.0 && 0.0 <= b) {
      // snap the nearest point to an exact 0 so the MAR solve is on-grid
      int best = 0;
      for (int k = 1; k < n_points; ++k)
        if (std::abs(g.points[static_cast<std::size_t>(k)]) <
            std::abs(g.points[static_cast<std::size_t>(best)]))
          best = k;
      g.points[static_cast<std::size_t>(best)] = 0.0;
    }
  }
  return g;
}

int SensitivityGrid::anchor_index() const {
  int best = 0;
  for (int k = 1; k < size(); ++k)
    if (std::abs(points[static_cast<std::size_t>(k)]) <
        std::abs(points[static_cast<std::size_t>(best)]))
      best = k;
  return best;
}

int SensitivityGrid::zero_index() const {
  const int k = anchor_index();
  return points[static_cast<std::size_t>(k)] == 0.0 ? k : -1;
}

bool SensitivityGrid::symmetric() const {
  if (zero_index() < 0) return false;
  const int n = size();
  const double tol = 1e-9 * std::max(1.0, std::abs(b - a));
  for (int k = 0; k < n; ++k)
    if (std::abs(points[static_cast<std::size_t>(k)] +
                 points[static_cast<std::size_t>(n - 1 - k)]) > tol)
      return false;
  return true;
}

JumpWeights jump_weights(const Cohort& cohort, const MissingnessFit& fit, double eta) {
  const int n = cohort.n();
  JumpWeights w{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  for (int i = 0; i < n; ++i) {
    if (cohort.status(i) == 0) continue;
    if (cohort.observed(i) == 1) {
      w.w1(i) = cohort.cause(i) == 1 ? 1.0 : 0.0;
      w.w2(i) = cohort.cause(i) == 2 ? 1.0 : 0.0;
    } else {
      const double g = logistic(fit.gamma_hat.dot(design_row(cohort, i)) + eta);
      w.w2(i) = g;
      w.w1(i) = 1.0 - g;
    }
  }
  return w;
}

RiskAverages risk_averages(const Cohort& cohort, const Eigen::VectorXd& beta, double t,
                           const Eigen::VectorXd& cluster_weights) {
  const int n = cohort.n();
  const int p = cohort.p();
  const Eigen::VectorXd weights =
      cluster_weights.size() > 0 ? cluster_weights : cohort.unit_weights();
  if (weights.size() != n) throw validation_error("cluster weight length differs from cohort");
  RiskAverages out;
  out.e = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  for (int i = 0; i < n; ++i) {
    if (cohort.time(i) < t) continue;
    const Eigen::VectorXd z = cohort.covariate_matrix().row(i).transpose();
    const double r = weights(i) * std::exp(beta.dot(z));
    s0 += r;
    s1 += r * z;
    s2 += r * z * z.transpose();
  }
  if (s0 <= 0.0)
    throw validation_error("empty risk set at t = " + std::to_string(t));
  out.s0 = s0;
  out.e = s1 / s0;
  out.s2_over_s0 = s2 / s0;
  return out;
}

namespace detail {

RiskIndex make_risk_index(const Cohort& cohort) {
  const int n = cohort.n();
  const std::vector<int>& sorted = cohort.sort_index();
  RiskIndex idx;
  idx.own_event.assign(static_cast<std::size_t>(n), -1);
  idx.last_event_le.assign(static_cast<std::size_t>(n), -1);
  idx.emit_event.assign(static_cast<std::size_t>(n), -1);

  // distinct failure times, ascending
  for (int r = 0; r < n; ++r) {
    const int i = sorted[static_cast<std::size_t>(r)];
    if (cohort.status(i) == 1) {
      const double t = cohort.time(i);
      if (idx.event_times.empty() || idx.event_times.back() != t)
        idx.event_times.push_back(t);
    }
  }
  const auto event_at = [&](double t) -> int {
    const auto it = std::lower_bound(idx.event_times.begin(), idx.event_times.end(), t);
    if (it == idx.event_times.end() || *it != t) return -1;
    return static_cast<int>(it - idx.event_times.begin());
  };
  for (int r = 0; r < n;) {
    const double t = cohort.time(sorted[static_cast<std::size_t>(r)]);
    const int k = event_at(t);
    int r_end = r;
    while (r_end < n && cohort.time(sorted[static_cast<std::size_t>(r_end)]) == t) ++r_end;
    if (k >= 0) idx.emit_event[static_cast<std::size_t>(r)] = k;
    for (int s = r; s < r_end; ++s) {
      const int i = sorted[static_cast<std::size_t>(s)];
      if (cohort.status(i) == 1) idx.own_event[static_cast<std::size_t>(i)] = k;
      // last event time <= X_i
      const auto it = std::upper_bound(idx.event_times.begin(), idx.event_times.end(),
                                       cohort.time(i));
      idx.last_event_le[static_cast<std::size_t>(i)] =
          static_cast<int>(it - idx.event_times.begin()) - 1;
    }
    r = r_end;
  }
  return idx;
}

RiskScan risk_scan(const Cohort& cohort, const RiskIndex& index,
                   const Eigen::VectorXd& beta) {
  const int n = cohort.n();
  const int p = cohort.p();
  const int K = static_cast<int>(index.event_times.size());
  const std::vector<int>& sorted = cohort.sort_index();

  RiskScan scan;
  scan.bz = cohort.covariate_matrix() * beta;
  scan.exp_bz = scan.bz.array().exp();
  if (!scan.exp_bz.allFinite())
    throw convergence_error("overflow in exp(beta'Z)", beta);
  scan.s0.resize(K);
  scan.e.resize(K, p);
  scan.v.resize(K, p * p);

  double s0 = 0.0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd z(p);
  for (int r = n - 1; r >= 0; --r) {
    const int i = sorted[static_cast<std::size_t>(r)];
    const double w = cohort.unit_weight(i) * scan.exp_bz(i);
    z = cohort.covariate_matrix().row(i).transpose();
    s0 += w;
    s1.noalias() += w * z;
    s2.noalias() += w * z * z.transpose();
    const int k = index.emit_event[static_cast<std::size_t>(r)];
    if (k >= 0) {
      scan.s0(k) = s0;
      const Eigen::VectorXd e = s1 / s0;
      scan.e.row(k) = e.transpose();
      Eigen::MatrixXd v = s2 / s0 - e * e.transpose();
      for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) scan.v(k, a * p + b) = v(a, b);
    }
  }
  return scan;
}

ScoreEval evaluate_cause(const Cohort& cohort, const RiskIndex& index,
                         const RiskScan& scan, const Eigen::VectorXd& w_cause) {
  const int n = cohort.n();
  const int p = cohort.p();
  ScoreEval out;
  out.score = Eigen::VectorXd::Zero(p);
  out.hess = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd vflat = Eigen::VectorXd::Zero(p * p);
  for (int i = 0; i < n; ++i) {
    if (cohort.status(i) != 1) continue;
    const double cw = cohort.unit_weight(i) * w_cause(i);
    if (cw == 0.0) continue;
    const int k = index.own_event[static_cast<std::size_t>(i)];
    out.score.noalias() +=
        cw * (cohort.covariate_matrix().row(i) - scan.e.row(k)).transpose();
    vflat.noalias() += cw * scan.v.row(k).transpose();
    out.loglik += cw * (scan.bz(i) - std::log(scan.s0(k)));
    out.mass += cw;
  }
  const double norm = static_cast<double>(cohort.unit_count());
  out.score /= norm;
  out.loglik /= norm;
  out.mass /= norm;
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) out.hess(a, b) = vflat(a * p + b) / norm;
  return out;
}

BaselineHazard breslow_baseline(const Cohort& cohort, const RiskIndex& index,
                                const RiskScan& scan, const Eigen::VectorXd& w_cause) {
  const int K = static_cast<int>(index.event_times.size());
  BaselineHazard out;
  out.times = index.event_times;
  out.jumps.assign(static_cast<std::size_t>(K), 0.0);
  for (int i = 0; i < cohort.n(); ++i) {
    if (cohort.status(i) != 1) continue;
    const double cw = cohort.unit_weight(i) * w_cause(i);
    if (cw == 0.0) continue;
    out.jumps[static_cast<std::size_t>(index.own_event[static_cast<std::size_t>(i)])] += cw;
  }
  out.cumulative.resize(static_cast<std::size_t>(K));
  double cum = 0.0;
  for (int k = 0; k < K; ++k) {
    out.jumps[static_cast<std::size_t>(k)] /= scan.s0(k);
    cum += out.jumps[static_cast<std::size_t>(k)];
    out.cumulative[static_cast<std::size_t>(k)] = cum;
  }
  return out;
}

PointSolve newton_point(const Cohort& cohort, const RiskIndex& index,
                        const Eigen::VectorXd& w_cause, const Eigen::VectorXd& beta0,
                        const NewtonOptions& opts) {
  PointSolve out;
  out.beta = beta0;
  RiskScan scan = risk_scan(cohort, index, out.beta);
  ScoreEval eval = evaluate_cause(cohort, index, scan, w_cause);
  if (eval.mass <= 0.0)
    throw convergence_error("no event mass for this cause: pseudo-score undefined");
  for (int iter = 1; iter <= opts.max_iter; ++iter) {
    if (eval.score.lpNorm<Eigen::Infinity>() < opts.tol) {
      out.converged = true;
      out.iterations = iter - 1;
      return out;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(eval.hess);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
      throw convergence_error("singular pseudo-score hessian", out.beta);
    const Eigen::VectorXd step = ldlt.solve(eval.score);
    double scale = 1.0;
    Eigen::VectorXd candidate;
    RiskScan scan_c;
    ScoreEval eval_c;
    for (int h = 0; h < 30; ++h) {
      candidate = out.beta + scale * step;
      scan_c = risk_scan(cohort, index, candidate);
      eval_c = evaluate_cause(cohort, index, scan_c, w_cause);
      if (eval_c.loglik >= eval.loglik - 1e-13 * (1.0 + std::abs(eval.loglik))) break;
      scale *= 0.5;
    }
    out.beta = candidate;
    scan = std::move(scan_c);
    eval = std::move(eval_c);
    out.iterations = iter;
  }
  out.converged = eval.score.lpNorm<Eigen::Infinity>() < opts.tol;
  return out;
}

}  // namespace detail

Eigen::VectorXd pseudo_score(const Cohort& cohort, const MissingnessFit& fit,
                             const Eigen::VectorXd& beta, double eta, int cause) {
  const detail::RiskIndex index = detail::make_risk_index(cohort);
  const detail::RiskScan scan = detail::risk_scan(cohort, index, beta);
  const JumpWeights w = jump_weights(cohort, fit, eta);
  return detail::evaluate_cause(cohort, index, scan, w.cause(cause)).score;
}

Eigen::MatrixXd hessian(const Cohort& cohort, const MissingnessFit& fit,
                        const Eigen::VectorXd& beta, double eta, int cause) {
  const detail::RiskIndex index = detail::make_risk_index(cohort);
  const detail::RiskScan scan = detail::risk_scan(cohort, index, beta);
  const JumpWeights w = jump_weights(cohort, fit, eta);
  return detail::evaluate_cause(cohort, index, scan, w.cause(cause)).hess;
}

double log_pseudolikelihood(const Cohort& cohort, const MissingnessFit& fit,
                            const Eigen::VectorXd& beta, double eta, int cause) {
  const detail::RiskIndex index = detail::make_risk_index(cohort);
  const detail::RiskScan scan = detail::risk_scan(cohort, index, beta);
  const JumpWeights w = jump_weights(cohort, fit, eta);
  return detail::evaluate_cause(cohort, index, scan, w.cause(cause)).loglik;
}

double BaselineHazard::at(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0.0;
  return cumulative[static_cast<std::size_t>(it - times.begin()) - 1];
}

namespace {

void solve_cause_into(const Cohort& cohort, const MissingnessFit& fit,
                      const SensitivityGrid& grid, int cause, const NewtonOptions& opts,
                      CauseFit& out) {
  const detail::RiskIndex index = detail::make_risk_index(cohort);
  const int M = grid.size();
  const int p = cohort.p();
  out.beta.resize(M, p);
  out.baseline.resize(static_cast<std::size_t>(M));
  out.hessian.resize(static_cast<std::size_t>(M));
  out.converged.assign(static_cast<std::size_t>(M), 0);
  out.iterations.assign(static_cast<std::size_t>(M), 0);

  std::vector<Eigen::VectorXd> w_cause(static_cast<std::size_t>(M));
  for (int m = 0; m < M; ++m)
    w_cause[static_cast<std::size_t>(m)] =
        jump_weights(cohort, fit, grid.points[static_cast<std::size_t>(m)]).cause(cause);

  const int anchor = grid.anchor_index();
  auto solve_at = [&](int m, const Eigen::VectorXd& start) {
    const detail::PointSolve s =
        detail::newton_point(cohort, index, w_cause[static_cast<std::size_t>(m)], start, opts);
    out.beta.row(m) = s.beta.transpose();
    out.converged[static_cast<std::size_t>(m)] = s.converged ? 1 : 0;
    out.iterations[static_cast<std::size_t>(m)] = s.iterations;
  };
  solve_at(anchor, Eigen::VectorXd::Zero(p));
  for (int m = anchor + 1; m < M; ++m) solve_at(m, out.beta.row(m - 1).transpose());
  for (int m = anchor - 1; m >= 0; --m) solve_at(m, out.beta.row(m + 1).transpose());

  // failed points are reported as interpolations of converged neighbours
  for (int m = 0; m < M; ++m) {
    if (out.converged[static_cast<std::size_t>(m)]) continue;
    int lo = m - 1, hi = m + 1;
    while (lo >= 0 && !out.converged[static_cast<std::size_t>(lo)]) --lo;
    while (hi < M && !out.converged[static_cast<std::size_t>(hi)]) ++hi;
    if (lo >= 0 && hi < M) {
      const double t = (grid.points[static_cast<std::size_t>(m)] -
                        grid.points[static_cast<std::size_t>(lo)]) /
                       (grid.points[static_cast<std::size_t>(hi)] -
                        grid.points[static_cast<std::size_t>(lo)]);
      out.beta.row(m) = (1.0 - t) * out.beta.row(lo) + t * out.beta.row(hi);
    } else if (lo >= 0) {
      out.beta.row(m) = out.beta.row(lo);
    } else if (hi < M) {
      out.beta.row(m) = out.beta.row(hi);
    }
  }

  for (int m = 0; m < M; ++m) {
    const detail::RiskScan scan =
        detail::risk_scan(cohort, index, out.beta.row(m).transpose());
    out.baseline[static_cast<std::size_t>(m)] =
        detail::breslow_baseline(cohort, index, scan, w_cause[static_cast<std::size_t>(m)]);
    out.hessian[static_cast<std::size_t>(m)] =
        detail::evaluate_cause(cohort, index, scan, w_cause[static_cast<std::size_t>(m)]).hess;
  }
}

}  // namespace

FunctionalFit solve_beta(const Cohort& cohort, std::shared_ptr<const MissingnessFit> fit,
                         const SensitivityGrid& grid, int cause, const NewtonOptions& opts) {
  if (cause != 1 && cause != 2) throw validation_error("cause must be 1 or 2");
  FunctionalFit out;
  out.grid = grid;
  out.gamma_fit = fit;
  auto& slot = out.causes[static_cast<std::size_t>(cause - 1)];
  slot.emplace();
  solve_cause_into(cohort, *fit, grid, cause, opts, *slot);
  return out;
}

FunctionalFit solve_functional(const Cohort& cohort,
                               std::shared_ptr<const MissingnessFit> fit,
                               const SensitivityGrid& grid, const NewtonOptions& opts) {
  FunctionalFit out;
  out.grid = grid;
  out.gamma_fit = fit;
  for (int j = 1; j <= 2; ++j) {
    auto& slot = out.causes[static_cast<std::size_t>(j - 1)];
    slot.emplace();
    solve_cause_into(cohort, *fit, grid, j, opts, *slot);
  }
  return out;
}

Eigen::VectorXd interpolate_beta(const FunctionalFit& fit, double eta, int cause) {
  const auto& grid = fit.grid;
  const auto& points = grid.points;
  if (eta < points.front() || eta > points.back())
    throw validation_error("eta outside the solved grid range");
  const CauseFit& cf = fit.cause_fit(cause);
  const auto it = std::lower_bound(points.begin(), points.end(), eta);
  const int hi = static_cast<int>(it - points.begin());
  if (hi < grid.size() && points[static_cast<std::size_t>(hi)] == eta)
    return cf.beta.row(hi).transpose();
  const int lo = hi - 1;
  const double t = (eta - points[static_cast<std::size_t>(lo)]) /
                   (points[static_cast<std::size_t>(hi)] - points[static_cast<std::size_t>(lo)]);
  return ((1.0 - t) * cf.beta.row(lo) + t * cf.beta.row(hi)).transpose();
}

}  // namespace mnarsens
