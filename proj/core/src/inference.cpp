#include "mnarsens/inference.hpp"

#include <algorithm>
#include <cmath>

#include "mnarsens/errors.hpp"
#include "mnarsens/parallel.hpp"
#include "mnarsens/rng.hpp"

namespace mnarsens {

namespace {

constexpr std::uint64_t kBootstrapSalt = 0xb007u;

std::vector<double> contrast_curve(const FunctionalFit& fit,
                                   const Eigen::VectorXd& contrast, int cause) {
  const CauseFit& cf = fit.cause_fit(cause);
  std::vector<double> out(static_cast<std::size_t>(fit.grid.size()));
  for (int m = 0; m < fit.grid.size(); ++m)
    out[static_cast<std::size_t>(m)] = cf.beta.row(m).dot(contrast);
  return out;
}

double interp_contrast(const FunctionalFit& fit, const Eigen::VectorXd& contrast,
                       int cause, double eta) {
  return interpolate_beta(fit, eta, cause).dot(contrast);
}

}  // namespace

BootstrapDraws bootstrap_sup_stats(const InfluenceArray& influence,
                                   const Eigen::VectorXd& contrast, int replicates,
                                   std::uint64_t seed, int threads) {
  if (replicates < 2) throw validation_error("bootstrap needs at least 2 replicates");
  const int M = influence.grid.size();
  const int units = influence.units();
  if (contrast.size() != influence.values.front().cols())
    throw validation_error("contrast length differs from coefficient dimension");

  // u(i, m) = K' psi_i(eta_m)
  Eigen::MatrixXd u(units, M);
  for (int m = 0; m < M; ++m)
    u.col(m) = influence.values[static_cast<std::size_t>(m)] * contrast;

  BootstrapDraws out;
  out.abs_stats.resize(replicates, M);
  out.seed = seed;
  out.replicates = replicates;
  out.units = units;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(units));

  parallel_for(static_cast<std::size_t>(replicates), threads, [&](std::size_t s) {
    Rng rng(substream_seed(seed, s, kBootstrapSalt));
    Eigen::VectorXd xi(units);
    for (int i = 0; i < units; ++i) xi(i) = rng.normal();
    out.abs_stats.row(static_cast<Eigen::Index>(s)) =
        (xi.transpose() * u).cwiseAbs() * inv_sqrt;
  });

  if (influence.grid.symmetric()) {
    const auto& pts = influence.grid.points;
    for (double v : pts)
      if (v >= 0.0) out.levels.push_back(v);
    const int L = static_cast<int>(out.levels.size());
    out.level_columns.resize(static_cast<std::size_t>(L));
    out.level_prefix_max.resize(replicates, L);
    const double tol = 1e-12 * std::max(1.0, std::abs(influence.grid.b));
    Eigen::VectorXd running = Eigen::VectorXd::Constant(replicates, -1.0);
    for (int k = 0; k < L; ++k) {
      auto& cols = out.level_columns[static_cast<std::size_t>(k)];
      for (int m = 0; m < M; ++m)
        if (std::abs(pts[static_cast<std::size_t>(m)]) <=
            out.levels[static_cast<std::size_t>(k)] + tol)
          cols.push_back(m);
      // prefix max only needs the columns new to this level
      for (int m : cols) {
        const bool seen =
            k > 0 && std::abs(pts[static_cast<std::size_t>(m)]) <=
                         out.levels[static_cast<std::size_t>(k - 1)] + tol;
        if (!seen) running = running.cwiseMax(out.abs_stats.col(m));
      }
      out.level_prefix_max.col(k) = running;
    }
  }
  return out;
}

double empirical_percentile(Eigen::VectorXd sample, double alpha) {
  const Eigen::Index S = sample.size();
  const Eigen::Index rank = static_cast<Eigen::Index>(
      std::ceil(static_cast<double>(S) * (1.0 - alpha)));
  const Eigen::Index k = std::clamp<Eigen::Index>(rank, 1, S) - 1;
  std::nth_element(sample.data(), sample.data() + k, sample.data() + S);
  return sample(k);
}

BandResult band(const FunctionalFit& fit, const BootstrapDraws& draws,
                const Eigen::VectorXd& contrast, int cause, double alpha,
                std::optional<std::pair<double, double>> sub_range) {
  const int M = fit.grid.size();
  if (draws.abs_stats.cols() != M)
    throw validation_error("bootstrap draws and fit use different grids");
  double lo = fit.grid.points.front(), hi = fit.grid.points.back();
  if (sub_range) {
    lo = sub_range->first;
    hi = sub_range->second;
  }
  const double tol = 1e-9 * std::max(1.0, std::abs(fit.grid.b - fit.grid.a));
  std::vector<int> cols;
  for (int m = 0; m < M; ++m) {
    const double v = fit.grid.points[static_cast<std::size_t>(m)];
    if (v >= lo - tol && v <= hi + tol) cols.push_back(m);
  }
  if (cols.empty()) throw validation_error("empty sub-range for the confidence band");

  Eigen::VectorXd sups = Eigen::VectorXd::Constant(draws.replicates, -1.0);
  for (int m : cols) sups = sups.cwiseMax(draws.abs_stats.col(m));

  BandResult out;
  out.contrast = contrast;
  out.alpha = alpha;
  out.c_hat = empirical_percentile(std::move(sups), alpha);
  const double half = out.c_hat / std::sqrt(static_cast<double>(draws.units));
  const std::vector<double> curve = contrast_curve(fit, contrast, cause);
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (int m : cols) {
    const double v = curve[static_cast<std::size_t>(m)];
    out.eta.push_back(fit.grid.points[static_cast<std::size_t>(m)]);
    out.estimate.push_back(v);
    out.lower.push_back(v - half);
    out.upper.push_back(v + half);
    mn = std::min(mn, v);
    mx = std::max(mx, v);
  }
  out.id_region = {mn, mx};
  out.ir_ci = {mn - half, mx + half};
  return out;
}

namespace {

struct LevelProfile {
  std::vector<double> levels;
  std::vector<double> inf_curve, sup_curve;  // running extrema of K'beta
  std::vector<double> c_hat;                 // per-level percentile
  double sqrt_units = 1.0;
};

LevelProfile level_profile(const FunctionalFit& fit, const BootstrapDraws& draws,
                           const Eigen::VectorXd& contrast, int cause, double alpha,
                           double eta_max) {
  if (draws.levels.empty())
    throw validation_error("robustness intervals need a symmetric grid about 0");
  if (std::abs(draws.levels.back() - eta_max) > 1e-9)
    throw validation_error("grid does not span [-eta_max, eta_max]");
  LevelProfile prof;
  prof.levels = draws.levels;
  prof.sqrt_units = std::sqrt(static_cast<double>(draws.units));
  const std::vector<double> curve = contrast_curve(fit, contrast, cause);
  const int L = static_cast<int>(prof.levels.size());
  prof.inf_curve.resize(static_cast<std::size_t>(L));
  prof.sup_curve.resize(static_cast<std::size_t>(L));
  prof.c_hat.resize(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    for (int m : draws.level_columns[static_cast<std::size_t>(k)]) {
      mn = std::min(mn, curve[static_cast<std::size_t>(m)]);
      mx = std::max(mx, curve[static_cast<std::size_t>(m)]);
    }
    prof.inf_curve[static_cast<std::size_t>(k)] = mn;
    prof.sup_curve[static_cast<std::size_t>(k)] = mx;
    prof.c_hat[static_cast<std::size_t>(k)] =
        empirical_percentile(draws.level_prefix_max.col(k), alpha);
  }
  return prof;
}

double f_value(double inf, double sup, double c_over_sqrt, double epsilon) {
  return (inf - c_over_sqrt) * (sup + c_over_sqrt) - epsilon;
}

struct RootScan {
  RobustnessStatus status;
  double eta_tilde;
};

// Shared search: per-level f values, then bisection in the outermost positive
// cell. c_for_cell(k) supplies the percentile used between levels k and k+1.
template <typename CFn>
RootScan scan_for_root(const FunctionalFit& fit, const Eigen::VectorXd& contrast,
                       int cause, const LevelProfile& prof, double epsilon, CFn c_for_level,
                       CFn c_for_cell) {
  const int L = static_cast<int>(prof.levels.size());
  std::vector<double> f(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k)
    f[static_cast<std::size_t>(k)] =
        f_value(prof.inf_curve[static_cast<std::size_t>(k)],
                prof.sup_curve[static_cast<std::size_t>(k)],
                c_for_level(k) / prof.sqrt_units, epsilon);
  for (int k = 1; k < L; ++k)
    if (f[static_cast<std::size_t>(k)] > 0.0 && f[static_cast<std::size_t>(k - 1)] <= 0.0)
      throw internal_error("robustness function changed sign from negative to positive");

  if (f.front() < 0.0) return {RobustnessStatus::empty_nonsignificant, 0.0};
  if (f.back() > 0.0) return {RobustnessStatus::maximal, prof.levels.back()};

  int k_star = -1;
  for (int k = 0; k < L; ++k)
    if (f[static_cast<std::size_t>(k)] > 0.0) k_star = k;
  if (k_star < 0) return {RobustnessStatus::root_found, 0.0};
  if (k_star == L - 1) return {RobustnessStatus::maximal, prof.levels.back()};

  // between grid levels: c held at the next-outer level, K'beta interpolated
  const double c_cell = c_for_cell(k_star + 1) / prof.sqrt_units;
  const double inf_base = prof.inf_curve[static_cast<std::size_t>(k_star)];
  const double sup_base = prof.sup_curve[static_cast<std::size_t>(k_star)];
  auto f_cont = [&](double eta_bar) {
    const double left = interp_contrast(fit, contrast, cause, -eta_bar);
    const double right = interp_contrast(fit, contrast, cause, eta_bar);
    const double inf = std::min({inf_base, left, right});
    const double sup = std::max({sup_base, left, right});
    return f_value(inf, sup, c_cell, epsilon);
  };
  double lo = prof.levels[static_cast<std::size_t>(k_star)];
  double hi = prof.levels[static_cast<std::size_t>(k_star) + 1];
  if (f_cont(lo) <= 0.0) return {RobustnessStatus::root_found, lo};
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f_cont(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return {RobustnessStatus::root_found, lo};
}

SymmetricInterval log_odds_interval(const RootScan& scan) {
  if (scan.status == RobustnessStatus::empty_nonsignificant) return {};
  return {false, -scan.eta_tilde, scan.eta_tilde};
}

SymmetricInterval odds_ratio_interval(const RootScan& scan) {
  if (scan.status == RobustnessStatus::empty_nonsignificant) return {};
  return {false, std::exp(-scan.eta_tilde), std::exp(scan.eta_tilde)};
}

}  // namespace

RobustnessResult robustness_interval(const FunctionalFit& fit, const BootstrapDraws& draws,
                                     const Eigen::VectorXd& contrast, int cause,
                                     double alpha, double eta_max, double epsilon) {
  const LevelProfile prof = level_profile(fit, draws, contrast, cause, alpha, eta_max);
  auto per_level = [&prof](int k) { return prof.c_hat[static_cast<std::size_t>(k)]; };
  const RootScan proposed =
      scan_for_root(fit, contrast, cause, prof, epsilon, per_level, per_level);
  auto fixed = [&prof](int) { return prof.c_hat.back(); };
  const RootScan naive =
      scan_for_root(fit, contrast, cause, prof, epsilon, fixed, fixed);

  RobustnessResult out;
  out.status = proposed.status;
  out.eta_tilde = proposed.eta_tilde;
  out.interval_log_odds = log_odds_interval(proposed);
  out.interval_odds_ratio = odds_ratio_interval(proposed);
  out.naive_status = naive.status;
  out.naive_eta_tilde = naive.eta_tilde;
  out.naive_interval_log_odds = log_odds_interval(naive);
  out.naive_interval_odds_ratio = odds_ratio_interval(naive);
  out.alpha = alpha;
  out.eta_max = eta_max;
  out.epsilon = epsilon;
  return out;
}

NaiveRobustness naive_robustness_interval(const FunctionalFit& fit,
                                          const BootstrapDraws& draws,
                                          const Eigen::VectorXd& contrast, int cause,
                                          double alpha, double eta_max, double epsilon) {
  const LevelProfile prof = level_profile(fit, draws, contrast, cause, alpha, eta_max);
  auto fixed = [&prof](int) { return prof.c_hat.back(); };
  const RootScan naive = scan_for_root(fit, contrast, cause, prof, epsilon, fixed, fixed);
  return {naive.status, naive.eta_tilde};
}

}  // namespace mnarsens
