#include "mnarsens/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "mnarsens/errors.hpp"
#include "mnarsens/inference.hpp"
#include "mnarsens/influence.hpp"
#include "mnarsens/missingness.hpp"
#include "mnarsens/parallel.hpp"

namespace mnarsens {

namespace {

constexpr std::uint64_t kCohortSalt = 0xc0410u;
constexpr std::uint64_t kBootSalt = 0x5b00u;
constexpr double kZ975 = 1.959963984540054;

double missing_logit(int scenario, double x, double z, int cause) {
  const double bump = (scenario == 1 || scenario == 3) ? 0.5 : 1.0;
  const double base = (scenario <= 2) ? 0.3 : 0.3 - x + z;
  return base + (cause == 2 ? bump : 0.0);
}

}  // namespace

Cohort generate_cohort(const SimDesign& design, Rng& rng) {
  if (design.scenario < 1 || design.scenario > 4)
    throw validation_error("scenario must be in 1..4");
  const int n = design.n;
  const double shape = design.weibull_shape;
  const double scale_pow = std::pow(design.weibull_scale, shape);

  Eigen::VectorXd time(n);
  Eigen::VectorXi status(n), cause(n), observed(n);
  Eigen::MatrixXd z(n, 1);
  for (int i = 0; i < n; ++i) {
    const double zi = rng.normal();
    z(i, 0) = zi;
    const double h1 = std::exp(design.beta1 * zi);
    const double h2 = std::exp(design.beta2 * zi);
    // total cumulative hazard lambda0^p0 t^p0 (h1 + h2); inverse transform
    const double t = std::pow(rng.exponential(1.0) / (scale_pow * (h1 + h2)), 1.0 / shape);
    // under proportional hazards the cause split is time-free
    const int c = rng.uniform() < h2 / (h1 + h2) ? 2 : 1;
    const double u = rng.exponential(design.censor_rate);
    if (t <= u) {
      time(i) = t;
      status(i) = 1;
      const double logit = missing_logit(design.scenario, t, zi, c);
      const bool r = rng.bernoulli(logistic(logit));
      observed(i) = r ? 1 : 0;
      cause(i) = r ? c : -1;
    } else {
      time(i) = u;
      status(i) = 0;
      observed(i) = 1;  // censoring status is always observed
      cause(i) = -1;
    }
  }
  return Cohort::from_columns(std::move(time), std::move(status), std::move(cause),
                              std::move(observed), std::move(z), Eigen::MatrixXd(n, 0));
}

Cohort generate_cohort(const SimDesign& design, std::uint64_t replicate) {
  Rng rng(substream_seed(design.seed, replicate, kCohortSalt));
  return generate_cohort(design, rng);
}

std::vector<double> population_beta_star(const SimDesign& design,
                                         const std::vector<double>& eta_values,
                                         long oracle_n, std::uint64_t oracle_seed) {
  SimDesign oracle = design;
  oracle.n = static_cast<int>(oracle_n);
  oracle.seed = oracle_seed;
  const Cohort cohort = generate_cohort(oracle, std::uint64_t{0});
  const MissingnessFit gamma = fit_missingness(cohort);
  const detail::RiskIndex index = detail::make_risk_index(cohort);

  std::vector<double> out(eta_values.size());
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(1);
  // ascending eta order for warm starts, then scatter back
  std::vector<std::size_t> order(eta_values.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return eta_values[a] < eta_values[b]; });
  for (std::size_t k : order) {
    const Eigen::VectorXd w = jump_weights(cohort, gamma, eta_values[k]).cause(1);
    const detail::PointSolve s = detail::newton_point(cohort, index, w, beta, {});
    if (!s.converged)
      throw convergence_error("population oracle solve failed at eta = " +
                              std::to_string(eta_values[k]));
    beta = s.beta;
    out[k] = beta(0);
  }
  return out;
}

namespace {

// exact infimum of |curve(eta) - target| over the piecewise-linear interpolant
double min_abs_deviation(const SensitivityGrid& grid, const Eigen::MatrixXd& beta,
                         double target) {
  double best = std::numeric_limits<double>::infinity();
  for (int m = 0; m < grid.size(); ++m) {
    const double d = beta(m, 0) - target;
    best = std::min(best, std::abs(d));
    if (m > 0 && (beta(m - 1, 0) - target) * d < 0.0) return 0.0;
  }
  return best;
}

struct ReplicateOutcome {
  bool failed = false;
  std::vector<double> beta_at_bias_eta;
  double mad = 0.0;
  bool band_covers = false;
  bool ir_covers = false;
  double mar_estimate = 0.0;
  bool mar_covers = false;
};

}  // namespace

SimReport run_study(const SimDesign& design, const SensitivityGrid& grid,
                    int bootstrap_replicates, double alpha,
                    const std::vector<double>& beta_star, long oracle_n,
                    std::uint64_t oracle_seed, int threads) {
  if (beta_star.size() != static_cast<std::size_t>(grid.size()))
    throw validation_error("beta_star table does not match the grid");
  const double grid_tol = 1e-9 * std::max(1.0, grid.b - grid.a);

  // bias evaluation points: {-1,-0.5,0,0.5,1} restricted to the grid
  std::vector<double> bias_eta;
  std::vector<int> bias_idx;
  for (double target : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
    for (int m = 0; m < grid.size(); ++m) {
      if (std::abs(grid.points[static_cast<std::size_t>(m)] - target) < grid_tol) {
        bias_eta.push_back(grid.points[static_cast<std::size_t>(m)]);
        bias_idx.push_back(m);
        break;
      }
    }
  }
  const int zero_m = grid.zero_index();
  if (zero_m < 0) throw validation_error("study grid must contain eta = 0");
  const double star_min = *std::min_element(beta_star.begin(), beta_star.end());
  const double star_max = *std::max_element(beta_star.begin(), beta_star.end());
  const Eigen::VectorXd contrast = Eigen::VectorXd::Ones(1);

  std::vector<ReplicateOutcome> slots(static_cast<std::size_t>(design.replicates));
  parallel_for(static_cast<std::size_t>(design.replicates), threads, [&](std::size_t r) {
    ReplicateOutcome& out = slots[r];
    try {
      const Cohort cohort = generate_cohort(design, static_cast<std::uint64_t>(r));
      auto gamma = std::make_shared<const MissingnessFit>(fit_missingness(cohort));
      const FunctionalFit fit = solve_beta(cohort, gamma, grid, 1);
      const CauseFit& cf = fit.cause_fit(1);
      for (int m : bias_idx) out.beta_at_bias_eta.push_back(cf.beta(m, 0));
      out.mad = min_abs_deviation(grid, cf.beta, design.beta1);

      const InfluenceArray psi = assemble_influence(cohort, fit, *gamma, 1);
      const BootstrapDraws draws =
          bootstrap_sup_stats(psi, contrast, bootstrap_replicates,
                              substream_seed(design.seed, r, kBootSalt));
      const BandResult b = band(fit, draws, contrast, 1, alpha);
      bool covers = true;
      for (int m = 0; m < grid.size(); ++m)
        covers = covers && beta_star[static_cast<std::size_t>(m)] >= b.lower[static_cast<std::size_t>(m)] &&
                 beta_star[static_cast<std::size_t>(m)] <= b.upper[static_cast<std::size_t>(m)];
      out.band_covers = covers;
      out.ir_covers = b.ir_ci[0] <= star_min && b.ir_ci[1] >= star_max;

      // MAR comparator: Wald interval from the influence-based variance at eta=0
      out.mar_estimate = cf.beta(zero_m, 0);
      const Eigen::VectorXd psi0 = psi.values[static_cast<std::size_t>(zero_m)] * contrast;
      const double se = std::sqrt(psi0.squaredNorm()) / static_cast<double>(psi.units());
      out.mar_covers = std::abs(out.mar_estimate - design.beta1) <= kZ975 * se;
    } catch (const std::exception&) {
      out.failed = true;
    }
  });

  SimReport report;
  report.design = design;
  report.grid = grid;
  report.bootstrap_replicates = bootstrap_replicates;
  report.alpha = alpha;
  report.bias_eta = bias_eta;
  report.beta_star = beta_star;
  report.oracle_n = oracle_n;
  report.oracle_seed = oracle_seed;

  int completed = 0;
  for (const auto& s : slots)
    if (!s.failed) ++completed;
  report.replicates_completed = completed;
  report.replicates_failed = design.replicates - completed;
  if (report.replicates_failed > 0.02 * design.replicates)
    throw convergence_error("more than 2% of study replicates failed (" +
                            std::to_string(report.replicates_failed) + "/" +
                            std::to_string(design.replicates) + ")");
  const double R = static_cast<double>(completed);

  const std::size_t B = bias_eta.size();
  report.pointwise_bias.assign(B, 0.0);
  report.pointwise_bias_se.assign(B, 0.0);
  std::vector<double> mean_beta(B, 0.0), var_beta(B, 0.0);
  double mad_sum = 0.0, mad_sq = 0.0, mar_sum = 0.0, mar_sq = 0.0;
  double band_hits = 0.0, ir_hits = 0.0, mar_hits = 0.0;
  for (const auto& s : slots) {
    if (s.failed) continue;
    for (std::size_t k = 0; k < B; ++k) mean_beta[k] += s.beta_at_bias_eta[k];
    mad_sum += s.mad;
    mad_sq += s.mad * s.mad;
    mar_sum += s.mar_estimate;
    mar_sq += s.mar_estimate * s.mar_estimate;
    band_hits += s.band_covers;
    ir_hits += s.ir_covers;
    mar_hits += s.mar_covers;
  }
  for (std::size_t k = 0; k < B; ++k) mean_beta[k] /= R;
  for (const auto& s : slots) {
    if (s.failed) continue;
    for (std::size_t k = 0; k < B; ++k) {
      const double d = s.beta_at_bias_eta[k] - mean_beta[k];
      var_beta[k] += d * d;
    }
  }
  for (std::size_t k = 0; k < B; ++k) {
    report.pointwise_bias[k] =
        mean_beta[k] - beta_star[static_cast<std::size_t>(bias_idx[k])];
    report.pointwise_bias_se[k] = std::sqrt(var_beta[k] / (R - 1.0) / R);
  }
  report.mad = mad_sum / R;
  report.mad_se = std::sqrt((mad_sq / R - report.mad * report.mad) / (R - 1.0));
  report.mar_bias = mar_sum / R - design.beta1;
  const double mar_mean = mar_sum / R;
  report.mar_bias_se = std::sqrt((mar_sq / R - mar_mean * mar_mean) / (R - 1.0));
  auto coverage = [R](double hits) { return hits / R; };
  auto coverage_se = [R](double p) { return std::sqrt(p * (1.0 - p) / R); };
  report.cp_band = coverage(band_hits);
  report.cp_band_se = coverage_se(report.cp_band);
  report.cp_ir = coverage(ir_hits);
  report.cp_ir_se = coverage_se(report.cp_ir);
  report.mar_cp = coverage(mar_hits);
  report.mar_cp_se = coverage_se(report.mar_cp);
  return report;
}

StudyConfig parse_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open study config '" + path + "'");
  StudyConfig cfg;
  double grid_a = -1.0, grid_b = 1.0;
  int grid_points = 41;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::string key, eq, value;
    std::istringstream ss(line);
    if (!(ss >> key)) continue;
    if (!(ss >> eq) || eq != "=" || !(ss >> value))
      throw validation_error("expected 'key = value' in study config", line_no);
    try {
      if (key == "scenario")
        cfg.design.scenario = std::stoi(value);
      else if (key == "n")
        cfg.design.n = std::stoi(value);
      else if (key == "replicates")
        cfg.design.replicates = std::stoi(value);
      else if (key == "boot")
        cfg.bootstrap_replicates = std::stoi(value);
      else if (key == "seed")
        cfg.design.seed = std::stoull(value);
      else if (key == "alpha")
        cfg.alpha = std::stod(value);
      else if (key == "oracle_n")
        cfg.oracle_n = std::stol(value);
      else if (key == "oracle_seed")
        cfg.oracle_seed = std::stoull(value);
      else if (key == "grid") {
        std::replace(value.begin(), value.end(), ',', ' ');
        std::istringstream gs(value);
        if (!(gs >> grid_a >> grid_b >> grid_points))
          throw validation_error("grid expects a,b,points", line_no);
      } else
        throw validation_error("unknown study config key '" + key + "'", line_no);
    } catch (const std::invalid_argument&) {
      throw validation_error("malformed value for '" + key + "'", line_no);
    }
  }
  cfg.grid = SensitivityGrid::uniform(grid_a, grid_b, grid_points);
  return cfg;
}

}  // namespace mnarsens
