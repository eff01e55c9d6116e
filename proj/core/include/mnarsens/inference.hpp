#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mnarsens/influence.hpp"
#include "mnarsens/pseudoscore.hpp"

namespace mnarsens {

// Multiplier-bootstrap sup statistics. abs_stats(s, m) = |K' G_hat^(s)(eta_m)|
// with one shared N(0,1) multiplier vector per replicate. For symmetric grids,
// level_prefix_max(s, k) is the running sup over |eta| <= eta-level k, so the
// percentile for any symmetric sub-range comes from one column.
struct BootstrapDraws {
  Eigen::MatrixXd abs_stats;        // S x M
  std::vector<double> levels;       // nonnegative grid values, ascending (may be empty)
  std::vector<std::vector<int>> level_columns;
  Eigen::MatrixXd level_prefix_max;  // S x L
  std::uint64_t seed = 0;
  int replicates = 0;
  int units = 0;
};

BootstrapDraws bootstrap_sup_stats(const InfluenceArray& influence,
                                   const Eigen::VectorXd& contrast, int replicates,
                                   std::uint64_t seed, int threads = 1);

// Order statistic of rank ceil(S * (1 - alpha)).
double empirical_percentile(Eigen::VectorXd sample, double alpha);

struct BandResult {
  Eigen::VectorXd contrast;
  double alpha = 0.05;
  double c_hat = 0.0;
  std::vector<double> eta;       // grid points in the requested range
  std::vector<double> estimate;  // K' beta_hat(eta)
  std::vector<double> lower;
  std::vector<double> upper;
  std::array<double, 2> id_region{0.0, 0.0};
  std::array<double, 2> ir_ci{0.0, 0.0};
};

BandResult band(const FunctionalFit& fit, const BootstrapDraws& draws,
                const Eigen::VectorXd& contrast, int cause, double alpha,
                std::optional<std::pair<double, double>> sub_range = std::nullopt);

enum class RobustnessStatus { root_found, empty_nonsignificant, maximal };

struct SymmetricInterval {
  bool empty = true;
  double lo = 0.0;
  double hi = 0.0;
};

struct RobustnessResult {
  RobustnessStatus status = RobustnessStatus::empty_nonsignificant;
  double eta_tilde = 0.0;  // meaningful unless empty
  SymmetricInterval interval_log_odds;
  SymmetricInterval interval_odds_ratio;
  RobustnessStatus naive_status = RobustnessStatus::empty_nonsignificant;
  double naive_eta_tilde = 0.0;
  SymmetricInterval naive_interval_log_odds;
  SymmetricInterval naive_interval_odds_ratio;
  double alpha = 0.05;
  double eta_max = 5.0;
  double epsilon = 1e-8;
};

// Largest symmetric range [-eta, eta] over which the per-range simultaneous
// confidence interval excludes zero; see also naive_robustness_interval for
// the fixed-width comparator. The grid must be symmetric about 0 and span
// [-eta_max, eta_max].
RobustnessResult robustness_interval(const FunctionalFit& fit, const BootstrapDraws& draws,
                                     const Eigen::VectorXd& contrast, int cause,
                                     double alpha, double eta_max, double epsilon = 1e-8);

struct NaiveRobustness {
  RobustnessStatus status;
  double eta_tilde;
};

// Same search with the percentile held at the full-range value c(eta_max).
NaiveRobustness naive_robustness_interval(const FunctionalFit& fit,
                                          const BootstrapDraws& draws,
                                          const Eigen::VectorXd& contrast, int cause,
                                          double alpha, double eta_max,
                                          double epsilon = 1e-8);

}  // namespace mnarsens
