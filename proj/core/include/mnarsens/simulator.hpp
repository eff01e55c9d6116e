#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mnarsens/cohort.hpp"
#include "mnarsens/pseudoscore.hpp"
#include "mnarsens/rng.hpp"

namespace mnarsens {

// Weibull competing-risks design with four MNAR missingness scenarios.
struct SimDesign {
  int n = 400;
  double weibull_shape = 1.5;   // p0
  double weibull_scale = 1.5;   // lambda0
  double beta1 = 0.5;           // cause-1 log hazard ratio
  double beta2 = -1.0;          // cause-2 log hazard ratio
  double censor_rate = 0.7;     // exponential censoring
  int scenario = 1;             // 1..4
  int replicates = 1000;
  std::uint64_t seed = 1;
};

Cohort generate_cohort(const SimDesign& design, Rng& rng);
// Substream (seed, replicate) variant used by the study loop.
Cohort generate_cohort(const SimDesign& design, std::uint64_t replicate);

// Large-sample solve of the population estimating equation for cause 1, with
// gamma fixed at its fit on the oracle cohort's complete cases. Values are
// the bias reference beta*_1(eta).
std::vector<double> population_beta_star(const SimDesign& design,
                                         const std::vector<double>& eta_values,
                                         long oracle_n, std::uint64_t oracle_seed);

struct SimReport {
  SimDesign design;
  SensitivityGrid grid;
  int bootstrap_replicates = 0;
  double alpha = 0.05;

  std::vector<double> bias_eta;        // evaluation points, subset of the grid
  std::vector<double> pointwise_bias;  // mean(beta_hat(eta)) - beta*_1(eta)
  std::vector<double> pointwise_bias_se;
  double mad = 0.0, mad_se = 0.0;  // mean inf_eta |beta_hat(eta) - beta_01|
  double cp_band = 0.0, cp_band_se = 0.0;
  double cp_ir = 0.0, cp_ir_se = 0.0;
  double mar_bias = 0.0, mar_bias_se = 0.0;
  double mar_cp = 0.0, mar_cp_se = 0.0;

  int replicates_completed = 0;
  int replicates_failed = 0;

  std::vector<double> beta_star;  // per grid point
  long oracle_n = 0;
  std::uint64_t oracle_seed = 0;
};

// Full pipeline per replicate: fit, solve the cause-1 curve, wild-bootstrap
// band, identification-region interval, and the MAR (eta=0) comparator.
SimReport run_study(const SimDesign& design, const SensitivityGrid& grid,
                    int bootstrap_replicates, double alpha,
                    const std::vector<double>& beta_star, long oracle_n,
                    std::uint64_t oracle_seed, int threads = 1);

// Declarative study configuration: '#' comments and key = value lines with
// keys scenario, n, replicates, boot, grid (a,b,points), seed, alpha,
// oracle_n, oracle_seed.
struct StudyConfig {
  SimDesign design;
  SensitivityGrid grid = SensitivityGrid::uniform(-1.0, 1.0, 41);
  int bootstrap_replicates = 1000;
  double alpha = 0.05;
  long oracle_n = 1000000;
  std::uint64_t oracle_seed = 20240901;
};

StudyConfig parse_study_config(const std::string& path);

}  // namespace mnarsens
