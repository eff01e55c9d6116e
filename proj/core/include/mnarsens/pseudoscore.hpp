#pragma once

#include <Eigen/Core>
#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "mnarsens/cohort.hpp"
#include "mnarsens/missingness.hpp"

namespace mnarsens {

// Finite evaluation set {a = eta_0 < ... < eta_{M+1} = b} for the sensitivity
// parameter. Contains an exact 0 whenever a <= 0 <= b so the MAR solve is
// always on-grid.
struct SensitivityGrid {
  double a = 0.0;
  double b = 0.0;
  std::vector<double> points;

  static SensitivityGrid uniform(double a, double b, int n_points);

  int size() const { return static_cast<int>(points.size()); }
  // index of the exact 0 point, or of the point closest to 0
  int anchor_index() const;
  int zero_index() const;  // -1 when 0 is not on the grid
  bool symmetric() const;  // points pair as -eta/+eta around an exact 0
};

// Expected jumps of the cause-specific counting processes at the subject's
// event time: w2 = R*D2 + (1-R)*D*g(gamma'W + eta), w1 = D - w2 analogue.
struct JumpWeights {
  Eigen::VectorXd w1;
  Eigen::VectorXd w2;
  const Eigen::VectorXd& cause(int j) const { return j == 1 ? w1 : w2; }
};

JumpWeights jump_weights(const Cohort& cohort, const MissingnessFit& fit, double eta);

// At-risk averages at time t under coefficient beta.
struct RiskAverages {
  Eigen::VectorXd e;           // weighted covariate average
  double s0 = 0.0;             // sum of c_l Y_l(t) exp(beta'Z_l)
  Eigen::MatrixXd s2_over_s0;  // weighted average of Z Z' exp(beta'Z) over s0
};

RiskAverages risk_averages(const Cohort& cohort, const Eigen::VectorXd& beta, double t,
                           const Eigen::VectorXd& cluster_weights = Eigen::VectorXd());

// Mean partial pseudo-score for cause j at (beta, eta); the root defines
// beta_hat_j(eta).
Eigen::VectorXd pseudo_score(const Cohort& cohort, const MissingnessFit& fit,
                             const Eigen::VectorXd& beta, double eta, int cause);

// Minus the derivative of pseudo_score with respect to beta.
Eigen::MatrixXd hessian(const Cohort& cohort, const MissingnessFit& fit,
                        const Eigen::VectorXd& beta, double eta, int cause);

// Weighted log partial pseudolikelihood whose gradient is pseudo_score.
double log_pseudolikelihood(const Cohort& cohort, const MissingnessFit& fit,
                            const Eigen::VectorXd& beta, double eta, int cause);

// Right-continuous step function with jumps at observed failure times.
struct BaselineHazard {
  std::vector<double> times;  // ascending
  std::vector<double> jumps;
  std::vector<double> cumulative;
  double at(double t) const;
};

struct CauseFit {
  Eigen::MatrixXd beta;                   // grid size x p
  std::vector<BaselineHazard> baseline;   // per grid point
  std::vector<Eigen::MatrixXd> hessian;   // per grid point, p x p
  std::vector<std::uint8_t> converged;    // per grid point
  std::vector<int> iterations;
};

struct FunctionalFit {
  SensitivityGrid grid;
  std::shared_ptr<const MissingnessFit> gamma_fit;
  std::array<std::optional<CauseFit>, 2> causes;

  bool has_cause(int j) const { return causes[static_cast<std::size_t>(j - 1)].has_value(); }
  const CauseFit& cause_fit(int j) const { return *causes[static_cast<std::size_t>(j - 1)]; }
};

struct NewtonOptions {
  double tol = 1e-10;  // sup-norm of the mean score
  int max_iter = 50;
};

// Newton solve across the grid, warm-started outward from the eta = 0 anchor.
// Non-converged points are flagged and filled by linear interpolation from
// converged neighbours.
FunctionalFit solve_beta(const Cohort& cohort, std::shared_ptr<const MissingnessFit> fit,
                         const SensitivityGrid& grid, int cause,
                         const NewtonOptions& opts = {});
FunctionalFit solve_functional(const Cohort& cohort,
                               std::shared_ptr<const MissingnessFit> fit,
                               const SensitivityGrid& grid,
                               const NewtonOptions& opts = {});

// Piecewise-linear interpolation of the stored coefficient curve.
Eigen::VectorXd interpolate_beta(const FunctionalFit& fit, double eta, int cause);

namespace detail {

// Cohort-only precomputation shared by every (beta, eta) evaluation.
struct RiskIndex {
  std::vector<double> event_times;  // ascending distinct failure times
  std::vector<int> own_event;       // per subject: k with t_k == X_i for failures, else -1
  std::vector<int> last_event_le;   // per subject: last k with t_k <= X_i, else -1
  std::vector<int> emit_event;      // per ascending sort position: event index closed there
};

RiskIndex make_risk_index(const Cohort& cohort);

// Risk-set sums at every event time for a fixed beta.
struct RiskScan {
  Eigen::VectorXd s0;  // K
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> e;  // K x p
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> v;  // K x p*p
  Eigen::VectorXd bz;      // beta'Z per subject
  Eigen::VectorXd exp_bz;  // c_i exp(beta'Z) is NOT folded in; weights stay separate
};

RiskScan risk_scan(const Cohort& cohort, const RiskIndex& index,
                   const Eigen::VectorXd& beta);

struct ScoreEval {
  Eigen::VectorXd score;
  Eigen::MatrixXd hess;
  double loglik = 0.0;
  double mass = 0.0;
};

ScoreEval evaluate_cause(const Cohort& cohort, const RiskIndex& index,
                         const RiskScan& scan, const Eigen::VectorXd& w_cause);

BaselineHazard breslow_baseline(const Cohort& cohort, const RiskIndex& index,
                                const RiskScan& scan, const Eigen::VectorXd& w_cause);

struct PointSolve {
  Eigen::VectorXd beta;
  bool converged = false;
  int iterations = 0;
};

PointSolve newton_point(const Cohort& cohort, const RiskIndex& index,
                        const Eigen::VectorXd& w_cause, const Eigen::VectorXd& beta0,
                        const NewtonOptions& opts);

}  // namespace detail

}  // namespace mnarsens
