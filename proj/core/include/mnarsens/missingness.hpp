#pragma once

#include <Eigen/Core>

#include "mnarsens/cohort.hpp"

namespace mnarsens {

inline double logistic(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Complete-case logit fit of P(C=2 | R=1, failure, W) with per-subject
// influence vectors. Rows of omega are scaled so that
// sqrt(n) (gamma_hat - gamma_0) ~= n^{-1/2} sum_i omega_i with n the number of
// independent units (clusters when the cohort is clustered).
struct MissingnessFit {
  Eigen::VectorXd gamma_hat;     // length p+q+2
  Eigen::MatrixXd info_inverse;  // inverse of the summed weighted information
  Eigen::MatrixXd omega;         // n x (p+q+2); zero rows off the complete cases
  bool converged = false;
  int iterations = 0;
  bool ridge_used = false;
  double score_sup_norm = 0.0;  // mean-scaled score at gamma_hat
};

// Newton-Raphson with step-halving from gamma = 0; tolerance 1e-10 on the
// sup-norm of the mean-scaled score, at most 100 iterations. Weights default
// to 1, or to 1/M_i when the cohort is clustered.
MissingnessFit fit_missingness(const Cohort& cohort,
                               const Eigen::VectorXd& weights = Eigen::VectorXd());

// g(gamma_hat' wtilde + eta)
double predict_cause2(const MissingnessFit& fit, const Eigen::VectorXd& wtilde,
                      double eta);

// Cluster-weighted average of g(gamma_hat' W_i + eta) over the missing-cause
// subjects; the marginal probability of cause 2 at sensitivity value eta.
double marginal_missing_death_prob(const Cohort& cohort, const MissingnessFit& fit,
                                   double eta);

}  // namespace mnarsens
