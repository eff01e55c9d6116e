#pragma once

#include <Eigen/Core>
#include <vector>

#include "mnarsens/cohort.hpp"
#include "mnarsens/missingness.hpp"
#include "mnarsens/pseudoscore.hpp"

namespace mnarsens {

// Empirical influence vectors psi_hat_ij(eta_m), one matrix per grid point.
// Rows index subjects, or clusters after within-cluster averaging.
struct InfluenceArray {
  enum class Unit { subject, cluster };
  Unit unit = Unit::subject;
  int cause = 1;
  SensitivityGrid grid;
  std::vector<Eigen::MatrixXd> values;  // per grid point: units x p
  bool pseudo_inverse_used = false;     // hessian inverted via fallback somewhere

  int units() const { return values.empty() ? 0 : static_cast<int>(values.front().rows()); }
};

// Integral of {Z_i - E(t)} against the estimated martingale dM_ij; row per
// subject.
Eigen::MatrixXd martingale_residual_term(const Cohort& cohort, const FunctionalFit& fit,
                                         int cause, int eta_index);

// Plug-in correction for the estimation of gamma: row i is
// sign(j) * D * omega_i with D the average gradient coupling matrix.
Eigen::MatrixXd gamma_correction_term(const Cohort& cohort, const FunctionalFit& fit,
                                      const MissingnessFit& missfit, int cause,
                                      int eta_index);

InfluenceArray assemble_influence(const Cohort& cohort, const FunctionalFit& fit,
                                  const MissingnessFit& missfit, int cause);

}  // namespace mnarsens
