#include "mnarsens/influence.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>

#include "mnarsens/errors.hpp"

namespace mnarsens {

namespace {

using detail::RiskIndex;
using detail::RiskScan;

struct GridPointContext {
  RiskScan scan;
  Eigen::VectorXd w_cause;
  BaselineHazard baseline;
  // prefix sums over event times of dLambda and E(t) dLambda
  Eigen::VectorXd lambda_prefix;
  Eigen::MatrixXd e_lambda_prefix;  // K x p
};

GridPointContext make_context(const Cohort& cohort, const RiskIndex& index,
                              const FunctionalFit& fit, int cause, int eta_index) {
  const CauseFit& cf = fit.cause_fit(cause);
  GridPointContext ctx;
  ctx.scan = detail::risk_scan(cohort, index, cf.beta.row(eta_index).transpose());
  ctx.w_cause = jump_weights(cohort, *fit.gamma_fit,
                             fit.grid.points[static_cast<std::size_t>(eta_index)])
                    .cause(cause);
  ctx.baseline = detail::breslow_baseline(cohort, index, ctx.scan, ctx.w_cause);
  const int K = static_cast<int>(index.event_times.size());
  const int p = cohort.p();
  ctx.lambda_prefix.resize(K);
  ctx.e_lambda_prefix.resize(K, p);
  double cum = 0.0;
  Eigen::VectorXd ecum = Eigen::VectorXd::Zero(p);
  for (int k = 0; k < K; ++k) {
    const double d = ctx.baseline.jumps[static_cast<std::size_t>(k)];
    cum += d;
    ecum += d * ctx.scan.e.row(k).transpose();
    ctx.lambda_prefix(k) = cum;
    ctx.e_lambda_prefix.row(k) = ecum.transpose();
  }
  return ctx;
}

Eigen::MatrixXd martingale_rows(const Cohort& cohort, const RiskIndex& index,
                                const GridPointContext& ctx) {
  const int n = cohort.n();
  const int p = cohort.p();
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(n, p);
  for (int i = 0; i < n; ++i) {
    const Eigen::RowVectorXd z = cohort.covariate_matrix().row(i);
    if (cohort.status(i) == 1) {
      const int k = index.own_event[static_cast<std::size_t>(i)];
      rows.row(i) = ctx.w_cause(i) * (z - ctx.scan.e.row(k));
    }
    const int kle = index.last_event_le[static_cast<std::size_t>(i)];
    if (kle >= 0) {
      const double ebz = ctx.scan.exp_bz(i);
      rows.row(i) -=
          ebz * (z * ctx.lambda_prefix(kle) - ctx.e_lambda_prefix.row(kle));
    }
  }
  return rows;
}

// D = P_n[(1-R) Delta {Z - E(X)} (g'(gamma'W + eta) W)']; p x (p+q+2)
Eigen::MatrixXd coupling_matrix(const Cohort& cohort, const RiskIndex& index,
                                const GridPointContext& ctx, const MissingnessFit& missfit,
                                double eta) {
  const int p = cohort.p();
  const int d = cohort.p() + cohort.q() + 2;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, d);
  for (int i = 0; i < cohort.n(); ++i) {
    if (!cohort.cause_missing(i)) continue;
    const int k = index.own_event[static_cast<std::size_t>(i)];
    const Eigen::VectorXd wt = design_row(cohort, i);
    const double g = logistic(missfit.gamma_hat.dot(wt) + eta);
    const double gdot = g * (1.0 - g);
    const Eigen::VectorXd zr =
        (cohort.covariate_matrix().row(i) - ctx.scan.e.row(k)).transpose();
    D.noalias() += cohort.unit_weight(i) * gdot * zr * wt.transpose();
  }
  return D / static_cast<double>(cohort.unit_count());
}

double cause_sign(int cause) { return cause == 1 ? -1.0 : 1.0; }

}  // namespace

Eigen::MatrixXd martingale_residual_term(const Cohort& cohort, const FunctionalFit& fit,
                                         int cause, int eta_index) {
  const RiskIndex index = detail::make_risk_index(cohort);
  const GridPointContext ctx = make_context(cohort, index, fit, cause, eta_index);
  return martingale_rows(cohort, index, ctx);
}

Eigen::MatrixXd gamma_correction_term(const Cohort& cohort, const FunctionalFit& fit,
                                      const MissingnessFit& missfit, int cause,
                                      int eta_index) {
  const RiskIndex index = detail::make_risk_index(cohort);
  const GridPointContext ctx = make_context(cohort, index, fit, cause, eta_index);
  const Eigen::MatrixXd D = coupling_matrix(
      cohort, index, ctx, missfit, fit.grid.points[static_cast<std::size_t>(eta_index)]);
  return cause_sign(cause) * missfit.omega * D.transpose();
}

InfluenceArray assemble_influence(const Cohort& cohort, const FunctionalFit& fit,
                                  const MissingnessFit& missfit, int cause) {
  const RiskIndex index = detail::make_risk_index(cohort);
  const CauseFit& cf = fit.cause_fit(cause);
  const int M = fit.grid.size();
  const int p = cohort.p();

  InfluenceArray out;
  out.unit = cohort.clustered() ? InfluenceArray::Unit::cluster
                                : InfluenceArray::Unit::subject;
  out.cause = cause;
  out.grid = fit.grid;
  out.values.resize(static_cast<std::size_t>(M));

  for (int m = 0; m < M; ++m) {
    const GridPointContext ctx = make_context(cohort, index, fit, cause, m);
    Eigen::MatrixXd bracket = martingale_rows(cohort, index, ctx);
    const Eigen::MatrixXd D = coupling_matrix(
        cohort, index, ctx, missfit, fit.grid.points[static_cast<std::size_t>(m)]);
    bracket.noalias() += cause_sign(cause) * missfit.omega * D.transpose();

    const Eigen::MatrixXd& H = cf.hessian[static_cast<std::size_t>(m)];
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::MatrixXd psi;
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      psi = -ldlt.solve(bracket.transpose()).transpose();
    } else {
      // near-singular design: pseudo-inverse, degrade loudly via the flag
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(H);
      psi = -cod.solve(bracket.transpose()).transpose();
      out.pseudo_inverse_used = true;
    }

    if (cohort.clustered()) {
      Eigen::MatrixXd averaged = Eigen::MatrixXd::Zero(cohort.cluster_count(), p);
      for (int i = 0; i < cohort.n(); ++i)
        averaged.row(cohort.cluster_of(i)) +=
            psi.row(i) / cohort.cluster_size(cohort.cluster_of(i));
      psi = std::move(averaged);
    }
    if (!psi.allFinite())
      throw internal_error("non-finite influence values at eta = " +
                           std::to_string(fit.grid.points[static_cast<std::size_t>(m)]));
    out.values[static_cast<std::size_t>(m)] = std::move(psi);
  }
  return out;
}

}  // namespace mnarsens
