#include "mnarsens/missingness.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>

#include "mnarsens/errors.hpp"

namespace mnarsens {

namespace {

// Weighted Bernoulli log-likelihood over complete-case failures.
double loglik(const Eigen::MatrixXd& w_design, const Eigen::VectorXd& y,
              const Eigen::VectorXd& w, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd lin = w_design * gamma;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    // log g and log(1-g) via the numerically stable -log(1+e^{-|x|}) forms
    const double x = lin(i);
    const double log_g = x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
    const double log_1mg = log_g - x;
    ll += w(i) * (y(i) * log_g + (1.0 - y(i)) * log_1mg);
  }
  return ll;
}

}  // namespace

MissingnessFit fit_missingness(const Cohort& cohort, const Eigen::VectorXd& weights) {
  const int n = cohort.n();
  const int d = cohort.p() + cohort.q() + 2;
  Eigen::VectorXd w_all = weights.size() > 0 ? weights : cohort.unit_weights();
  if (w_all.size() != n) throw validation_error("weight vector length differs from cohort size");
  if ((w_all.array() < 0.0).any()) throw validation_error("weights must be nonnegative");

  // Complete-case failures carry the likelihood.
  std::vector<int> cc;
  cc.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    if (cohort.complete_case(i)) cc.push_back(i);
  const int m = static_cast<int>(cc.size());
  if (m == 0) throw validation_error("no complete-case failures to fit the missingness model");

  Eigen::MatrixXd x(m, d);
  Eigen::VectorXd y(m), w(m);
  int n_cause2 = 0;
  for (int k = 0; k < m; ++k) {
    const int i = cc[static_cast<std::size_t>(k)];
    x.row(k) = design_row(cohort, i).transpose();
    y(k) = cohort.cause(i) == 2 ? 1.0 : 0.0;
    w(k) = w_all(i);
    n_cause2 += cohort.cause(i) == 2;
  }
  if (n_cause2 == 0 || n_cause2 == m)
    throw convergence_error(
        "complete separation: all complete-case failures have cause " +
        std::to_string(n_cause2 == 0 ? 1 : 2));

  // Exact collinearity among the weighted design columns is unrecoverable.
  {
    Eigen::MatrixXd xw = w.array().sqrt().matrix().asDiagonal() * x;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    qr.setThreshold(1e-10);
    if (qr.rank() < d) {
      std::string cols;
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index k = qr.rank(); k < d; ++k)
        cols += (cols.empty() ? "" : ", ") + std::to_string(perm(k));
      throw validation_error("singular information: collinear design columns {" + cols +
                             "} of (1, X, Z, A)");
    }
  }

  const double norm = static_cast<double>(cohort.unit_count());
  MissingnessFit fit;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd info_sum(d, d);
  const double tol = 1e-10;
  const int max_iter = 100;
  double ll = loglik(x, y, w, gamma);
  bool converged = false;
  int iter = 0;

  for (; iter < max_iter; ++iter) {
    const Eigen::VectorXd g_val = (x * gamma).unaryExpr([](double v) { return logistic(v); });
    const Eigen::VectorXd resid = (y - g_val).cwiseProduct(w);
    const Eigen::VectorXd score_mean = x.transpose() * resid / norm;
    if (score_mean.lpNorm<Eigen::Infinity>() < tol) {
      converged = true;
      break;
    }
    const Eigen::VectorXd fisher_w = w.array() * g_val.array() * (1.0 - g_val.array());
    info_sum = x.transpose() * fisher_w.asDiagonal() * x;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info_sum);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any()) {
      info_sum.diagonal().array() += 1e-8;
      ldlt.compute(info_sum);
      fit.ridge_used = true;
      if (ldlt.info() != Eigen::Success)
        throw convergence_error("information matrix not positive definite", gamma);
    }
    Eigen::VectorXd step = ldlt.solve(x.transpose() * resid);
    double scale = 1.0;
    Eigen::VectorXd candidate = gamma + step;
    double ll_new = loglik(x, y, w, candidate);
    int halvings = 0;
    while (ll_new < ll && halvings < 40) {
      scale *= 0.5;
      candidate = gamma + scale * step;
      ll_new = loglik(x, y, w, candidate);
      ++halvings;
    }
    gamma = candidate;
    ll = ll_new;
  }

  const Eigen::VectorXd g_val = (x * gamma).unaryExpr([](double v) { return logistic(v); });
  const Eigen::VectorXd resid = (y - g_val).cwiseProduct(w);
  fit.score_sup_norm = (x.transpose() * resid / norm).lpNorm<Eigen::Infinity>();
  if (!converged)
    throw convergence_error(
        "missingness model did not converge in " + std::to_string(max_iter) +
            " iterations (possible quasi-separation); score sup-norm " +
            std::to_string(fit.score_sup_norm),
        gamma);

  const Eigen::VectorXd fisher_w = w.array() * g_val.array() * (1.0 - g_val.array());
  info_sum = x.transpose() * fisher_w.asDiagonal() * x;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info_sum);
  if (ldlt.info() != Eigen::Success) {
    info_sum.diagonal().array() += 1e-8;
    ldlt.compute(info_sum);
    fit.ridge_used = true;
  }
  fit.gamma_hat = gamma;
  fit.info_inverse = ldlt.solve(Eigen::MatrixXd::Identity(d, d));
  fit.info_inverse = 0.5 * (fit.info_inverse + fit.info_inverse.transpose()).eval();
  fit.converged = converged;
  fit.iterations = iter;

  // omega_i = n * info_inverse * w_i R_i Delta_i W_i (Delta_i2 - g); zero off
  // the complete cases.
  fit.omega = Eigen::MatrixXd::Zero(n, d);
  for (int k = 0; k < m; ++k) {
    const int i = cc[static_cast<std::size_t>(k)];
    fit.omega.row(i) = norm * resid(k) * (fit.info_inverse * x.row(k).transpose()).transpose();
  }
  return fit;
}

double predict_cause2(const MissingnessFit& fit, const Eigen::VectorXd& wtilde,
                      double eta) {
  return logistic(fit.gamma_hat.dot(wtilde) + eta);
}

double marginal_missing_death_prob(const Cohort& cohort, const MissingnessFit& fit,
                                   double eta) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < cohort.n(); ++i) {
    if (!cohort.cause_missing(i)) continue;
    const double w = cohort.unit_weight(i);
    num += w * logistic(fit.gamma_hat.dot(design_row(cohort, i)) + eta);
    den += w;
  }
  if (den == 0.0)
    throw validation_error("no missing-cause subjects: marginal probability undefined");
  return num / den;
}

}  // namespace mnarsens
