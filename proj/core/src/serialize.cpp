#include "mnarsens/serialize.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "mnarsens/errors.hpp"

namespace mnarsens {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

json vec_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json grid_json(const SensitivityGrid& grid) {
  return json{{"a", grid.a}, {"b", grid.b}, {"points", grid.points}};
}

json interval_json(const SymmetricInterval& iv) {
  if (iv.empty) return json{{"empty", true}};
  return json{{"empty", false}, {"lo", iv.lo}, {"hi", iv.hi}};
}

}  // namespace

std::string status_name(RobustnessStatus status) {
  switch (status) {
    case RobustnessStatus::root_found:
      return "root_found";
    case RobustnessStatus::empty_nonsignificant:
      return "empty_nonsignificant";
    case RobustnessStatus::maximal:
      return "maximal";
  }
  return "unknown";
}

std::string missingness_json(const MissingnessFit& fit) {
  json j{{"gamma_hat", vec_json(fit.gamma_hat)},
         {"converged", fit.converged},
         {"iterations", fit.iterations},
         {"ridge_used", fit.ridge_used},
         {"score_sup_norm", fit.score_sup_norm}};
  return j.dump(2);
}

std::string functional_fit_json(const FunctionalFit& fit) {
  json causes = json::array();
  for (int cause = 1; cause <= 2; ++cause) {
    if (!fit.has_cause(cause)) continue;
    const CauseFit& cf = fit.cause_fit(cause);
    json beta = json::array();
    for (int m = 0; m < fit.grid.size(); ++m) {
      json row = json::array();
      for (int k = 0; k < cf.beta.cols(); ++k) row.push_back(cf.beta(m, k));
      beta.push_back(row);
    }
    causes.push_back(json{{"cause", cause},
                          {"beta", beta},
                          {"converged", cf.converged},
                          {"iterations", cf.iterations}});
  }
  json j{{"grid", grid_json(fit.grid)}, {"causes", causes}};
  return j.dump(2);
}

std::string band_json(const BandResult& band, int cause, std::uint64_t seed, int boot,
                      int units) {
  json j{{"cause", cause},
         {"contrast", vec_json(band.contrast)},
         {"alpha", band.alpha},
         {"c_hat", band.c_hat},
         {"units", units},
         {"bootstrap_replicates", boot},
         {"seed", seed},
         {"eta", band.eta},
         {"estimate", band.estimate},
         {"lower", band.lower},
         {"upper", band.upper},
         {"id_region", band.id_region},
         {"ir_ci", band.ir_ci}};
  return j.dump(2);
}

std::string robustness_json(const RobustnessResult& r, int cause, std::uint64_t seed,
                            int boot) {
  json j{{"cause", cause},
         {"alpha", r.alpha},
         {"eta_max", r.eta_max},
         {"epsilon", r.epsilon},
         {"bootstrap_replicates", boot},
         {"seed", seed},
         {"status", status_name(r.status)},
         {"eta_tilde", r.eta_tilde},
         {"interval_log_odds", interval_json(r.interval_log_odds)},
         {"interval_odds_ratio", interval_json(r.interval_odds_ratio)},
         {"naive_status", status_name(r.naive_status)},
         {"naive_eta_tilde", r.naive_eta_tilde},
         {"naive_interval_log_odds", interval_json(r.naive_interval_log_odds)},
         {"naive_interval_odds_ratio", interval_json(r.naive_interval_odds_ratio)},
         // between grid points the percentile is held at the next-outer grid
         // value; the reported root is conservative within one grid cell
         {"percentile_rule", "order statistic ceil(S(1-alpha)); step-out between grid points"}};
  return j.dump(2);
}

std::string sim_report_json(const SimReport& r) {
  json j{{"scenario", r.design.scenario},
         {"n", r.design.n},
         {"replicates", r.design.replicates},
         {"replicates_completed", r.replicates_completed},
         {"replicates_failed", r.replicates_failed},
         {"bootstrap_replicates", r.bootstrap_replicates},
         {"alpha", r.alpha},
         {"seed", r.design.seed},
         {"grid", grid_json(r.grid)},
         {"bias_eta", r.bias_eta},
         {"pointwise_bias", r.pointwise_bias},
         {"pointwise_bias_se", r.pointwise_bias_se},
         {"mad", r.mad},
         {"mad_se", r.mad_se},
         {"cp_band", r.cp_band},
         {"cp_band_se", r.cp_band_se},
         {"cp_ir", r.cp_ir},
         {"cp_ir_se", r.cp_ir_se},
         {"mar_bias", r.mar_bias},
         {"mar_bias_se", r.mar_bias_se},
         {"mar_cp", r.mar_cp},
         {"mar_cp_se", r.mar_cp_se},
         {"beta_star", r.beta_star},
         {"oracle_n", r.oracle_n},
         {"oracle_seed", r.oracle_seed}};
  return j.dump(2);
}

std::string error_json(const std::string& type, const std::string& message) {
  return json{{"error", json{{"type", type}, {"message", message}}}}.dump();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw io_error("write failed for '" + path + "'");
}

std::string functional_fit_csv(const FunctionalFit& fit) {
  std::string out = "cause,eta,coef,estimate,hazard_ratio\n";
  for (int cause = 1; cause <= 2; ++cause) {
    if (!fit.has_cause(cause)) continue;
    const CauseFit& cf = fit.cause_fit(cause);
    for (int m = 0; m < fit.grid.size(); ++m)
      for (int k = 0; k < cf.beta.cols(); ++k)
        out += std::to_string(cause) + "," +
               fmt(fit.grid.points[static_cast<std::size_t>(m)]) + "," +
               std::to_string(k + 1) + "," + fmt(cf.beta(m, k)) + "," +
               fmt(std::exp(cf.beta(m, k))) + "\n";
  }
  return out;
}

std::string band_csv(const BandResult& band) {
  std::string out = "eta,estimate,lower,upper\n";
  for (std::size_t m = 0; m < band.eta.size(); ++m)
    out += fmt(band.eta[m]) + "," + fmt(band.estimate[m]) + "," + fmt(band.lower[m]) +
           "," + fmt(band.upper[m]) + "\n";
  return out;
}

std::string influence_csv(const InfluenceArray& influence) {
  std::string out = "unit,cause,eta,coef,value\n";
  for (int m = 0; m < influence.grid.size(); ++m) {
    const Eigen::MatrixXd& v = influence.values[static_cast<std::size_t>(m)];
    for (Eigen::Index i = 0; i < v.rows(); ++i)
      for (Eigen::Index k = 0; k < v.cols(); ++k)
        out += std::to_string(i + 1) + "," + std::to_string(influence.cause) + "," +
               fmt(influence.grid.points[static_cast<std::size_t>(m)]) + "," +
               std::to_string(k + 1) + "," + fmt(v(i, k)) + "\n";
  }
  return out;
}

std::string marginal_csv(const std::vector<double>& etas, const std::vector<double>& probs) {
  std::string out = "eta,prob_cause2\n";
  for (std::size_t m = 0; m < etas.size(); ++m)
    out += fmt(etas[m]) + "," + fmt(probs[m]) + "\n";
  return out;
}

std::string sim_report_csv(const SimReport& r) {
  std::string out =
      "scenario,n,bias_m1,bias_m05,bias_0,bias_p05,bias_p1,mad,cp_band,cp_ir,mar_bias,"
      "mar_cp\n";
  out += std::to_string(r.design.scenario) + "," + std::to_string(r.design.n);
  for (std::size_t k = 0; k < 5; ++k)
    out += "," + (k < r.pointwise_bias.size() ? fmt(r.pointwise_bias[k]) : std::string("NA"));
  out += "," + fmt(r.mad) + "," + fmt(r.cp_band) + "," + fmt(r.cp_ir) + "," +
         fmt(r.mar_bias) + "," + fmt(r.mar_cp) + "\n";
  return out;
}

}  // namespace mnarsens
