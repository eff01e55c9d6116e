#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mnarsens {

// One observation: follow-up time X = min(T, U), event indicator, the cause
// of failure when observed, the observed-cause indicator R, covariates Z,
// auxiliaries A and an optional cluster label.
struct Subject {
  double time = 0.0;
  int status = 0;    // 1 = failure, 0 = censored
  std::optional<int> cause;  // in {1,2}; present iff status==1 and observed==1
  int observed = 1;  // R
  Eigen::VectorXd covariates;
  Eigen::VectorXd auxiliaries;
  std::optional<std::string> cluster;
};

// Validated, immutable cohort in column layout. Subjects keep their input
// order; sort_index holds the ascending-time permutation used by risk sets.
class Cohort {
 public:
  static Cohort from_subjects(const std::vector<Subject>& subjects);

  // Fast path used by the simulator; cause entries use -1 for "missing".
  static Cohort from_columns(Eigen::VectorXd time, Eigen::VectorXi status,
                             Eigen::VectorXi cause, Eigen::VectorXi observed,
                             Eigen::MatrixXd covariates,
                             Eigen::MatrixXd auxiliaries,
                             std::vector<std::string> cluster_labels = {});

  int n() const { return static_cast<int>(time_.size()); }
  int p() const { return static_cast<int>(covariates_.cols()); }
  int q() const { return static_cast<int>(auxiliaries_.cols()); }

  double time(int i) const { return time_(i); }
  int status(int i) const { return status_(i); }
  int observed(int i) const { return observed_(i); }
  bool cause_known(int i) const { return cause_(i) > 0; }
  int cause(int i) const { return cause_(i); }  // -1 when missing
  Eigen::MatrixXd::ConstRowXpr covariates(int i) const { return covariates_.row(i); }

  const Eigen::VectorXd& times() const { return time_; }
  const Eigen::MatrixXd& covariate_matrix() const { return covariates_; }
  const Eigen::MatrixXd& auxiliary_matrix() const { return auxiliaries_; }

  // Indicator Delta_ij = I(failure from cause j); false when the cause is missing.
  bool delta_j(int i, int cause_j) const { return cause_(i) == cause_j; }
  // Complete-case failure: status==1 and R==1.
  bool complete_case(int i) const { return status_(i) == 1 && observed_(i) == 1; }
  bool cause_missing(int i) const { return status_(i) == 1 && observed_(i) == 0; }

  const std::vector<int>& sort_index() const { return sort_index_; }

  bool clustered() const { return !cluster_index_.empty(); }
  int cluster_count() const { return static_cast<int>(cluster_sizes_.size()); }
  int cluster_of(int i) const { return cluster_index_[static_cast<std::size_t>(i)]; }
  int cluster_size(int c) const { return cluster_sizes_[static_cast<std::size_t>(c)]; }
  const std::vector<std::string>& cluster_labels() const { return cluster_labels_; }

  // 1 for unclustered cohorts, 1/M_i for clustered ones.
  double unit_weight(int i) const {
    return clustered() ? 1.0 / cluster_sizes_[static_cast<std::size_t>(cluster_index_[static_cast<std::size_t>(i)])]
                       : 1.0;
  }
  Eigen::VectorXd unit_weights() const;
  // Number of independent units: clusters when clustered, subjects otherwise.
  int unit_count() const { return clustered() ? cluster_count() : n(); }

  int missing_cause_count() const;

  Subject subject(int i) const;

 private:
  Cohort() = default;
  void finalize();  // validates invariants and builds sort_index

  Eigen::VectorXd time_;
  Eigen::VectorXi status_;
  Eigen::VectorXi cause_;  // -1 = missing
  Eigen::VectorXi observed_;
  Eigen::MatrixXd covariates_;
  Eigen::MatrixXd auxiliaries_;
  std::vector<int> cluster_index_;
  std::vector<int> cluster_sizes_;
  std::vector<std::string> cluster_labels_;
  std::vector<int> sort_index_;
};

// W-tilde = (1, X, Z', A')', the design row of the missingness model.
struct DesignRow {
  Eigen::VectorXd wtilde;
};

Eigen::VectorXd design_row(const Cohort& cohort, int i);
// One row per subject, cohort order; n x (p+q+2).
Eigen::MatrixXd design_rows(const Cohort& cohort);

// Header-driven CSV column mapping. Empty vectors mean "auto-detect z1..zp
// and a1..aq"; empty cluster means "no cluster column".
struct CsvSchema {
  std::string time = "time";
  std::string status = "status";
  std::string cause = "cause";
  std::string observed = "observed";
  std::vector<std::string> covariates;
  std::vector<std::string> auxiliaries;
  std::string cluster;
};

Cohort load_cohort(const std::string& path, const CsvSchema& schema = {});
// Writes the canonical schema with round-trip (%.17g) numerics.
void save_cohort(const Cohort& cohort, const std::string& path);

}  // namespace mnarsens
