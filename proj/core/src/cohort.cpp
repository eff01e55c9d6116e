#include "mnarsens/cohort.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mnarsens/errors.hpp"

namespace mnarsens {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool is_missing_token(const std::string& s) { return s.empty() || s == "NA"; }

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(trim(field));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_double(const std::string& token, long row, const std::string& column) {
  const std::string t = trim(token);
  if (t.empty())
    throw parse_error("empty numeric cell in column '" + column + "', row " +
                          std::to_string(row),
                      row, column);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v))
    throw parse_error("malformed numeric cell '" + t + "' in column '" + column +
                          "', row " + std::to_string(row),
                      row, column);
  return v;
}

int parse_binary(const std::string& token, long row, const std::string& column) {
  const double v = parse_double(token, row, column);
  if (v != 0.0 && v != 1.0)
    throw validation_error("column '" + column + "' must be 0 or 1, got '" + token + "'", row);
  return static_cast<int>(v);
}

// Natural ordering for auto-detected z1..zp / a1..aq headers.
bool numbered_less(const std::string& a, const std::string& b, std::size_t prefix_len) {
  return std::stol(a.substr(prefix_len)) < std::stol(b.substr(prefix_len));
}

bool is_numbered(const std::string& name, char prefix) {
  if (name.size() < 2 || name[0] != prefix) return false;
  return std::all_of(name.begin() + 1, name.end(),
                     [](unsigned char c) { return std::isdigit(c); });
}

}  // namespace

Cohort Cohort::from_subjects(const std::vector<Subject>& subjects) {
  if (subjects.empty()) throw validation_error("empty cohort");
  const int n = static_cast<int>(subjects.size());
  const int p = static_cast<int>(subjects.front().covariates.size());
  const int q = static_cast<int>(subjects.front().auxiliaries.size());

  Cohort c;
  c.time_.resize(n);
  c.status_.resize(n);
  c.cause_.resize(n);
  c.observed_.resize(n);
  c.covariates_.resize(n, p);
  c.auxiliaries_.resize(n, q);

  const bool has_cluster = subjects.front().cluster.has_value();
  std::map<std::string, int> cluster_ids;
  if (has_cluster) c.cluster_index_.resize(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    const Subject& s = subjects[static_cast<std::size_t>(i)];
    if (s.covariates.size() != p)
      throw validation_error("covariate vector length differs from first subject", i + 1);
    if (s.auxiliaries.size() != q)
      throw validation_error("auxiliary vector length differs from first subject", i + 1);
    if (s.cluster.has_value() != has_cluster)
      throw validation_error("cluster id present for some subjects only", i + 1);
    c.time_(i) = s.time;
    c.status_(i) = s.status;
    c.observed_(i) = s.observed;
    c.cause_(i) = s.cause.value_or(-1);
    c.covariates_.row(i) = s.covariates.transpose();
    if (q > 0) c.auxiliaries_.row(i) = s.auxiliaries.transpose();
    if (has_cluster) {
      auto [it, inserted] = cluster_ids.try_emplace(*s.cluster, static_cast<int>(cluster_ids.size()));
      c.cluster_index_[static_cast<std::size_t>(i)] = it->second;
      if (inserted) c.cluster_labels_.push_back(*s.cluster);
    }
  }
  if (has_cluster) {
    c.cluster_sizes_.assign(cluster_ids.size(), 0);
    for (int idx : c.cluster_index_) c.cluster_sizes_[static_cast<std::size_t>(idx)]++;
  }
  c.finalize();
  return c;
}

Cohort Cohort::from_columns(Eigen::VectorXd time, Eigen::VectorXi status,
                            Eigen::VectorXi cause, Eigen::VectorXi observed,
                            Eigen::MatrixXd covariates, Eigen::MatrixXd auxiliaries,
                            std::vector<std::string> cluster_labels) {
  Cohort c;
  const Eigen::Index n = time.size();
  if (n == 0) throw validation_error("empty cohort");
  if (status.size() != n || cause.size() != n || observed.size() != n ||
      covariates.rows() != n || (auxiliaries.size() > 0 && auxiliaries.rows() != n))
    throw validation_error("column lengths differ");
  c.time_ = std::move(time);
  c.status_ = std::move(status);
  c.cause_ = std::move(cause);
  c.observed_ = std::move(observed);
  c.covariates_ = std::move(covariates);
  c.auxiliaries_ = auxiliaries.size() > 0 ? std::move(auxiliaries) : Eigen::MatrixXd(n, 0);
  if (!cluster_labels.empty()) {
    if (cluster_labels.size() != static_cast<std::size_t>(n))
      throw validation_error("cluster column length differs");
    std::map<std::string, int> ids;
    c.cluster_index_.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < cluster_labels.size(); ++i) {
      auto [it, inserted] = ids.try_emplace(cluster_labels[i], static_cast<int>(ids.size()));
      c.cluster_index_[i] = it->second;
      if (inserted) c.cluster_labels_.push_back(cluster_labels[i]);
    }
    c.cluster_sizes_.assign(ids.size(), 0);
    for (int idx : c.cluster_index_) c.cluster_sizes_[static_cast<std::size_t>(idx)]++;
  }
  c.finalize();
  return c;
}

void Cohort::finalize() {
  const int n = this->n();
  for (int i = 0; i < n; ++i) {
    const long row = i + 1;
    if (!std::isfinite(time_(i)) || time_(i) < 0.0)
      throw validation_error("time must be finite and nonnegative", row);
    if (status_(i) != 0 && status_(i) != 1)
      throw validation_error("status must be 0 or 1", row);
    if (observed_(i) != 0 && observed_(i) != 1)
      throw validation_error("observed flag must be 0 or 1", row);
    if (time_(i) == 0.0 && status_(i) == 0)
      throw validation_error("censored subject with time 0 contributes to no risk set", row);
    const bool has_cause = cause_(i) > 0;
    if (has_cause && cause_(i) != 1 && cause_(i) != 2)
      throw validation_error("cause must be 1 or 2", row);
    const bool expect_cause = status_(i) == 1 && observed_(i) == 1;
    if (has_cause && !expect_cause)
      throw validation_error(status_(i) == 0 ? "cause present for a censored subject"
                                             : "cause present while observed flag is 0",
                             row);
    if (!has_cause && expect_cause)
      throw validation_error("cause missing for a complete-case failure", row);
    if (observed_(i) == 0 && status_(i) != 1)
      throw validation_error("observed=0 requires status=1 (censoring is always observed)", row);
    if (!covariates_.row(i).allFinite() ||
        (auxiliaries_.cols() > 0 && !auxiliaries_.row(i).allFinite()))
      throw validation_error("non-finite covariate or auxiliary value", row);
  }
  for (int m : cluster_sizes_)
    if (m < 1) throw internal_error("cluster with no members");

  sort_index_.resize(static_cast<std::size_t>(n));
  std::iota(sort_index_.begin(), sort_index_.end(), 0);
  std::stable_sort(sort_index_.begin(), sort_index_.end(),
                   [this](int a, int b) { return time_(a) < time_(b); });
}

Eigen::VectorXd Cohort::unit_weights() const {
  Eigen::VectorXd w(n());
  for (int i = 0; i < n(); ++i) w(i) = unit_weight(i);
  return w;
}

int Cohort::missing_cause_count() const {
  int count = 0;
  for (int i = 0; i < n(); ++i)
    if (status_(i) == 1 && observed_(i) == 0) ++count;
  return count;
}

Subject Cohort::subject(int i) const {
  Subject s;
  s.time = time_(i);
  s.status = status_(i);
  s.observed = observed_(i);
  if (cause_(i) > 0) s.cause = cause_(i);
  s.covariates = covariates_.row(i).transpose();
  s.auxiliaries = auxiliaries_.row(i).transpose();
  if (clustered()) s.cluster = cluster_labels_[static_cast<std::size_t>(cluster_index_[static_cast<std::size_t>(i)])];
  return s;
}

Eigen::VectorXd design_row(const Cohort& cohort, int i) {
  const int p = cohort.p(), q = cohort.q();
  Eigen::VectorXd w(p + q + 2);
  w(0) = 1.0;
  w(1) = cohort.time(i);
  w.segment(2, p) = cohort.covariate_matrix().row(i).transpose();
  if (q > 0) w.segment(2 + p, q) = cohort.auxiliary_matrix().row(i).transpose();
  return w;
}

Eigen::MatrixXd design_rows(const Cohort& cohort) {
  const int n = cohort.n();
  Eigen::MatrixXd w(n, cohort.p() + cohort.q() + 2);
  for (int i = 0; i < n; ++i) w.row(i) = design_row(cohort, i).transpose();
  return w;
}

Cohort load_cohort(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open '" + path + "'");

  std::string header_line;
  if (!std::getline(in, header_line)) throw io_error("empty file '" + path + "'");
  if (!header_line.empty() && header_line.back() == '\r') header_line.pop_back();
  const char delim = header_line.find('\t') != std::string::npos &&
                             header_line.find(',') == std::string::npos
                         ? '\t'
                         : ',';
  const std::vector<std::string> header = split(header_line, delim);

  auto find_column = [&](const std::string& name) -> int {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == name) return static_cast<int>(k);
    return -1;
  };
  auto require_column = [&](const std::string& name) {
    const int k = find_column(name);
    if (k < 0) throw validation_error("missing required column '" + name + "'");
    return k;
  };

  const int col_time = require_column(schema.time);
  const int col_status = require_column(schema.status);
  const int col_cause = require_column(schema.cause);
  const int col_observed = require_column(schema.observed);
  const int col_cluster = schema.cluster.empty() ? -1 : require_column(schema.cluster);

  std::vector<std::string> z_names = schema.covariates;
  std::vector<std::string> a_names = schema.auxiliaries;
  if (z_names.empty()) {
    for (const auto& h : header)
      if (is_numbered(h, 'z')) z_names.push_back(h);
    std::sort(z_names.begin(), z_names.end(),
              [](const auto& a, const auto& b) { return numbered_less(a, b, 1); });
  }
  if (a_names.empty() && schema.covariates.empty()) {
    for (const auto& h : header)
      if (is_numbered(h, 'a')) a_names.push_back(h);
    std::sort(a_names.begin(), a_names.end(),
              [](const auto& a, const auto& b) { return numbered_less(a, b, 1); });
  }
  if (z_names.empty())
    throw validation_error("no covariate columns found (z1..zp or --schema z=...)");
  std::vector<int> z_cols, a_cols;
  for (const auto& name : z_names) z_cols.push_back(require_column(name));
  for (const auto& name : a_names) a_cols.push_back(require_column(name));

  std::vector<Subject> subjects;
  std::string line;
  long row = 1;  // header is row 1
  bool any_cluster = false, all_cluster = true;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split(line, delim);
    if (fields.size() != header.size())
      throw parse_error("row " + std::to_string(row) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(header.size()),
                        row, "");
    auto field = [&](int k) -> const std::string& { return fields[static_cast<std::size_t>(k)]; };

    Subject s;
    s.time = parse_double(field(col_time), row, schema.time);
    s.status = parse_binary(field(col_status), row, schema.status);
    s.observed = parse_binary(field(col_observed), row, schema.observed);
    if (!is_missing_token(field(col_cause))) {
      const double c = parse_double(field(col_cause), row, schema.cause);
      if (c != 1.0 && c != 2.0)
        throw validation_error("cause must be 1, 2, or missing", row);
      s.cause = static_cast<int>(c);
    }
    s.covariates.resize(static_cast<Eigen::Index>(z_cols.size()));
    for (std::size_t k = 0; k < z_cols.size(); ++k)
      s.covariates(static_cast<Eigen::Index>(k)) = parse_double(field(z_cols[k]), row, z_names[k]);
    s.auxiliaries.resize(static_cast<Eigen::Index>(a_cols.size()));
    for (std::size_t k = 0; k < a_cols.size(); ++k)
      s.auxiliaries(static_cast<Eigen::Index>(k)) = parse_double(field(a_cols[k]), row, a_names[k]);
    if (col_cluster >= 0) {
      const std::string c = field(col_cluster);
      if (!is_missing_token(c)) {
        s.cluster = c;
        any_cluster = true;
      } else {
        all_cluster = false;
      }
    }
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw validation_error("empty cohort in '" + path + "'");
  if (any_cluster && !all_cluster)
    throw validation_error("cluster column present for some rows only");

  // Subject-level invariants are validated in from_subjects / finalize with
  // 1-based subject rows; shift messages to file rows by re-checking here.
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const Subject& s = subjects[i];
    const long file_row = static_cast<long>(i) + 2;
    if (s.cause && s.status == 0)
      throw validation_error("cause present for a censored subject", file_row);
    if (s.cause && s.observed == 0)
      throw validation_error("cause present while observed flag is 0", file_row);
    if (!s.cause && s.status == 1 && s.observed == 1)
      throw validation_error("cause missing for a complete-case failure", file_row);
    if (s.observed == 0 && s.status != 1)
      throw validation_error("observed=0 requires status=1", file_row);
  }
  return Cohort::from_subjects(subjects);
}

void save_cohort(const Cohort& cohort, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write '" + path + "'");
  char buf[64];
  auto num = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "time,status,cause,observed";
  for (int k = 1; k <= cohort.p(); ++k) out << ",z" << k;
  for (int k = 1; k <= cohort.q(); ++k) out << ",a" << k;
  if (cohort.clustered()) out << ",cluster";
  out << "\n";
  for (int i = 0; i < cohort.n(); ++i) {
    out << num(cohort.time(i)) << ',' << cohort.status(i) << ',';
    if (cohort.cause_known(i)) out << cohort.cause(i);
    out << ',' << cohort.observed(i);
    for (int k = 0; k < cohort.p(); ++k) out << ',' << num(cohort.covariate_matrix()(i, k));
    for (int k = 0; k < cohort.q(); ++k) out << ',' << num(cohort.auxiliary_matrix()(i, k));
    if (cohort.clustered())
      out << ',' << cohort.cluster_labels()[static_cast<std::size_t>(cohort.cluster_of(i))];
    out << "\n";
  }
  if (!out) throw io_error("write failed for '" + path + "'");
}

}  // namespace mnarsens
