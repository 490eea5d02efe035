#include "jpo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "jpo/common.hpp"

namespace jpo {

int Dataset::col(const std::string& name) const {
  for (std::size_t j = 0; j < v_names.size(); ++j)
    if (v_names[j] == name) return static_cast<int>(j);
  fail(errc::unknown_column, "data-model: no covariate column named '" + name + "'");
}

bool Dataset::has_col(const std::string& name) const {
  return std::find(v_names.begin(), v_names.end(), name) != v_names.end();
}

void Dataset::add_column(const std::string& name, const Eigen::VectorXd& values) {
  if (values.size() != n())
    fail(errc::dimension_mismatch, "data-model: column length != dataset rows");
  if (has_col(name)) fail(errc::invalid_config, "data-model: column '" + name + "' already exists");
  v.conservativeResize(n(), v.cols() + 1);
  v.col(v.cols() - 1) = values;
  v_names.push_back(name);
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
  Dataset out;
  const int m = static_cast<int>(rows.size());
  out.a.resize(m);
  out.y.resize(m);
  out.s.resize(m);
  out.v.resize(m, v.cols());
  out.v_names = v_names;
  out.has_clusters = has_clusters;
  out.n_strata = n_strata;
  out.cluster.resize(m);
  out.cluster_labels = cluster_labels;
  for (int i = 0; i < m; ++i) {
    const int r = rows[i];
    out.a[i] = a[r];
    out.y[i] = y[r];
    out.s[i] = s[r];
    out.v.row(i) = v.row(r);
    out.cluster[i] = cluster.empty() ? i : cluster[r];
  }
  return out;
}

Dataset dataset_from_rows(const std::vector<Observation>& rows,
                          const std::vector<std::string>& v_names) {
  Dataset d;
  const int n = static_cast<int>(rows.size());
  if (n == 0) fail(errc::invalid_config, "data-model: empty input");
  const std::size_t dim = rows.front().v.size();
  for (const auto& r : rows)
    if (r.v.size() != dim)
      fail(errc::ragged_covariates, "data-model: inconsistent covariate dimension");
  if (!v_names.empty() && v_names.size() != dim)
    fail(errc::dimension_mismatch, "data-model: v_names length != covariate dimension");
  d.a.resize(n);
  d.y.resize(n);
  d.s.resize(n);
  d.v.resize(n, static_cast<int>(dim));
  d.v_names = v_names;
  for (std::size_t j = d.v_names.size(); j < dim; ++j) d.v_names.push_back("v" + std::to_string(j));
  std::map<std::string, int> cluster_ids;
  bool any_cluster = false, all_cluster = true;
  for (const auto& r : rows) {
    if (r.cluster) any_cluster = true; else all_cluster = false;
  }
  if (any_cluster && !all_cluster)
    fail(errc::invalid_config, "data-model: cluster id present on some rows only");
  d.has_clusters = any_cluster;
  d.cluster.resize(n);
  for (int i = 0; i < n; ++i) {
    const auto& r = rows[i];
    d.a[i] = r.a;
    d.y[i] = r.y;
    d.s[i] = r.s;
    for (std::size_t j = 0; j < dim; ++j) d.v(i, static_cast<int>(j)) = r.v[j];
    if (any_cluster) {
      auto [it, inserted] = cluster_ids.emplace(*r.cluster, static_cast<int>(cluster_ids.size()));
      d.cluster[i] = it->second;
      if (inserted) d.cluster_labels.push_back(*r.cluster);
    } else {
      d.cluster[i] = i;
    }
  }
  return d;
}

ValidatedDataset validate_dataset(Dataset d) {
  const int n = d.n();
  if (n == 0) fail(errc::invalid_config, "data-model: empty input");
  for (int i = 0; i < n; ++i) {
    if (d.a[i] != 0 && d.a[i] != 1)
      fail(errc::non_binary_value, "data-model: treatment must be 0/1 (row " + std::to_string(i) + ")");
    if (d.y[i] != 0 && d.y[i] != 1)
      fail(errc::non_binary_value, "data-model: outcome must be 0/1 (row " + std::to_string(i) + ")");
  }
  if (!d.v.allFinite())
    fail(errc::ragged_covariates, "data-model: missing or non-finite covariate value");
  int smax = 0;
  for (int i = 0; i < n; ++i) {
    if (d.s[i] < 1) fail(errc::invalid_config,
                         "data-model: stratum unassigned on row " + std::to_string(i));
    smax = std::max(smax, d.s[i]);
  }
  if (smax < 2) fail(errc::invalid_config, "data-model: need at least 2 stratum levels");
  d.n_strata = smax;
  if (d.cluster.empty()) {
    d.cluster.resize(n);
    for (int i = 0; i < n; ++i) d.cluster[i] = i;
  }
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(smax, 2);
  for (int i = 0; i < n; ++i) counts(d.s[i] - 1, d.a[i]) += 1;
  for (int s = 0; s < smax; ++s)
    for (int arm = 0; arm < 2; ++arm)
      if (counts(s, arm) == 0)
        fail(errc::empty_stratum_arm, "data-model: no observations with stratum " +
                                          std::to_string(s + 1) + ", arm " + std::to_string(arm));
  ValidatedDataset out;
  out.data = std::move(d);
  out.cell_counts = std::move(counts);
  return out;
}

ValidatedDataset validate_dataset(const std::vector<Observation>& rows,
                                  const std::vector<std::string>& v_names) {
  return validate_dataset(dataset_from_rows(rows, v_names));
}

namespace {

// Distinct values of a column in ascending order.
std::vector<double> distinct_values(const Eigen::MatrixXd& v, int col) {
  std::vector<double> vals(v.rows());
  for (Eigen::Index i = 0; i < v.rows(); ++i) vals[i] = v(i, col);
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

std::string format_value(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

}  // namespace

int StratumMap::assign(const Dataset& d, int row) const {
  switch (spec.mode) {
    case StratumSpec::Mode::quantile_bins: {
      const double x = d.v(row, d.col(spec.column));
      // Boundary values go to the lower bin: bin = 1 + #{edges strictly below x}.
      int bin = 1;
      for (double e : edges)
        if (x > e) ++bin;
      return bin;
    }
    case StratumSpec::Mode::existing_column: {
      const double x = d.v(row, d.col(spec.column));
      for (std::size_t l = 0; l < level_codes.size(); ++l)
        if (level_codes[l][0] == x) return static_cast<int>(l) + 1;
      fail(errc::unknown_column, "data-model: unseen stratum value " + format_value(x));
    }
    case StratumSpec::Mode::factor_cross: {
      std::vector<double> key;
      key.reserve(spec.cross_columns.size());
      for (const auto& c : spec.cross_columns) key.push_back(d.v(row, d.col(c)));
      for (std::size_t l = 0; l < level_codes.size(); ++l)
        if (level_codes[l] == key) return static_cast<int>(l) + 1;
      fail(errc::unknown_column, "data-model: unseen factor combination");
    }
  }
  fail(errc::invalid_config, "data-model: bad stratum mode");
}

StratumResult construct_stratum(Dataset d, const StratumSpec& spec) {
  StratumMap map;
  map.spec = spec;
  switch (spec.mode) {
    case StratumSpec::Mode::quantile_bins: {
      const int col = d.col(spec.column);
      if (spec.bins < 2) fail(errc::invalid_config, "data-model: quantile bins must be >= 2");
      const auto distinct = distinct_values(d.v, col);
      if (static_cast<int>(distinct.size()) < spec.bins)
        fail(errc::degenerate_bins, "data-model: fewer distinct values than requested bins");
      std::vector<double> sorted(d.v.col(col).data(), d.v.col(col).data() + d.n());
      std::sort(sorted.begin(), sorted.end());
      for (int b = 1; b < spec.bins; ++b)
        map.edges.push_back(
            quantile_type7_sorted(sorted, static_cast<double>(b) / spec.bins));
      for (std::size_t i = 1; i < map.edges.size(); ++i)
        if (!(map.edges[i] > map.edges[i - 1]))
          fail(errc::degenerate_bins, "data-model: tied quantile edges");
      for (int b = 1; b <= spec.bins; ++b)
        map.labels.push_back(spec.column + "_q" + std::to_string(b));
      break;
    }
    case StratumSpec::Mode::existing_column: {
      const int col = d.col(spec.column);
      for (double val : distinct_values(d.v, col)) {
        map.level_codes.push_back({val});
        map.labels.push_back(spec.column + "=" + format_value(val));
      }
      break;
    }
    case StratumSpec::Mode::factor_cross: {
      if (spec.cross_columns.size() < 2)
        fail(errc::invalid_config, "data-model: factor cross needs >= 2 columns");
      std::vector<std::vector<double>> per_col_levels;
      for (const auto& c : spec.cross_columns)
        per_col_levels.push_back(distinct_values(d.v, d.col(c)));
      // Full cartesian product of observed per-column levels, lexicographic.
      std::vector<std::vector<double>> combos{{}};
      for (const auto& levels : per_col_levels) {
        std::vector<std::vector<double>> next;
        for (const auto& partial : combos)
          for (double val : levels) {
            auto key = partial;
            key.push_back(val);
            next.push_back(std::move(key));
          }
        combos = std::move(next);
      }
      map.level_codes = std::move(combos);
      for (const auto& key : map.level_codes) {
        std::string label;
        for (std::size_t j = 0; j < key.size(); ++j) {
          if (j) label += "/";
          label += spec.cross_columns[j] + "=" + format_value(key[j]);
        }
        map.labels.push_back(label);
      }
      break;
    }
  }
  for (int i = 0; i < d.n(); ++i) d.s[i] = map.assign(d, i);
  if (spec.mode == StratumSpec::Mode::quantile_bins) {
    std::vector<int> counts(spec.bins, 0);
    for (int i = 0; i < d.n(); ++i) counts[d.s[i] - 1]++;
    for (int b = 0; b < spec.bins; ++b)
      if (counts[b] == 0) fail(errc::degenerate_bins, "data-model: empty quantile bin");
  }
  d.n_strata = map.n_levels();
  return {std::move(d), std::move(map)};
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  for (auto& f : fields) {
    const auto b = f.find_first_not_of(" \t");
    const auto e = f.find_last_not_of(" \t");
    f = (b == std::string::npos) ? std::string() : f.substr(b, e - b + 1);
  }
  return fields;
}

double parse_number(const std::string& field, int line_no) {
  if (field.empty())
    fail(errc::parse_error, "data-model: missing value on line " + std::to_string(line_no));
  double out = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end)
    fail(errc::parse_error,
         "data-model: non-numeric field '" + field + "' on line " + std::to_string(line_no));
  if (!std::isfinite(out))
    fail(errc::parse_error, "data-model: non-finite value on line " + std::to_string(line_no));
  return out;
}

int parse_binary(const std::string& field, const std::string& what, int line_no) {
  const double x = parse_number(field, line_no);
  if (x != 0.0 && x != 1.0)
    fail(errc::non_binary_value,
         "data-model: " + what + " must be 0/1, got '" + field + "' on line " +
             std::to_string(line_no));
  return static_cast<int>(x);
}

}  // namespace

Dataset read_csv(const std::string& path, const CsvBindings& bindings) {
  std::ifstream in(path);
  if (!in) fail(errc::io_error, "data-model: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) fail(errc::parse_error, "data-model: empty file");
  const auto header = split_line(line);
  auto find = [&](const std::string& name) -> int {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    fail(errc::unknown_column, "data-model: CSV has no column '" + name + "'");
  };
  const int a_col = find(bindings.treatment);
  const int y_col = find(bindings.outcome);
  const int s_col = bindings.stratum ? find(*bindings.stratum) : -1;
  const int c_col = bindings.cluster ? find(*bindings.cluster) : -1;
  std::vector<int> v_cols;
  std::vector<std::string> v_names;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const int jj = static_cast<int>(j);
    if (jj == a_col || jj == y_col || jj == s_col || jj == c_col) continue;
    v_cols.push_back(jj);
    v_names.push_back(header[j]);
  }

  std::vector<Observation> rows;
  std::map<int, int> stratum_codes;  // raw label -> dense label
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_line(line);
    if (fields.size() != header.size())
      fail(errc::parse_error, "data-model: field count mismatch on line " + std::to_string(line_no));
    Observation obs;
    obs.a = parse_binary(fields[a_col], "treatment", line_no);
    obs.y = parse_binary(fields[y_col], "outcome", line_no);
    if (s_col >= 0) {
      const double raw = parse_number(fields[s_col], line_no);
      if (raw != std::floor(raw) || raw < 1)
        fail(errc::parse_error, "data-model: stratum labels must be positive integers (line " +
                                    std::to_string(line_no) + ")");
      obs.s = static_cast<int>(raw);
    }
    if (c_col >= 0) obs.cluster = fields[c_col];
    obs.v.reserve(v_cols.size());
    for (int jj : v_cols) obs.v.push_back(parse_number(fields[jj], line_no));
    rows.push_back(std::move(obs));
  }
  if (rows.empty()) fail(errc::invalid_config, "data-model: no data rows in '" + path + "'");
  Dataset d = dataset_from_rows(rows, v_names);
  if (s_col >= 0) {
    // Compress raw labels to 1..K preserving order.
    std::set<int> seen;
    for (int i = 0; i < d.n(); ++i) seen.insert(d.s[i]);
    std::map<int, int> dense;
    int next = 1;
    for (int raw : seen) dense[raw] = next++;
    for (int i = 0; i < d.n(); ++i) d.s[i] = dense[d.s[i]];
  }
  return d;
}

void write_csv(const std::string& path, const Dataset& d) {
  std::ofstream out(path);
  if (!out) fail(errc::io_error, "data-model: cannot write '" + path + "'");
  out << "a,y";
  if (d.n_strata > 0 || (d.s > 0).any()) out << ",s";
  const bool with_s = d.n_strata > 0 || (d.s > 0).any();
  if (d.has_clusters) out << ",cluster";
  for (const auto& name : d.v_names) out << "," << name;
  out << "\n";
  out.precision(17);
  for (int i = 0; i < d.n(); ++i) {
    out << d.a[i] << "," << d.y[i];
    if (with_s) out << "," << d.s[i];
    if (d.has_clusters)
      out << "," << (d.cluster_labels.empty() ? std::to_string(d.cluster[i])
                                              : d.cluster_labels[d.cluster[i]]);
    for (Eigen::Index j = 0; j < d.v.cols(); ++j) out << "," << d.v(i, j);
    out << "\n";
  }
}

}  // namespace jpo
