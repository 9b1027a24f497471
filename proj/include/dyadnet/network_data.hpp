// Dense dyadic data set: N nodes, one outcome and one covariate vector per
// ordered pair (i,j), i != j. Loading, validation, degeneracy filtering, and
// seeded relabeling. Instances are immutable after construction and safe to
// share read-only across parallel fits.
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dyadnet/common.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/rng.hpp"

namespace dyadnet {

inline constexpr int kMinNodes = 4;
inline constexpr std::uint64_t kIdentityRelabelSeed = 0;

struct NetworkData {
  int n = 0;
  int dim_x = 0;
  std::vector<double> y;                     // n*n row-major, diagonal unused (NaN)
  std::vector<double> x;                     // edge-major: ((i*n + j)*dim_x + k)
  std::vector<std::string> labels;           // original external identifiers
  std::vector<std::string> covariate_names;  // from the header or covariate_k

  int edge(int i, int j) const { return i * n + j; }
  double outcome(int i, int j) const { return y[edge(i, j)]; }
  double& outcome(int i, int j) { return y[edge(i, j)]; }
  const double* covariates(int i, int j) const { return &x[static_cast<std::size_t>(edge(i, j)) * dim_x]; }
  double* covariates(int i, int j) { return &x[static_cast<std::size_t>(edge(i, j)) * dim_x]; }

  // Density and linked-node count of a binary network; used by the harness.
  double density() const {
    double sum = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) sum += outcome(i, j);
    return sum / (static_cast<double>(n) * (n - 1));
  }

  int connected_count() const {
    int count = 0;
    for (int i = 0; i < n; ++i) {
      bool linked = false;
      for (int j = 0; j < n && !linked; ++j)
        if (i != j && (outcome(i, j) != 0.0 || outcome(j, i) != 0.0)) linked = true;
      if (linked) ++count;
    }
    return count;
  }
};

inline NetworkData make_network(int n, int dim_x) {
  if (n < kMinNodes) throw ValidationError("network needs at least 4 nodes, got " + std::to_string(n));
  if (dim_x < 1) throw ValidationError("network needs at least one covariate");
  NetworkData d;
  d.n = n;
  d.dim_x = dim_x;
  d.y.assign(static_cast<std::size_t>(n) * n, std::numeric_limits<double>::quiet_NaN());
  d.x.assign(static_cast<std::size_t>(n) * n * dim_x, 0.0);
  d.labels.resize(n);
  for (int i = 0; i < n; ++i) d.labels[i] = std::to_string(i + 1);
  d.covariate_names.resize(dim_x);
  for (int k = 0; k < dim_x; ++k) d.covariate_names[k] = "covariate_" + std::to_string(k + 1);
  return d;
}

// ---------------------------------------------------------------------------
// Edge-list I/O
// ---------------------------------------------------------------------------

struct EdgeListSchema {
  std::string sender_col = "sender_id";
  std::string receiver_col = "receiver_id";
  std::string outcome_col = "outcome";
  std::vector<std::string> covariate_cols;  // empty: every remaining column
  char delimiter = '\0';                    // '\0': sniff ',' vs '\t' from header
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, delim)) out.push_back(field);
  if (!line.empty() && line.back() == delim) out.push_back("");
  return out;
}

inline double parse_number(const std::string& s, std::size_t line_no, const std::string& col) {
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(e[-1]))) --e;
  double value = 0.0;
  const auto res = std::from_chars(b, e, value);
  if (res.ec != std::errc() || res.ptr != e)
    throw ValidationError("ParseError: non-numeric field '" + s + "' in column " + col +
                          " at line " + std::to_string(line_no));
  return value;
}

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

// Loads a complete directed edge list. Every ordered pair of distinct loaded
// nodes must appear exactly once; nodes are indexed in first-appearance order.
inline NetworkData load_edge_list(const std::string& path, const EdgeListSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);

  std::string header;
  if (!std::getline(in, header)) throw ValidationError("empty file: " + path);
  if (!header.empty() && header.back() == '\r') header.pop_back();

  char delim = schema.delimiter;
  if (delim == '\0') delim = header.find('\t') != std::string::npos ? '\t' : ',';

  const auto cols = detail::split_line(header, delim);
  auto find_col = [&](const std::string& name) {
    for (std::size_t c = 0; c < cols.size(); ++c)
      if (detail::trim(cols[c]) == name) return static_cast<int>(c);
    throw ValidationError("column '" + name + "' not found in header of " + path);
  };

  const int c_sender = find_col(schema.sender_col);
  const int c_receiver = find_col(schema.receiver_col);
  const int c_outcome = find_col(schema.outcome_col);
  std::vector<int> c_cov;
  std::vector<std::string> cov_names = schema.covariate_cols;
  if (cov_names.empty()) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const int ci = static_cast<int>(c);
      if (ci != c_sender && ci != c_receiver && ci != c_outcome) {
        c_cov.push_back(ci);
        cov_names.push_back(detail::trim(cols[c]));
      }
    }
  } else {
    for (const auto& name : cov_names) c_cov.push_back(find_col(name));
  }
  if (c_cov.empty()) throw ValidationError("no covariate columns in " + path);
  const int dim_x = static_cast<int>(c_cov.size());

  struct Row {
    int i, j;
    double y;
    std::vector<double> x;
  };
  std::vector<Row> rows;
  std::vector<std::string> labels;
  std::unordered_map<std::string, int> index_of;
  auto node_index = [&](const std::string& label) {
    const auto it = index_of.find(label);
    if (it != index_of.end()) return it->second;
    const int idx = static_cast<int>(labels.size());
    labels.push_back(label);
    index_of.emplace(label, idx);
    return idx;
  };

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::split_line(line, delim);
    if (fields.size() != cols.size())
      throw ValidationError("ParseError: expected " + std::to_string(cols.size()) +
                            " fields, got " + std::to_string(fields.size()) + " at line " +
                            std::to_string(line_no));
    Row r;
    const std::string s_label = detail::trim(fields[c_sender]);
    const std::string r_label = detail::trim(fields[c_receiver]);
    if (s_label == r_label)
      throw ValidationError("SelfLoopRejected: node '" + s_label + "' at line " +
                            std::to_string(line_no));
    r.i = node_index(s_label);
    r.j = node_index(r_label);
    r.y = detail::parse_number(fields[c_outcome], line_no, schema.outcome_col);
    r.x.resize(dim_x);
    for (int k = 0; k < dim_x; ++k)
      r.x[k] = detail::parse_number(fields[c_cov[k]], line_no, cov_names[k]);
    rows.push_back(std::move(r));
  }

  const int n = static_cast<int>(labels.size());
  if (n < kMinNodes)
    throw ValidationError("network needs at least 4 nodes, got " + std::to_string(n));

  NetworkData data = make_network(n, dim_x);
  data.labels = labels;
  data.covariate_names = cov_names;
  std::vector<char> seen(static_cast<std::size_t>(n) * n, 0);
  for (const auto& r : rows) {
    auto& slot = seen[data.edge(r.i, r.j)];
    if (slot)
      throw ValidationError("DuplicateObservation: (" + labels[r.i] + "," + labels[r.j] + ")");
    slot = 1;
    data.outcome(r.i, r.j) = r.y;
    std::copy(r.x.begin(), r.x.end(), data.covariates(r.i, r.j));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && !seen[data.edge(i, j)])
        throw ValidationError("MissingObservation: (" + labels[i] + "," + labels[j] + ")");
  return data;
}

// Writes the same format back out; numbers carry full round-trip precision.
inline void write_edge_list(const NetworkData& data, const std::string& path,
                            const EdgeListSchema& schema = {}) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path);
  const char delim = schema.delimiter == '\0' ? ',' : schema.delimiter;
  out << schema.sender_col << delim << schema.receiver_col << delim << schema.outcome_col;
  std::vector<std::string> cov_names = schema.covariate_cols;
  if (cov_names.empty()) cov_names = data.covariate_names;
  for (const auto& name : cov_names) out << delim << name;
  out << "\n";
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << delim << buf;
  };
  for (int i = 0; i < data.n; ++i)
    for (int j = 0; j < data.n; ++j) {
      if (i == j) continue;
      out << data.labels[i] << delim << data.labels[j];
      put(data.outcome(i, j));
      const double* xv = data.covariates(i, j);
      for (int k = 0; k < data.dim_x; ++k) put(xv[k]);
      out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Degeneracy filtering
// ---------------------------------------------------------------------------

struct DegeneracyReport {
  struct Dropped {
    std::string label;
    std::string reason;  // all-ones row / all-zeros row / all-ones column / all-zeros column
  };
  std::vector<Dropped> dropped_nodes;
  int passes = 0;
  bool empty() const { return dropped_nodes.empty(); }
};

inline NetworkData subnetwork(const NetworkData& data, const std::vector<int>& keep) {
  const int m = static_cast<int>(keep.size());
  if (m < kMinNodes)
    throw ValidationError("TooSmallAfterFiltering: " + std::to_string(m) + " nodes remain");
  NetworkData out = make_network(m, data.dim_x);
  out.covariate_names = data.covariate_names;
  for (int a = 0; a < m; ++a) out.labels[a] = data.labels[keep[a]];
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b) {
      if (a == b) continue;
      out.outcome(a, b) = data.outcome(keep[a], keep[b]);
      std::copy(data.covariates(keep[a], keep[b]), data.covariates(keep[a], keep[b]) + data.dim_x,
                out.covariates(a, b));
    }
  return out;
}

// Removes nodes whose outgoing or incoming outcomes are constant (binary
// families) until a fixed point; removing one node can make another constant.
// Continuous families keep every node: curvature is checked at fit time.
inline std::pair<NetworkData, DegeneracyReport> filter_degenerate(const NetworkData& data,
                                                                  Family family) {
  DegeneracyReport report;
  if (!family_is_binary(family)) {
    report.passes = 1;
    return {data, report};
  }
  std::vector<int> keep(data.n);
  std::iota(keep.begin(), keep.end(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    ++report.passes;
    std::vector<int> next;
    next.reserve(keep.size());
    for (int a : keep) {
      bool row_has_one = false, row_has_zero = false;
      bool col_has_one = false, col_has_zero = false;
      for (int b : keep) {
        if (a == b) continue;
        (data.outcome(a, b) != 0.0 ? row_has_one : row_has_zero) = true;
        (data.outcome(b, a) != 0.0 ? col_has_one : col_has_zero) = true;
      }
      std::string reason;
      if (!row_has_one) reason = "all-zeros row";
      else if (!row_has_zero) reason = "all-ones row";
      else if (!col_has_one) reason = "all-zeros column";
      else if (!col_has_zero) reason = "all-ones column";
      if (reason.empty()) {
        next.push_back(a);
      } else {
        report.dropped_nodes.push_back({data.labels[a], reason});
        changed = true;
      }
    }
    keep = std::move(next);
    if (static_cast<int>(keep.size()) < kMinNodes)
      throw ValidationError("TooSmallAfterFiltering: " + std::to_string(keep.size()) +
                            " nodes remain");
  }
  if (report.dropped_nodes.empty()) return {data, report};
  return {subnetwork(data, keep), report};
}

// ---------------------------------------------------------------------------
// Relabeling
// ---------------------------------------------------------------------------

inline std::vector<int> relabel_permutation(int n, std::uint64_t seed) {
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  if (seed == kIdentityRelabelSeed) return perm;
  RngStream rng(seed, {0x72656c61u});  // "rela"
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
  return perm;
}

// Applies a seed-derived uniform permutation to node indices. Seed
// kIdentityRelabelSeed keeps the data unchanged; labels move with their
// nodes so the inverse map stays recoverable.
inline NetworkData relabel(const NetworkData& data, std::uint64_t seed) {
  const auto perm = relabel_permutation(data.n, seed);
  NetworkData out = make_network(data.n, data.dim_x);
  out.covariate_names = data.covariate_names;
  for (int i = 0; i < data.n; ++i) out.labels[perm[i]] = data.labels[i];
  for (int i = 0; i < data.n; ++i)
    for (int j = 0; j < data.n; ++j) {
      if (i == j) continue;
      out.outcome(perm[i], perm[j]) = data.outcome(i, j);
      std::copy(data.covariates(i, j), data.covariates(i, j) + data.dim_x,
                out.covariates(perm[i], perm[j]));
    }
  return out;
}

}  // namespace dyadnet
