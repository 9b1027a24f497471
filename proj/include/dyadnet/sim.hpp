// Monte Carlo harness: the four fixed-effect designs, replication runner,
// and summary tables.
//
// Design: Y_ij = 1{theta X_ij + alpha_i + gamma_j > eps_ij}, eps standard
// normal, X_i = 1 - 2*1{i odd} (1-based), X_ij = X_i X_j, and alpha = gamma =
// an equally spaced sequence from fe_lo to fe_hi. The four published settings
// range the sequence over (+-loglogN), (-loglogN,0), (-sqrt(logN),0),
// (-logN,0), moving the network from half density down to a few percent.
//
// Every replication draws from a stream keyed on (seed, design, rep), so runs
// are bit-reproducible for any job count.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dyadnet/common.hpp"
#include "dyadnet/estimator.hpp"
#include "dyadnet/inference.hpp"
#include "dyadnet/jackknife.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/network_data.hpp"
#include "dyadnet/parallel.hpp"
#include "dyadnet/partition.hpp"
#include "dyadnet/rng.hpp"

namespace dyadnet {

enum class FeMode { kShared, kIndependent };

struct SimDesign {
  std::string name = "dense";
  int n_nodes = 50;
  double theta = 1.0;
  double fe_lo = 0.0;
  double fe_hi = 0.0;
  int n_reps = 1000;
  std::uint64_t seed = 1;
  std::vector<std::string> estimators = {"mle", "j", "wj"};  // of mle,j,wj,ss,d
  FeMode fe_mode = FeMode::kShared;
  double strategic_rho = 0.0;  // adds rho * shared-partner share to the index
  FitConfig fit_config;

  void resolve_range() {
    const double logn = std::log(static_cast<double>(n_nodes));
    if (name == "dense") {
      fe_lo = -std::log(logn);
      fe_hi = std::log(logn);
    } else if (name == "mid") {
      fe_lo = -std::log(logn);
      fe_hi = 0.0;
    } else if (name == "sqrt") {
      fe_lo = -std::sqrt(logn);
      fe_hi = 0.0;
    } else if (name == "sparse") {
      fe_lo = -logn;
      fe_hi = 0.0;
    } else if (name != "custom") {
      throw ValidationError("unknown design: " + name +
                            " (expected dense|mid|sqrt|sparse|custom)");
    }
  }
};

struct TruthRecord {
  double theta;
  Vec alpha;
  Vec gamma;
};

inline std::uint64_t design_stream_tag(const SimDesign& d) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (char c : d.name) mix(static_cast<std::uint64_t>(c));
  mix(static_cast<std::uint64_t>(d.n_nodes));
  mix(static_cast<std::uint64_t>(d.fe_mode));
  return h;
}

// One draw from the design. A positive strategic_rho first draws a dyadic
// network, then redraws every link with an added payoff proportional to the
// share of common partners, which is the transitivity alternative used by the
// specification-test power checks.
inline std::pair<NetworkData, TruthRecord> generate_design(const SimDesign& design, int rep) {
  const int n = design.n_nodes;
  TruthRecord truth;
  truth.theta = design.theta;
  truth.alpha.resize(n);
  truth.gamma.resize(n);
  RngStream rng(design.seed, {design_stream_tag(design), static_cast<std::uint64_t>(rep)});
  for (int i = 0; i < n; ++i)
    truth.alpha[i] =
        n == 1 ? design.fe_lo : design.fe_lo + (design.fe_hi - design.fe_lo) * i / (n - 1.0);
  if (design.fe_mode == FeMode::kShared) {
    truth.gamma = truth.alpha;
  } else {
    // same marginal sequence, independently shuffled assignment
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    for (int i = 0; i < n; ++i) truth.gamma[i] = truth.alpha[order[i]];
  }

  NetworkData data = make_network(n, 1);
  auto x_node = [](int i) { return (i + 1) % 2 == 1 ? -1.0 : 1.0; };  // 1-based odd -> -1
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      data.covariates(i, j)[0] = x_node(i) * x_node(j);
      const double eta = design.theta * data.covariates(i, j)[0] + truth.alpha[i] + truth.gamma[j];
      data.outcome(i, j) = rng.normal() < eta ? 1.0 : 0.0;
    }

  if (design.strategic_rho != 0.0) {
    // transitivity alternative: redraw every link with an added payoff when
    // the pair shares at least one partner in the first-stage network. The
    // indicator keeps the payoff bounded; on sparse designs sharing a partner
    // is idiosyncratic given degrees, which the dyadic model cannot absorb.
    Mat boost = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        for (int k = 0; k < n; ++k)
          if (k != i && k != j && data.outcome(i, k) * data.outcome(k, j) > 0.0) {
            boost(i, j) = 1.0;
            break;
          }
      }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const double eta = design.theta * data.covariates(i, j)[0] + truth.alpha[i] +
                           truth.gamma[j] + design.strategic_rho * boost(i, j);
        data.outcome(i, j) = rng.normal() < eta ? 1.0 : 0.0;
      }
  }
  return {std::move(data), std::move(truth)};
}

// ---------------------------------------------------------------------------
// Replication runner
// ---------------------------------------------------------------------------

struct RepRecord {
  int rep = 0;
  bool ok = false;
  double density = 0.0;
  int connected = 0;
  int n_filtered = 0;
  double se = 0.0;  // full-sample sandwich SE
  std::vector<std::pair<std::string, double>> estimates;
  std::string error;

  std::optional<double> estimate(const std::string& name) const {
    for (const auto& [key, value] : estimates)
      if (key == name) return value;
    return std::nullopt;
  }
};

struct EstimatorSummary {
  std::string name;
  double bias_mean = 0.0;
  double bias_median = 0.0;
  double std_dev = 0.0;
  double p5_p95 = 0.0;
  double rejection = 0.0;
  int n_used = 0;

  bool operator==(const EstimatorSummary&) const = default;
};

struct SimSummary {
  std::vector<EstimatorSummary> rows;
  double mean_density = 0.0;
  double mean_connected = 0.0;
  int n_reps = 0;
  int n_failed = 0;

  bool operator==(const SimSummary&) const = default;

  const EstimatorSummary& row(const std::string& name) const {
    for (const auto& r : rows)
      if (r.name == name) return r;
    throw ValidationError("no summary row for estimator " + name);
  }
};

namespace detail {

inline double quantile_type7(std::vector<double> sorted, double q) {
  const double h = (sorted.size() - 1) * q;
  const std::size_t lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

// Runs one replication: generate, filter, fit, correct, test against theta.
inline RepRecord run_replication(const SimDesign& design, int rep) {
  RepRecord rec;
  rec.rep = rep;
  auto has = [&](const char* name) {
    return std::find(design.estimators.begin(), design.estimators.end(), name) !=
           design.estimators.end();
  };
  try {
    auto [raw, truth] = generate_design(design, rep);
    rec.density = raw.density();
    rec.connected = raw.connected_count();
    auto [data, report] = filter_degenerate(raw, Family::kProbit);
    rec.n_filtered = data.n;

    const auto partition = build_partition(data.n, 1);
    const bool need_leaveout = has("j") || has("wj");

    JackknifeResult jr;
    const FitResult* full = nullptr;
    if (need_leaveout) {
      jr = jackknife_beta(data, Family::kProbit, design.fit_config, partition);
      full = &jr.fit_full;
    } else {
      jr.fit_full = fit(data, Family::kProbit, design.fit_config);
      if (!jr.fit_full.converged) throw NumericalError("full-sample fit did not converge");
      full = &jr.fit_full;
    }

    const auto ps = compute_partialled_score(*full, data, Family::kProbit);
    const auto var = sandwich_variance(*full, ps, data);
    rec.se = var.se[0];

    if (has("mle")) rec.estimates.emplace_back("mle", full->params.beta[0]);
    if (has("j")) rec.estimates.emplace_back("j", jr.beta_corrected[0]);
    if (has("wj"))
      rec.estimates.emplace_back("wj", weighted_combine(data.n, jr.beta_full, jr.subfits)[0]);
    // comparison corrections fail independently: a degenerate half or
    // subnetwork drops only its own column, recorded in the error note
    if (has("ss")) {
      try {
        const auto ss = jackknife_split_sample(data, Family::kProbit, design.fit_config,
                                               (design.seed ^ 0x55AA55AAu) + rep);
        rec.estimates.emplace_back("ss", ss.beta_corrected[0]);
      } catch (const std::exception& e) {
        rec.error += std::string(rec.error.empty() ? "" : "; ") + "ss: " + e.what();
      }
    }
    if (has("d")) {
      try {
        const auto dd = jackknife_double(data, Family::kProbit, design.fit_config);
        rec.estimates.emplace_back("d", dd.beta_corrected[0]);
      } catch (const std::exception& e) {
        rec.error += std::string(rec.error.empty() ? "" : "; ") + "d: " + e.what();
      }
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

inline SimSummary summarize(const SimDesign& design, const std::vector<RepRecord>& records) {
  SimSummary out;
  out.n_reps = static_cast<int>(records.size());
  double density_sum = 0.0, connected_sum = 0.0;
  for (const auto& rec : records) {
    if (!rec.ok) {
      ++out.n_failed;
      continue;
    }
    density_sum += rec.density;
    connected_sum += rec.connected;
  }
  const int n_ok = out.n_reps - out.n_failed;
  if (n_ok > 0) {
    out.mean_density = density_sum / n_ok;
    out.mean_connected = connected_sum / n_ok;
  }
  for (const auto& name : design.estimators) {
    EstimatorSummary row;
    row.name = name;
    std::vector<double> errors;
    int rejections = 0;
    for (const auto& rec : records) {
      if (!rec.ok) continue;
      const auto est = rec.estimate(name);
      if (!est) continue;
      errors.push_back(*est - design.theta);
      if (std::fabs((*est - design.theta) / rec.se) > 1.959963984540054) ++rejections;
    }
    row.n_used = static_cast<int>(errors.size());
    if (!errors.empty()) {
      double sum = 0.0;
      for (double e : errors) sum += e;
      row.bias_mean = sum / errors.size();
      double ss = 0.0;
      for (double e : errors) ss += (e - row.bias_mean) * (e - row.bias_mean);
      row.std_dev = errors.size() > 1 ? std::sqrt(ss / (errors.size() - 1)) : 0.0;
      std::sort(errors.begin(), errors.end());
      row.bias_median = detail::quantile_type7(errors, 0.5);
      row.p5_p95 = detail::quantile_type7(errors, 0.95) - detail::quantile_type7(errors, 0.05);
      row.rejection = static_cast<double>(rejections) / errors.size();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

inline std::vector<RepRecord> run_monte_carlo_records(const SimDesign& design, int jobs) {
  std::vector<RepRecord> records(design.n_reps);
  parallel_for(design.n_reps, jobs,
               [&](std::size_t r) { records[r] = run_replication(design, static_cast<int>(r)); });
  return records;
}

inline SimSummary run_monte_carlo(const SimDesign& design, int jobs = 1) {
  return summarize(design, run_monte_carlo_records(design, jobs));
}

// Density / connectivity calibration of the raw generated networks.
struct DesignStats {
  double mean_density = 0.0;
  double mean_connected = 0.0;
};

inline DesignStats design_density_stats(const SimDesign& design, int n_draws, int jobs = 1) {
  std::vector<double> density(n_draws), connected(n_draws);
  parallel_for(n_draws, jobs, [&](std::size_t r) {
    auto [data, truth] = generate_design(design, static_cast<int>(r));
    density[r] = data.density();
    connected[r] = data.connected_count();
  });
  DesignStats out;
  for (int r = 0; r < n_draws; ++r) {
    out.mean_density += density[r];
    out.mean_connected += connected[r];
  }
  out.mean_density /= n_draws;
  out.mean_connected /= n_draws;
  return out;
}

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

enum class TableLayout { kPaperSim, kPaperCompare };

inline std::string estimator_label(const std::string& name) {
  if (name == "mle") return "MLE";
  if (name == "j") return "J";
  if (name == "wj") return "WJ";
  if (name == "ss") return "SS";
  if (name == "d") return "D";
  return name;
}

// Aligned text table with the standard summary rows.
inline std::string emit_table_text(const SimSummary& summary, TableLayout layout) {
  std::vector<std::string> order;
  if (layout == TableLayout::kPaperSim)
    order = {"mle", "j", "wj"};
  else
    order = {"j", "wj", "d", "ss"};
  std::vector<const EstimatorSummary*> cols;
  for (const auto& name : order)
    for (const auto& row : summary.rows)
      if (row.name == name) cols.push_back(&row);

  std::ostringstream os;
  char buf[64];
  os << std::string(18, ' ');
  for (const auto* c : cols) {
    std::snprintf(buf, sizeof(buf), "%10s", estimator_label(c->name).c_str());
    os << buf;
  }
  os << "\n";
  const char* labels[] = {"Bias (mean)", "Bias (median)", "Std. dev.", "5-95 percentile",
                          "Rejection (5%)"};
  for (int row = 0; row < 5; ++row) {
    std::snprintf(buf, sizeof(buf), "%-18s", labels[row]);
    os << buf;
    for (const auto* c : cols) {
      double v = 0.0;
      switch (row) {
        case 0: v = c->bias_mean; break;
        case 1: v = c->bias_median; break;
        case 2: v = c->std_dev; break;
        case 3: v = c->p5_p95; break;
        case 4: v = c->rejection; break;
      }
      std::snprintf(buf, sizeof(buf), "%10.3f", v);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

// Long-format CSV with full-precision values; parse_summary_csv inverts it.
inline std::string emit_summary_csv(const SimSummary& summary) {
  std::ostringstream os;
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  os << "estimator,statistic,value\n";
  for (const auto& row : summary.rows) {
    const char* stats[] = {"bias_mean", "bias_median", "std_dev", "p5_p95", "rejection",
                           "n_used"};
    const double values[] = {row.bias_mean, row.bias_median, row.std_dev, row.p5_p95,
                             row.rejection, static_cast<double>(row.n_used)};
    for (int s = 0; s < 6; ++s) {
      os << row.name << "," << stats[s] << ",";
      put(values[s]);
      os << "\n";
    }
  }
  os << "_aux,mean_density,";
  put(summary.mean_density);
  os << "\n_aux,mean_connected,";
  put(summary.mean_connected);
  os << "\n_aux,n_reps,";
  put(summary.n_reps);
  os << "\n_aux,n_failed,";
  put(summary.n_failed);
  os << "\n";
  return os.str();
}

inline SimSummary parse_summary_csv(const std::string& csv) {
  SimSummary out;
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);  // header
  auto find_row = [&](const std::string& name) -> EstimatorSummary& {
    for (auto& r : out.rows)
      if (r.name == name) return r;
    out.rows.push_back({});
    out.rows.back().name = name;
    return out.rows.back();
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    const std::string name = line.substr(0, c1);
    const std::string stat = line.substr(c1 + 1, c2 - c1 - 1);
    const double value = std::strtod(line.c_str() + c2 + 1, nullptr);
    if (name == "_aux") {
      if (stat == "mean_density") out.mean_density = value;
      else if (stat == "mean_connected") out.mean_connected = value;
      else if (stat == "n_reps") out.n_reps = static_cast<int>(value);
      else if (stat == "n_failed") out.n_failed = static_cast<int>(value);
      continue;
    }
    auto& row = find_row(name);
    if (stat == "bias_mean") row.bias_mean = value;
    else if (stat == "bias_median") row.bias_median = value;
    else if (stat == "std_dev") row.std_dev = value;
    else if (stat == "p5_p95") row.p5_p95 = value;
    else if (stat == "rejection") row.rejection = value;
    else if (stat == "n_used") row.n_used = static_cast<int>(value);
  }
  return out;
}

// Per-rep CSV for outlier diagnosis.
inline std::string emit_rep_csv(const SimDesign& design, const std::vector<RepRecord>& records) {
  std::ostringstream os;
  char buf[64];
  os << "rep,ok,density,connected,n_filtered,se";
  for (const auto& name : design.estimators) os << "," << name;
  os << ",error\n";
  for (const auto& rec : records) {
    os << rec.rep << "," << (rec.ok ? 1 : 0) << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", rec.density);
    os << buf << "," << rec.connected << "," << rec.n_filtered << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", rec.se);
    os << buf;
    for (const auto& name : design.estimators) {
      os << ",";
      if (const auto est = rec.estimate(name)) {
        std::snprintf(buf, sizeof(buf), "%.17g", *est);
        os << buf;
      }
    }
    os << "," << rec.error << "\n";
  }
  return os.str();
}

}  // namespace dyadnet
