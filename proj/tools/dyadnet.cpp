// dyadnet: estimation and bias correction for dyadic network models with
// sender and receiver fixed effects.
//
// Subcommands: estimate, jackknife, effects, test, simulate, partition-dump.
// Every run writes results.json, summary.csv (where meaningful), and
// manifest.json (config echo + provenance + version) into --out. Exit codes:
// 0 success, 2 input validation error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dyadnet/effects.hpp"
#include "dyadnet/estimator.hpp"
#include "dyadnet/inference.hpp"
#include "dyadnet/jackknife.hpp"
#include "dyadnet/model_family.hpp"
#include "dyadnet/network_data.hpp"
#include "dyadnet/partition.hpp"
#include "dyadnet/runconfig.hpp"
#include "dyadnet/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace dyadnet;

namespace {

const std::vector<OptionDef> kCommonIo = {
    {"config", "", "key=value config file or a previous manifest.json"},
    {"out", ".", "output directory"},
    {"jobs", "1", "worker threads"},
    {"seed", "1", "master seed; all randomness derives from it"},
    {"log-level", "info", "info|quiet"},
};

const std::vector<OptionDef> kDataOpts = {
    {"input", "", "edge list CSV/TSV path"},
    {"sender-col", "sender_id", "sender id column"},
    {"receiver-col", "receiver_id", "receiver id column"},
    {"outcome-col", "outcome", "outcome column"},
    {"covariate-cols", "", "comma-separated covariate columns (default: all remaining)"},
    {"family", "probit", "probit|logit|gaussian-nls|poisson"},
    {"filter", "true", "drop degenerate nodes before estimation"},
    {"relabel-seed", "0", "node relabeling seed; 0 keeps the input order"},
};

const std::vector<OptionDef> kFitOpts = {
    {"max-iter", "200", "Newton iteration cap"},
    {"tol", "1e-9", "max-norm score tolerance"},
    {"penalty-b", "1.0", "normalization penalty constant"},
};

std::vector<OptionDef> merge(std::initializer_list<std::vector<OptionDef>> groups,
                             std::vector<OptionDef> extra = {}) {
  std::vector<OptionDef> out;
  for (const auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

void usage(std::ostream& os) {
  os << "usage: dyadnet <subcommand> [--flag value ...]\n"
     << "subcommands:\n"
     << "  estimate        fit the model and report sandwich inference\n"
     << "  jackknife       bias-corrected estimates (plain|weighted|split|double)\n"
     << "  effects         bias-corrected fixed-effect averages\n"
     << "  test            specification tests (transitivity, reciprocity)\n"
     << "  simulate        Monte Carlo harness over the published designs\n"
     << "  partition-dump  write the leave-out partition as JSON\n"
     << "run 'dyadnet <subcommand> --help' for flags\n";
}

void subcommand_usage(const std::string& name, const std::vector<OptionDef>& defs) {
  std::cout << "usage: dyadnet " << name << " [--flag value ...]\n";
  for (const auto& d : defs) {
    std::cout << "  --" << d.key;
    if (!d.def.empty()) std::cout << " (default: " << d.def << ")";
    std::cout << "  " << d.help << "\n";
  }
}

json manifest_json(const RunConfig& cfg) {
  json m;
  m["version"] = kVersion;
  m["subcommand"] = cfg.subcommand;
  m["seed"] = cfg.values.count("seed") ? cfg.get("seed") : "";
  json values, prov;
  for (const auto& [k, v] : cfg.values) {
    values[k] = v;
    prov[k] = cfg.provenance.at(k);
  }
  m["config"] = values;
  m["provenance"] = prov;
  return m;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << content;
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path out(cfg.get("out"));
  fs::create_directories(out);
  write_file(out / "manifest.json", manifest_json(cfg).dump(2) + "\n");
  return out;
}

bool verbose(const RunConfig& cfg) { return cfg.get("log-level") != "quiet"; }

struct LoadedData {
  NetworkData data;
  DegeneracyReport report;
  Family family;
  std::vector<std::string> covariate_names;
};

EdgeListSchema schema_from(const RunConfig& cfg) {
  EdgeListSchema schema;
  schema.sender_col = cfg.get("sender-col");
  schema.receiver_col = cfg.get("receiver-col");
  schema.outcome_col = cfg.get("outcome-col");
  schema.covariate_cols = cfg.get_list("covariate-cols");
  return schema;
}

LoadedData load_and_prepare(const RunConfig& cfg) {
  const std::string input = cfg.get("input");
  if (input.empty()) throw ValidationError("--input is required");
  LoadedData out{load_edge_list(input, schema_from(cfg)), {}, family_from_name(cfg.get("family")),
                 {}};
  out.covariate_names = out.data.covariate_names;
  const std::uint64_t relabel_seed = cfg.get_u64("relabel-seed");
  if (relabel_seed != kIdentityRelabelSeed) out.data = relabel(out.data, relabel_seed);
  if (cfg.get_bool("filter")) {
    auto [filtered, report] = filter_degenerate(out.data, out.family);
    out.data = std::move(filtered);
    out.report = std::move(report);
  }
  return out;
}

FitConfig fit_config_from(const RunConfig& cfg) {
  FitConfig fc;
  fc.max_iterations = cfg.get_int("max-iter");
  fc.gradient_tolerance = cfg.get_double("tol");
  fc.penalty_b = cfg.get_double("penalty-b");
  return fc;
}

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    a.push_back(row);
  }
  return a;
}

json degeneracy_json(const DegeneracyReport& report) {
  json dropped = json::array();
  for (const auto& d : report.dropped_nodes)
    dropped.push_back({{"label", d.label}, {"reason", d.reason}});
  return {{"dropped_nodes", dropped}, {"passes", report.passes}};
}

json inference_json(const std::vector<std::string>& names, const Vec& beta,
                    const VarianceEstimate& var, const TestStatistics& ts) {
  json out;
  out["beta"] = vec_to_json(beta);
  out["se"] = vec_to_json(var.se);
  out["t"] = vec_to_json(ts.t);
  out["p"] = vec_to_json(ts.p);
  out["W"] = mat_to_json(var.w_hat);
  out["Omega"] = mat_to_json(var.omega_hat);
  out["V"] = mat_to_json(var.v_hat);
  out["covariates"] = names;
  return out;
}

std::string coefficient_csv(const std::vector<std::string>& names, const Vec& estimate,
                            const Vec& corrected, const Vec& se) {
  std::ostringstream os;
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  os << "covariate,estimate,jackknife,se,bias_over_se\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    os << names[k] << ",";
    put(estimate[k]);
    os << ",";
    put(corrected[k]);
    os << ",";
    put(se[k]);
    os << ",";
    put((corrected[k] - estimate[k]) / se[k]);
    os << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------

int run_estimate(const RunConfig& cfg) {
  const auto out_dir = prepare_out(cfg);
  auto loaded = load_and_prepare(cfg);
  const auto fit_result = fit(loaded.data, loaded.family, fit_config_from(cfg));
  if (!fit_result.converged)
    throw NumericalError("fit did not converge after " + std::to_string(fit_result.iterations) +
                         " iterations (score " + std::to_string(fit_result.score_norm) + ")");
  const XiVariant xi = cfg.get("xi-variant") == "alternative" ? XiVariant::kAlternative
                                                              : XiVariant::kStandard;
  const auto ps = compute_partialled_score(fit_result, loaded.data, loaded.family, xi);
  const auto var = sandwich_variance(fit_result, ps, loaded.data);
  const auto ts = t_statistics(fit_result.params.beta, Vec::Zero(loaded.data.dim_x), var);

  json results = inference_json(loaded.covariate_names, fit_result.params.beta, var, ts);
  results["alpha"] = vec_to_json(fit_result.params.alpha);
  results["gamma"] = vec_to_json(fit_result.params.gamma);
  results["node_labels"] = loaded.data.labels;
  results["objective"] = fit_result.objective;
  results["iterations"] = fit_result.iterations;
  results["score_norm"] = fit_result.score_norm;
  results["clamp_events"] = fit_result.diag.clamp_events;
  results["degeneracy"] = degeneracy_json(loaded.report);
  write_file(out_dir / "results.json", results.dump(2) + "\n");
  write_file(out_dir / "summary.csv",
             coefficient_csv(loaded.covariate_names, fit_result.params.beta,
                             fit_result.params.beta, var.se));
  if (verbose(cfg)) {
    std::cout << "estimate: beta =";
    for (int k = 0; k < fit_result.params.beta.size(); ++k)
      std::cout << " " << fit_result.params.beta[k];
    std::cout << "\n";
  }
  return 0;
}

int run_jackknife(const RunConfig& cfg) {
  const auto out_dir = prepare_out(cfg);
  auto loaded = load_and_prepare(cfg);
  const auto fc = fit_config_from(cfg);
  const int jobs = cfg.get_int("jobs");
  const std::string variant = cfg.get("variant");
  const int l = cfg.get_int("leave-l");
  const int relabels = cfg.get_int("relabels");

  JackknifeResult jr;
  if (variant == "plain" && relabels > 1) {
    jr = jackknife_with_relabeling(loaded.data, loaded.family, fc, l, relabels,
                                   cfg.get_u64("seed"), jobs);
  } else if (variant == "plain") {
    jr = jackknife_beta(loaded.data, loaded.family, fc, build_partition(loaded.data.n, l), jobs);
  } else if (variant == "weighted") {
    jr = jackknife_weighted(loaded.data, loaded.family, fc, build_partition(loaded.data.n, l),
                            jobs);
  } else if (variant == "split") {
    jr = jackknife_split_sample(loaded.data, loaded.family, fc, cfg.get_u64("seed"), jobs);
  } else if (variant == "double") {
    jr = jackknife_double(loaded.data, loaded.family, fc, jobs);
  } else {
    throw ValidationError("unknown variant: " + variant +
                          " (expected plain|weighted|split|double)");
  }

  const auto ps = compute_partialled_score(jr.fit_full, loaded.data, loaded.family);
  const auto var = sandwich_variance(jr.fit_full, ps, loaded.data);
  const auto ts = t_statistics(jr.beta_corrected, Vec::Zero(loaded.data.dim_x), var);

  json results = inference_json(loaded.covariate_names, jr.beta_corrected, var, ts);
  results["variant"] = variant_name(jr.variant);
  results["leave_l"] = jr.l;
  results["beta_full"] = vec_to_json(jr.beta_full);
  results["beta_corrected"] = vec_to_json(jr.beta_corrected);
  if (jr.phi_corrected.size() > 0) results["phi_corrected"] = vec_to_json(jr.phi_corrected);
  json per_k = json::array();
  for (const auto& sub : jr.subfits)
    per_k.push_back({{"beta", vec_to_json(sub.params.beta)},
                     {"converged", sub.converged},
                     {"iterations", sub.iterations},
                     {"weight_ridged", sub.weight_ridged}});
  results["per_k"] = per_k;
  results["all_converged"] = jr.all_converged;
  results["flagged_subfits"] = jr.flagged_subfits;
  results["relabel_spread"] = jr.relabel_spread;
  results["degeneracy"] = degeneracy_json(loaded.report);
  write_file(out_dir / "results.json", results.dump(2) + "\n");
  write_file(out_dir / "summary.csv",
             coefficient_csv(loaded.covariate_names, jr.beta_full, jr.beta_corrected, var.se));
  if (verbose(cfg)) {
    std::cout << "jackknife(" << variant << "): beta_corrected =";
    for (int k = 0; k < jr.beta_corrected.size(); ++k) std::cout << " " << jr.beta_corrected[k];
    std::cout << "\n";
  }
  return 0;
}

std::unique_ptr<EffectKernel> make_effect_kernel(const std::string& spec, Family family,
                                                 const std::vector<std::string>& names) {
  auto var_index = [&](const std::string& token) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == token) return static_cast<int>(k);
    try {
      const int idx = std::stoi(token) - 1;
      if (idx >= 0 && idx < static_cast<int>(names.size())) return idx;
    } catch (...) {
    }
    throw ValidationError("unknown covariate '" + token + "' in effect spec");
  };
  if (spec == "mean") return std::make_unique<MeanLinkKernel>();
  if (spec.rfind("marginal:", 0) == 0)
    return std::make_unique<MarginalDerivativeKernel>(var_index(spec.substr(9)));
  if (spec.rfind("diff:", 0) == 0)
    return std::make_unique<DiscreteDifferenceKernel>(var_index(spec.substr(5)), family);
  if (spec == "clustering") return std::make_unique<ExpectedClusteringKernel>();
  if (spec == "transitivity") return std::make_unique<TransitivityCovKernel>();
  if (spec == "transitivity-count") return std::make_unique<TriangleCountKernel>();
  if (spec == "reciprocity") return std::make_unique<ReciprocityKernel>();
  throw ValidationError("unknown effect '" + spec + "'");
}

int run_effects(const RunConfig& cfg) {
  const auto out_dir = prepare_out(cfg);
  auto loaded = load_and_prepare(cfg);
  const auto fc = fit_config_from(cfg);
  const int jobs = cfg.get_int("jobs");
  const auto kernel = make_effect_kernel(cfg.get("effect"), loaded.family,
                                         loaded.covariate_names);
  if (kernel->pattern().p >= 4 && loaded.data.n > 150 && !cfg.get_bool("allow-large"))
    throw ValidationError("pattern enumeration over " + std::to_string(loaded.data.n) +
                          " nodes is expensive; pass --allow-large to proceed");
  if (kernel->pattern().uses_outcomes && !family_is_binary(loaded.family))
    throw ValidationError("UnsupportedFamily: outcome-dependent statistics need a binary family");

  const auto partition = build_partition(loaded.data.n, 1);
  const auto jr = jackknife_beta(loaded.data, loaded.family, fc, partition, jobs);
  EffectResult er = average_effect(jr.fit_full, jr.subfits, partition, *kernel, loaded.data,
                                   loaded.family);
  const std::string target = cfg.get("target");
  er.target = target == "population" ? EffectTarget::kPopulation : EffectTarget::kConditional;
  if (er.target == EffectTarget::kConditional) {
    er.variance = conditional_variance(jr.fit_full, *kernel, loaded.data, loaded.family);
    er.se = std::sqrt(er.variance) / loaded.data.n;
  } else {
    er.variance = population_variance(jr.fit_full, *kernel, loaded.data, loaded.family);
    er.se = std::sqrt(er.variance / loaded.data.n);
  }
  const int n_boot = cfg.get_int("n-boot");
  if (n_boot > 0)
    er.bootstrap_se = bootstrap_statistic_se(jr.fit_full, loaded.data, loaded.family, *kernel,
                                             n_boot, cfg.get_u64("seed"), jobs);
  er.t_plugin = er.delta_plugin / er.se;
  er.t_jackknife = er.delta_jackknife / er.se;

  json results;
  results["effect"] = cfg.get("effect");
  results["target"] = target;
  results["delta_plugin"] = er.delta_plugin;
  results["delta_jackknife"] = er.delta_jackknife;
  results["variance"] = er.variance;
  results["se"] = er.se;
  results["t_plugin"] = er.t_plugin;
  results["t_jackknife"] = er.t_jackknife;
  if (n_boot > 0) results["bootstrap_se"] = er.bootstrap_se;
  results["per_k"] = er.per_k;
  results["degeneracy"] = degeneracy_json(loaded.report);
  write_file(out_dir / "results.json", results.dump(2) + "\n");
  std::ostringstream csv;
  csv << "effect,target,plugin,jackknife,se,t_jackknife\n"
      << cfg.get("effect") << "," << target << "," << er.delta_plugin << ","
      << er.delta_jackknife << "," << er.se << "," << er.t_jackknife << "\n";
  write_file(out_dir / "summary.csv", csv.str());
  if (verbose(cfg))
    std::cout << "effect " << cfg.get("effect") << ": plugin " << er.delta_plugin
              << ", jackknife " << er.delta_jackknife << ", se " << er.se << "\n";
  return 0;
}

int run_test(const RunConfig& cfg) {
  const auto out_dir = prepare_out(cfg);
  auto loaded = load_and_prepare(cfg);
  const auto fc = fit_config_from(cfg);
  const int jobs = cfg.get_int("jobs");
  const std::string statistic = cfg.get("statistic");
  const int n_boot = cfg.get_int("n-boot");
  const std::uint64_t seed = cfg.get_u64("seed");

  if (!family_is_binary(loaded.family))
    throw ValidationError("UnsupportedFamily: specification tests need a binary family");

  const auto partition = build_partition(loaded.data.n, 1);
  const auto jr = jackknife_beta(loaded.data, loaded.family, fc, partition, jobs);

  std::unique_ptr<EffectKernel> kernel;
  if (statistic == "transitivity")
    kernel = make_transitivity_kernel(TransitivityKind::kCovarianceForm);
  else if (statistic == "transitivity-count")
    kernel = make_transitivity_kernel(TransitivityKind::kTriangleCountForm);
  else if (statistic == "reciprocity")
    kernel = std::make_unique<ReciprocityKernel>();
  else
    throw ValidationError("unknown statistic '" + statistic + "'");

  EffectResult er = average_effect(jr.fit_full, jr.subfits, partition, *kernel, loaded.data,
                                   loaded.family);
  er.variance = conditional_variance(jr.fit_full, *kernel, loaded.data, loaded.family);
  er.se = std::sqrt(er.variance) / loaded.data.n;

  double boot_se = 0.0;
  if (cfg.get_bool("bootstrap-refit") && n_boot > 1) {
    // expensive variant: re-estimate and re-correct the statistic per draw
    std::vector<double> draws(n_boot);
    const auto tables = detail::EdgeTables::build(loaded.data, loaded.family, jr.fit_full.params);
    parallel_for(n_boot, jobs, [&](std::size_t b) {
      RngStream rng(seed, {0x72657369u, static_cast<std::uint64_t>(b)});
      NetworkData sim = loaded.data;
      for (int i = 0; i < sim.n; ++i)
        for (int j = 0; j < sim.n; ++j)
          if (i != j) sim.outcome(i, j) = simulate_outcome(loaded.family, tables.eta(i, j), rng);
      const auto sub_jr = jackknife_beta(sim, loaded.family, fc, partition, 1);
      const auto sub = average_effect(sub_jr.fit_full, sub_jr.subfits, partition, *kernel, sim,
                                      loaded.family);
      draws[b] = sub.delta_jackknife;
    });
    double mean = 0.0;
    for (double d : draws) mean += d;
    mean /= n_boot;
    double var = 0.0;
    for (double d : draws) var += (d - mean) * (d - mean);
    boot_se = std::sqrt(var / (n_boot - 1));
  } else if (n_boot > 1) {
    boot_se = bootstrap_statistic_se(jr.fit_full, loaded.data, loaded.family, *kernel, n_boot,
                                     seed, jobs);
  }
  const double denom = boot_se > 0.0 ? boot_se : er.se;
  const double t_raw = er.delta_plugin / denom;
  const double t_corrected = er.delta_jackknife / denom;

  json results;
  results["statistic"] = statistic;
  results["plugin"] = er.delta_plugin;
  results["corrected"] = er.delta_jackknife;
  results["plugin_variance"] = er.variance;
  results["se_plugin_variance"] = er.se;
  results["bootstrap_se"] = boot_se;
  results["bootstrap_refit"] = cfg.get_bool("bootstrap-refit");
  results["t_uncorrected"] = t_raw;
  results["t_corrected"] = t_corrected;
  results["degeneracy"] = degeneracy_json(loaded.report);
  write_file(out_dir / "results.json", results.dump(2) + "\n");
  std::ostringstream csv;
  csv << "statistic,t_uncorrected,t_corrected\n"
      << statistic << "," << t_raw << "," << t_corrected << "\n";
  write_file(out_dir / "summary.csv", csv.str());
  if (verbose(cfg))
    std::cout << "test " << statistic << ": t uncorrected " << t_raw << ", corrected "
              << t_corrected << "\n";
  return 0;
}

int run_simulate(const RunConfig& cfg) {
  const auto out_dir = prepare_out(cfg);
  SimDesign design;
  design.name = cfg.get("design");
  design.n_nodes = cfg.get_int("n");
  design.theta = cfg.get_double("theta");
  design.n_reps = cfg.get_int("reps");
  design.seed = cfg.get_u64("seed");
  design.estimators = cfg.get_list("estimators");
  design.fe_mode = cfg.get("fe-mode") == "independent" ? FeMode::kIndependent : FeMode::kShared;
  design.strategic_rho = cfg.get_double("rho");
  design.fit_config = fit_config_from(cfg);
  if (design.name == "custom") {
    design.fe_lo = cfg.get_double("fe-lo");
    design.fe_hi = cfg.get_double("fe-hi");
  }
  design.resolve_range();

  const auto records = run_monte_carlo_records(design, cfg.get_int("jobs"));
  const auto summary = summarize(design, records);
  const bool compare = std::find(design.estimators.begin(), design.estimators.end(), "ss") !=
                           design.estimators.end() ||
                       std::find(design.estimators.begin(), design.estimators.end(), "d") !=
                           design.estimators.end();
  const std::string table =
      emit_table_text(summary, compare ? TableLayout::kPaperCompare : TableLayout::kPaperSim);

  write_file(out_dir / "reps.csv", emit_rep_csv(design, records));
  write_file(out_dir / "summary.csv", emit_summary_csv(summary));
  write_file(out_dir / "table.txt", table);

  json results;
  results["design"] = design.name;
  results["n"] = design.n_nodes;
  results["reps"] = design.n_reps;
  results["fe_lo"] = design.fe_lo;
  results["fe_hi"] = design.fe_hi;
  results["mean_density"] = summary.mean_density;
  results["mean_connected"] = summary.mean_connected;
  results["n_failed"] = summary.n_failed;
  json rows = json::array();
  for (const auto& row : summary.rows)
    rows.push_back({{"estimator", row.name},
                    {"bias_mean", row.bias_mean},
                    {"bias_median", row.bias_median},
                    {"std_dev", row.std_dev},
                    {"p5_p95", row.p5_p95},
                    {"rejection", row.rejection},
                    {"n_used", row.n_used}});
  results["estimators"] = rows;
  write_file(out_dir / "results.json", results.dump(2) + "\n");
  if (verbose(cfg)) std::cout << table;
  return 0;
}

int run_partition_dump(const RunConfig& cfg) {
  const auto out_dir = prepare_out(cfg);
  const auto partition = build_partition(cfg.get_int("n"), cfg.get_int("leave-l"));
  const auto validation = validate(partition);
  if (!validation.valid)
    throw NumericalError("partition invalid: " + validation.first_violation);
  write_file(out_dir / "partition.json", partition_to_json(partition) + "\n");
  if (verbose(cfg))
    std::cout << "partition: N=" << partition.n_nodes << " l=" << partition.l << " sets="
              << partition.n_sets << " valid\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  if (args.empty() || args[0] == "--help" || args[0] == "help") {
    usage(args.empty() ? std::cerr : std::cout);
    return args.empty() ? 2 : 0;
  }
  const std::string sub = args[0];
  args.erase(args.begin());

  const std::vector<OptionDef> estimate_opts =
      merge({kCommonIo, kDataOpts, kFitOpts},
            {{"xi-variant", "standard", "partialled-score form: standard|alternative"}});
  const std::vector<OptionDef> jackknife_opts = merge(
      {kCommonIo, kDataOpts, kFitOpts},
      {{"variant", "plain", "plain|weighted|split|double"},
       {"leave-l", "1", "observations removed per fixed effect and set"},
       {"relabels", "1", "average the plain jackknife over this many relabelings"}});
  const std::vector<OptionDef> effects_opts = merge(
      {kCommonIo, kDataOpts, kFitOpts},
      {{"effect", "mean", "mean|marginal:VAR|diff:VAR|clustering|transitivity|"
                          "transitivity-count|reciprocity"},
       {"target", "conditional", "conditional|population"},
       {"n-boot", "0", "bootstrap draws for the statistic SE (0: off)"},
       {"allow-large", "false", "allow expensive enumerations on large networks"}});
  const std::vector<OptionDef> test_opts = merge(
      {kCommonIo, kDataOpts, kFitOpts},
      {{"statistic", "transitivity", "transitivity|transitivity-count|reciprocity"},
       {"n-boot", "200", "bootstrap draws for the statistic SE"},
       {"bootstrap-refit", "false", "re-estimate the model on every bootstrap draw"}});
  const std::vector<OptionDef> simulate_opts = merge(
      {kCommonIo, kFitOpts},
      {{"design", "dense", "dense|mid|sqrt|sparse|custom"},
       {"n", "50", "network size"},
       {"theta", "1.0", "true coefficient"},
       {"reps", "1000", "replications"},
       {"estimators", "mle,j,wj", "subset of mle,j,wj,ss,d"},
       {"fe-mode", "shared", "shared|independent fixed-effect assignment"},
       {"fe-lo", "0", "custom design lower bound"},
       {"fe-hi", "0", "custom design upper bound"},
       {"rho", "0", "strategic transitivity payoff added to the index"}});
  const std::vector<OptionDef> partition_opts =
      merge({kCommonIo}, {{"n", "50", "network size"}, {"leave-l", "1", "block size"}});

  const std::map<std::string, std::pair<const std::vector<OptionDef>*, int (*)(const RunConfig&)>>
      dispatch = {{"estimate", {&estimate_opts, run_estimate}},
                  {"jackknife", {&jackknife_opts, run_jackknife}},
                  {"effects", {&effects_opts, run_effects}},
                  {"test", {&test_opts, run_test}},
                  {"simulate", {&simulate_opts, run_simulate}},
                  {"partition-dump", {&partition_opts, run_partition_dump}}};

  const auto entry = dispatch.find(sub);
  if (entry == dispatch.end()) {
    std::cerr << "unknown subcommand: " << sub << "\n";
    usage(std::cerr);
    return 2;
  }
  if (!args.empty() && (args[0] == "--help" || args[0] == "-h")) {
    subcommand_usage(sub, *entry->second.first);
    return 0;
  }
  try {
    const RunConfig cfg = resolve_config(sub, *entry->second.first, args);
    return entry->second.second(cfg);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
