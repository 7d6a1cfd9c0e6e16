#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hetcop/hetcop.hpp"

namespace fs = std::filesystem;
using namespace hetcop;

namespace {

struct PartialFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void report_error(const char* type, const std::string& message) {
  nlohmann::json j = {{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << '\n';
}

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError(std::string("cannot parse ") + what + " value '" + item + "'");
    }
  }
  require(!out.empty(), std::string(what) + " list is empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (double v : parse_list(text, what)) {
    require(v == static_cast<int>(v), std::string(what) + " values must be integers");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

fs::path prepare_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw ValidationError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

MixedDataset read_input(const std::string& data, const std::string& schema, const std::string& group_col) {
  const Schema s = schema.empty() ? Schema{} : load_schema(schema);
  return load_dataset(data, s, group_col);
}

struct EmFlags {
  int n_samples = 1000;
  int burn_in = 100;
  int max_iter = 50;
  double tol = 1e-4;
  bool open_tails = false;

  void add(CLI::App* app) {
    app->add_option("--n-samples", n_samples, "Gibbs draws per observation")->check(CLI::PositiveNumber);
    app->add_option("--burn-in", burn_in, "Gibbs burn-in sweeps")->check(CLI::NonNegativeNumber);
    app->add_option("--max-iter", max_iter, "EM iteration cap")->check(CLI::PositiveNumber);
    app->add_option("--tol", tol, "EM relative change tolerance")->check(CLI::PositiveNumber);
    app->add_flag("--open-tails", open_tails, "top discrete category extends to +inf");
  }

  EmOptions build(std::uint64_t seed, std::size_t workers) const {
    EmOptions em;
    em.n_samples = n_samples;
    em.burn_in = burn_in;
    em.max_iter = max_iter;
    em.tol = tol;
    em.seed = seed;
    em.workers = workers;
    em.fgl.workers = workers;
    em.truncation.open_tails = open_tails;
    return em;
  }
};

struct FitConfig {
  std::string data, schema, group_col = "group", method = "gibbs", criterion = "ebic", out = ".";
  std::string lambda1, lambda2;
  double gamma = 0.5;
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
  EmFlags em;
};

int cmd_fit(const FitConfig& c) {
  const EStepMethod method = parse_estep_method(c.method);
  require(method != EStepMethod::gibbs || c.seed.has_value(), "--seed is required for the gibbs method");
  const Criterion crit = parse_criterion(c.criterion, c.gamma);
  const auto l1 = c.lambda1.empty() ? default_lambda1_grid() : parse_list(c.lambda1, "lambda1");
  const auto l2 = c.lambda2.empty() ? default_lambda2_grid() : parse_list(c.lambda2, "lambda2");
  const MixedDataset ds = read_input(c.data, c.schema, c.group_col);
  const EmOptions em = c.em.build(c.seed.value_or(0), c.workers);

  const GridSelection sel = grid_select(ds, l1, l2, crit, method, em);
  const EdgeGraph graph = partial_correlations(sel.best.theta_set, sel.best.variables, sel.best.group_labels);

  const fs::path dir = prepare_dir(c.out);
  nlohmann::json fit = fit_to_json(sel.best);
  fit["criterion"] = crit.name();
  fit["gamma"] = crit.gamma;
  fit["score"] = crit(sel.best);
  fit["seed"] = c.seed.value_or(0);
  write_text(dir / "fit.json", fit.dump(2) + "\n");
  std::ostringstream edges, graphml;
  write_edges_csv(graph, edges);
  write_graphml(graph, graphml);
  write_text(dir / "edges.csv", edges.str());
  write_text(dir / "graph.graphml", graphml.str());
  if (l1.size() * l2.size() > 1) {
    std::ostringstream scores;
    write_score_table_csv(sel.table, crit.name(), scores);
    write_text(dir / "scores.csv", scores.str());
  }
  std::cout << "selected lambda1=" << sel.best.lambda1 << " lambda2=" << sel.best.lambda2 << " "
            << crit.name() << "=" << crit(sel.best) << " converged=" << (sel.best.converged ? "yes" : "no") << '\n';
  return 0;
}

struct SimulateConfig {
  std::string kind = "random", n = "100", out = ".";
  int p = 50, k = 3, clusters = 3, levels = 6;
  double rho = 0.25, pe = 0.05, eps = 0.1;
  double gamma_b = 0.1, gamma_o = 0.5, gamma_p = 0.2, gamma_g = 0.2;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateConfig& c) {
  require(c.seed.has_value(), "--seed is required");
  NetworkSpec spec;
  spec.kind = parse_network_kind(c.kind);
  spec.p = c.p;
  spec.K = c.k;
  spec.rho = c.rho;
  spec.edge_prob = c.pe;
  spec.n_clusters = c.clusters;
  spec.epsilon = c.eps;
  spec.seed = derive_seed(*c.seed, 0);
  spec.validate();
  std::vector<int> n = parse_int_list(c.n, "n");
  if (n.size() == 1) n.assign(static_cast<std::size_t>(c.k), n.front());
  require(n.size() == static_cast<std::size_t>(c.k), "--n needs one size or one size per group");

  MarginalSpec marg;
  marg.gamma_b = c.gamma_b;
  marg.gamma_o = c.gamma_o;
  marg.gamma_p = c.gamma_p;
  marg.gamma_g = c.gamma_g;
  marg.ordinal_levels = c.levels;
  marg.seed = derive_seed(*c.seed, 1);
  marg.validate();

  NetworkTruth truth = generate_truth(spec);
  const MixedDataset ds = sample_mixed_data(truth, n, marg);
  const fs::path dir = prepare_dir(c.out);
  std::ostringstream data;
  write_dataset(ds, data, "group");
  write_text(dir / "data.csv", data.str());
  write_text(dir / "schema.json", schema_to_json(ds).dump(2) + "\n");
  write_text(dir / "truth.json", truth_to_json(truth, ds.variables).dump(2) + "\n");
  std::cout << "wrote " << ds.total_rows() << " rows, " << ds.num_variables() << " variables, " << ds.num_groups()
            << " groups to " << dir.string() << '\n';
  return 0;
}

struct BenchmarkConfig {
  std::string kind = "random", p = "50", n = "100", rho = "0.25", methods = "gibbs,approx,fgl,glasso", out = ".";
  std::string lambda1, lambda2 = "0,0.1,1", loss_selection = "min", baseline = "covariance";
  int k = 3, reps = 5;
  double pe = 0.05, gamma = 0.5;
  bool log10_counts = false;
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
  EmFlags em;
};

int cmd_benchmark(BenchmarkConfig c) {
  require(c.seed.has_value(), "--seed is required");
  require(c.reps >= 1, "--reps must be at least 1");
  BenchmarkOptions opts;
  opts.replicates = c.reps;
  opts.methods.clear();
  {
    std::stringstream ss(c.methods);
    std::string m;
    while (std::getline(ss, m, ',')) opts.methods.push_back(m);
  }
  check_benchmark_methods(opts.methods);
  if (!c.lambda1.empty()) opts.lambda1_grid = parse_list(c.lambda1, "lambda1");
  opts.lambda2_values = parse_list(c.lambda2, "lambda2");
  opts.gamma = c.gamma;
  opts.loss_selection = parse_loss_selection(c.loss_selection);
  require(c.baseline == "covariance" || c.baseline == "correlation",
          "--baseline must be covariance or correlation");
  opts.baseline_scale = c.baseline == "covariance" ? BaselineScale::covariance : BaselineScale::correlation;
  opts.log10_counts = c.log10_counts;
  opts.seed = *c.seed;
  opts.workers = c.workers;
  opts.em = c.em.build(*c.seed, 1);

  const NetworkKind kind = parse_network_kind(c.kind);
  std::vector<BenchmarkResult> results;
  std::uint64_t cell = 0;
  for (int p : parse_int_list(c.p, "p"))
    for (int n : parse_int_list(c.n, "n"))
      for (double rho : parse_list(c.rho, "rho")) {
        BenchmarkSetting s;
        s.kind = kind;
        s.p = p;
        s.n = n;
        s.K = c.k;
        s.rho = rho;
        s.edge_prob = c.pe;
        BenchmarkOptions o = opts;
        o.seed = derive_seed(*c.seed, cell++);
        replicate_spec(s, o.seed, 0).validate();
        results.push_back(run_benchmark(s, o));
        for (const auto& row : results.back().summary)
          std::cout << to_string(kind) << " p=" << p << " n=" << n << " rho=" << rho << " " << row.method
                    << " auc=" << row.auc << " fl=" << row.fl << " el=" << row.el << '\n';
      }

  const fs::path dir = prepare_dir(c.out);
  std::ostringstream summary, curves;
  write_summary_csv(results, summary);
  write_curves_csv(results, curves);
  write_text(dir / "summary.csv", summary.str());
  write_text(dir / "curves.csv", curves.str());

  int failures = 0;
  nlohmann::json fails = nlohmann::json::array();
  for (const auto& r : results) {
    failures += r.failures();
    for (const auto& rep : r.replicates)
      if (!rep.ok)
        fails.push_back({{"p", r.setting.p}, {"n", r.setting.n}, {"rho", r.setting.rho}, {"method", rep.method},
                         {"replicate", rep.replicate}, {"error", rep.error}});
  }
  if (failures > 0) {
    write_text(dir / "failures.json", fails.dump(2) + "\n");
    throw PartialFailure(std::to_string(failures) + " benchmark cells or sweep points failed; see failures.json");
  }
  return 0;
}

struct BootstrapConfig {
  std::string data, schema, group_col = "group", method = "approx", criterion = "ebic", out = ".", reference;
  std::string lambda1, lambda2;
  int b = 200;
  double acceptance = 0.9, gamma = 0.5;
  bool literal_permutation = false;
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
  EmFlags em;
};

int cmd_bootstrap(const BootstrapConfig& c) {
  require(c.b >= 1, "--b must be at least 1");
  require(c.seed.has_value(), "--seed is required");
  BootstrapOptions opts;
  opts.B = c.b;
  opts.acceptance_ratio = c.acceptance;
  opts.seed = *c.seed;
  opts.literal_permutation = c.literal_permutation;
  opts.method = parse_estep_method(c.method);
  opts.criterion = parse_criterion(c.criterion, c.gamma);
  if (!c.lambda1.empty()) opts.lambda1_grid = parse_list(c.lambda1, "lambda1");
  if (!c.lambda2.empty()) opts.lambda2_grid = parse_list(c.lambda2, "lambda2");
  opts.em = c.em.build(*c.seed, 1);
  opts.workers = c.workers;
  const MixedDataset ds = read_input(c.data, c.schema, c.group_col);

  std::optional<FitResult> ref;
  if (!c.reference.empty() && fs::exists(c.reference)) {
    ref = load_fit(c.reference);
    require(ref->variables == ds.variables, "reference fit variables do not match the dataset");
  }
  const StabilityReport rep = bootstrap_stability(ds, opts, ref ? &ref->theta_set : nullptr);

  const fs::path dir = prepare_dir(c.out);
  std::ostringstream freq, summary;
  write_frequencies_csv(rep, freq);
  summary << "group,reference_edges,acceptance_ratio,discovery_rate\n";
  for (std::size_t k = 0; k < rep.group_labels.size(); ++k)
    summary << rep.group_labels[k] << ',' << rep.reference_edges[k].size() << ','
            << detail::format_double(rep.acceptance_ratio) << ',' << detail::format_double(rep.group_discovery_rate[k])
            << '\n';
  nlohmann::json j = stability_to_json(rep);
  if (rep.reference_computed && !c.reference.empty())
    j["note"] = "reference fit '" + c.reference + "' not found; computed a fresh reference fit";
  else if (rep.reference_computed)
    j["note"] = "no reference fit given; computed a fresh reference fit";
  write_text(dir / "frequencies.csv", freq.str());
  write_text(dir / "stability_summary.csv", summary.str());
  write_text(dir / "stability.json", j.dump(2) + "\n");
  std::cout << "discovery rate " << rep.discovery_rate << " at acceptance ratio " << rep.acceptance_ratio << " ("
            << rep.successful << "/" << rep.B << " replicates)";
  if (rep.reference_computed) std::cout << "; reference fit computed fresh";
  std::cout << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian copula graphical models for heterogeneous mixed data"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "hetcop 0.1.0");

  FitConfig fit;
  auto* f = app.add_subcommand("fit", "fit a multi-group copula graphical model and select penalties");
  f->add_option("--data", fit.data, "delimited data file")->required();
  f->add_option("--schema", fit.schema, "JSON schema of variable kinds");
  f->add_option("--group-col", fit.group_col, "name of the group column");
  f->add_option("--method", fit.method, "E-step: gibbs or approx");
  f->add_option("--criterion", fit.criterion, "aic, ebic or bic");
  f->add_option("--gamma", fit.gamma, "EBIC gamma")->check(CLI::Range(0.0, 1.0));
  f->add_option("--lambda1", fit.lambda1, "comma-separated lambda1 grid");
  f->add_option("--lambda2", fit.lambda2, "comma-separated lambda2 grid");
  f->add_option("--seed", fit.seed, "random seed");
  f->add_option("--workers", fit.workers, "worker threads");
  f->add_option("--out", fit.out, "output directory");
  fit.em.add(f);

  SimulateConfig sim;
  auto* s = app.add_subcommand("simulate", "simulate a ground-truth network and mixed data");
  s->add_option("--kind", sim.kind, "random, cluster or scalefree");
  s->add_option("--p", sim.p, "number of variables");
  s->add_option("--k", sim.k, "number of groups");
  s->add_option("--n", sim.n, "group size, or comma-separated sizes per group");
  s->add_option("--rho", sim.rho, "dissimilarity in [0, 1]");
  s->add_option("--pe", sim.pe, "edge probability (random networks)");
  s->add_option("--clusters", sim.clusters, "number of clusters (cluster networks)");
  s->add_option("--eps", sim.eps, "diagonal slack");
  s->add_option("--levels", sim.levels, "ordinal levels");
  s->add_option("--gamma-b", sim.gamma_b, "share of binary columns");
  s->add_option("--gamma-o", sim.gamma_o, "share of ordinal columns");
  s->add_option("--gamma-p", sim.gamma_p, "share of count columns");
  s->add_option("--gamma-g", sim.gamma_g, "share of Gaussian columns");
  s->add_option("--seed", sim.seed, "random seed");
  s->add_option("--out", sim.out, "output directory");

  BenchmarkConfig bench;
  auto* b = app.add_subcommand("benchmark", "simulation study: ROC/AUC, Frobenius and entropy loss per method");
  b->add_option("--kind", bench.kind, "random, cluster or scalefree");
  b->add_option("--p", bench.p, "comma-separated numbers of variables");
  b->add_option("--n", bench.n, "comma-separated group sizes");
  b->add_option("--rho", bench.rho, "comma-separated dissimilarities");
  b->add_option("--k", bench.k, "number of groups");
  b->add_option("--pe", bench.pe, "edge probability (random networks)");
  b->add_option("--reps", bench.reps, "replicates per setting");
  b->add_option("--methods", bench.methods, "subset of gibbs,approx,fgl,glasso");
  b->add_option("--lambda1", bench.lambda1, "comma-separated lambda1 sweep (default 0 to 1 by 0.05)");
  b->add_option("--lambda2", bench.lambda2, "comma-separated lambda2 values");
  b->add_option("--gamma", bench.gamma, "EBIC gamma")->check(CLI::Range(0.0, 1.0));
  b->add_option("--loss-at", bench.loss_selection, "where FL/EL are read on each path: min, ebic or aic");
  b->add_option("--baseline", bench.baseline, "baseline input: covariance or correlation");
  b->add_flag("--log10-counts", bench.log10_counts, "log10(x+1) count columns for the baselines");
  b->add_option("--seed", bench.seed, "random seed");
  b->add_option("--workers", bench.workers, "worker threads");
  b->add_option("--out", bench.out, "output directory");
  bench.em.n_samples = 200;
  bench.em.burn_in = 50;
  bench.em.add(b);

  BootstrapConfig boot;
  auto* t = app.add_subcommand("bootstrap", "edge stability under resampling");
  t->add_option("--data", boot.data, "delimited data file")->required();
  t->add_option("--schema", boot.schema, "JSON schema of variable kinds");
  t->add_option("--group-col", boot.group_col, "name of the group column");
  t->add_option("--b", boot.b, "number of bootstrap replicates");
  t->add_option("--acceptance", boot.acceptance, "acceptance ratio")->check(CLI::Range(0.0, 1.0));
  t->add_option("--method", boot.method, "E-step: gibbs or approx");
  t->add_option("--criterion", boot.criterion, "aic, ebic or bic");
  t->add_option("--gamma", boot.gamma, "EBIC gamma")->check(CLI::Range(0.0, 1.0));
  t->add_option("--lambda1", boot.lambda1, "comma-separated lambda1 grid");
  t->add_option("--lambda2", boot.lambda2, "comma-separated lambda2 grid");
  t->add_option("--reference", boot.reference, "fit.json from a previous fit");
  t->add_flag("--literal-permutation", boot.literal_permutation, "permute rows instead of resampling");
  t->add_option("--seed", boot.seed, "random seed");
  t->add_option("--workers", boot.workers, "worker threads");
  t->add_option("--out", boot.out, "output directory");
  boot.em.add(t);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("usage", e.what());
    return 2;
  }

  try {
    if (*f) return cmd_fit(fit);
    if (*s) return cmd_simulate(sim);
    if (*b) return cmd_benchmark(bench);
    if (*t) return cmd_bootstrap(boot);
  } catch (const ValidationError& e) {
    report_error("validation", e.what());
    return 2;
  } catch (const NumericalError& e) {
    report_error("numerical", e.what());
    return 3;
  } catch (const PartialFailure& e) {
    report_error("partial_failure", e.what());
    return 4;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 3;
  }
  return 2;
}
