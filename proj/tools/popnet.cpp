// popnet: two-group differential network inference from the command line.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "popnet/io.hpp"
#include "popnet/pipeline.hpp"
#include "popnet/simulation.hpp"

namespace fs = std::filesystem;
using namespace popnet;

namespace {

struct ScenarioFlags {
  std::string preset = "desk";
  ScenarioSpec spec = ScenarioSpec::desk_hub_random();
  std::string structure;
  std::string diff_case;
  // Presence flags so a preset can be overridden field by field.
  CLI::Option* opts[13] = {};
};

void add_scenario_flags(CLI::App* app, ScenarioFlags& f) {
  app->add_option("--preset", f.preset, "Scenario preset")
      ->check(CLI::IsMember({"desk", "high-dim"}))
      ->capture_default_str();
  f.opts[0] = app->add_option("--p", f.spec.p, "Number of regions");
  f.opts[1] = app->add_option("--T", f.spec.T, "Time points per subject");
  f.opts[2] = app->add_option("--n-a", f.spec.n_a, "Subjects in group A");
  f.opts[3] = app->add_option("--n-b", f.spec.n_b, "Subjects in group B");
  f.opts[4] = app->add_option("--structure", f.structure, "banded | small-world | hub");
  f.opts[5] = app->add_option("--bandwidth", f.spec.bandwidth, "Banded bandwidth");
  f.opts[6] = app->add_option("--sw-neighbors", f.spec.sw_neighbors, "Small-world neighbours per side");
  f.opts[7] = app->add_option("--sw-rewire", f.spec.sw_rewire, "Small-world rewiring probability");
  f.opts[8] = app->add_option("--hub-clusters", f.spec.hub_clusters, "Hub clusters (0: p/10)");
  f.opts[9] = app->add_option("--common-degree", f.spec.common_degree, "Target common degree (0: off)");
  f.opts[10] = app->add_option("--n-diff", f.spec.n_diff, "Differential edge count");
  f.opts[11] = app->add_option("--diff-case", f.diff_case, "clustered | random");
  f.opts[12] = app->add_option("--pi-diff", f.spec.pi_diff, "Group probability of a differential edge");
  app->add_flag("--correlation-mode", f.spec.correlation_mode, "Unit-diagonal population covariances");
}

ScenarioSpec resolve_scenario(const ScenarioFlags& f, std::uint64_t seed) {
  ScenarioSpec spec = f.preset == "high-dim" ? ScenarioSpec::high_dimensional() : ScenarioSpec::desk_hub_random();
  const ScenarioSpec& given = f.spec;
  if (f.opts[0]->count()) spec.p = given.p;
  if (f.opts[1]->count()) spec.T = given.T;
  if (f.opts[2]->count()) spec.n_a = given.n_a;
  if (f.opts[3]->count()) spec.n_b = given.n_b;
  if (f.opts[4]->count()) spec.structure = parse_structure(f.structure);
  if (f.opts[5]->count()) spec.bandwidth = given.bandwidth;
  if (f.opts[6]->count()) spec.sw_neighbors = given.sw_neighbors;
  if (f.opts[7]->count()) spec.sw_rewire = given.sw_rewire;
  if (f.opts[8]->count()) spec.hub_clusters = given.hub_clusters;
  if (f.opts[9]->count()) spec.common_degree = given.common_degree;
  if (f.opts[10]->count()) spec.n_diff = given.n_diff;
  if (f.opts[11]->count()) spec.diff_case = parse_diff_case(f.diff_case);
  if (f.opts[12]->count()) spec.pi_diff = given.pi_diff;
  spec.correlation_mode = given.correlation_mode;
  spec.seed = seed;
  spec.validate();
  return spec;
}

struct RunFlags {
  RunConfig config;
  std::string method = "r3";
  std::string fdr = "by";
  CLI::Option* workers = nullptr;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool with_method) {
  RunConfig& c = f.config;
  if (with_method)
    app->add_option("--method", f.method, "r3 | standard | rs-re | rs-rp")
        ->check(CLI::IsMember({"r3", "standard", "rs-re", "rs-rp"}))
        ->capture_default_str();
  app->add_option("--B", c.B, "Bootstrap replicates per subject")->capture_default_str();
  app->add_option("--c", c.c, "Random penalty half-width as a fraction of lambda_max")->capture_default_str();
  app->add_option("--tau", c.tau, "Edge filter threshold")->capture_default_str();
  app->add_option("--stars-beta", c.stars_beta, "StARS instability threshold")->capture_default_str();
  app->add_option("--n-perm", c.n_perm, "Label permutations")->capture_default_str();
  app->add_option("--fdr-level", c.fdr_level, "FDR level for rejection")->capture_default_str();
  app->add_option("--fdr", f.fdr, "by | storey")->check(CLI::IsMember({"by", "storey"}))->capture_default_str();
  app->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  f.workers = app->add_option("--workers", c.workers, "Worker threads (0: all cores; env POPNET_WORKERS)");
  app->add_flag("--whiten,!--no-whiten", c.whiten, "AR pre-whitening")->capture_default_str();
  app->add_flag("--standardize,!--no-standardize", c.standardize, "Unit-variance regions before estimation")
      ->capture_default_str();
  app->add_option("--storey-lambda", c.storey_lambda, "Storey pi0 tuning")->capture_default_str();
  app->add_option("--stars-subsamples", c.stars_subsamples, "StARS subsamples")->capture_default_str();
  app->add_option("--ar-max-order", c.ar_max_order, "Largest AR order")->capture_default_str();
  app->add_flag("--normal-null", c.normal_null, "Standard method only: asymptotic normal p-values");
}

RunConfig resolve_run(const RunFlags& f) {
  RunConfig c = f.config;
  c.method = parse_method(f.method);
  c.fdr = parse_fdr_method(f.fdr);
  if (!f.workers->count()) {
    if (const char* env = std::getenv("POPNET_WORKERS")) {
      try {
        c.workers = std::stoi(env);
      } catch (const std::exception&) {
        throw ValidationError(std::string("POPNET_WORKERS is not an integer: ") + env);
      }
    }
  }
  c.validate();
  return c;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Population-level differential network inference"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a two-group population and its ground truth");
  ScenarioFlags sim_flags;
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  add_scenario_flags(sim, sim_flags);
  sim->add_option("--seed", sim_seed, "Random seed")->capture_default_str();
  sim->add_option("--out", sim_out, "Output directory")->required();

  // infer
  auto* infer = app.add_subcommand("infer", "Test every edge for a group difference");
  RunFlags infer_flags;
  std::string manifest, infer_out, infer_truth;
  add_run_flags(infer, infer_flags, true);
  infer->add_option("--manifest", manifest, "Dataset manifest (JSON)")->required();
  infer->add_option("--truth", infer_truth, "Ground truth, to also emit roc.csv and confusion.csv");
  infer->add_option("--out", infer_out, "Output directory")->required();

  // bench
  auto* bench = app.add_subcommand("bench", "Replicated simulation benchmark");
  ScenarioFlags bench_scen;
  RunFlags bench_flags;
  std::vector<std::string> bench_methods{"r3", "standard", "rs-re", "rs-rp"};
  int replicates = 10;
  std::string bench_out;
  add_scenario_flags(bench, bench_scen);
  add_run_flags(bench, bench_flags, false);
  bench->add_option("--methods", bench_methods, "Methods to compare")
      ->check(CLI::IsMember({"r3", "standard", "rs-re", "rs-rp"}))
      ->capture_default_str();
  bench->add_option("--replicates", replicates, "Replicates")->capture_default_str();
  bench->add_option("--out", bench_out, "Output directory")->required();

  // roc
  auto* roc = app.add_subcommand("roc", "Score an edges.csv against a ground truth");
  std::string roc_edges, roc_truth, roc_out;
  roc->add_option("--edges", roc_edges, "edges.csv from infer")->required();
  roc->add_option("--truth", roc_truth, "truth.json from simulate")->required();
  roc->add_option("--out", roc_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      const ScenarioSpec spec = resolve_scenario(sim_flags, sim_seed);
      const Population pop = sample_population(spec);
      ensure_directory(sim_out);
      const fs::path m = write_dataset(sim_out, pop.data);
      write_truth(fs::path(sim_out) / "truth.json", pop.truth, spec);
      std::cout << "wrote " << m.string() << '\n';
    } else if (*infer) {
      const RunConfig config = resolve_run(infer_flags);
      const Dataset data = read_dataset(manifest);
      std::optional<GroundTruth> truth;
      if (!infer_truth.empty()) truth = read_truth(infer_truth);
      const PipelineResult result = run_pipeline(data, config);
      ensure_directory(infer_out);
      const fs::path out(infer_out);
      write_edges_csv(out / "edges.csv", result.edges);
      write_edge_stats_csv(out / "edge_stats.csv", result.table, result.filtered);
      write_run_json(out / "run.json", result);
      if (truth) {
        write_roc_csv(out / "roc.csv", roc_points(result.statistics(), *truth, result.filtered));
        write_confusion_csv(out / "confusion.csv",
                            confusion_summary(result.rejected(), *truth, result.filtered).matrix);
      }
      print_warnings(result.warnings);
      std::cout << result.edges.size() << " edges tested, " << result.rejected().size() << " rejected\n";
    } else if (*bench) {
      const RunConfig config = resolve_run(bench_flags);
      const ScenarioSpec spec = resolve_scenario(bench_scen, config.seed);
      std::vector<Method> methods;
      for (const auto& m : bench_methods) methods.push_back(parse_method(m));
      const BenchResult res = run_benchmark(spec, config, methods, replicates);
      ensure_directory(bench_out);
      write_bench_csv(fs::path(bench_out) / "bench.csv", res);
      std::ofstream rocs(fs::path(bench_out) / "roc.csv");
      rocs << "method,replicate,fp,tp\n";
      for (const auto& s : res.scores)
        for (const auto& [fp, tp] : s.roc.points)
          rocs << to_string(s.method) << ',' << s.replicate << ',' << fp << ',' << tp << '\n';
      for (Method m : methods)
        std::cout << to_string(m) << ": TPR " << res.mean_tpr(m) << ", FDP " << res.mean_fdp(m) << '\n';
    } else if (*roc) {
      const std::vector<EdgeResult> edges = read_edges_csv(roc_edges);
      const GroundTruth truth = read_truth(roc_truth);
      FilteredEdgeSet tested;
      std::vector<double> stats;
      std::vector<Edge> rejected;
      for (const auto& e : edges) {
        tested.edges.push_back(e.edge);
        tested.columns.push_back(edge_index(e.edge.k, e.edge.l, truth.p()));
        stats.push_back(e.stat);
        if (e.reject) rejected.push_back(e.edge);
      }
      ensure_directory(roc_out);
      write_roc_csv(fs::path(roc_out) / "roc.csv", roc_points(stats, truth, tested));
      const ConfusionSummary cs = confusion_summary(rejected, truth, tested);
      write_confusion_csv(fs::path(roc_out) / "confusion.csv", cs.matrix);
      std::cout << "TPR " << cs.tpr << ", FDP " << cs.fdp << '\n';
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
