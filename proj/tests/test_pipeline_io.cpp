#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "popnet/io.hpp"
#include "popnet/pipeline.hpp"
#include "popnet/simulation.hpp"

using namespace popnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("popnet_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

ScenarioSpec tiny_scenario(std::uint64_t seed) {
  ScenarioSpec spec;
  spec.p = 8;
  spec.T = 120;
  spec.n_a = 4;
  spec.n_b = 4;
  spec.structure = Structure::Banded;
  spec.n_diff = 4;
  spec.seed = seed;
  return spec;
}

RunConfig tiny_config() {
  RunConfig c;
  c.B = 6;
  c.n_perm = 60;
  c.stars_subsamples = 6;
  c.stars_path_points = 12;
  c.whiten = false;
  c.seed = 5;
  c.workers = 1;
  return c;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(POPNET_CLI) + " " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Format, DoubleRoundTrip) {
  for (double v : {0.1, -3.25e-300, 1.0 / 3.0, 123456789.0, 0.0}) EXPECT_EQ(parse_double(format_double(v)), v);
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_double(-std::numeric_limits<double>::infinity()), "-inf");
  EXPECT_EQ(format_double(std::nan("")), "nan");
  EXPECT_TRUE(std::isinf(parse_double("-inf")));
  EXPECT_TRUE(std::isnan(parse_double("nan")));
  EXPECT_THROW(parse_double("1.5x"), ValidationError);
}

TEST(MatrixCsv, RoundTripAndErrors) {
  const fs::path dir = scratch("csv");
  MatrixXd m = MatrixXd::Random(7, 3);
  write_matrix_csv(dir / "m.csv", m);
  EXPECT_EQ(read_matrix_csv(dir / "m.csv"), m);

  spit(dir / "ragged.csv", "1,2,3\n4,5\n");
  EXPECT_THROW(read_matrix_csv(dir / "ragged.csv"), ValidationError);
  spit(dir / "bad.csv", "1,2\n3,abc\n");
  try {
    read_matrix_csv(dir / "bad.csv");
    FAIL() << "expected a parse error";
  } catch (const ValidationError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("bad.csv"), std::string::npos);
    EXPECT_NE(what.find("bad.csv:2:"), std::string::npos);
    EXPECT_NE(what.find("column 2"), std::string::npos);
  }
}

TEST(Dataset, RoundTripIsBitIdentical) {
  const fs::path dir = scratch("dataset");
  const Population pop = sample_population(tiny_scenario(1));
  const fs::path manifest = write_dataset(dir, pop.data);
  const Dataset back = read_dataset(manifest);
  ASSERT_EQ(back.size(), pop.data.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, pop.data[i].id);
    EXPECT_EQ(back[i].group, pop.data[i].group);
    EXPECT_EQ(back[i].x, pop.data[i].x);
  }
}

TEST(Dataset, ValidationErrors) {
  const fs::path dir = scratch("manifest_errors");
  const Population pop = sample_population(tiny_scenario(2));
  const fs::path manifest = write_dataset(dir, pop.data);
  nlohmann::json j = nlohmann::json::parse(slurp(manifest));

  // A subject with p - 1 columns.
  const std::string victim = j["subjects"][1]["id"];
  write_matrix_csv(dir / j["subjects"][1]["path"].get<std::string>(), pop.data[1].x.leftCols(7));
  try {
    read_dataset(manifest);
    FAIL() << "expected a dimension error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(victim), std::string::npos);
  }
  write_matrix_csv(dir / j["subjects"][1]["path"].get<std::string>(), pop.data[1].x);

  nlohmann::json bad = j;
  bad["subjects"][0]["group"] = "C";
  spit(dir / "c.json", bad.dump());
  EXPECT_THROW(read_dataset(dir / "c.json"), ValidationError);

  bad = j;
  bad["subjects"][0]["path"] = "nowhere.csv";
  spit(dir / "missing.json", bad.dump());
  EXPECT_THROW(read_dataset(dir / "missing.json"), ValidationError);

  bad = j;
  bad["subjects"][1]["id"] = bad["subjects"][0]["id"];
  spit(dir / "dup.json", bad.dump());
  EXPECT_THROW(read_dataset(dir / "dup.json"), ValidationError);
}

TEST(Truth, RoundTrip) {
  const fs::path dir = scratch("truth");
  const ScenarioSpec spec = tiny_scenario(3);
  const Population pop = sample_population(spec);
  write_truth(dir / "truth.json", pop.truth, spec);
  const GroundTruth back = read_truth(dir / "truth.json");
  EXPECT_EQ(back.common.edges(), pop.truth.common.edges());
  EXPECT_EQ(back.diff_a, pop.truth.diff_a);
  EXPECT_EQ(back.diff_b, pop.truth.diff_b);
  EXPECT_EQ(back.groups, pop.truth.groups);
  ASSERT_EQ(back.subject_supports.size(), pop.truth.subject_supports.size());
  for (std::size_t i = 0; i < back.subject_supports.size(); ++i)
    EXPECT_EQ(back.subject_supports[i].edges(), pop.truth.subject_supports[i].edges());
}

class PipelineFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    pop_ = new Population(sample_population(tiny_scenario(4)));
    result_ = new PipelineResult(run_pipeline(pop_->data, tiny_config()));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete pop_;
  }
  static Population* pop_;
  static PipelineResult* result_;
};

Population* PipelineFixture::pop_ = nullptr;
PipelineResult* PipelineFixture::result_ = nullptr;

TEST_F(PipelineFixture, EdgesCsvParsesBack) {
  const fs::path dir = scratch("edges");
  write_edges_csv(dir / "edges.csv", result_->edges);
  const auto back = read_edges_csv(dir / "edges.csv");
  ASSERT_EQ(back.size(), result_->edges.size());
  auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
  for (std::size_t i = 0; i < back.size(); ++i) {
    const EdgeResult& a = back[i];
    const EdgeResult& b = result_->edges[i];
    EXPECT_EQ(a.edge, b.edge);
    EXPECT_TRUE(same(a.stat, b.stat));
    EXPECT_EQ(a.pvalue, b.pvalue);
    EXPECT_EQ(a.q_by, b.q_by);
    EXPECT_EQ(a.q_storey, b.q_storey);
    EXPECT_EQ(a.pi_a, b.pi_a);
    EXPECT_EQ(a.pi_b, b.pi_b);
    EXPECT_TRUE(same(a.rho_a, b.rho_a));
    EXPECT_TRUE(same(a.rho_b, b.rho_b));
    EXPECT_EQ(a.reject, b.reject);
  }
}

TEST_F(PipelineFixture, ResultInvariants) {
  EXPECT_EQ(result_->edges.size(), result_->filtered.edges.size());
  for (const auto& e : result_->edges) {
    EXPECT_GE(e.pvalue, 1.0 / 61);
    EXPECT_LE(e.pvalue, 1.0);
    EXPECT_GE(e.q_by, e.pvalue);
    EXPECT_LE(e.q_by, 1.0);
    EXPECT_LE(e.q_storey, 1.0);
    EXPECT_EQ(e.reject, e.q_by <= 0.10);
  }
  for (std::size_t i = 0; i < result_->pilot_lambdas.size(); ++i) {
    EXPECT_GT(result_->pilot_lambdas[i], 0.0);
    EXPECT_LE(result_->pilot_lambdas[i], result_->lambda_maxes[i]);
  }
}

TEST_F(PipelineFixture, RunJsonHasEveryConfigKey) {
  const fs::path dir = scratch("runjson");
  write_run_json(dir / "run.json", *result_);
  const nlohmann::json j = nlohmann::json::parse(slurp(dir / "run.json"));
  const nlohmann::json cfg = nlohmann::json::parse(config_json(RunConfig{}));
  for (const auto& [key, value] : cfg.items()) EXPECT_TRUE(j["config"].contains(key)) << key;
  for (const char* key : {"method", "B", "c", "tau", "stars_beta", "n_perm", "fdr_level", "fdr", "whiten", "seed",
                          "workers"})
    EXPECT_TRUE(cfg.contains(key)) << key;
  for (const char* key : {"format_version", "seed", "subjects", "filtered_edges", "storey_pi0", "warnings"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_EQ(j["subjects"].size(), pop_->data.size());
  EXPECT_EQ(j["filtered_edges"].size(), result_->filtered.edges.size());
}

TEST_F(PipelineFixture, WorkersDoNotChangeOutput) {
  RunConfig c = tiny_config();
  c.workers = 8;
  const PipelineResult parallel = run_pipeline(pop_->data, c);
  const fs::path dir = scratch("workers");
  write_edges_csv(dir / "serial.csv", result_->edges);
  write_edges_csv(dir / "parallel.csv", parallel.edges);
  EXPECT_EQ(slurp(dir / "serial.csv"), slurp(dir / "parallel.csv"));
  EXPECT_EQ(result_->table.z, parallel.table.z);
}

TEST(MethodFlags, Mapping) {
  auto flags = [](Method m) {
    const MethodFlags f = method_flags(m);
    return std::tuple{f.resampling, f.random_penalty, f.random_effects};
  };
  EXPECT_EQ(flags(Method::R3), std::tuple(true, true, true));
  EXPECT_EQ(flags(Method::Standard), std::tuple(false, false, false));
  EXPECT_EQ(flags(Method::RsRe), std::tuple(true, false, true));
  EXPECT_EQ(flags(Method::RsRp), std::tuple(true, true, false));
  EXPECT_EQ(parse_method("rs-re"), Method::RsRe);
  EXPECT_EQ(parse_method("rs_rp"), Method::RsRp);
  EXPECT_THROW(parse_method("r4"), ValidationError);
}

TEST(MethodFlags, SingleIdentityDrawDegradesToStandard) {
  const Population pop = sample_population(tiny_scenario(6));
  RunConfig standard = tiny_config();
  standard.method = Method::Standard;
  const PreparedData prep = prepare_subjects(pop.data, standard);

  RunConfig degraded = standard;
  degraded.method = Method::RsRp;
  degraded.B = 1;
  degraded.c = 0;
  degraded.identity_bootstrap = true;
  std::vector<std::string> warnings;
  const EdgeStatTable a = edge_stat_table(prep, standard, warnings);
  const EdgeStatTable b = edge_stat_table(prep, degraded, warnings);
  EXPECT_EQ(a.z, b.z);
  const PipelineResult ra = test_edges(prep, a, standard, warnings);
  const PipelineResult rb = test_edges(prep, b, degraded, warnings);
  EXPECT_EQ(ra.statistics(), rb.statistics());

  RunConfig r3 = degraded;
  r3.method = Method::R3;
  EXPECT_NO_THROW(r3.validate());
  if (!a.z.isZero()) EXPECT_THROW(test_edges(prep, b, r3, warnings), ValidationError);
  r3.identity_bootstrap = false;
  EXPECT_THROW(r3.validate(), ValidationError);
}

TEST(Pipeline, FilteredSetSharedWhenResamplingMatches) {
  const Population pop = sample_population(tiny_scenario(7));
  RunConfig r3 = tiny_config();
  RunConfig rs_rp = r3;
  rs_rp.method = Method::RsRp;
  const PipelineResult a = run_pipeline(pop.data, r3);
  const PipelineResult b = run_pipeline(pop.data, rs_rp);
  EXPECT_EQ(a.filtered.edges, b.filtered.edges);
}

TEST(Pipeline, ConfigValidation) {
  RunConfig c;
  c.tau = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = RunConfig{};
  c.normal_null = true;
  EXPECT_THROW(c.validate(), ValidationError);
  c.method = Method::Standard;
  EXPECT_NO_THROW(c.validate());
  c = RunConfig{};
  c.fdr_level = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Pipeline, NullPopulationRarelyRejects) {
  // Both groups drawn from one population: no differential edges.
  int seeds_with_rejections = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioSpec spec = tiny_scenario(1000 + seed);
    spec.n_a = 10;
    spec.n_b = 10;
    spec.n_diff = 0;
    const Population pop = sample_population(spec);
    RunConfig c = tiny_config();
    c.B = 10;
    c.n_perm = 200;
    c.seed = seed;
    const PipelineResult r = run_pipeline(pop.data, c);
    seeds_with_rejections += r.rejected().empty() ? 0 : 1;
  }
  EXPECT_LE(seeds_with_rejections, 1);
}

TEST(Cli, ExitCodesAndWorkersEnv) {
  const fs::path dir = scratch("cli");
  const std::string sim = "simulate --p 8 --T 100 --n-a 3 --n-b 3 --structure banded --n-diff 4 --seed 2 --out " +
                          (dir / "data").string();
  ASSERT_EQ(run_cli(sim), 0);
  ASSERT_TRUE(fs::exists(dir / "data" / "manifest.json"));
  ASSERT_TRUE(fs::exists(dir / "data" / "truth.json"));

  const std::string infer = "infer --manifest " + (dir / "data" / "manifest.json").string() +
                            " --B 4 --n-perm 30 --stars-subsamples 5 --no-whiten --out ";
  EXPECT_EQ(run_cli(infer + (dir / "a").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "a" / "edges.csv"));
  EXPECT_TRUE(fs::exists(dir / "a" / "run.json"));
  EXPECT_TRUE(fs::exists(dir / "a" / "edge_stats.csv"));

  EXPECT_EQ(run_cli("infer --manifest " + (dir / "absent.json").string() + " --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli(infer + (dir / "y").string() + " --method r4"), 2);
  EXPECT_EQ(run_cli(infer + (dir / "y").string() + " --c 0.7"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);

  EXPECT_EQ(run_cli("infer --manifest " + (dir / "data" / "manifest.json").string() +
                    " --B 4 --n-perm 30 --stars-subsamples 5 --no-whiten --truth " +
                    (dir / "data" / "truth.json").string() + " --out " + (dir / "t").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "t" / "roc.csv"));
  EXPECT_TRUE(fs::exists(dir / "t" / "confusion.csv"));
  EXPECT_EQ(run_cli("roc --edges " + (dir / "t" / "edges.csv").string() + " --truth " +
                    (dir / "data" / "truth.json").string() + " --out " + (dir / "r").string()),
            0);
  EXPECT_EQ(slurp(dir / "t" / "roc.csv"), slurp(dir / "r" / "roc.csv"));

  ASSERT_EQ(setenv("POPNET_WORKERS", "3", 1), 0);
  EXPECT_EQ(run_cli(infer + (dir / "env").string()), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "env" / "run.json"))["config"]["workers"], 3);
  EXPECT_EQ(run_cli(infer + (dir / "flag").string() + " --workers 1"), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(dir / "flag" / "run.json"))["config"]["workers"], 1);
  EXPECT_EQ(slurp(dir / "env" / "edges.csv"), slurp(dir / "flag" / "edges.csv"));
  ASSERT_EQ(setenv("POPNET_WORKERS", "many", 1), 0);
  EXPECT_EQ(run_cli(infer + (dir / "bad").string()), 2);
  unsetenv("POPNET_WORKERS");
}
