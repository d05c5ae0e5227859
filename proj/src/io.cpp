#include "popnet/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

namespace popnet {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  std::size_t a = 0, b = text.size();
  while (a < b && std::isspace(static_cast<unsigned char>(text[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
  const std::string s = text.substr(a, b - a);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  double v = 0;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError("not a number: '" + text + "'");
  return v;
}

namespace {

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

Group parse_group(const std::string& s) {
  if (s == "A") return Group::A;
  if (s == "B") return Group::B;
  throw ValidationError("unknown group label '" + s + "' (expected A or B)");
}

ordered_json edges_json(const std::vector<Edge>& edges) {
  ordered_json out = ordered_json::array();
  for (const auto& e : edges) out.push_back({e.k, e.l});
  return out;
}

std::vector<Edge> edges_from_json(const json& j) {
  std::vector<Edge> out;
  for (const auto& e : j) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return out;
}

// Non-finite doubles are not representable in JSON; store them as text.
ordered_json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ValidationError("cannot create directory " + dir.string());
  const fs::path probe = dir / ".popnet_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw ValidationError("directory is not writable: " + dir.string());
  }
  fs::remove(probe, ec);
}

MatrixXd read_matrix_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    std::vector<double> row;
    row.reserve(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        row.push_back(parse_double(cells[c]));
      } catch (const ValidationError&) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": non-numeric cell '" +
                              cells[c] + "' in column " + std::to_string(c + 1));
      }
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError(path.string() + ": empty matrix");
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_matrix_csv(const fs::path& path, const MatrixXd& m) {
  std::ofstream out = open_out(path);
  std::string line;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) line += ',';
      line += format_double(m(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

Dataset read_dataset(const fs::path& manifest) {
  std::ifstream in = open_in(manifest);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + manifest.string() + ": " + e.what());
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion)
      throw ValidationError("manifest format_version " + std::to_string(version) + " is not supported");
    const int p = j.at("p").get<int>();
    if (p < 2) throw ValidationError("manifest: p must be >= 2");
    const fs::path base = manifest.parent_path();

    Dataset data;
    std::set<std::string> seen;
    int n_a = 0, n_b = 0;
    for (const auto& s : j.at("subjects")) {
      SubjectData subject;
      subject.id = s.at("id").get<std::string>();
      if (!seen.insert(subject.id).second) throw ValidationError("duplicate subject id '" + subject.id + "'");
      subject.group = parse_group(s.at("group").get<std::string>());
      (subject.group == Group::A ? n_a : n_b)++;
      const fs::path file = base / s.at("path").get<std::string>();
      if (!fs::exists(file))
        throw ValidationError("subject '" + subject.id + "': missing file " + file.string());
      subject.x = read_matrix_csv(file);
      if (subject.x.cols() != p)
        throw ValidationError("subject '" + subject.id + "': expected " + std::to_string(p) +
                              " columns, found " + std::to_string(subject.x.cols()));
      data.push_back(std::move(subject));
    }
    if (n_a == 0 || n_b == 0) throw ValidationError("manifest: both groups must be non-empty");
    return data;
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + manifest.string() + ": " + e.what());
  }
}

fs::path write_dataset(const fs::path& dir, const Dataset& data) {
  if (data.empty()) throw ValidationError("write_dataset: empty dataset");
  ensure_directory(dir / "subjects");
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["p"] = data.front().x.cols();
  j["subjects"] = ordered_json::array();
  for (const auto& s : data) {
    const std::string rel = "subjects/" + s.id + ".csv";
    write_matrix_csv(dir / rel, s.x);
    j["subjects"].push_back({{"id", s.id}, {"group", std::string(1, group_char(s.group))}, {"path", rel}});
  }
  const fs::path manifest = dir / "manifest.json";
  open_out(manifest) << j.dump(2) << '\n';
  return manifest;
}

std::string scenario_json(const ScenarioSpec& spec) {
  ordered_json j;
  j["p"] = spec.p;
  j["T"] = spec.T;
  j["n_a"] = spec.n_a;
  j["n_b"] = spec.n_b;
  j["structure"] = to_string(spec.structure);
  j["bandwidth"] = spec.bandwidth;
  j["sw_neighbors"] = spec.sw_neighbors;
  j["sw_rewire"] = spec.sw_rewire;
  j["hub_clusters"] = spec.hub_clusters;
  j["common_degree"] = spec.common_degree;
  j["n_diff"] = spec.n_diff;
  j["diff_case"] = to_string(spec.diff_case);
  j["pi_diff"] = spec.pi_diff;
  j["correlation_mode"] = spec.correlation_mode;
  j["seed"] = spec.seed;
  return j.dump();
}

void write_truth(const fs::path& path, const GroundTruth& truth, const ScenarioSpec& spec) {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["p"] = truth.p();
  j["scenario"] = ordered_json::parse(scenario_json(spec));
  j["common"] = edges_json(truth.common.edges());
  j["diff_a"] = edges_json(truth.diff_a);
  j["diff_b"] = edges_json(truth.diff_b);
  std::string groups;
  for (Group g : truth.groups) groups += group_char(g);
  j["groups"] = groups;
  ordered_json subjects = ordered_json::array();
  for (const auto& s : truth.subject_supports) subjects.push_back(edges_json(s.edges()));
  j["subject_supports"] = subjects;
  open_out(path) << j.dump(1) << '\n';
}

GroundTruth read_truth(const fs::path& path) {
  std::ifstream in = open_in(path);
  try {
    const json j = json::parse(in);
    const int p = j.at("p").get<int>();
    GroundTruth truth;
    truth.common = EdgeSupport::from_edges(p, edges_from_json(j.at("common")));
    truth.diff_a = edges_from_json(j.at("diff_a"));
    truth.diff_b = edges_from_json(j.at("diff_b"));
    for (char c : j.at("groups").get<std::string>()) truth.groups.push_back(parse_group(std::string(1, c)));
    if (j.contains("subject_supports"))
      for (const auto& s : j.at("subject_supports"))
        truth.subject_supports.push_back(EdgeSupport::from_edges(p, edges_from_json(s)));
    return truth;
  } catch (const json::exception& e) {
    throw ValidationError("truth file " + path.string() + ": " + e.what());
  }
}

namespace {
constexpr const char* kEdgesHeader = "k,l,stat,pvalue,q_by,q_storey,pi_a,pi_b,rho_a,rho_b,reject";
}

void write_edges_csv(const fs::path& path, const std::vector<EdgeResult>& edges) {
  std::ofstream out = open_out(path);
  out << kEdgesHeader << '\n';
  for (const auto& e : edges) {
    out << e.edge.k << ',' << e.edge.l << ',' << format_double(e.stat) << ',' << format_double(e.pvalue)
        << ',' << format_double(e.q_by) << ',' << format_double(e.q_storey) << ','
        << format_double(e.pi_a) << ',' << format_double(e.pi_b) << ',' << format_double(e.rho_a) << ','
        << format_double(e.rho_b) << ',' << (e.reject ? 1 : 0) << '\n';
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

std::vector<EdgeResult> read_edges_csv(const fs::path& path) {
  std::ifstream in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kEdgesHeader)
    throw ValidationError(path.string() + ": unexpected header");
  std::vector<EdgeResult> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 11) throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 11 fields");
    EdgeResult r;
    r.edge = {static_cast<int>(parse_double(c[0])), static_cast<int>(parse_double(c[1]))};
    r.stat = parse_double(c[2]);
    r.pvalue = parse_double(c[3]);
    r.q_by = parse_double(c[4]);
    r.q_storey = parse_double(c[5]);
    r.pi_a = parse_double(c[6]);
    r.pi_b = parse_double(c[7]);
    r.rho_a = parse_double(c[8]);
    r.rho_b = parse_double(c[9]);
    r.reject = c[10] == "1";
    out.push_back(r);
  }
  return out;
}

void write_edge_stats_csv(const fs::path& path, const EdgeStatTable& table, const FilteredEdgeSet& filtered) {
  std::ofstream out = open_out(path);
  out << "subject,group,k,l,z\n";
  for (std::size_t i = 0; i < table.n_subjects(); ++i)
    for (std::size_t e = 0; e < filtered.edges.size(); ++e)
      out << table.subject_ids[i] << ',' << group_char(table.groups[i]) << ',' << filtered.edges[e].k << ','
          << filtered.edges[e].l << ','
          << format_double(table.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(filtered.columns[e])))
          << '\n';
  if (!out) throw ValidationError("write failed: " + path.string());
}

void write_roc_csv(const fs::path& path, const RocCurve& curve) {
  std::ofstream out = open_out(path);
  out << "fp,tp\n";
  for (const auto& [fp, tp] : curve.points) out << fp << ',' << tp << '\n';
}

void write_confusion_csv(const fs::path& path, const Eigen::MatrixXi& matrix) {
  std::ofstream out = open_out(path);
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) out << (j ? "," : "") << matrix(i, j);
    out << '\n';
  }
}

std::string config_json(const RunConfig& c) {
  ordered_json j;
  j["method"] = to_string(c.method);
  j["B"] = c.B;
  j["c"] = c.c;
  j["tau"] = c.tau;
  j["stars_beta"] = c.stars_beta;
  j["n_perm"] = c.n_perm;
  j["fdr_level"] = c.fdr_level;
  j["fdr"] = to_string(c.fdr);
  j["whiten"] = c.whiten;
  j["standardize"] = c.standardize;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["stars_subsamples"] = c.stars_subsamples;
  j["stars_path_points"] = c.stars_path_points;
  j["stars_ratio"] = c.stars_ratio;
  j["ar_max_order"] = c.ar_max_order;
  j["ljung_box_lags"] = c.ljung_box_lags;
  j["storey_lambda"] = c.storey_lambda;
  j["glasso_tol"] = c.glasso_tol;
  j["glasso_max_iter"] = c.glasso_max_iter;
  j["normal_null"] = c.normal_null;
  return j.dump();
}

void write_run_json(const fs::path& path, const PipelineResult& result, const ScenarioSpec* scenario) {
  ordered_json j;
  j["format_version"] = kFormatVersion;
  j["config"] = ordered_json::parse(config_json(result.config));
  j["seed"] = result.config.seed;
  if (scenario) j["scenario"] = ordered_json::parse(scenario_json(*scenario));
  j["p"] = result.p;
  ordered_json subjects = ordered_json::array();
  for (std::size_t i = 0; i < result.subject_ids.size(); ++i)
    subjects.push_back({{"id", result.subject_ids[i]},
                        {"group", std::string(1, group_char(result.groups[i]))},
                        {"pilot_lambda", number_json(result.pilot_lambdas[i])},
                        {"lambda_max", number_json(result.lambda_maxes[i])}});
  j["subjects"] = subjects;
  j["m"] = result.table.B;
  ordered_json filtered = ordered_json::array();
  for (const auto& e : result.filtered.edges) filtered.push_back({e.k, e.l});
  j["filtered_edges"] = filtered;
  j["n_tested"] = result.edges.size();
  j["n_rejected"] = result.rejected().size();
  j["storey_pi0"] = number_json(result.storey_pi0);
  j["warnings"] = result.warnings;
  open_out(path) << j.dump(1) << '\n';
}

void write_bench_csv(const fs::path& path, const BenchResult& bench) {
  std::ofstream out = open_out(path);
  out << "method,replicate,tpr,fdp,n_tested,n_rejected\n";
  std::vector<Method> methods;
  for (const auto& s : bench.scores) {
    if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    out << to_string(s.method) << ',' << s.replicate << ',' << format_double(s.tpr) << ','
        << format_double(s.fdp) << ',' << s.n_tested << ',' << s.n_rejected << '\n';
  }
  for (Method m : methods)
    out << to_string(m) << ",mean," << format_double(bench.mean_tpr(m)) << ','
        << format_double(bench.mean_fdp(m)) << ",,\n";
}

}  // namespace popnet
