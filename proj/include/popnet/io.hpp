#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "popnet/core.hpp"
#include "popnet/pipeline.hpp"
#include "popnet/simulation.hpp"

namespace popnet {

inline constexpr int kFormatVersion = 1;

/// Shortest round-trip decimal text; "inf", "-inf" and "nan" for the rest.
std::string format_double(double v);
double parse_double(const std::string& text);

/// Headerless CSV, rows are time points and columns regions.
MatrixXd read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const MatrixXd& m);

/// Manifest: JSON with format_version, p and subjects [{id, group, path}].
/// Paths are relative to the manifest's directory. Subjects keep the listed
/// order.
Dataset read_dataset(const std::filesystem::path& manifest);

/// Writes subjects/<id>.csv and manifest.json under dir; returns the
/// manifest path.
std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& data);

void write_truth(const std::filesystem::path& path, const GroundTruth& truth, const ScenarioSpec& spec);
/// Edge sets and group labels only; per-subject precisions are not stored.
GroundTruth read_truth(const std::filesystem::path& path);

void write_edges_csv(const std::filesystem::path& path, const std::vector<EdgeResult>& edges);
std::vector<EdgeResult> read_edges_csv(const std::filesystem::path& path);

/// `subject,group,k,l,z`, one row per subject and filtered edge.
void write_edge_stats_csv(const std::filesystem::path& path, const EdgeStatTable& table,
                          const FilteredEdgeSet& filtered);

void write_roc_csv(const std::filesystem::path& path, const RocCurve& curve);
void write_confusion_csv(const std::filesystem::path& path, const Eigen::MatrixXi& matrix);

std::string config_json(const RunConfig& config);
std::string scenario_json(const ScenarioSpec& spec);

/// run.json: resolved config, seed, pilot penalties, filtered edges,
/// warnings and Storey pi0. `scenario` is echoed when non-null.
void write_run_json(const std::filesystem::path& path, const PipelineResult& result,
                    const ScenarioSpec* scenario = nullptr);

/// Table-1 style aggregate: method, replicate rows and per-method means.
void write_bench_csv(const std::filesystem::path& path, const BenchResult& bench);

/// Creates dir if needed; throws ValidationError when it cannot be written.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace popnet
