#pragma once

#include "mfsoc/meanfield.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

namespace mfsoc {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << std::setprecision(17);
  return out;
}

inline void write_matrix_rows(std::ofstream& out, const Matrix& M) {
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) out << ',';
      out << M(r, c);
    }
    out << '\n';
  }
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::runtime_error("ragged csv: " + path.string());
    rows.push_back(std::move(row));
  }
  Matrix M(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < rows[r].size(); ++c) M(r, c) = rows[r][c];
  return M;
}

}  // namespace detail

/// Header `t,x1..xn,u1..um,path_id`; one row per grid point, paths appended.
inline void write_trajectories_csv(const std::filesystem::path& path, const Ensemble& ens) {
  auto out = detail::open_out(path);
  const Eigen::Index n = ens.mean_state.cols(), m = ens.mean_input.cols();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x" << i;
  for (Eigen::Index i = 1; i <= m; ++i) out << ",u" << i;
  out << ",path_id\n";
  for (const Trajectory& p : ens.paths) {
    for (Eigen::Index g = 0; g < p.times.size(); ++g) {
      out << p.times(g);
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << p.states(g, i);
      for (Eigen::Index i = 0; i < m; ++i) out << ',' << p.inputs(g, i);
      out << ',' << p.path_id << '\n';
    }
  }
}

/// Header `t,xbar1..xbarn,method`.
inline void write_meanfield_csv(const std::filesystem::path& path,
                                const std::vector<MeanFieldPath>& paths) {
  if (paths.empty()) throw std::invalid_argument("write_meanfield_csv: no paths");
  auto out = detail::open_out(path);
  const Eigen::Index n = paths.front().xbar.cols();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",xbar" << i;
  out << ",method\n";
  for (const MeanFieldPath& p : paths) {
    const char* tag = p.method == MeanFieldPath::Method::monte_carlo ? "monte-carlo" : "identified";
    for (Eigen::Index g = 0; g < p.times.size(); ++g) {
      out << p.times(g);
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << p.xbar(g, i);
      out << ',' << tag << '\n';
    }
  }
}

/// Iteration traces for plotting convergence curves:
/// `stage,k,gain_delta,residual,gain...` (gain entries row-major).
inline void write_convergence_csv(const std::filesystem::path& path,
                                  const IterationTrace& feedback,
                                  const IterationTrace& feedforward) {
  auto out = detail::open_out(path);
  out << "stage,k,gain_delta,residual,gain\n";
  auto dump = [&](const char* stage, const IterationTrace& tr) {
    for (const IterationRecord& r : tr.records) {
      out << stage << ',' << r.k << ',' << r.gain_delta << ',' << r.residual;
      for (Eigen::Index i = 0; i < r.gain.rows(); ++i)
        for (Eigen::Index j = 0; j < r.gain.cols(); ++j) out << ',' << r.gain(i, j);
      out << '\n';
    }
  };
  dump("feedback", feedback);
  dump("feedforward", feedforward);
}

inline nlohmann::json plan_to_json(const SamplingPlan& plan) {
  return {{"t1", plan.t1},   {"Ts", plan.Ts},        {"T", plan.T},
          {"l", plan.l},     {"dt", plan.dt},        {"horizon", plan.horizon}};
}

inline SamplingPlan plan_from_json(const nlohmann::json& j) {
  SamplingPlan plan;
  plan.t1 = j.at("t1").get<double>();
  plan.Ts = j.at("Ts").get<double>();
  plan.T = j.at("T").get<double>();
  plan.l = j.at("l").get<int>();
  plan.dt = j.at("dt").get<double>();
  plan.horizon = j.at("horizon").get<double>();
  return plan;
}

/// Datasets are exported as one CSV block per matrix plus a JSON manifest
/// naming (l, n, m, plan), so a learning run can be replayed without
/// re-simulation.
inline void export_feedback_dataset(const std::filesystem::path& dir, const FeedbackDataset& ds) {
  std::filesystem::create_directories(dir);
  { auto out = detail::open_out(dir / "delta_xhat.csv"); detail::write_matrix_rows(out, ds.delta_xhat); }
  { auto out = detail::open_out(dir / "Ixx.csv"); detail::write_matrix_rows(out, ds.Ixx); }
  { auto out = detail::open_out(dir / "Ixu.csv"); detail::write_matrix_rows(out, ds.Ixu); }
  { auto out = detail::open_out(dir / "Iuhat.csv"); detail::write_matrix_rows(out, ds.Iuhat); }
  nlohmann::json manifest{{"kind", "feedback"},
                          {"l", ds.plan.l},
                          {"n", ds.n},
                          {"m", ds.m},
                          {"plan", plan_to_json(ds.plan)}};
  auto out = detail::open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

inline FeedbackDataset import_feedback_dataset(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw std::runtime_error("missing manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(min);
  if (manifest.at("kind") != "feedback") throw std::runtime_error("manifest kind mismatch");
  FeedbackDataset ds;
  ds.plan = plan_from_json(manifest.at("plan"));
  ds.n = manifest.at("n").get<int>();
  ds.m = manifest.at("m").get<int>();
  ds.delta_xhat = detail::read_matrix_csv(dir / "delta_xhat.csv");
  ds.Ixx = detail::read_matrix_csv(dir / "Ixx.csv");
  ds.Ixu = detail::read_matrix_csv(dir / "Ixu.csv");
  ds.Iuhat = detail::read_matrix_csv(dir / "Iuhat.csv");
  return ds;
}

inline void export_feedforward_dataset(const std::filesystem::path& dir,
                                       const FeedforwardDataset& ds) {
  std::filesystem::create_directories(dir);
  { auto out = detail::open_out(dir / "delta_xbarhat.csv"); detail::write_matrix_rows(out, ds.delta_xbarhat); }
  { auto out = detail::open_out(dir / "Ixbarxbar.csv"); detail::write_matrix_rows(out, ds.Ixbarxbar); }
  { auto out = detail::open_out(dir / "Ixbarubar.csv"); detail::write_matrix_rows(out, ds.Ixbarubar); }
  nlohmann::json manifest{{"kind", "feedforward"},
                          {"l", ds.plan.l},
                          {"n", ds.n},
                          {"m", ds.m},
                          {"plan", plan_to_json(ds.plan)}};
  auto out = detail::open_out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

inline FeedforwardDataset import_feedforward_dataset(const std::filesystem::path& dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw std::runtime_error("missing manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(min);
  if (manifest.at("kind") != "feedforward") throw std::runtime_error("manifest kind mismatch");
  FeedforwardDataset ds;
  ds.plan = plan_from_json(manifest.at("plan"));
  ds.n = manifest.at("n").get<int>();
  ds.m = manifest.at("m").get<int>();
  ds.delta_xbarhat = detail::read_matrix_csv(dir / "delta_xbarhat.csv");
  ds.Ixbarxbar = detail::read_matrix_csv(dir / "Ixbarxbar.csv");
  ds.Ixbarubar = detail::read_matrix_csv(dir / "Ixbarubar.csv");
  return ds;
}

}  // namespace mfsoc
