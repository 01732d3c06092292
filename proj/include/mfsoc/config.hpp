#pragma once

#include "mfsoc/csv.hpp"

namespace mfsoc {

struct InitialStateConfig {
  enum class Kind { fixed, uniform_box };
  Kind kind = Kind::fixed;
  Vector value;  // fixed
  Vector lo, hi; // uniform_box

  InitialStateSampler sampler() const {
    if (kind == Kind::fixed) return fixed_initial_state(value);
    return uniform_box_initial_state(lo, hi);
  }
  Vector mean() const { return kind == Kind::fixed ? value : Vector(0.5 * (lo + hi)); }
};

struct SeedConfig {
  std::uint64_t data = 1;        // ensemble used for learning
  std::uint64_t meanfield = 2;   // Monte Carlo mean-field route
  std::uint64_t evaluation = 3;  // social-cost evaluation
};

struct ExperimentConfig {
  SystemDynamics dynamics;
  CostSpec cost;
  SamplingPlan sampling;
  NoiseSpec noise;
  Matrix K0;
  double xi = 1e-4;
  int max_iter = 50;
  int M = 100;        // sample paths for the learning ensemble
  int Ns = 1000;      // sample paths for the Monte Carlo mean-field route
  Vector xbar0;
  int N = 40;         // population size for the validation/cost stage
  int M_eval = 50;    // Monte Carlo replications for social-cost evaluation
  InitialStateConfig init;
  SeedConfig seeds;
  std::string out_dir = "out";
  std::string format = "csv";       // csv | json
  bool export_datasets = true;
  bool run_monte_carlo_route = true;

  /// Module preconditions; throws on hard violations (dimension mismatches),
  /// returns the standing-assumption report otherwise.
  ValidationReport validate() const {
    const int required =
        static_cast<int>(dynamics.n * (dynamics.n + 1) / 2 + dynamics.m * dynamics.n +
                         dynamics.m * (dynamics.m + 1) / 2);
    sampling.check(required);
    noise.check();
    if (xbar0.size() != dynamics.n)
      throw std::invalid_argument("config: xbar0 has wrong size");
    if (M < 1 || Ns < 1 || N < 1 || M_eval < 1)
      throw std::invalid_argument("config: path counts must be positive");
    if (xi <= 0.0) throw std::invalid_argument("config: xi must be positive");
    return mfsoc::validate(dynamics, cost, K0);
  }
};

namespace detail {

inline nlohmann::json matrix_to_json(const Matrix& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("expected matrix (array of rows)");
  // accept both [[...],[...]] (row-major rows) and a flat row [ ... ]
  if (!j.front().is_array()) {
    Matrix M(1, j.size());
    for (size_t c = 0; c < j.size(); ++c) M(0, c) = j[c].get<double>();
    return M;
  }
  const size_t rows = j.size(), cols = j.front().size();
  Matrix M(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (j[r].size() != cols) throw std::invalid_argument("ragged matrix in config");
    for (size_t c = 0; c < cols; ++c) M(r, c) = j[r][c].get<double>();
  }
  return M;
}

inline Vector vector_from_json(const nlohmann::json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(i) = j[i].get<double>();
  return v;
}

inline nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  using detail::matrix_to_json;
  using detail::vector_to_json;
  nlohmann::json j;
  j["dynamics"] = {{"A", matrix_to_json(cfg.dynamics.A)},
                   {"B", matrix_to_json(cfg.dynamics.B)},
                   {"C", matrix_to_json(cfg.dynamics.C)},
                   {"D", matrix_to_json(cfg.dynamics.D)}};
  j["cost"] = {{"Q", matrix_to_json(cfg.cost.Q)},
               {"R", matrix_to_json(cfg.cost.R)},
               {"Gamma", matrix_to_json(cfg.cost.Gamma)}};
  j["sampling"] = plan_to_json(cfg.sampling);
  j["noise"] = {{"mode", cfg.noise.mode == NoiseSpec::Mode::none ? "none" : "sum-of-sinusoids"},
                {"J", cfg.noise.J},
                {"freq_lo", cfg.noise.freq_lo},
                {"freq_hi", cfg.noise.freq_hi},
                {"amplitude", cfg.noise.amplitude},
                {"seed", cfg.noise.seed}};
  j["learning"] = {{"K0", matrix_to_json(cfg.K0)},
                   {"xi", cfg.xi},
                   {"max_iter", cfg.max_iter},
                   {"M", cfg.M}};
  j["meanfield"] = {{"Ns", cfg.Ns}, {"xbar0", vector_to_json(cfg.xbar0)}};
  j["population"] = {{"N", cfg.N}, {"M_eval", cfg.M_eval}};
  if (cfg.init.kind == InitialStateConfig::Kind::fixed) {
    j["init"] = {{"dist", "fixed"}, {"value", vector_to_json(cfg.init.value)}};
  } else {
    j["init"] = {{"dist", "uniform"},
                 {"lo", vector_to_json(cfg.init.lo)},
                 {"hi", vector_to_json(cfg.init.hi)}};
  }
  j["seeds"] = {{"data", cfg.seeds.data},
                {"meanfield", cfg.seeds.meanfield},
                {"evaluation", cfg.seeds.evaluation}};
  j["output"] = {{"dir", cfg.out_dir},
                 {"format", cfg.format},
                 {"export_datasets", cfg.export_datasets},
                 {"run_monte_carlo_route", cfg.run_monte_carlo_route}};
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  using detail::matrix_from_json;
  using detail::vector_from_json;
  ExperimentConfig cfg;
  const auto& dyn = j.at("dynamics");
  cfg.dynamics = SystemDynamics(matrix_from_json(dyn.at("A")), matrix_from_json(dyn.at("B")),
                                matrix_from_json(dyn.at("C")), matrix_from_json(dyn.at("D")));
  const auto& cost = j.at("cost");
  cfg.cost = CostSpec(matrix_from_json(cost.at("Q")), matrix_from_json(cost.at("R")),
                      matrix_from_json(cost.at("Gamma")));
  cfg.sampling = plan_from_json(j.at("sampling"));
  const auto& noise = j.at("noise");
  const std::string mode = noise.value("mode", "sum-of-sinusoids");
  cfg.noise.mode = mode == "none" ? NoiseSpec::Mode::none : NoiseSpec::Mode::sum_of_sinusoids;
  cfg.noise.J = noise.value("J", 100);
  cfg.noise.freq_lo = noise.value("freq_lo", -10.0);
  cfg.noise.freq_hi = noise.value("freq_hi", 10.0);
  cfg.noise.amplitude = noise.value("amplitude", 1.0);
  cfg.noise.seed = noise.value("seed", std::uint64_t{1});
  const auto& learning = j.at("learning");
  cfg.K0 = matrix_from_json(learning.at("K0"));
  cfg.xi = learning.value("xi", 1e-4);
  cfg.max_iter = learning.value("max_iter", 50);
  cfg.M = learning.value("M", 100);
  const auto& mf = j.at("meanfield");
  cfg.Ns = mf.value("Ns", 1000);
  cfg.xbar0 = vector_from_json(mf.at("xbar0"));
  const auto& pop = j.at("population");
  cfg.N = pop.at("N").get<int>();
  cfg.M_eval = pop.value("M_eval", 50);
  if (j.contains("init")) {
    const auto& init = j.at("init");
    if (init.at("dist") == "fixed") {
      cfg.init.kind = InitialStateConfig::Kind::fixed;
      cfg.init.value = vector_from_json(init.at("value"));
    } else {
      cfg.init.kind = InitialStateConfig::Kind::uniform_box;
      cfg.init.lo = vector_from_json(init.at("lo"));
      cfg.init.hi = vector_from_json(init.at("hi"));
    }
  } else {
    cfg.init.kind = InitialStateConfig::Kind::fixed;
    cfg.init.value = cfg.xbar0;
  }
  if (j.contains("seeds")) {
    const auto& seeds = j.at("seeds");
    cfg.seeds.data = seeds.value("data", std::uint64_t{1});
    cfg.seeds.meanfield = seeds.value("meanfield", std::uint64_t{2});
    cfg.seeds.evaluation = seeds.value("evaluation", std::uint64_t{3});
  }
  if (j.contains("output")) {
    const auto& out = j.at("output");
    cfg.out_dir = out.value("dir", "out");
    cfg.format = out.value("format", "csv");
    cfg.export_datasets = out.value("export_datasets", true);
    cfg.run_monte_carlo_route = out.value("run_monte_carlo_route", true);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  return config_from_json(nlohmann::json::parse(in));
}

inline void save_config(const std::filesystem::path& path, const ExperimentConfig& cfg) {
  auto out = detail::open_out(path);
  out << config_to_json(cfg).dump(2) << '\n';
}

/// The simulation example configuration: 2-state/1-input agent with
/// multiplicative noise, Q = diag(3,2), R = 1.25, Gamma = 0.9 I,
/// K0 = [6,-3], dt = Ts = 1e-3, T = 0.9, windows spanning [0, 10],
/// M = 100 sample paths, N = 40 agents, xbar0 = (2,2).
inline ExperimentConfig paper_example_config() {
  ExperimentConfig cfg;
  Matrix A(2, 2), B(2, 1), C(2, 2), D(2, 1);
  A << 0.3, 0.7, -0.9, 0.5;
  B << 0.2, 0.0;
  C << 0.05, 0.03, 0.05, 0.02;
  D << 0.05, 0.06;
  cfg.dynamics = SystemDynamics(A, B, C, D);
  Matrix Q(2, 2), R(1, 1), G(2, 2);
  Q << 3.0, 0.0, 0.0, 2.0;
  R << 1.25;
  G << 0.9, 0.0, 0.0, 0.9;
  cfg.cost = CostSpec(Q, R, G);
  cfg.sampling = SamplingPlan{0.0, 1e-3, 0.9, 9101, 1e-3, 10.0};
  // 100 sinusoids, unit amplitude; frequencies kept low so the exploration
  // actually moves the state (the response rolls off as 1/|w|).
  cfg.noise = NoiseSpec{NoiseSpec::Mode::sum_of_sinusoids, 100, -10.0, 10.0, 1.0, 77};
  cfg.K0 = Matrix(1, 2);
  cfg.K0 << 6.0, -3.0;
  cfg.xi = 1e-4;
  cfg.max_iter = 50;
  cfg.M = 100;
  cfg.Ns = 1000;
  cfg.xbar0 = Vector(2);
  cfg.xbar0 << 2.0, 2.0;
  cfg.N = 40;
  cfg.M_eval = 50;
  cfg.init.kind = InitialStateConfig::Kind::uniform_box;
  cfg.init.lo = Vector::Zero(2);
  cfg.init.hi = Vector::Constant(2, 4.0);
  cfg.seeds = SeedConfig{11, 12, 13};
  return cfg;
}

}  // namespace mfsoc
