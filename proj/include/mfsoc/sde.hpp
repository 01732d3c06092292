#pragma once

#include "mfsoc/model.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <random>
#include <thread>
#include <vector>

namespace mfsoc {

using Rng = std::mt19937_64;

/// Decorrelates per-path seeds derived from one base seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Window layout for the integral data matrices: window j covers
/// [t1 + j*Ts, t1 + j*Ts + T), j = 0..l-1, on a uniform dt grid.
struct SamplingPlan {
  double t1 = 0.0;
  double Ts = 1e-3;
  double T = 0.9;
  int l = 1;
  double dt = 1e-3;
  double horizon = 10.0;

  void check(int required_l = 1) const {
    if (dt <= 0.0) throw std::invalid_argument("SamplingPlan: dt must be positive");
    auto multiple_of_dt = [&](double v) {
      const double r = v / dt;
      return std::abs(r - std::llround(r)) <= 1e-12 * std::max(1.0, std::abs(r));
    };
    if (!multiple_of_dt(Ts) || !multiple_of_dt(T))
      throw std::invalid_argument("SamplingPlan: Ts and T must be integer multiples of dt");
    if (l < required_l)
      throw std::invalid_argument("SamplingPlan: window count below the required rank bound");
    if (t1 + (l - 1) * Ts + T > horizon * (1.0 + 1e-12) + 1e-12)
      throw std::invalid_argument("SamplingPlan: windows do not fit in the horizon");
  }

  int grid_size() const { return static_cast<int>(std::floor(horizon / dt + 1e-9)) + 1; }
  int window_steps() const { return static_cast<int>(std::llround(T / dt)); }
  int window_start_index(int j) const {
    return static_cast<int>(std::llround((t1 + j * Ts) / dt));
  }
  /// Largest l for which all windows stay inside the horizon.
  int max_windows() const {
    return static_cast<int>(std::floor((horizon - T - t1) / Ts + 1e-9)) + 1;
  }
};

struct NoiseSpec {
  enum class Mode { none, sum_of_sinusoids };
  Mode mode = Mode::sum_of_sinusoids;
  int J = 100;
  double freq_lo = -10.0;  // rad/s
  double freq_hi = 10.0;
  double amplitude = 1.0;  // per sinusoid
  std::uint64_t seed = 1;

  void check() const {
    if (mode == Mode::sum_of_sinusoids && J < 1)
      throw std::invalid_argument("NoiseSpec: J must be >= 1");
    if (freq_lo >= freq_hi) throw std::invalid_argument("NoiseSpec: freq_lo must be < freq_hi");
  }
};

/// Sum-of-sinusoids exploration signal; frequencies are drawn once from the
/// spec's seed, so the signal is a deterministic function of (spec, t).
class ExplorationSignal {
 public:
  ExplorationSignal() = default;
  ExplorationSignal(const NoiseSpec& spec, Eigen::Index m) : spec_(spec), m_(m) {
    spec.check();
    if (spec.mode == NoiseSpec::Mode::sum_of_sinusoids) {
      Rng eng(spec.seed);
      std::uniform_real_distribution<double> freq(spec.freq_lo, spec.freq_hi);
      freqs_.resize(m);
      for (Eigen::Index c = 0; c < m; ++c) {
        freqs_[c].resize(spec.J);
        for (int j = 0; j < spec.J; ++j) freqs_[c][j] = freq(eng);
      }
    }
  }

  Vector operator()(double t) const {
    Vector out = Vector::Zero(m_);
    if (spec_.mode == NoiseSpec::Mode::none) return out;
    for (Eigen::Index c = 0; c < m_; ++c) {
      double s = 0.0;
      for (double w : freqs_[c]) s += std::sin(w * t);
      out(c) = spec_.amplitude * s;
    }
    return out;
  }

  const std::vector<std::vector<double>>& frequencies() const { return freqs_; }

 private:
  NoiseSpec spec_{NoiseSpec::Mode::none, 1, -1.0, 1.0, 0.0, 0};
  Eigen::Index m_ = 0;
  std::vector<std::vector<double>> freqs_;
};

inline Vector exploration_noise(const NoiseSpec& spec, Eigen::Index m, double t) {
  return ExplorationSignal(spec, m)(t);
}

/// Affine behavior policy u(t, x) = -K x - feedforward(t) + excitation(t).
struct Policy {
  Matrix K;
  std::function<Vector(double)> feedforward;   // empty => zero
  const ExplorationSignal* excitation = nullptr;

  Vector operator()(double t, const Vector& x) const {
    Vector u = -K * x;
    if (feedforward) u -= feedforward(t);
    if (excitation) u += (*excitation)(t);
    return u;
  }
};

struct Trajectory {
  Vector times;    // uniform grid, length floor(horizon/dt)+1
  Matrix states;   // grid_size x n
  Matrix inputs;   // grid_size x m
  int path_id = 0;
  std::uint64_t seed = 0;
};

struct Ensemble {
  std::vector<Trajectory> paths;
  Matrix mean_state;  // grid_size x n
  Matrix mean_input;  // grid_size x m
};

using InitialStateSampler = std::function<Vector(Rng&)>;

inline InitialStateSampler fixed_initial_state(const Vector& x0) {
  return [x0](Rng&) { return x0; };
}

inline InitialStateSampler uniform_box_initial_state(const Vector& lo, const Vector& hi) {
  if (lo.size() != hi.size()) throw std::invalid_argument("uniform box: bad bounds");
  return [lo, hi](Rng& eng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vector x(lo.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = lo(i) + (hi(i) - lo(i)) * unit(eng);
    return x;
  };
}

/// Euler-Maruyama path of dx = (Ax + Bu) dt + (Cx + Du) sqrt(dt) z, z ~ N(0,1),
/// deterministic per seed. Strong order 0.5, weak order 1.
inline Trajectory simulate_path(const SystemDynamics& dyn, const Policy& policy,
                                const Vector& x0, const SamplingPlan& plan,
                                std::uint64_t seed, int path_id = 0) {
  if (x0.size() != dyn.n) throw std::invalid_argument("simulate_path: x0 has wrong size");
  const int G = plan.grid_size();
  const double dt = plan.dt;
  const double sqdt = std::sqrt(dt);
  const bool noisy = dyn.C.cwiseAbs().maxCoeff() > 0.0 || dyn.D.cwiseAbs().maxCoeff() > 0.0;

  Trajectory traj;
  traj.times = Vector::LinSpaced(G, 0.0, (G - 1) * dt);
  traj.states.resize(G, dyn.n);
  traj.inputs.resize(G, dyn.m);
  traj.path_id = path_id;
  traj.seed = seed;

  Rng eng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x = x0;
  for (int g = 0; g < G; ++g) {
    const double t = g * dt;
    const Vector u = policy(t, x);
    traj.states.row(g) = x.transpose();
    traj.inputs.row(g) = u.transpose();
    if (x.norm() > 1e9) throw std::runtime_error("simulate_path: trajectory diverged");
    if (g + 1 < G) {
      Vector next = x + (dyn.A * x + dyn.B * u) * dt;
      if (noisy) {
        const double z = gauss(eng);
        next += (dyn.C * x + dyn.D * u) * (sqdt * z);
      }
      x = next;
    }
  }
  return traj;
}

/// M independent paths with per-path seed streams derived from base_seed;
/// ensemble means are exact arithmetic averages accumulated in path order, so
/// the result does not depend on worker scheduling.
inline Ensemble simulate_ensemble(const SystemDynamics& dyn, const Policy& policy,
                                  const InitialStateSampler& x0_sampler,
                                  const SamplingPlan& plan, int M,
                                  std::uint64_t base_seed) {
  if (M < 1) throw std::invalid_argument("simulate_ensemble: M must be >= 1");
  Ensemble ens;
  ens.paths.resize(M);

  auto run_range = [&](int lo, int hi) {
    for (int i = lo; i < hi; ++i) {
      const std::uint64_t seed = mix_seed(base_seed, static_cast<std::uint64_t>(i));
      Rng init_eng(mix_seed(seed, 0x1d));
      const Vector x0 = x0_sampler(init_eng);
      ens.paths[i] = simulate_path(dyn, policy, x0, plan, seed, i);
    }
  };

  const int workers = std::min<int>(M, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1 || M < 4) {
    run_range(0, M);
  } else {
    std::vector<std::future<void>> futs;
    const int chunk = (M + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const int lo = w * chunk, hi = std::min(M, lo + chunk);
      if (lo < hi) futs.push_back(std::async(std::launch::async, run_range, lo, hi));
    }
    for (auto& f : futs) f.get();
  }

  const int G = plan.grid_size();
  ens.mean_state = Matrix::Zero(G, dyn.n);
  ens.mean_input = Matrix::Zero(G, dyn.m);
  for (const Trajectory& p : ens.paths) {
    ens.mean_state += p.states;
    ens.mean_input += p.inputs;
  }
  ens.mean_state /= static_cast<double>(M);
  ens.mean_input /= static_cast<double>(M);
  return ens;
}

}  // namespace mfsoc
