#pragma once

#include "mfsoc/config.hpp"

namespace mfsoc {

/// u_i = -K x_i - Ks xbar(t): feedback on the agent's own state plus
/// feedforward on a precomputed mean-field path.
struct DecentralizedPolicy {
  Matrix K;
  Matrix Ks;
  MeanFieldPath xbar;

  Vector meanfield_at(double t) const {
    const Vector& ts = xbar.times;
    const Eigen::Index G = ts.size();
    if (G == 1 || t <= ts(0)) return xbar.xbar.row(0).transpose();
    if (t >= ts(G - 1)) return xbar.xbar.row(G - 1).transpose();
    const double dt = ts(1) - ts(0);
    const auto g = static_cast<Eigen::Index>(std::floor((t - ts(0)) / dt));
    const double a = (t - ts(g)) / dt;
    return ((1.0 - a) * xbar.xbar.row(g) + a * xbar.xbar.row(std::min(g + 1, G - 1))).transpose();
  }

  Policy behavior() const {
    return Policy{K, [this](double t) { return Vector(Ks * meanfield_at(t)); }, nullptr};
  }
};

/// Per-agent social cost (1/N) J_soc under a decentralized policy: simulates
/// N agents (coupled only through the average state in the cost integrand),
/// trapezoid-integrates ||x_i - Gamma x_(N)||_Q^2 + ||u_i||_R^2 over the
/// truncated horizon and averages across M_eval Monte Carlo replications.
/// The closed loop being Hurwitz makes the truncation tail exponentially
/// small; it is not compensated.
inline double evaluate_social_cost(const SystemDynamics& dyn, const CostSpec& cost,
                                   const DecentralizedPolicy& policy, int N, double horizon,
                                   int M_eval, std::uint64_t seed,
                                   const InitialStateSampler& x0_sampler, double dt = 1e-3) {
  if (N < 1 || M_eval < 1) throw std::invalid_argument("evaluate_social_cost: bad N or M_eval");
  SamplingPlan plan;
  plan.t1 = 0.0; plan.Ts = dt; plan.T = dt; plan.l = 1; plan.dt = dt; plan.horizon = horizon;
  const int G = plan.grid_size();
  const Policy behavior = policy.behavior();

  double total = 0.0;
  for (int rep = 0; rep < M_eval; ++rep) {
    std::vector<Trajectory> agents(N);
    for (int i = 0; i < N; ++i) {
      const std::uint64_t s =
          mix_seed(seed, static_cast<std::uint64_t>(rep) * static_cast<std::uint64_t>(N) + i);
      Rng init_eng(mix_seed(s, 0x1d));
      agents[i] = simulate_path(dyn, behavior, x0_sampler(init_eng), plan, s, i);
    }
    Matrix xavg = Matrix::Zero(G, dyn.n);
    for (const Trajectory& a : agents) xavg += a.states;
    xavg /= static_cast<double>(N);

    double Jsoc = 0.0;
    for (const Trajectory& a : agents) {
      double prev = 0.0;
      for (int g = 0; g < G; ++g) {
        const Vector dev =
            a.states.row(g).transpose() - cost.Gamma * xavg.row(g).transpose();
        const Vector u = a.inputs.row(g).transpose();
        const double integrand = dev.dot(cost.Q * dev) + u.dot(cost.R * u);
        if (g > 0) Jsoc += 0.5 * dt * (prev + integrand);
        prev = integrand;
      }
    }
    total += Jsoc;
  }
  return total / static_cast<double>(M_eval) / static_cast<double>(N);
}

struct RunReport {
  FeedbackSolution learned_fb;
  FeedforwardSolution learned_ff;
  FeedbackSolution oracle_fb;
  FeedforwardSolution oracle_ff;

  // Consistency metrics of the learned estimates:
  //   sare_residual_norm  = ||R(Phat)||_2
  //   gain_consistency    = ||Khat - K(Phat)||_2
  //   lambda_consistency  = ||Lambdahat - D^T Phat D||_2
  // and distances to the model-based oracle solutions.
  double sare_residual_norm = 0.0;
  double gain_consistency = 0.0;
  double lambda_consistency = 0.0;
  double P_error = 0.0;
  double K_error = 0.0;
  double S_error = 0.0;
  double Ks_error = 0.0;

  bool identification_available = false;
  IdentifiedModel identified;

  std::vector<MeanFieldPath> meanfield_paths;  // [monte-carlo?, identified?]
  double route_discrepancy = -1.0;             // sup-norm; -1 when only one route ran

  double cost_learned = 0.0;
  double cost_oracle = 0.0;

  IterationTrace fb_trace, ff_trace;
  IterationTrace oracle_fb_trace, oracle_ff_trace;
  int effective_l = 0;

  nlohmann::json config_echo;
};

struct StageFailure : std::runtime_error {
  StageFailure(const std::string& stage_, const std::string& what, RunReport partial_)
      : std::runtime_error("stage " + stage_ + ": " + what),
        stage(stage_),
        partial(std::move(partial_)) {}
  std::string stage;
  RunReport partial;
};

inline nlohmann::json report_to_json(const RunReport& rep) {
  using detail::matrix_to_json;
  nlohmann::json j;
  j["learned"] = {{"P", matrix_to_json(rep.learned_fb.P)},
                  {"K", matrix_to_json(rep.learned_fb.K)},
                  {"Lambda", matrix_to_json(rep.learned_fb.Lambda)},
                  {"S", matrix_to_json(rep.learned_ff.S)},
                  {"Ks", matrix_to_json(rep.learned_ff.Ks)},
                  {"Pi", matrix_to_json(rep.learned_ff.Pi)}};
  j["oracle"] = {{"P", matrix_to_json(rep.oracle_fb.P)},
                 {"K", matrix_to_json(rep.oracle_fb.K)},
                 {"Lambda", matrix_to_json(rep.oracle_fb.Lambda)},
                 {"S", matrix_to_json(rep.oracle_ff.S)},
                 {"Ks", matrix_to_json(rep.oracle_ff.Ks)},
                 {"Pi", matrix_to_json(rep.oracle_ff.Pi)}};
  j["errors"] = {{"sare_residual_norm", rep.sare_residual_norm},
                 {"gain_consistency", rep.gain_consistency},
                 {"lambda_consistency", rep.lambda_consistency},
                 {"P_error", rep.P_error},
                 {"K_error", rep.K_error},
                 {"S_error", rep.S_error},
                 {"Ks_error", rep.Ks_error}};
  j["identification"] = {{"available", rep.identification_available}};
  if (rep.identification_available) {
    j["identification"]["Ahat"] = matrix_to_json(rep.identified.Ahat);
    j["identification"]["Bhat"] = matrix_to_json(rep.identified.Bhat);
    j["identification"]["residuals"] = detail::vector_to_json(rep.identified.residuals);
  }
  j["meanfield"] = {{"route_discrepancy", rep.route_discrepancy}};
  j["social_cost"] = {{"learned", rep.cost_learned},
                      {"oracle", rep.cost_oracle},
                      {"relative_gap",
                       rep.cost_oracle != 0.0
                           ? (rep.cost_learned - rep.cost_oracle) / rep.cost_oracle
                           : 0.0}};
  auto trace_json = [](const IterationTrace& tr) {
    nlohmann::json arr = nlohmann::json::array();
    for (const IterationRecord& r : tr.records)
      arr.push_back({{"k", r.k},
                     {"gain", matrix_to_json(r.gain)},
                     {"gain_delta", r.gain_delta},
                     {"residual", r.residual}});
    return arr;
  };
  j["traces"] = {{"feedback", trace_json(rep.fb_trace)},
                 {"feedforward", trace_json(rep.ff_trace)},
                 {"oracle_feedback", trace_json(rep.oracle_fb_trace)},
                 {"oracle_feedforward", trace_json(rep.oracle_ff_trace)}};
  j["effective_l"] = rep.effective_l;
  j["config"] = rep.config_echo;
  return j;
}

/// Executes the end-to-end model-free design: collect one ensemble under the
/// behavior policy u = -K0 x + l(t), build both datasets from it (extending
/// the window count if a rank check fails, up to the horizon capacity), run
/// the two model-free iterations, compute the mean-field state by both
/// routes, then price the learned and oracle decentralized policies on an
/// N-agent validation population. Oracle counterparts are computed up front,
/// for reporting only; after data collection the learned quantities depend
/// on the datasets alone.
inline RunReport run_algorithm1(const ExperimentConfig& cfg, bool write_files = false) {
  RunReport rep;
  rep.config_echo = config_to_json(cfg);
  std::string stage = "validate";
  try {
    const ValidationReport val = cfg.validate();
    if (!val.all_ok()) {
      std::string notes;
      for (const auto& s : val.notes) notes += s + "; ";
      throw std::runtime_error("standing assumptions violated: " + notes);
    }

    stage = "oracle";
    auto [ofb, ofb_trace] = pi_feedback(cfg.dynamics, cfg.cost, cfg.K0, cfg.xi, cfg.max_iter);
    auto [off, off_trace] =
        pi_feedforward(cfg.dynamics, cfg.cost, ofb, cfg.xi, cfg.max_iter);
    rep.oracle_fb = ofb;
    rep.oracle_ff = off;
    rep.oracle_fb_trace = ofb_trace;
    rep.oracle_ff_trace = off_trace;

    stage = "data-collection";
    const ExplorationSignal excitation(cfg.noise, cfg.dynamics.m);
    const Policy behavior{cfg.K0, nullptr, &excitation};
    const Ensemble ens = simulate_ensemble(cfg.dynamics, behavior, cfg.init.sampler(),
                                           cfg.sampling, cfg.M, cfg.seeds.data);
    SamplingPlan plan = cfg.sampling;
    FeedbackDataset ds_fb = build_feedback_dataset(ens, plan);
    FeedforwardDataset ds_ff = build_feedforward_dataset(ens, plan);
    // rank-shortfall policy: extend l within the horizon, then fail
    while (!check_rank_feedback(ds_fb) || !check_rank_feedforward(ds_ff)) {
      const int cap = plan.max_windows();
      if (plan.l >= cap)
        throw std::runtime_error("rank conditions not satisfied at the maximum window count l=" +
                                 std::to_string(plan.l));
      plan.l = std::min(2 * plan.l, cap);
      ds_fb = build_feedback_dataset(ens, plan);
      ds_ff = build_feedforward_dataset(ens, plan);
    }
    rep.effective_l = plan.l;
    if (write_files) {
      const std::filesystem::path dir(cfg.out_dir);
      if (cfg.format == "csv") write_trajectories_csv(dir / "trajectories.csv", ens);
      if (cfg.export_datasets) {
        export_feedback_dataset(dir / "datasets" / "feedback", ds_fb);
        export_feedforward_dataset(dir / "datasets" / "feedforward", ds_ff);
      }
    }

    stage = "feedback-learning";
    auto [lfb, lfb_trace] = irl_feedback_iterate(ds_fb, cfg.K0, cfg.cost, cfg.xi, cfg.max_iter);
    rep.learned_fb = lfb;
    rep.fb_trace = lfb_trace;

    stage = "feedforward-learning";
    const Matrix Ups_hat = lfb.upsilon(cfg.cost);
    const Matrix QG = gamma_weight(cfg.cost).QGamma;
    auto [lff, lff_trace] = irl_feedforward_iterate(ds_ff, lfb.K, Ups_hat, QG, cfg.xi,
                                                    cfg.max_iter, lfb.P);
    rep.learned_ff = lff;
    rep.ff_trace = lff_trace;

    // learner-consistency metrics (oracle layer, reporting only)
    rep.sare_residual_norm = spectral_norm(sare_residual(lfb.P, cfg.dynamics, cfg.cost));
    {
      const Matrix UpsP = upsilon(lfb.P, cfg.dynamics, cfg.cost);
      const Matrix KofP = UpsP.ldlt().solve(cfg.dynamics.B.transpose() * lfb.P +
                                            cfg.dynamics.D.transpose() * lfb.P * cfg.dynamics.C);
      rep.gain_consistency = spectral_norm(lfb.K - KofP);
      rep.lambda_consistency = spectral_norm(
          lfb.Lambda - cfg.dynamics.D.transpose() * lfb.P * cfg.dynamics.D);
    }
    rep.P_error = spectral_norm(lfb.P - ofb.P);
    rep.K_error = spectral_norm(lfb.K - ofb.K);
    rep.S_error = spectral_norm(lff.S - off.S);
    rep.Ks_error = spectral_norm(lff.Ks - off.Ks);

    stage = "meanfield";
    if (cfg.run_monte_carlo_route) {
      rep.meanfield_paths.push_back(mf_monte_carlo(cfg.dynamics, lfb.K, lff.Ks, cfg.xbar0,
                                                   cfg.Ns, cfg.sampling, cfg.seeds.meanfield));
    }
    MeanFieldPath learned_xbar;
    try {
      const Matrix Bhat = identify_B(lff.S, lff.Ks, Ups_hat);
      rep.identified = identify_A(ds_ff, Bhat);
      rep.identification_available = true;
      const Vector grid = Vector::LinSpaced(cfg.sampling.grid_size(), 0.0,
                                            (cfg.sampling.grid_size() - 1) * cfg.sampling.dt);
      learned_xbar = mf_from_identified(rep.identified, lfb.K, lff.Ks, cfg.xbar0, grid);
      rep.meanfield_paths.push_back(learned_xbar);
    } catch (const std::runtime_error&) {
      rep.identification_available = false;  // S near-singular: Monte Carlo route only
    }
    if (rep.meanfield_paths.size() == 2)
      rep.route_discrepancy = sup_distance(rep.meanfield_paths[0], rep.meanfield_paths[1]);
    if (rep.meanfield_paths.empty())
      throw std::runtime_error("no mean-field route available");
    // identification is the default output when available (deterministic)
    if (!rep.identification_available) learned_xbar = rep.meanfield_paths.front();

    stage = "evaluation";
    const Vector grid = Vector::LinSpaced(cfg.sampling.grid_size(), 0.0,
                                          (cfg.sampling.grid_size() - 1) * cfg.sampling.dt);
    IdentifiedModel truth{cfg.dynamics.A, cfg.dynamics.B, Vector::Zero(cfg.dynamics.n)};
    const MeanFieldPath oracle_xbar =
        mf_from_identified(truth, ofb.K, off.Ks, cfg.xbar0, grid);
    const DecentralizedPolicy learned_policy{lfb.K, lff.Ks, learned_xbar};
    const DecentralizedPolicy oracle_policy{ofb.K, off.Ks, oracle_xbar};
    rep.cost_learned =
        evaluate_social_cost(cfg.dynamics, cfg.cost, learned_policy, cfg.N, cfg.sampling.horizon,
                             cfg.M_eval, cfg.seeds.evaluation, cfg.init.sampler(), cfg.sampling.dt);
    rep.cost_oracle =
        evaluate_social_cost(cfg.dynamics, cfg.cost, oracle_policy, cfg.N, cfg.sampling.horizon,
                             cfg.M_eval, cfg.seeds.evaluation, cfg.init.sampler(), cfg.sampling.dt);

    if (write_files) {
      stage = "output";
      const std::filesystem::path dir(cfg.out_dir);
      write_meanfield_csv(dir / "meanfield.csv", rep.meanfield_paths);
      write_convergence_csv(dir / "convergence.csv", rep.fb_trace, rep.ff_trace);
      auto out = detail::open_out(dir / "report.json");
      out << report_to_json(rep).dump(2) << '\n';
    }
    return rep;
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(stage, e.what(), rep);
  }
}

}  // namespace mfsoc
