// Command-line front end: validate configs, solve the model-based oracle,
// run the model-free pipeline, compute mean-field states and social costs.

#include "mfsoc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitUsage = 64;

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string format;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

mfsoc::ExperimentConfig load_with_overrides(const CommonOpts& opts, bool builtin_paper) {
  mfsoc::ExperimentConfig cfg =
      builtin_paper ? mfsoc::paper_example_config() : mfsoc::load_config(opts.config_path);
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (!opts.format.empty()) cfg.format = opts.format;
  if (opts.seed_set) {
    cfg.seeds.data = opts.seed;
    cfg.seeds.meanfield = opts.seed + 1;
    cfg.seeds.evaluation = opts.seed + 2;
    cfg.noise.seed = opts.seed + 3;
  }
  return cfg;
}

void print_matrix(const char* name, const mfsoc::Matrix& M) {
  std::cout << name << " =\n" << M << "\n";
}

int cmd_validate(const CommonOpts& opts) {
  const auto cfg = mfsoc::load_config(opts.config_path);
  const auto rep = cfg.validate();
  std::cout << "Q >= 0:              " << (rep.q_psd ? "ok" : "FAIL") << "\n";
  std::cout << "R > 0:               " << (rep.r_pd ? "ok" : "FAIL") << "\n";
  if (rep.ms_stabilizer_ok.has_value())
    std::cout << "K0 ms-stabilizer:    " << (*rep.ms_stabilizer_ok ? "ok" : "FAIL") << "\n";
  for (const auto& note : rep.notes) std::cout << "note: " << note << "\n";
  return rep.all_ok() ? kExitOk : kExitValidation;
}

int require_valid(const mfsoc::ExperimentConfig& cfg) {
  const auto rep = cfg.validate();
  if (!rep.all_ok()) {
    for (const auto& note : rep.notes) std::cerr << "invalid config: " << note << "\n";
    return kExitValidation;
  }
  return kExitOk;
}

int cmd_oracle(const CommonOpts& opts, bool builtin_paper = false) {
  const auto cfg = load_with_overrides(opts, builtin_paper);
  if (int rc = require_valid(cfg)) return rc;
  auto [fb, fb_trace] = mfsoc::pi_feedback(cfg.dynamics, cfg.cost, cfg.K0, cfg.xi, cfg.max_iter);
  auto [ff, ff_trace] = mfsoc::pi_feedforward(cfg.dynamics, cfg.cost, fb, cfg.xi, cfg.max_iter);
  print_matrix("P", fb.P);
  print_matrix("K", fb.K);
  print_matrix("Lambda (D^T P D)", fb.Lambda);
  print_matrix("S", ff.S);
  print_matrix("Ks", ff.Ks);
  std::cout << "feedback iterations:    " << fb_trace.iterations() << "\n"
            << "feedforward iterations: " << ff_trace.iterations() << "\n";

  nlohmann::json j;
  j["oracle"] = {{"P", mfsoc::detail::matrix_to_json(fb.P)},
                 {"K", mfsoc::detail::matrix_to_json(fb.K)},
                 {"Lambda", mfsoc::detail::matrix_to_json(fb.Lambda)},
                 {"S", mfsoc::detail::matrix_to_json(ff.S)},
                 {"Ks", mfsoc::detail::matrix_to_json(ff.Ks)},
                 {"Pi", mfsoc::detail::matrix_to_json(ff.Pi)}};
  j["residuals"] = {
      {"sare", mfsoc::spectral_norm(mfsoc::sare_residual(fb.P, cfg.dynamics, cfg.cost))},
      {"indefinite_are",
       mfsoc::spectral_norm(mfsoc::indefinite_are_residual(ff.S, fb, cfg.dynamics, cfg.cost))}};
  j["config"] = mfsoc::config_to_json(cfg);
  auto out = mfsoc::detail::open_out(std::filesystem::path(cfg.out_dir) / "oracle.json");
  out << j.dump(2) << '\n';
  std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "oracle.json").string() << "\n";
  return kExitOk;
}

int cmd_learn(const CommonOpts& opts, bool builtin_paper) {
  const auto cfg = load_with_overrides(opts, builtin_paper);
  const auto rep = mfsoc::run_algorithm1(cfg, /*write_files=*/true);
  print_matrix("P_hat", rep.learned_fb.P);
  print_matrix("K_hat", rep.learned_fb.K);
  print_matrix("Lambda_hat", rep.learned_fb.Lambda);
  print_matrix("S_hat", rep.learned_ff.S);
  print_matrix("Ks_hat", rep.learned_ff.Ks);
  if (rep.identification_available) {
    print_matrix("A_hat", rep.identified.Ahat);
    print_matrix("B_hat", rep.identified.Bhat);
  }
  std::cout << "||R(P_hat)||_2          = " << rep.sare_residual_norm << "\n"
            << "||K_hat - K(P_hat)||_2  = " << rep.gain_consistency << "\n"
            << "|Lambda_hat - D(P_hat)| = " << rep.lambda_consistency << "\n"
            << "feedback iterations     = " << rep.fb_trace.iterations() << "\n"
            << "feedforward iterations  = " << rep.ff_trace.iterations() << "\n"
            << "mean-field route gap    = " << rep.route_discrepancy << "\n"
            << "per-agent cost learned  = " << rep.cost_learned << "\n"
            << "per-agent cost oracle   = " << rep.cost_oracle << "\n";
  std::cout << "wrote report to " << cfg.out_dir << "/report.json\n";
  return kExitOk;
}

int cmd_meanfield(const CommonOpts& opts) {
  const auto cfg = load_with_overrides(opts, false);
  if (int rc = require_valid(cfg)) return rc;
  auto [fb, fb_trace] = mfsoc::pi_feedback(cfg.dynamics, cfg.cost, cfg.K0, cfg.xi, cfg.max_iter);
  auto [ff, ff_trace] = mfsoc::pi_feedforward(cfg.dynamics, cfg.cost, fb, cfg.xi, cfg.max_iter);
  std::vector<mfsoc::MeanFieldPath> paths;
  paths.push_back(mfsoc::mf_monte_carlo(cfg.dynamics, fb.K, ff.Ks, cfg.xbar0, cfg.Ns,
                                        cfg.sampling, cfg.seeds.meanfield));
  const mfsoc::Vector grid = mfsoc::Vector::LinSpaced(
      cfg.sampling.grid_size(), 0.0, (cfg.sampling.grid_size() - 1) * cfg.sampling.dt);
  mfsoc::IdentifiedModel truth{cfg.dynamics.A, cfg.dynamics.B,
                               mfsoc::Vector::Zero(cfg.dynamics.n)};
  paths.push_back(mfsoc::mf_from_identified(truth, fb.K, ff.Ks, cfg.xbar0, grid));
  const double gap = mfsoc::sup_distance(paths[0], paths[1]);
  mfsoc::write_meanfield_csv(std::filesystem::path(cfg.out_dir) / "meanfield.csv", paths);
  std::cout << "route sup-distance = " << gap << "\n"
            << "wrote " << cfg.out_dir << "/meanfield.csv\n";
  return kExitOk;
}

int cmd_cost(const CommonOpts& opts) {
  const auto cfg = load_with_overrides(opts, false);
  if (int rc = require_valid(cfg)) return rc;
  auto [fb, fb_trace] = mfsoc::pi_feedback(cfg.dynamics, cfg.cost, cfg.K0, cfg.xi, cfg.max_iter);
  auto [ff, ff_trace] = mfsoc::pi_feedforward(cfg.dynamics, cfg.cost, fb, cfg.xi, cfg.max_iter);
  const mfsoc::Vector grid = mfsoc::Vector::LinSpaced(
      cfg.sampling.grid_size(), 0.0, (cfg.sampling.grid_size() - 1) * cfg.sampling.dt);
  mfsoc::IdentifiedModel truth{cfg.dynamics.A, cfg.dynamics.B,
                               mfsoc::Vector::Zero(cfg.dynamics.n)};
  const mfsoc::DecentralizedPolicy policy{
      fb.K, ff.Ks, mfsoc::mf_from_identified(truth, fb.K, ff.Ks, cfg.xbar0, grid)};
  const double cost = mfsoc::evaluate_social_cost(cfg.dynamics, cfg.cost, policy, cfg.N,
                                                  cfg.sampling.horizon, cfg.M_eval,
                                                  cfg.seeds.evaluation, cfg.init.sampler(),
                                                  cfg.sampling.dt);
  std::cout << "per-agent social cost under the oracle decentralized policy = " << cost << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven mean-field LQG social optimization"};
  app.require_subcommand(1);

  CommonOpts opts;
  auto* seed_opt = app.add_option("--seed", opts.seed, "override all RNG seeds");
  app.add_option("--out-dir", opts.out_dir, "output directory override");
  app.add_option("--format", opts.format, "trajectory output format")
      ->check(CLI::IsMember({"csv", "json"}));

  auto* validate = app.add_subcommand("validate", "check a config against the standing assumptions");
  validate->add_option("config", opts.config_path, "config file (json)")->required();

  auto* oracle = app.add_subcommand("oracle", "model-based solutions only (no datasets)");
  oracle->add_option("config", opts.config_path, "config file (json)")->required();

  auto* learn = app.add_subcommand("learn", "run the full model-free design from a config");
  learn->add_option("config", opts.config_path, "config file (json)")->required();

  auto* meanfield = app.add_subcommand("meanfield", "mean-field state by both routes (oracle gains)");
  meanfield->add_option("config", opts.config_path, "config file (json)")->required();

  auto* cost = app.add_subcommand("cost", "social cost of the oracle decentralized policy");
  cost->add_option("config", opts.config_path, "config file (json)")->required();

  auto* repro = app.add_subcommand("reproduce-paper", "run the built-in example experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  opts.seed_set = seed_opt->count() > 0;

  try {
    if (validate->parsed()) return cmd_validate(opts);
    if (oracle->parsed()) return cmd_oracle(opts);
    if (learn->parsed()) return cmd_learn(opts, false);
    if (meanfield->parsed()) return cmd_meanfield(opts);
    if (cost->parsed()) return cmd_cost(opts);
    if (repro->parsed()) {
      if (opts.out_dir.empty()) opts.out_dir = "out";
      return cmd_learn(opts, true);
    }
  } catch (const mfsoc::StageFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.stage == "validate" ? kExitValidation : kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
