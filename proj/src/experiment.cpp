#include "bgda/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <mutex>
#include <random>

#include "bgda/pinn.hpp"
#include "bgda/seed.hpp"
#include "bgda/synthetic.hpp"
#include "bgda/trace_io.hpp"

namespace bgda {

namespace {

std::string join(const std::string& dir, const std::string& file) {
  if (dir.empty()) return file;
  return (std::filesystem::path(dir) / file).string();
}

std::function<void(const TraceRow&)> progress(LogLevel log, std::size_t total) {
  if (log == LogLevel::Quiet) return nullptr;
  const std::size_t every = log == LogLevel::Debug ? 100 : 1000;
  return [every, total](const TraceRow& r) {
    if (r.t % every != 0 && r.t != total) return;
    double sum = 0.0;
    for (double v : r.losses) sum += v;
    std::fprintf(stderr, "[bgda] t=%zu loss=%.6g grad=%.3g chi=%.3g\n", r.t, sum, r.grad_theta_norm, r.chi);
  };
}

// Collocation set that is redrawn every `every` evaluations. Each optimizer
// iteration evaluates the losses exactly once, so this is per-iteration.
class ResamplingLosses {
 public:
  ResamplingLosses(const ExperimentConfig& cfg, pinn::PdeSpec spec, std::vector<std::size_t> widths,
                   ad::Activation act, pinn::EvalOptions eval)
      : cfg_(cfg), spec_(std::move(spec)), widths_(std::move(widths)), act_(act), eval_(eval) {
    rebuild(0);
  }

  std::vector<LossEval> evaluate(std::span<const double> theta) {
    std::lock_guard<std::mutex> lock(mu_);
    if (cfg_.resample_every > 0 && calls_ > 0 && calls_ % cfg_.resample_every == 0) {
      rebuild(calls_ / cfg_.resample_every);
    }
    ++calls_;
    return losses_->evaluate(theta);
  }

  const pinn::PinnLosses& current() const { return *losses_; }

 private:
  void rebuild(std::size_t epoch) {
    const std::uint64_t seed = epoch == 0 ? cfg_.seed : derive_seed(cfg_.seed, 1000 + epoch);
    losses_ = std::make_unique<pinn::PinnLosses>(
        spec_, pinn::sample_collocation(spec_, cfg_.n_interior, cfg_.n_boundary, seed), widths_, act_, eval_);
  }

  const ExperimentConfig& cfg_;
  pinn::PdeSpec spec_;
  std::vector<std::size_t> widths_;
  ad::Activation act_;
  pinn::EvalOptions eval_;
  std::unique_ptr<pinn::PinnLosses> losses_;
  std::size_t calls_ = 0;
  std::mutex mu_;
};

RunTrace run_optimizer(const ExperimentConfig& cfg, const SaddleProblem& p, OptimizerState init,
                       const OptimizerConfig& oc, const RunOptions& ro, const BatchOracle& batch) {
  switch (cfg.optimizer) {
    case OptimizerKind::Bgda: return bgda_run(p, std::move(init), oc, ro);
    case OptimizerKind::Adaptive: return adaptive_bgda_run(p, std::move(init), oc, ro);
    case OptimizerKind::FixedWeightBaseline: return fixed_weight_run(p, std::move(init), oc, ro);
    case OptimizerKind::Sbgda: return sbgda_run(p, batch, std::move(init), oc, ro);
  }
  throw ConfigError("unknown optimizer");
}

std::optional<WeightDomain> domain_for(const ExperimentConfig& cfg, std::size_t m) {
  if (cfg.radius > 0.0) return WeightDomain::ball_restricted(m, cfg.radius);
  return std::nullopt;
}

struct Outcome {
  RunTrace trace;
  SummaryOptions summary_opts;
  nlohmann::json extra;
};

Outcome run_pinn(const ExperimentConfig& cfg, LogLevel log) {
  pinn::PdeSpec spec = pinn::builtin_problem(cfg.problem);
  if (cfg.stepsizes == StepsizeSource::Theoretical) {
    throw ConfigError("theoretical stepsizes need known smoothness constants (synthetic experiments only)");
  }
  std::vector<std::size_t> widths = {spec.dim()};
  widths.insert(widths.end(), cfg.hidden.begin(), cfg.hidden.end());
  widths.push_back(1);
  const ad::Activation act = cfg.activation == "sin" ? ad::Activation::Sin : ad::Activation::Tanh;
  const ad::Mlp init_net = ad::Mlp::glorot(widths, act, derive_seed(cfg.seed, streams::kNetwork));

  pinn::EvalOptions eval;
  eval.chunk = cfg.chunk;
  eval.workers = cfg.workers;
  auto losses = std::make_shared<ResamplingLosses>(cfg, spec, widths, act, eval);
  const std::size_t m = spec.num_losses();
  SaddleProblem problem(
      m, [losses](std::span<const double> theta) { return losses->evaluate(theta); }, cfg.lambda,
      WeightVector::uniform(m), Generator::NegativeEntropy, domain_for(cfg, m));

  const std::vector<double> grid = pinn::evaluation_grid(spec.box, cfg.l2re_grid);
  const std::vector<double> truth = pinn::exact_values(spec, grid);

  RunOptions ro;
  ro.loss_groups = spec.loss_groups();
  ro.l2re_every = cfg.l2re_every;
  ro.l2re = [&](std::span<const double> theta) {
    ad::Mlp net = init_net;
    net.set_params(theta);
    return pinn::l2re(pinn::predict(net, grid), truth);
  };
  ro.on_row = progress(log, cfg.opt.iterations);

  OptimizerConfig oc = cfg.opt;
  oc.seed = cfg.seed;
  BatchOracle batch;
  if (cfg.optimizer == OptimizerKind::Sbgda) {
    batch = [losses](std::span<const double> theta, std::size_t b, std::mt19937_64& rng) {
      return pinn::PinnBatchOracle(losses->current())(theta, b, rng);
    };
  }
  OptimizerState init = OptimizerState::initial(std::vector<double>(init_net.params().begin(), init_net.params().end()),
                                                WeightVector::uniform(m));
  Outcome out{run_optimizer(cfg, problem, std::move(init), oc, ro, batch), {}, {}};
  nlohmann::json names = nlohmann::json::array();
  for (const pinn::Operator& op : spec.operators) names.push_back(op.name);
  out.extra["loss_names"] = names;
  out.extra["parameters"] = init_net.num_params();
  return out;
}

Outcome run_synthetic(const ExperimentConfig& cfg, LogLevel log) {
  synthetic::QuadraticOptions qo;
  qo.heterogeneity = cfg.heterogeneity;
  const synthetic::QuadraticInstance inst = synthetic::make_quadratic(
      cfg.seed, cfg.dim, cfg.losses, cfg.lambda, {cfg.spectrum_lo, cfg.spectrum_hi}, qo);
  const std::size_t m = cfg.losses;
  auto model = inst.model;
  SaddleProblem problem(
      m, [model](std::span<const double> theta) { return model->evaluate(theta); }, cfg.lambda,
      WeightVector::uniform(m), Generator::NegativeEntropy, domain_for(cfg, m));

  SmoothnessInfo info = inst.info;
  StepsizeMode mode = StepsizeMode::General;
  nlohmann::json extra;
  if (cfg.radius > 0.0) {
    const synthetic::RestrictedSmoothness rs = synthetic::restricted_smoothness(cfg.lambda, m, cfg.radius);
    info = SmoothnessInfo::make(info.L, cfg.lambda, rs.L_pi);
    mode = StepsizeMode::Restricted;
    extra["L_pi"] = rs.L_pi;
    extra["radius_clipped"] = rs.clipped;
  }
  OptimizerConfig oc = cfg.opt;
  oc.seed = cfg.seed;
  if (cfg.stepsizes == StepsizeSource::Theoretical) {
    const Stepsizes st = theoretical_stepsizes(info, mode);
    oc.gamma_pi = st.gamma_pi;
    oc.gamma_theta = st.gamma_theta;
    oc.schedule = Schedule::Constant;
  }
  extra["L"] = info.L;
  extra["kappa"] = info.kappa();
  extra["gamma_pi"] = oc.gamma_pi;
  extra["gamma_theta"] = oc.gamma_theta;

  BatchOracle batch;
  if (cfg.optimizer == OptimizerKind::Sbgda) batch = synthetic::GaussianNoiseOracle(model, cfg.noise_sigma);
  RunOptions ro;
  ro.on_row = progress(log, cfg.opt.iterations);
  OptimizerState init = OptimizerState::initial(model->theta0, WeightVector::uniform(m));
  Outcome out{run_optimizer(cfg, problem, std::move(init), oc, ro, batch), {}, extra};
  out.summary_opts.contraction_info = info;
  return out;
}

double max_abs(double a, double b) { return std::max(a, std::abs(b)); }

}  // namespace

LogLevel log_level_from_env() {
  const char* v = std::getenv("BGDA_LOG");
  if (!v) return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet" || s == "0") return LogLevel::Quiet;
  if (s == "debug" || s == "2") return LogLevel::Debug;
  return LogLevel::Info;
}

nlohmann::json prox_selftest(std::uint64_t seed, bool& passed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g1(1.0, 1.0);
  std::normal_distribution<double> n01;
  auto random_pi = [&](std::size_t m) {
    std::vector<double> w(m);
    for (double& v : w) v = g1(rng) + 1e-6;
    return WeightVector::normalized(w);
  };
  double pinsker = 0.0, three_kl = 0.0, three_euc = 0.0, prox_sum = 0.0, prox_kkt = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const std::size_t m = 2 + static_cast<std::size_t>(it % 4);
    const WeightVector p = random_pi(m), q = random_pi(m), r = random_pi(m);
    double d2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) d2 += (p[i] - q[i]) * (p[i] - q[i]);
    pinsker = std::max(pinsker, 0.5 * d2 - divergence(Generator::NegativeEntropy, p, q));
    three_kl = max_abs(three_kl, three_point_residual(Generator::NegativeEntropy, p, q, r));
    three_euc = max_abs(three_euc, three_point_residual(Generator::SquaredEuclidean, p, q, r));
    std::vector<double> g(m);
    for (double& v : g) v = n01(rng);
    const WeightVector out = prox_simplex_kl(q, g);
    double s = 0.0;
    for (double v : out.values()) s += v;
    prox_sum = max_abs(prox_sum, s - 1.0);
    // Optimality: log(out_i / q_i) - g_i is the same for every i.
    const double c0 = std::log(out[0] / q[0]) - g[0];
    for (std::size_t i = 1; i < m; ++i) prox_kkt = max_abs(prox_kkt, std::log(out[i] / q[i]) - g[i] - c0);
  }
  nlohmann::json checks = nlohmann::json::array();
  auto add = [&](const char* name, double worst, double tol) {
    const bool ok = worst <= tol;
    passed = passed && ok;
    checks.push_back({{"name", name}, {"worst", worst}, {"tolerance", tol}, {"passed", ok}});
  };
  passed = true;
  add("strong_convexity", pinsker, 0.0);
  add("three_point_kl", three_kl, 1e-10);
  add("three_point_euclidean", three_euc, 1e-12);
  add("prox_unit_sum", prox_sum, 1e-12);
  add("prox_optimality", prox_kkt, 1e-9);
  return {{"schema", kSummarySchema}, {"kind", "prox-selftest"}, {"checks", checks}, {"passed", passed}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir, LogLevel log) {
  ExperimentResult res;
  res.summary_path = join(out_dir, cfg.summary_file);
  if (cfg.kind == ExperimentKind::ProxSelftest) {
    bool passed = false;
    res.summary = prox_selftest(cfg.seed, passed);
    write_file_atomic(res.summary_path, res.summary.dump(2) + "\n");
    if (!passed) throw NumericError("prox self-test failed");
    return res;
  }

  res.trace_path = join(out_dir, cfg.trace_file);
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = cfg.kind == ExperimentKind::Pinn ? run_pinn(cfg, log) : run_synthetic(cfg, log);
  } catch (const RunAborted& e) {
    write_file_atomic(res.trace_path, format_trace(e.trace()));
    throw;
  }
  res.trace = std::move(out.trace);
  write_file_atomic(res.trace_path, format_trace(res.trace));
  if (log != LogLevel::Quiet) {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::fprintf(stderr, "[bgda] %zu iterations in %.1f s\n", res.trace.rows.size() - 1, secs);
  }

  res.summary = summarize(res.trace, out.summary_opts);
  res.summary["experiment"] = {{"kind", to_string(cfg.kind)},
                               {"problem", cfg.kind == ExperimentKind::Pinn ? cfg.problem : "quadratic"},
                               {"optimizer", to_string(cfg.optimizer)},
                               {"combo", to_string(cfg.opt.combo)},
                               {"seed", cfg.seed},
                               {"lambda", cfg.lambda}};
  for (auto& [k, v] : out.extra.items()) res.summary["experiment"][k] = v;
  write_file_atomic(res.summary_path, res.summary.dump(2) + "\n");
  return res;
}

}  // namespace bgda
