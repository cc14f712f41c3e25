#include "bgda/optim.hpp"

#include <cmath>
#include <limits>

#include "bgda/seed.hpp"

namespace bgda {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

using Stepper = std::function<void(OptimizerState& s, const std::vector<LossEval>& evals,
                                   const std::vector<double>& g_theta, std::size_t t)>;

RunTrace drive(const SaddleProblem& p, OptimizerState state, const OptimizerConfig& cfg, const RunOptions& opts,
               const Stepper& step) {
  cfg.validate();
  const std::size_t m = p.num_losses();
  if (state.pi.size() != m) throw InvalidInput("initial weights have the wrong length");
  if (!p.domain().contains(state.pi)) throw InvalidInput("initial weights lie outside the weight domain");
  if (!opts.loss_groups.empty() && opts.loss_groups.size() != m) throw InvalidInput("loss groups must be given per loss");

  RunTrace trace;
  trace.num_losses = m;
  trace.has_phi = opts.track_best_response.value_or(p.closed_form_best_response());
  trace.has_l2re = static_cast<bool>(opts.l2re);
  trace.rows.reserve(cfg.iterations + 1);

  const std::size_t T = cfg.iterations;
  for (std::size_t t = 0; t <= T; ++t) {
    const std::vector<LossEval> evals = p.evaluate(state.theta);
    const std::vector<double> g = grad_theta(evals, state.pi);

    TraceRow row;
    row.t = t;
    for (const LossEval& e : evals) row.losses.push_back(e.value);
    row.pi = state.pi.values();
    row.grad_theta_norm = std::sqrt(norm2(g));
    row.stepsize_theta = cfg.gamma_theta_at(t);
    row.chi = kNaN;
    row.grad_phi_norm = row.phi = row.bregman = row.l2re = kNaN;

    const bool finite = all_finite(row.losses) && std::isfinite(row.grad_theta_norm);
    if (finite && !opts.loss_groups.empty()) {
      std::vector<double> gr(g.size(), 0.0), gb(g.size(), 0.0);
      bool has_r = false, has_b = false;
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double>& dst = opts.loss_groups[i] == 0 ? gr : gb;
        (opts.loss_groups[i] == 0 ? has_r : has_b) = true;
        for (std::size_t k = 0; k < g.size(); ++k) dst[k] += evals[i].grad[k];
      }
      const double nb = norm2(gb);
      if (has_r && has_b && nb > 0.0) row.chi = std::sqrt(norm2(gr)) / std::sqrt(nb);
    }
    if (finite && trace.has_phi) {
      const PhiEval phi = phi_and_grad(p, evals);
      row.phi = phi.value;
      row.grad_phi_norm = std::sqrt(norm2(phi.grad));
      row.bregman = divergence(p.generator(), phi.pi_star, state.pi);
    }
    if (finite && trace.has_l2re && (t % std::max<std::size_t>(opts.l2re_every, 1) == 0 || t == T)) {
      row.l2re = opts.l2re(state.theta);
    }
    trace.rows.push_back(std::move(row));
    if (opts.on_row) opts.on_row(trace.rows.back());
    if (!finite) {
      trace.final_state = state;
      throw RunAborted("non-finite loss or gradient at iteration " + std::to_string(t), std::move(trace));
    }
    if (t == T) break;

    step(state, evals, g, t);
    ++state.t;
    if (!all_finite(state.theta)) {
      trace.final_state = state;
      throw RunAborted("non-finite parameters after iteration " + std::to_string(t), std::move(trace));
    }
  }
  trace.final_state = std::move(state);
  return trace;
}

void scale_into(std::vector<double>& out, std::span<const double> v, double s) {
  out.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = s * v[i];
}

// Adaptive theta direction per the configured combo and scaling. Updates the
// moment accumulators in place.
std::vector<double> adaptive_theta_direction(OptimizerState& s, const std::vector<double>& g,
                                             const OptimizerConfig& cfg, std::size_t t) {
  const std::size_t n = g.size();
  if (s.m_theta.size() != n) s.m_theta.assign(n, 0.0);
  const double k = static_cast<double>(t + 1);
  const double gn2 = norm2(g);
  s.v_theta = cfg.alpha2 * s.v_theta + (1.0 - cfg.alpha2) * gn2;
  const double v_hat = s.v_theta / (1.0 - std::pow(cfg.alpha2, k));

  if (cfg.theta_scaling == ThetaScaling::Coordinate) {
    if (s.v_theta_coord.size() != n) s.v_theta_coord.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) s.v_theta_coord[i] = cfg.alpha2 * s.v_theta_coord[i] + (1.0 - cfg.alpha2) * g[i] * g[i];
  }
  const double vc = 1.0 - std::pow(cfg.alpha2, k);

  std::vector<double> dir(n);
  const bool adam = cfg.combo != AdaptCombo::RmspropRmsprop;
  if (adam) {
    for (std::size_t i = 0; i < n; ++i) s.m_theta[i] = cfg.alpha1 * s.m_theta[i] + (1.0 - cfg.alpha1) * g[i];
    const double mc = 1.0 - std::pow(cfg.alpha1, k);
    for (std::size_t i = 0; i < n; ++i) dir[i] = s.m_theta[i] / mc;
  } else {
    dir = g;
  }

  switch (cfg.theta_scaling) {
    case ThetaScaling::None:
      if (adam) break;
      [[fallthrough]];  // plain RMSProp needs its history to mean anything
    case ThetaScaling::Norm: {
      const double inv = 1.0 / (std::sqrt(v_hat) + cfg.eps_adapt);
      for (double& x : dir) x *= inv;
      break;
    }
    case ThetaScaling::Coordinate:
      for (std::size_t i = 0; i < n; ++i) dir[i] /= std::sqrt(s.v_theta_coord[i] / vc) + cfg.eps_adapt;
      break;
  }
  return dir;
}

void descend(OptimizerState& s, const std::vector<double>& dir, double gamma) {
  for (std::size_t i = 0; i < dir.size(); ++i) s.theta[i] -= gamma * dir[i];
}

}  // namespace

void OptimizerConfig::validate() const {
  if (!(gamma_theta > 0.0) || !(gamma_pi > 0.0)) throw InvalidInput("stepsizes must be positive");
  if (schedule == Schedule::Linear && !(gamma_theta_end > 0.0)) throw InvalidInput("final stepsize must be positive");
  for (double c : {alpha1, alpha2, beta}) {
    if (!(c >= 0.0 && c < 1.0)) throw InvalidInput("smoothing coefficients must lie in [0, 1)");
  }
  if (!(eps_adapt > 0.0)) throw InvalidInput("eps_adapt must be positive");
  if (batch_size == 0) throw InvalidInput("batch size must be at least 1");
}

double OptimizerConfig::gamma_theta_at(std::size_t t) const {
  if (schedule == Schedule::Constant) return gamma_theta;
  return linear_decay(gamma_theta, gamma_theta_end, std::min(t, iterations), iterations);
}

OptimizerState OptimizerState::initial(std::vector<double> theta, WeightVector pi) {
  OptimizerState s;
  s.theta = std::move(theta);
  s.pi = std::move(pi);
  s.m_theta.assign(s.theta.size(), 0.0);
  s.m_pi.assign(s.pi.size(), 0.0);
  return s;
}

RunTrace bgda_run(const SaddleProblem& p, OptimizerState init, const OptimizerConfig& cfg, const RunOptions& opts) {
  std::vector<double> scaled;
  return drive(p, std::move(init), cfg, opts,
               [&](OptimizerState& s, const std::vector<LossEval>& evals, const std::vector<double>& g, std::size_t t) {
                 const std::vector<double> gp = grad_pi(p, evals, s.pi);
                 descend(s, g, cfg.gamma_theta_at(t));
                 scale_into(scaled, gp, cfg.gamma_pi);
                 s.pi = prox(p.domain(), s.pi, scaled);
               });
}

RunTrace adaptive_bgda_run(const SaddleProblem& p, OptimizerState init, const OptimizerConfig& cfg,
                           const RunOptions& opts) {
  std::vector<double> scaled;
  return drive(p, std::move(init), cfg, opts,
               [&](OptimizerState& s, const std::vector<LossEval>& evals, const std::vector<double>& g, std::size_t t) {
                 const std::vector<double> gp = grad_pi(p, evals, s.pi);
                 const double k = static_cast<double>(t + 1);
                 s.v_pi = cfg.beta * s.v_pi + (1.0 - cfg.beta) * norm2(gp);
                 const double denom = std::sqrt(s.v_pi / (1.0 - std::pow(cfg.beta, k))) + cfg.eps_adapt;
                 std::vector<double> dir_pi = gp;
                 if (cfg.combo == AdaptCombo::AdamAdam) {
                   if (s.m_pi.size() != gp.size()) s.m_pi.assign(gp.size(), 0.0);
                   const double mc = 1.0 - std::pow(cfg.alpha1, k);
                   for (std::size_t i = 0; i < gp.size(); ++i) {
                     s.m_pi[i] = cfg.alpha1 * s.m_pi[i] + (1.0 - cfg.alpha1) * gp[i];
                     dir_pi[i] = s.m_pi[i] / mc;
                   }
                 }
                 descend(s, adaptive_theta_direction(s, g, cfg, t), cfg.gamma_theta_at(t));
                 scale_into(scaled, dir_pi, cfg.gamma_pi / denom);
                 s.pi = prox(p.domain(), s.pi, scaled);
               });
}

RunTrace fixed_weight_run(const SaddleProblem& p, OptimizerState init, const OptimizerConfig& cfg,
                          const RunOptions& opts) {
  return drive(p, std::move(init), cfg, opts,
               [&](OptimizerState& s, const std::vector<LossEval>&, const std::vector<double>& g, std::size_t t) {
                 descend(s, adaptive_theta_direction(s, g, cfg, t), cfg.gamma_theta_at(t));
               });
}

RunTrace sbgda_run(const SaddleProblem& p, const BatchOracle& batch, OptimizerState init, const OptimizerConfig& cfg,
                   const RunOptions& opts) {
  if (!batch) throw InvalidInput("sbgda needs a batch oracle");
  std::mt19937_64 rng(derive_seed(cfg.seed, streams::kBatch));
  std::vector<double> scaled;
  return drive(p, std::move(init), cfg, opts,
               [&](OptimizerState& s, const std::vector<LossEval>& evals, const std::vector<double>&, std::size_t t) {
                 const std::vector<double> gp = grad_pi(p, evals, s.pi);
                 const std::vector<LossEval> sample = batch(s.theta, cfg.batch_size, rng);
                 if (sample.size() != p.num_losses()) throw InvalidInput("batch oracle returned the wrong number of losses");
                 descend(s, grad_theta(sample, s.pi), cfg.gamma_theta_at(t));
                 scale_into(scaled, gp, cfg.gamma_pi);
                 s.pi = prox(p.domain(), s.pi, scaled);
               });
}

Stepsizes theoretical_stepsizes(const SmoothnessInfo& info, StepsizeMode mode) {
  if (!(info.L > 0.0) || !(info.lambda > 0.0)) throw InvalidInput("smoothness constants must be positive");
  const double c = std::sqrt(43.0 / (92.0 * 33792.0));
  const double kappa = info.kappa();
  if (mode == StepsizeMode::General) {
    return {info.lambda / (4.0 * info.L * info.L), c / (std::pow(kappa, 4) * info.L)};
  }
  if (!(info.L_pi > 0.0)) throw InvalidInput("restricted stepsizes need L_pi");
  const double kp = info.kappa_pi();
  return {info.lambda / (4.0 * info.L_pi * info.L_pi), c / (kp * kp * kp * kappa * info.L)};
}

double prose_gamma_theta(const SmoothnessInfo& info) {
  return 1.0 / (184.0 * std::pow(info.kappa(), 4) * info.L);
}

double linear_decay(double g0, double g_end, std::size_t t, std::size_t T) {
  if (t > T) throw InvalidInput("linear_decay: t exceeds T");
  if (T == 0) return g0;
  return g0 + (g_end - g0) * static_cast<double>(t) / static_cast<double>(T);
}

std::string to_string(AdaptCombo c) {
  switch (c) {
    case AdaptCombo::AdamRmsprop: return "adam+rmsprop";
    case AdaptCombo::AdamAdam: return "adam+adam";
    case AdaptCombo::RmspropRmsprop: return "rmsprop+rmsprop";
  }
  return "?";
}

std::string to_string(ThetaScaling s) {
  switch (s) {
    case ThetaScaling::None: return "none";
    case ThetaScaling::Norm: return "norm";
    case ThetaScaling::Coordinate: return "coordinate";
  }
  return "?";
}

std::string to_string(Schedule s) { return s == Schedule::Constant ? "constant" : "linear"; }

}  // namespace bgda
