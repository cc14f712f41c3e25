// Acceptance checks, one line per criterion:
//
//   bgda_acceptance                 run all criteria
//   bgda_acceptance --criterion 5   run one
//
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bgda/autodiff/mlp.hpp"
#include "bgda/bregman.hpp"
#include "bgda/config.hpp"
#include "bgda/experiment.hpp"
#include "bgda/optim.hpp"
#include "bgda/saddle.hpp"
#include "bgda/synthetic.hpp"
#include "bgda/trace_io.hpp"
#include "oracles.hpp"

using namespace bgda;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path workdir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "bgda_acceptance" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<double> random_theta(const synthetic::QuadraticMinimax& q, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::vector<double> th = q.theta0;
  for (double& v : th) v += n01(rng);
  return th;
}

// Losses used in several PINN criteria: 1D Poisson, default config, two
// boundary points.
ExperimentConfig poisson_config(std::size_t iterations) {
  ExperimentConfig cfg;
  cfg.kind = ExperimentKind::Pinn;
  cfg.problem = "poisson1d";
  cfg.optimizer = OptimizerKind::Adaptive;
  cfg.n_boundary = 2;
  cfg.opt.iterations = iterations;
  cfg.l2re_every = 1000;
  return cfg;
}

// The regularization weight for the paired conflict-ratio runs.
constexpr double kChiLambda = 1e-4;

Outcome prox_correctness() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const std::size_t m = 2 + c % 2;
    const auto inst = synthetic::make_quadratic(c, 4, m, 0.5, {0.5, 2.0});
    const WeightVector pt(oracle::random_simplex(m, rng, 1e-3));
    const std::vector<double> gp = grad_pi(inst.problem, random_theta(*inst.model, rng), pt);
    std::vector<double> g(m);
    for (std::size_t i = 0; i < m; ++i) g[i] = 0.1 * gp[i];
    const WeightVector out = prox_simplex_kl(pt, g);
    const std::vector<double> ref = oracle::simplex_argmin(m, [&](const std::vector<double>& p) {
      double s = oracle::kl(p, pt.span());
      for (std::size_t i = 0; i < m; ++i) s -= g[i] * p[i];
      return s;
    });
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(out[i] - ref[i]));
  }
  return {worst <= 1e-5, fmt("100 cases, max deviation %.2e (tol 1e-05)", worst)};
}

Outcome best_response_correctness() {
  std::mt19937_64 rng(202);
  double worst_gain = -INFINITY, worst_gap = 0.0;
  for (int k = 0; k < 20; ++k) {
    const std::size_t m = 2 + k % 3;
    const auto inst = synthetic::make_quadratic(1000 + k, 6, m, 0.3 + 0.1 * k, {-1.0, 2.0});
    const std::vector<double> th = random_theta(*inst.model, rng);
    const auto evals = inst.problem.evaluate(th);
    const WeightVector star = best_response(inst.problem, evals);
    const double best = objective(inst.problem, evals, star);
    for (int s = 0; s < 1000; ++s) {
      const WeightVector pi(oracle::random_simplex(m, rng, 1e-9));
      worst_gain = std::max(worst_gain, objective(inst.problem, evals, pi) - best);
    }
    BestResponseOptions num;
    num.force_numerical = true;
    const WeightVector fixed = best_response(inst.problem, evals, num);
    for (std::size_t i = 0; i < m; ++i) worst_gap = std::max(worst_gap, std::abs(fixed[i] - star[i]));
  }
  const bool ok = worst_gain <= 1e-12 && worst_gap <= 1e-8;
  return {ok, fmt("20 instances x 1000 samples, best sampled gain %.2e, closed form vs fixed point %.2e (tol 1e-08)",
                  worst_gain, worst_gap)};
}

Outcome concavity_inequality() {
  std::mt19937_64 rng(303);
  double min_slack = INFINITY, min_monotone = INFINITY;
  int violations = 0;
  for (int k = 0; k < 5; ++k) {
    const std::size_t m = 2 + k % 3;
    const auto inst = synthetic::make_quadratic(2000 + k, 5, m, 0.5, {-1.0, 2.0});
    for (int s = 0; s < 2000; ++s) {
      const std::vector<double> th = random_theta(*inst.model, rng);
      const auto evals = inst.problem.evaluate(th);
      const WeightVector p1(oracle::random_simplex(m, rng, 1e-4)), p2(oracle::random_simplex(m, rng, 1e-4));
      const std::vector<double> g2 = grad_pi(inst.problem, evals, p2);
      double inner = 0.0;
      for (std::size_t i = 0; i < m; ++i) inner += g2[i] * (p1[i] - p2[i]);
      const double sym =
          divergence(Generator::NegativeEntropy, p1, p2) + divergence(Generator::NegativeEntropy, p2, p1);
      const double rhs = objective(inst.problem, evals, p2) + inner - 0.5 * inst.problem.lambda() * sym;
      const double slack = rhs - objective(inst.problem, evals, p1);
      min_slack = std::min(min_slack, slack);
      if (slack < -1e-9) ++violations;
      // The symmetrized (monotone) form, for reference.
      const std::vector<double> g1 = grad_pi(inst.problem, evals, p1);
      double mono = 0.0;
      for (std::size_t i = 0; i < m; ++i) mono += (g1[i] - g2[i]) * (p1[i] - p2[i]);
      min_monotone = std::min(min_monotone, -0.5 * inst.problem.lambda() * sym - mono);
    }
  }
  return {violations == 0, fmt("10000 triples, %d with slack below -1e-09, min slack %.3e; symmetrized form min slack %.3e",
                               violations, min_slack, min_monotone)};
}

Outcome three_point() {
  std::mt19937_64 rng(404);
  double worst = 0.0;
  for (int s = 0; s < 10000; ++s) {
    const std::size_t m = 2 + s % 5;
    const WeightVector x(oracle::random_simplex(m, rng, 1e-6)), y(oracle::random_simplex(m, rng, 1e-6)),
        z(oracle::random_simplex(m, rng, 1e-6));
    for (Generator g : {Generator::NegativeEntropy, Generator::SquaredEuclidean}) {
      worst = std::max(worst, std::abs(three_point_residual(g, x, y, z)));
    }
  }
  return {worst < 1e-10, fmt("10000 triples x 2 generators, max |residual| %.2e (tol 1e-10)", worst)};
}

synthetic::QuadraticInstance well_conditioned(std::uint64_t seed, std::size_t m) {
  return synthetic::make_quadratic(seed, 10, m, 1.0, {1.8, 2.0}, {1e-3, 10.0});
}

Outcome contraction() {
  std::size_t violations = 0, steps = 0;
  double min_slack = INFINITY, kmax = 0.0;
  std::mt19937_64 rng(505);
  for (int k = 0; k < 10; ++k) {
    const std::size_t m = 2 + k % 3;
    const auto inst = well_conditioned(3000 + k, m);
    const Stepsizes s = theoretical_stepsizes(inst.info);
    OptimizerConfig cfg;
    cfg.schedule = Schedule::Constant;
    cfg.gamma_theta = s.gamma_theta;
    cfg.gamma_pi = s.gamma_pi;
    cfg.iterations = 5000;
    const RunTrace tr = bgda_run(
        inst.problem, OptimizerState::initial(random_theta(*inst.model, rng), WeightVector(oracle::random_simplex(m, rng, 0.01))),
        cfg);
    const auto rep = synthetic::verify_contraction(tr, inst.info);
    violations += rep.violations;
    steps += rep.steps;
    min_slack = std::min(min_slack, rep.min_slack);
    kmax = std::max(kmax, rep.kappa);
  }
  return {violations == 0,
          fmt("10 instances, %zu steps, %zu violations, min slack %.3e, max kappa %.3f", steps, violations, min_slack, kmax)};
}

Outcome rate_shape() {
  const auto inst = synthetic::make_quadratic(4000, 10, 3, 1.0, {0.5, 2.0}, {0.05, 10.0});
  std::vector<double> eps2;
  for (std::size_t T : {100u, 1000u, 10000u}) {
    OptimizerConfig cfg;
    cfg.schedule = Schedule::Constant;
    cfg.gamma_theta = 0.05;
    cfg.gamma_pi = 0.05;
    cfg.iterations = T;
    eps2.push_back(synthetic::stationarity(
        bgda_run(inst.problem, OptimizerState::initial(inst.model->theta0, WeightVector::uniform(3)), cfg)));
  }
  const double slope = (std::log(eps2[2]) - std::log(eps2[0])) / (std::log(10000.0) - std::log(100.0));
  const bool decreasing = eps2[0] > eps2[1] && eps2[1] > eps2[2];
  return {decreasing && slope >= -1.3 && slope <= -0.7,
          fmt("eps^2 = %.3e, %.3e, %.3e at T = 100, 1000, 10000; log-log slope %.3f (want [-1.3, -0.7])", eps2[0],
              eps2[1], eps2[2], slope)};
}

Outcome stepsize_constants() {
  const Stepsizes s = theoretical_stepsizes(SmoothnessInfo::make(1.0, 1.0));
  const double want = std::sqrt(43.0 / (92.0 * 33792.0));
  return {s.gamma_pi == 0.25 && std::abs(s.gamma_theta - want) <= 1e-12,
          fmt("gamma_pi %.17g, gamma_theta %.12e (want %.12e)", s.gamma_pi, s.gamma_theta, want)};
}

Outcome autodiff() {
  double worst_param = 0.0, worst_second = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t d = 1 + seed % 3;
    const std::vector<std::size_t> widths = {d, 8 + seed % 9, 6 + seed % 5, 1};
    const bool use_sin = seed % 2 == 1;
    const ad::Mlp net = ad::Mlp::glorot(widths, use_sin ? ad::Activation::Sin : ad::Activation::Tanh, 500 + seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> x(d);
    for (double& v : x) v = u(rng);

    const double one[] = {1.0};
    const std::vector<double> g = ad::grad_params(net, x, one);
    const std::vector<double> th(net.params().begin(), net.params().end());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < th.size(); ++i) {
      const double fd = oracle::directional_fd(
          [&](const std::vector<double>& p) { return oracle::reference_forward(widths, p, x, use_sin)[0]; }, th,
          [&] {
            std::vector<double> e(th.size(), 0.0);
            e[i] = 1.0;
            return e;
          }(),
          1e-5);
      num += (fd - g[i]) * (fd - g[i]);
      den += g[i] * g[i];
    }
    worst_param = std::max(worst_param, std::sqrt(num / den));

    const auto f = [&](const std::vector<double>& y) { return oracle::reference_forward(widths, th, y, use_sin)[0]; };
    num = den = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = j; k < d; ++k) {
        const double a = ad::input_derivative(net, x, 2, {j, k});
        const double fd = oracle::mixed_partial(f, x, j, k, 1e-3);
        num += (a - fd) * (a - fd);
        den += a * a;
      }
    }
    worst_second = std::max(worst_second, std::sqrt(num / den));
  }
  return {worst_param < 1e-6 && worst_second < 1e-5,
          fmt("20 nets, parameter gradient rel. error %.2e (tol 1e-06), second derivative rel. error %.2e (tol 1e-05)",
              worst_param, worst_second)};
}

Outcome pinn_desk_run() {
  const ExperimentResult r = run_experiment(poisson_config(20000), workdir("c09").string());
  const double l2 = r.summary["final_l2re"].get<double>();
  return {l2 < 5e-2, fmt("poisson1d, T = 20000, final L2RE %.3e (tol 5e-02)", l2)};
}

Outcome chi_stabilization() {
  ExperimentConfig base = poisson_config(30000);
  base.lambda = kChiLambda;
  ExperimentConfig fixed = base;
  fixed.optimizer = OptimizerKind::FixedWeightBaseline;
  const auto a = run_experiment(base, workdir("c10_bgda").string()).summary["chi_windows"];
  const auto b = run_experiment(fixed, workdir("c10_fixed").string()).summary["chi_windows"];
  const double ma = a[2]["mean"].get<double>(), mb = b[2]["mean"].get<double>();
  const double ca = a[2]["std"].get<double>() / ma, cb = b[2]["std"].get<double>() / mb;
  const bool ok = ma * 10.0 <= mb && ca <= cb;
  return {ok, fmt("lambda %.0e; last-window chi mean %.4g vs baseline %.4g (ratio %.1f, want >= 10); "
                  "std/mean %.3e vs baseline %.3e (want <=)",
                  kChiLambda, ma, mb, mb / ma, ca, cb)};
}

Outcome sbgda_variance() {
  const auto inst = synthetic::make_quadratic(6000, 10, 3, 1.0, {0.5, 2.0}, {0.05, 10.0});
  const synthetic::GaussianNoiseOracle noisy(inst.model, 1.0);
  const BatchOracle oracle = [&](std::span<const double> th, std::size_t b, std::mt19937_64& rng) {
    return noisy(th, b, rng);
  };
  std::vector<double> plateau;
  std::string detail = "plateau of |grad Phi|^2 over the second half:";
  for (std::size_t B : {1u, 4u, 16u, 64u}) {
    OptimizerConfig cfg;
    cfg.schedule = Schedule::Constant;
    cfg.gamma_theta = 0.05;
    cfg.gamma_pi = 0.05;
    cfg.iterations = 20000;
    cfg.batch_size = B;
    cfg.seed = 7;
    const RunTrace tr =
        sbgda_run(inst.problem, oracle, OptimizerState::initial(inst.model->theta0, WeightVector::uniform(3)), cfg);
    double s = 0.0;
    const std::size_t half = tr.rows.size() / 2;
    for (std::size_t t = half; t < tr.rows.size(); ++t) s += tr.rows[t].grad_phi_norm * tr.rows[t].grad_phi_norm;
    plateau.push_back(s / static_cast<double>(tr.rows.size() - half));
    detail += fmt(" B=%zu %.3e", B, plateau.back());
  }
  const bool ok = plateau[0] > plateau[1] && plateau[1] > plateau[2] && plateau[2] > plateau[3];
  return {ok, detail};
}

Outcome restricted_smoothness() {
  double worst = 0.0;
  std::string detail;
  for (std::size_t m : {2u, 3u, 4u}) {
    double lo = INFINITY, hi = 0.0;
    for (double R : {1e-4, 3e-4, 1e-3, 3e-3, 1e-2}) {
      const double lam = 1.0;
      const double excess = synthetic::restricted_smoothness(lam, m, R).L_pi - lam * static_cast<double>(m);
      const double ratio = excess / (lam * static_cast<double>(m * m) * R);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    worst = std::max({worst, hi / lo, hi, 1.0 / lo});
    detail += fmt(" M=%zu (L_pi - lambda M)/(lambda M^2 R) in [%.3f, %.3f];", m, lo, hi);
  }
  return {worst <= 2.0, detail.substr(1) + fmt(" worst factor %.3f (tol 2)", worst)};
}

Outcome determinism() {
  std::vector<ExperimentConfig> cfgs;
  ExperimentConfig syn;
  syn.kind = ExperimentKind::Synthetic;
  syn.optimizer = OptimizerKind::Bgda;
  syn.opt.iterations = 500;
  syn.opt.schedule = Schedule::Constant;
  syn.opt.gamma_theta = 0.05;
  cfgs.push_back(syn);
  syn.optimizer = OptimizerKind::Sbgda;
  syn.noise_sigma = 1.0;
  syn.opt.batch_size = 4;
  cfgs.push_back(syn);
  ExperimentConfig pinn = poisson_config(300);
  pinn.l2re_every = 50;
  cfgs.push_back(pinn);
  pinn.problem = "heat1d";
  pinn.n_interior = 256;
  pinn.n_boundary = 64;
  pinn.resample_every = 100;
  pinn.workers = 3;
  cfgs.push_back(pinn);
  pinn.optimizer = OptimizerKind::Sbgda;
  pinn.opt.batch_size = 32;
  pinn.workers = 1;
  cfgs.push_back(pinn);

  std::size_t same = 0;
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const fs::path a = workdir("c13_" + std::to_string(i) + "a"), b = workdir("c13_" + std::to_string(i) + "b");
    run_experiment(cfgs[i], a.string());
    run_experiment(cfgs[i], b.string());
    if (slurp(a / "trace.csv") == slurp(b / "trace.csv") && !slurp(a / "trace.csv").empty()) ++same;
  }
  return {same == cfgs.size(), fmt("%zu of %zu experiment pairs produced byte-identical traces", same, cfgs.size())};
}

Outcome ablation() {
  std::string detail;
  bool ok = true;
  for (AdaptCombo c : {AdaptCombo::AdamRmsprop, AdaptCombo::AdamAdam, AdaptCombo::RmspropRmsprop}) {
    ExperimentConfig cfg = poisson_config(2000);
    cfg.opt.combo = c;
    try {
      const ExperimentResult r = run_experiment(cfg, workdir("c14_" + to_string(c)).string());
      const double l2 = r.summary["final_l2re"].get<double>();
      ok = ok && r.trace.rows.size() == 2001 && std::isfinite(l2);
      detail += fmt(" %s completed (L2RE %.3e);", to_string(c).c_str(), l2);
    } catch (const Error& e) {
      ok = false;
      detail += fmt(" %s failed: %s;", to_string(c).c_str(), e.what());
    }
  }
  return {ok, "T = 2000," + detail.substr(0, detail.size() - 1)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "Run a single criterion (1-14)")->check(CLI::Range(1, 14));
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> all = {
      {"prox correctness", prox_correctness},
      {"best response", best_response_correctness},
      {"strong concavity inequality", concavity_inequality},
      {"three-point identity", three_point},
      {"contraction", contraction},
      {"rate shape", rate_shape},
      {"stepsize constants", stepsize_constants},
      {"autodiff", autodiff},
      {"pinn desk run", pinn_desk_run},
      {"conflict ratio stabilization", chi_stabilization},
      {"stochastic variance scaling", sbgda_variance},
      {"restricted smoothness", restricted_smoothness},
      {"determinism", determinism},
      {"adaptivity ablation", ablation},
  };

  bool all_ok = true;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = all[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %02zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, all[i].name, o.detail.c_str(), secs);
    std::fflush(stdout);
    all_ok = all_ok && o.pass;
  }
  return all_ok ? 0 : 1;
}
