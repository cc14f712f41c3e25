#include "bgda/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "bgda/seed.hpp"

namespace bgda::synthetic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<double> flatten(const MatrixXd& m) {
  std::vector<double> out(static_cast<std::size_t>(m.rows() * m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  }
  return out;
}

double spectral_norm_sym(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

MatrixXd gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  MatrixXd m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = n01(rng);
  }
  return m;
}

}  // namespace

LossEval QuadraticMinimax::loss(std::size_t i, std::span<const double> theta) const {
  if (theta.size() != dim) throw InvalidInput("quadratic loss: parameter dimension mismatch");
  LossEval e;
  e.grad.assign(dim, 0.0);
  const std::vector<double>& a = A[i];
  double quad = 0.0, lin = 0.0;
  for (std::size_t r = 0; r < dim; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) s += a[r * dim + k] * theta[k];
    e.grad[r] = s + b[i][r];
    quad += theta[r] * s;
    lin += b[i][r] * theta[r];
  }
  e.value = 0.5 * quad + lin + c[i];
  return e;
}

std::vector<LossEval> QuadraticMinimax::evaluate(std::span<const double> theta) const {
  std::vector<LossEval> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(loss(i, theta));
  return out;
}

QuadraticInstance make_quadratic(std::uint64_t seed, std::size_t dim, std::size_t m, double lambda, Spectrum spectrum,
                                 QuadraticOptions opts) {
  if (dim == 0) throw InvalidInput("make_quadratic: dim must be at least 1");
  if (m < 2) throw InvalidInput("make_quadratic: need at least two losses");
  if (!(spectrum.hi >= spectrum.lo) || !std::isfinite(spectrum.lo) || !std::isfinite(spectrum.hi)) {
    throw InvalidInput("make_quadratic: empty spectrum range");
  }
  if (!(lambda > 0.0)) throw InvalidInput("make_quadratic: lambda must be positive");
  const double h = opts.heterogeneity;

  std::mt19937_64 rng(derive_seed(seed, streams::kInstance));
  std::normal_distribution<double> n01;

  const Eigen::HouseholderQR<MatrixXd> qr(gaussian(dim, dim, rng));
  const MatrixXd Q = qr.householderQ();
  VectorXd eig(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    eig(static_cast<Eigen::Index>(i)) =
        dim == 1 ? spectrum.hi
                 : spectrum.lo + (spectrum.hi - spectrum.lo) * static_cast<double>(i) / static_cast<double>(dim - 1);
  }
  const MatrixXd base = Q * eig.asDiagonal() * Q.transpose();
  const VectorXd b_bar = gaussian(dim, 1, rng);

  auto q = std::make_shared<QuadraticMinimax>();
  q->dim = dim;
  q->m = m;
  q->lambda = lambda;
  q->region_radius = opts.region_radius;
  std::vector<MatrixXd> As;
  std::vector<VectorXd> bs;
  for (std::size_t i = 0; i < m; ++i) {
    MatrixXd g = gaussian(dim, dim, rng);
    MatrixXd e = g + g.transpose();
    const double en = spectral_norm_sym(e);
    if (en > 0.0) e /= en;
    MatrixXd Ai = base + h * e;
    Ai = 0.5 * (Ai + Ai.transpose());
    VectorXd bi = b_bar + h * gaussian(dim, 1, rng);
    As.push_back(Ai);
    bs.push_back(bi);
    q->A.push_back(flatten(Ai));
    q->b.emplace_back(bi.data(), bi.data() + dim);
    q->c.push_back(h * n01(rng));
  }
  q->theta0.resize(dim);
  for (double& v : q->theta0) v = n01(rng);

  // Constants over the ball of radius region_radius around theta0.
  double t0 = 0.0;
  for (double v : q->theta0) t0 += v * v;
  const double r = std::sqrt(t0) + opts.region_radius;

  double a = 0.0;
  MatrixXd A_bar = MatrixXd::Zero(dim, dim);
  VectorXd b_mean = VectorXd::Zero(dim);
  for (std::size_t i = 0; i < m; ++i) {
    a = std::max(a, spectral_norm_sym(As[i]));
    A_bar += As[i] / static_cast<double>(m);
    b_mean += bs[i] / static_cast<double>(m);
  }
  double cross2 = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double ci = spectral_norm_sym(As[i] - A_bar) * r + (bs[i] - b_mean).norm();
    cross2 += ci * ci;
  }

  const WeightVector pi_hat = WeightVector::uniform(m);
  double floor = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double gap = 0.5 * spectral_norm_sym(As[j] - As[i]) * r * r + (bs[j] - bs[i]).norm() * r +
                         std::abs(q->c[j] - q->c[i]);
      denom += pi_hat[j] * std::exp(gap / lambda);
    }
    floor = std::min(floor, pi_hat[i] / denom);
  }
  q->weight_floor = floor;

  const double L = std::max(a, lambda / floor) + std::sqrt(cross2);
  std::shared_ptr<const QuadraticMinimax> model = q;
  SaddleProblem problem(
      m, [model](std::span<const double> theta) { return model->evaluate(theta); }, lambda, pi_hat);
  return {model, std::move(problem), SmoothnessInfo::make(L, lambda)};
}

double observed_smoothness(const QuadraticMinimax& q, std::size_t pairs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::gamma_distribution<double> g1(1.0, 1.0);
  const std::size_t d = q.dim;
  const std::size_t m = q.m;

  auto random_theta = [&] {
    std::vector<double> dir(d);
    double n = 0.0;
    for (double& v : dir) {
      v = n01(rng);
      n += v * v;
    }
    const double rad = q.region_radius * std::pow(u01(rng), 1.0 / static_cast<double>(d)) / std::sqrt(n);
    for (std::size_t i = 0; i < d; ++i) dir[i] = q.theta0[i] + rad * dir[i];
    return dir;
  };
  auto random_pi = [&] {
    std::vector<double> w(m);
    double s = 0.0;
    for (double& v : w) {
      v = g1(rng);
      s += v;
    }
    for (double& v : w) v = q.weight_floor + (1.0 - static_cast<double>(m) * q.weight_floor) * v / s;
    return w;
  };
  auto gradient = [&](const std::vector<double>& theta, const std::vector<double>& pi) {
    std::vector<double> g(d + m, 0.0);
    const std::vector<LossEval> ev = q.evaluate(theta);
    const double log_ref = std::log(1.0 / static_cast<double>(m));
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t k = 0; k < d; ++k) g[k] += pi[i] * ev[i].grad[k];
      g[d + i] = ev[i].value - q.lambda * (std::log(pi[i]) - log_ref);
      mean += g[d + i] / static_cast<double>(m);
    }
    for (std::size_t i = 0; i < m; ++i) g[d + i] -= mean;
    return g;
  };

  double worst = 0.0;
  for (std::size_t s = 0; s < pairs; ++s) {
    const std::vector<double> t1 = random_theta();
    const std::vector<double> p1 = random_pi();
    std::vector<double> t2, p2;
    if (s % 2 == 0) {
      t2 = random_theta();
      p2 = random_pi();
    } else {
      // Nearby pair: a convex combination stays inside the region.
      const std::vector<double> t3 = random_theta();
      const std::vector<double> p3 = random_pi();
      const double w = 1e-3 * u01(rng);
      t2 = t1;
      p2 = p1;
      for (std::size_t k = 0; k < d; ++k) t2[k] += w * (t3[k] - t1[k]);
      for (std::size_t i = 0; i < m; ++i) p2[i] += w * (p3[i] - p1[i]);
    }
    const std::vector<double> g1v = gradient(t1, p1);
    const std::vector<double> g2v = gradient(t2, p2);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < d + m; ++k) num += (g1v[k] - g2v[k]) * (g1v[k] - g2v[k]);
    for (std::size_t k = 0; k < d; ++k) den += (t1[k] - t2[k]) * (t1[k] - t2[k]);
    for (std::size_t i = 0; i < m; ++i) den += (p1[i] - p2[i]) * (p1[i] - p2[i]);
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  return worst;
}

std::vector<LossEval> GaussianNoiseOracle::operator()(std::span<const double> theta, std::size_t batch,
                                                      std::mt19937_64& rng) const {
  if (batch == 0) throw InvalidInput("batch size must be at least 1");
  std::normal_distribution<double> n01;
  std::vector<LossEval> out = model_->evaluate(theta);
  const double scale = sigma_ / static_cast<double>(batch);
  for (LossEval& e : out) {
    for (std::size_t s = 0; s < batch; ++s) {
      for (double& g : e.grad) g += scale * n01(rng);
    }
  }
  return out;
}

ContractionReport verify_contraction(const RunTrace& trace, const SmoothnessInfo& info) {
  if (!trace.has_phi) throw InvalidInput("verify_contraction: trace lacks best-response columns");
  ContractionReport rep;
  rep.kappa = info.kappa();
  rep.factor = 1.0 - 1.0 / (64.0 * rep.kappa * rep.kappa);
  rep.coefficient = 264.0 * std::pow(rep.kappa, 6);
  rep.min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t + 1 < trace.rows.size(); ++t) {
    const TraceRow& cur = trace.rows[t];
    const TraceRow& next = trace.rows[t + 1];
    const double gamma = cur.stepsize_theta;
    const double rhs = rep.factor * cur.bregman + rep.coefficient * gamma * gamma * cur.grad_phi_norm * cur.grad_phi_norm;
    const double slack = rhs - next.bregman;
    rep.slack.push_back(slack);
    rep.min_slack = std::min(rep.min_slack, slack);
    if (slack < -(1e-14 + 1e-9 * std::abs(rhs))) ++rep.violations;
    ++rep.steps;
  }
  return rep;
}

double stationarity(const RunTrace& trace) {
  if (!trace.has_phi) throw InvalidInput("stationarity: trace lacks the grad_phi_norm column");
  if (trace.rows.size() < 2) throw InvalidInput("stationarity: trace has no steps");
  const std::size_t T = trace.rows.size() - 1;
  double s = 0.0;
  for (std::size_t t = 0; t < T; ++t) s += trace.rows[t].grad_phi_norm * trace.rows[t].grad_phi_norm;
  return s / static_cast<double>(T);
}

std::vector<double> stationarity_curve(const RunTrace& trace) {
  if (!trace.has_phi) throw InvalidInput("stationarity: trace lacks the grad_phi_norm column");
  std::vector<double> out;
  double s = 0.0;
  for (std::size_t t = 0; t + 1 < trace.rows.size(); ++t) {
    s += trace.rows[t].grad_phi_norm * trace.rows[t].grad_phi_norm;
    out.push_back(s / static_cast<double>(t + 1));
  }
  return out;
}

RestrictedSmoothness restricted_smoothness(double lambda, std::size_t m, double R) {
  if (m < 2) throw InvalidInput("restricted_smoothness: need M >= 2");
  if (!(lambda > 0.0) || !(R > 0.0)) throw InvalidInput("restricted_smoothness: lambda and R must be positive");
  const double md = static_cast<double>(m);
  const double center = 1.0 / md;
  // The smallest coordinate is reached with one coordinate at a and the rest
  // equal, where the ball boundary gives (a - 1/M)^2 M/(M-1) = R^2.
  auto excess = [&](double a) { return (a - center) * (a - center) * md / (md - 1.0) - R * R; };
  RestrictedSmoothness out;
  if (excess(0.0) <= 0.0) {
    out.clipped = true;
    out.a_min = kWeightFloor;
  } else {
    double lo = 0.0, hi = center;  // excess(lo) > 0 >= excess(hi)
    for (int it = 0; it < 200 && hi - lo > 1e-17; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    out.a_min = 0.5 * (lo + hi);
  }
  out.L_pi = lambda / out.a_min;
  return out;
}

}  // namespace bgda::synthetic
