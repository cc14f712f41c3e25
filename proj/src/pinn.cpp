#include "bgda/pinn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "bgda/error.hpp"
#include "bgda/seed.hpp"

namespace bgda::pinn {

using ad::Dual1;
using ad::Dual2;
using ad::JetSpec;

double Box::measure_of_face(std::size_t coord) const {
  double m = 1.0;
  for (std::size_t j = 0; j < dim(); ++j) {
    if (j != coord) m *= hi[j] - lo[j];
  }
  return m;
}

std::vector<int> PdeSpec::loss_groups() const {
  std::vector<int> g;
  for (const Operator& op : operators) g.push_back(op.interior ? 0 : 1);
  return g;
}

namespace {

JetSpec op_jet(std::size_t d, const Operator& op) { return JetSpec{d, op.first, op.second}; }

}  // namespace

JetSpec PdeSpec::interior_jet() const {
  JetSpec js = JetSpec::values(dim());
  for (const Operator& op : operators) {
    if (op.interior) js = js.merged(op_jet(dim(), op));
  }
  return js;
}

JetSpec PdeSpec::boundary_jet(std::size_t k) const { return op_jet(dim(), operators.at(k)); }

CollocationSet sample_collocation(const PdeSpec& spec, std::size_t n_r, std::size_t n_b, std::uint64_t seed) {
  const std::size_t d = spec.dim();
  if (d == 0 || d > kMaxDim || spec.box.hi.size() != d) throw InvalidInput("collocation: bad domain dimension");
  for (std::size_t j = 0; j < d; ++j) {
    if (!(spec.box.hi[j] > spec.box.lo[j])) throw InvalidInput("collocation: degenerate domain");
  }
  if (n_r == 0 || n_b == 0) throw InvalidInput("collocation: point counts must be positive");

  CollocationSet set;
  set.dim = d;
  set.seed = seed;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::mt19937_64 rng(derive_seed(seed, streams::kInterior));
  set.interior.resize(n_r * d);
  for (std::size_t p = 0; p < n_r; ++p) {
    for (std::size_t j = 0; j < d; ++j) {
      double u = 0.0;
      while (u == 0.0) u = unit(rng);
      set.interior[p * d + j] = spec.box.lo[j] + (spec.box.hi[j] - spec.box.lo[j]) * u;
    }
  }

  set.boundary.resize(spec.num_losses());
  for (std::size_t k = 0; k < spec.num_losses(); ++k) {
    const Operator& op = spec.operators[k];
    if (op.interior) continue;
    if (op.faces.empty()) throw InvalidInput("collocation: boundary operator '" + op.name + "' has no faces");
    std::mt19937_64 brng(derive_seed(seed, streams::kBoundaryBase + k));
    std::vector<double> weights;
    for (const Face& f : op.faces) weights.push_back(spec.box.measure_of_face(f.coord));
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::vector<double>& pts = set.boundary[k];
    pts.resize(n_b * d);
    for (std::size_t p = 0; p < n_b; ++p) {
      const Face& f = d == 1 ? op.faces[p % op.faces.size()] : op.faces[pick(brng)];
      for (std::size_t j = 0; j < d; ++j) {
        if (j == f.coord) {
          pts[p * d + j] = f.side == 0 ? spec.box.lo[j] : spec.box.hi[j];
        } else {
          pts[p * d + j] = spec.box.lo[j] + (spec.box.hi[j] - spec.box.lo[j]) * unit(brng);
        }
      }
    }
  }
  return set;
}

PointJet exact_jet(const PdeSpec& spec, std::span<const double> x, bool first,
                   const std::vector<std::pair<std::size_t, std::size_t>>& second) {
  if (!spec.exact) throw InvalidInput("problem '" + spec.id + "' has no exact solution");
  const std::size_t d = spec.dim();
  auto eval = [&](std::size_t inner, std::size_t outer) {
    std::vector<Dual2> in(d);
    for (std::size_t i = 0; i < d; ++i) {
      in[i] = Dual2(Dual1(x[i], i == inner ? 1.0 : 0.0), Dual1(i == outer ? 1.0 : 0.0, 0.0));
    }
    return spec.exact(in);
  };
  PointJet jet;
  jet.x = x;
  jet.u = eval(d, d).v.v;
  if (first || !second.empty()) {
    for (std::size_t j = 0; j < d; ++j) jet.du[j] = eval(j, d).v.d;
  }
  for (auto [j, k] : second) {
    const double v = eval(j, k).d.d;
    jet.d2u[j][k] = v;
    jet.d2u[k][j] = v;
  }
  return jet;
}

PinnLosses::PinnLosses(PdeSpec spec, CollocationSet colloc, std::vector<std::size_t> widths, ad::Activation act,
                       EvalOptions opts)
    : spec_(std::move(spec)), colloc_(std::move(colloc)), net_(std::move(widths), act), opts_(opts) {
  if (net_.input_dim() != spec_.dim() || net_.output_dim() != 1) {
    throw InvalidInput("pinn: network must map the domain dimension to a scalar");
  }
  if (colloc_.dim != spec_.dim() || colloc_.boundary.size() != spec_.num_losses()) {
    throw InvalidInput("pinn: collocation set does not match the problem");
  }
  if (opts_.chunk == 0) opts_.chunk = 256;
  if (opts_.workers == 0) opts_.workers = 1;
  if (!opts_.kernels) opts_.kernels = &simd::kernels();
}

namespace {

template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& body) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t count = std::min(workers, n);
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

struct ChunkResult {
  std::vector<double> sq;                  // per operator, sum of squared residuals
  std::vector<std::vector<double>> grads;  // per operator
};

// One point set, evaluated for the operators in `ops` that all read from it.
struct PointSetJob {
  const std::vector<double>* points;
  std::span<const std::size_t> idx;
  JetSpec jet;
  std::vector<std::size_t> ops;
};

PointJet read_jet(const ad::JetTape& tape, const JetSpec& js, std::span<const double> x, std::size_t p) {
  PointJet jet;
  jet.x = x;
  jet.u = tape.output(0, 0, p);
  if (js.has_first()) {
    for (std::size_t j = 0; j < js.input_dim; ++j) jet.du[j] = tape.output(0, js.first_channel(j), p);
  }
  for (auto [j, k] : js.second) {
    const double v = tape.output(0, js.second_channel(j, k), p);
    jet.d2u[j][k] = v;
    jet.d2u[k][j] = v;
  }
  return jet;
}

}  // namespace

std::vector<LossEval> PinnLosses::evaluate_subset(std::span<const double> theta,
                                                  std::span<const std::size_t> interior_idx,
                                                  const std::vector<std::vector<std::size_t>>& boundary_idx) const {
  const std::size_t m = spec_.num_losses();
  const std::size_t d = spec_.dim();
  if (boundary_idx.size() != m) throw InvalidInput("pinn: boundary index lists must be given per operator");
  ad::Mlp net = net_;
  net.set_params(theta);

  std::vector<PointSetJob> jobs;
  {
    PointSetJob interior{&colloc_.interior, interior_idx, spec_.interior_jet(), {}};
    for (std::size_t k = 0; k < m; ++k) {
      if (spec_.operators[k].interior) interior.ops.push_back(k);
    }
    if (!interior.ops.empty()) jobs.push_back(std::move(interior));
    for (std::size_t k = 0; k < m; ++k) {
      if (spec_.operators[k].interior) continue;
      jobs.push_back({&colloc_.boundary[k], boundary_idx[k], spec_.boundary_jet(k), {k}});
    }
  }

  std::vector<std::size_t> count(m, 0);
  struct ChunkRef {
    std::size_t job, begin, end;
  };
  std::vector<ChunkRef> chunks;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const std::size_t n = jobs[j].idx.size();
    if (n == 0) throw InvalidInput("pinn: empty point subset");
    for (std::size_t k : jobs[j].ops) count[k] = n;
    for (std::size_t b = 0; b < n; b += opts_.chunk) chunks.push_back({j, b, std::min(n, b + opts_.chunk)});
  }

  std::vector<ChunkResult> results(chunks.size());
  parallel_for(chunks.size(), opts_.workers, [&](std::size_t ci) {
    const ChunkRef& ref = chunks[ci];
    const PointSetJob& job = jobs[ref.job];
    const std::size_t n = ref.end - ref.begin;
    std::vector<double> pts(n * d);
    for (std::size_t p = 0; p < n; ++p) {
      const std::size_t src = job.idx[ref.begin + p];
      std::copy_n(job.points->data() + src * d, d, pts.data() + p * d);
    }
    ad::JetTape tape;
    tape.record(net, pts, job.jet, *opts_.kernels);
    const std::size_t channels = job.jet.channels();

    ChunkResult& res = results[ci];
    res.sq.assign(m, 0.0);
    res.grads.assign(m, {});
    std::vector<double> cot(channels * n);
    for (std::size_t k : job.ops) {
      const Operator& op = spec_.operators[k];
      const double scale = 2.0 / static_cast<double>(count[k]);
      std::fill(cot.begin(), cot.end(), 0.0);
      double sq = 0.0;
      for (std::size_t p = 0; p < n; ++p) {
        std::span<const double> x(pts.data() + p * d, d);
        PointJet jet = read_jet(tape, job.jet, x, p);
        PointJetGrad g;
        const double r = op.residual(jet, &g);
        sq += r * r;
        const double w = scale * r;
        cot[p] += w * g.u;
        if (job.jet.has_first()) {
          for (std::size_t j = 0; j < d; ++j) cot[job.jet.first_channel(j) * n + p] += w * g.du[j];
        }
        for (auto [a, b] : job.jet.second) {
          const double gd = a == b ? g.d2u[a][b] : g.d2u[a][b] + g.d2u[b][a];
          cot[job.jet.second_channel(a, b) * n + p] += w * gd;
        }
      }
      res.sq[k] = sq;
      res.grads[k].assign(net.num_params(), 0.0);
      tape.backward(net, cot, res.grads[k]);
    }
  });

  std::vector<LossEval> out(m);
  for (std::size_t k = 0; k < m; ++k) out[k].grad.assign(net.num_params(), 0.0);
  for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
    for (std::size_t k : jobs[chunks[ci].job].ops) {
      out[k].value += results[ci].sq[k];
      const std::vector<double>& g = results[ci].grads[k];
      for (std::size_t i = 0; i < g.size(); ++i) out[k].grad[i] += g[i];
    }
  }
  for (std::size_t k = 0; k < m; ++k) out[k].value /= static_cast<double>(count[k]);
  return out;
}

namespace {

std::vector<std::size_t> iota_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

}  // namespace

std::vector<LossEval> PinnLosses::evaluate(std::span<const double> theta) const {
  const std::vector<std::size_t> interior = iota_n(colloc_.num_interior());
  std::vector<std::vector<std::size_t>> boundary(spec_.num_losses());
  for (std::size_t k = 0; k < boundary.size(); ++k) boundary[k] = iota_n(colloc_.boundary[k].size() / colloc_.dim);
  return evaluate_subset(theta, interior, boundary);
}

std::vector<std::vector<double>> PinnLosses::residuals(std::span<const double> theta) const {
  const std::size_t d = spec_.dim();
  ad::Mlp net = net_;
  net.set_params(theta);
  std::vector<std::vector<double>> out(spec_.num_losses());
  for (std::size_t k = 0; k < spec_.num_losses(); ++k) {
    const Operator& op = spec_.operators[k];
    const std::vector<double>& pts = op.interior ? colloc_.interior : colloc_.boundary[k];
    const JetSpec js = op.interior ? spec_.interior_jet() : spec_.boundary_jet(k);
    ad::JetTape tape;
    tape.record(net, pts, js, *opts_.kernels);
    for (std::size_t p = 0; p < tape.num_points(); ++p) {
      out[k].push_back(op.residual(read_jet(tape, js, std::span<const double>(pts.data() + p * d, d), p), nullptr));
    }
  }
  return out;
}

MultiLossOracle PinnLosses::oracle() const {
  return [this](std::span<const double> theta) { return evaluate(theta); };
}

std::vector<LossEval> PinnBatchOracle::operator()(std::span<const double> theta, std::size_t batch,
                                                  std::mt19937_64& rng) const {
  if (batch == 0) throw InvalidInput("batch size must be at least 1");
  const CollocationSet& c = losses_->collocation();
  auto draw = [&](std::size_t n) {
    std::vector<std::size_t> idx;
    if (det_) {
      idx = iota_n(std::min(batch, n));
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t i = 0; i < batch; ++i) idx.push_back(pick(rng));
    }
    return idx;
  };
  const std::vector<std::size_t> interior = draw(c.num_interior());
  std::vector<std::vector<std::size_t>> boundary(losses_->num_losses());
  for (std::size_t k = 0; k < boundary.size(); ++k) {
    if (!losses_->spec().operators[k].interior) boundary[k] = draw(c.boundary[k].size() / c.dim);
  }
  return losses_->evaluate_subset(theta, interior, boundary);
}

double l2re(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw InvalidInput("l2re: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    num += e * e;
    den += truth[i] * truth[i];
  }
  if (den == 0.0) throw InvalidInput("l2re: reference has zero norm");
  return std::sqrt(num / den);
}

std::vector<double> evaluation_grid(const Box& box, std::size_t per_dim) {
  if (per_dim < 2) throw InvalidInput("evaluation grid needs at least two points per coordinate");
  const std::size_t d = box.dim();
  std::size_t total = 1;
  for (std::size_t j = 0; j < d; ++j) total *= per_dim;
  std::vector<double> pts(total * d);
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t rem = p;
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t i = rem % per_dim;
      rem /= per_dim;
      pts[p * d + j] = box.lo[j] + (box.hi[j] - box.lo[j]) * static_cast<double>(i) / static_cast<double>(per_dim - 1);
    }
  }
  return pts;
}

std::vector<double> exact_values(const PdeSpec& spec, std::span<const double> points) {
  if (!spec.exact) throw InvalidInput("problem '" + spec.id + "' has no exact solution");
  const std::size_t d = spec.dim();
  std::vector<double> out;
  std::vector<Dual2> in(d);
  for (std::size_t p = 0; p < points.size() / d; ++p) {
    for (std::size_t j = 0; j < d; ++j) in[j] = Dual2(points[p * d + j]);
    out.push_back(spec.exact(in).v.v);
  }
  return out;
}

std::vector<double> predict(const ad::Mlp& net, std::span<const double> points) {
  ad::JetTape tape;
  tape.record(net, points, JetSpec::values(net.input_dim()));
  return std::vector<double>(tape.outputs().begin(), tape.outputs().begin() + tape.num_points());
}

double conflict_ratio(std::span<const double> grad_r, std::span<const double> grad_b) {
  if (grad_r.size() != grad_b.size()) throw InvalidInput("conflict_ratio: gradient lengths differ");
  double nr = 0.0, nb = 0.0;
  for (double v : grad_r) nr += v * v;
  for (double v : grad_b) nb += v * v;
  if (nb == 0.0) throw UndefinedRatio("conflict_ratio: boundary gradient is zero");
  return std::sqrt(nr) / std::sqrt(nb);
}

std::vector<WindowStat> window_statistics(std::span<const double> values, std::size_t windows) {
  if (windows == 0) throw InvalidInput("window_statistics: need at least one window");
  const std::size_t n = values.size();
  std::vector<WindowStat> out(windows);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t b = w * n / windows;
    const std::size_t e = (w + 1) * n / windows;
    WindowStat& s = out[w];
    double sum = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      if (std::isfinite(values[i])) {
        sum += values[i];
        ++s.count;
      }
    }
    if (s.count == 0) {
      s.mean = s.variance = std::nan("");
      continue;
    }
    s.mean = sum / static_cast<double>(s.count);
    double ss = 0.0;
    for (std::size_t i = b; i < e; ++i) {
      if (std::isfinite(values[i])) ss += (values[i] - s.mean) * (values[i] - s.mean);
    }
    s.variance = ss / static_cast<double>(s.count);
  }
  return out;
}

namespace {

constexpr double kPi = std::numbers::pi;

Operator dirichlet(std::string name, std::vector<Face> faces, std::function<double(std::span<const double>)> g) {
  Operator op;
  op.name = std::move(name);
  op.interior = false;
  op.faces = std::move(faces);
  op.residual = [g = std::move(g)](const PointJet& j, PointJetGrad* grad) {
    if (grad) grad->u = 1.0;
    return j.u - (g ? g(j.x) : 0.0);
  };
  return op;
}

PdeSpec poisson1d() {
  PdeSpec s;
  s.id = "poisson1d";
  s.box = Box::unit(1);
  Operator r;
  r.name = "residual";
  r.second = {{0, 0}};
  r.residual = [](const PointJet& j, PointJetGrad* g) {
    if (g) g->d2u[0][0] = 1.0;
    return j.d2u[0][0] + kPi * kPi * std::sin(kPi * j.x[0]);
  };
  s.operators = {r, dirichlet("boundary", {{0, 0}, {0, 1}}, nullptr)};
  s.exact = [](std::span<const Dual2> x) { return sin(kPi * x[0]); };
  return s;
}

PdeSpec poisson2d() {
  PdeSpec s;
  s.id = "poisson2d";
  s.box = Box::unit(2);
  Operator r;
  r.name = "residual";
  r.second = {{0, 0}, {1, 1}};
  r.residual = [](const PointJet& j, PointJetGrad* g) {
    if (g) g->d2u[0][0] = g->d2u[1][1] = 1.0;
    return j.d2u[0][0] + j.d2u[1][1] + 2.0 * kPi * kPi * std::sin(kPi * j.x[0]) * std::sin(kPi * j.x[1]);
  };
  s.operators = {r, dirichlet("boundary", {{0, 0}, {0, 1}, {1, 0}, {1, 1}}, nullptr)};
  s.exact = [](std::span<const Dual2> x) { return sin(kPi * x[0]) * sin(kPi * x[1]); };
  return s;
}

// Coordinates are (x, t).
PdeSpec heat1d() {
  PdeSpec s;
  s.id = "heat1d";
  s.box = Box::unit(2);
  Operator r;
  r.name = "residual";
  r.first = true;
  r.second = {{0, 0}};
  r.residual = [](const PointJet& j, PointJetGrad* g) {
    if (g) {
      g->du[1] = 1.0;
      g->d2u[0][0] = -1.0;
    }
    return j.du[1] - j.d2u[0][0];
  };
  s.operators = {r, dirichlet("boundary", {{0, 0}, {0, 1}}, nullptr),
                 dirichlet("initial", {{1, 0}}, [](std::span<const double> x) { return std::sin(kPi * x[0]); })};
  s.exact = [](std::span<const Dual2> x) { return exp(-kPi * kPi * x[1]) * sin(kPi * x[0]); };
  return s;
}

PdeSpec wave1d() {
  PdeSpec s;
  s.id = "wave1d";
  s.box = Box::unit(2);
  Operator r;
  r.name = "residual";
  r.second = {{0, 0}, {1, 1}};
  r.residual = [](const PointJet& j, PointJetGrad* g) {
    if (g) {
      g->d2u[1][1] = 1.0;
      g->d2u[0][0] = -1.0;
    }
    return j.d2u[1][1] - j.d2u[0][0];
  };
  Operator vel;
  vel.name = "initial_velocity";
  vel.interior = false;
  vel.faces = {{1, 0}};
  vel.first = true;
  vel.residual = [](const PointJet& j, PointJetGrad* g) {
    if (g) g->du[1] = 1.0;
    return j.du[1];
  };
  s.operators = {r, dirichlet("boundary", {{0, 0}, {0, 1}}, nullptr),
                 dirichlet("initial", {{1, 0}}, [](std::span<const double> x) { return std::sin(kPi * x[0]); }), vel};
  s.exact = [](std::span<const Dual2> x) { return sin(kPi * x[0]) * cos(kPi * x[1]); };
  return s;
}

}  // namespace

std::vector<PdeSpec> builtin_problems() { return {poisson1d(), poisson2d(), heat1d(), wave1d()}; }

PdeSpec builtin_problem(const std::string& id) {
  for (PdeSpec& s : builtin_problems()) {
    if (s.id == id) return s;
  }
  throw InvalidInput("unknown problem id '" + id + "'");
}

}  // namespace bgda::pinn
