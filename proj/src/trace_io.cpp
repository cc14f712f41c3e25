#include "bgda/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bgda/pinn.hpp"
#include "bgda/synthetic.hpp"

namespace bgda {

namespace {

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> header_for(const RunTrace& tr) {
  std::vector<std::string> h = {"t"};
  for (std::size_t i = 1; i <= tr.num_losses; ++i) h.push_back("L_" + std::to_string(i));
  for (std::size_t i = 1; i <= tr.num_losses; ++i) h.push_back("pi_" + std::to_string(i));
  h.push_back("grad_theta_norm");
  if (tr.has_phi) h.push_back("grad_phi_norm");
  h.push_back("chi");
  if (tr.has_phi) {
    h.push_back("phi");
    h.push_back("bregman_to_best_response");
  }
  if (tr.has_l2re) h.push_back("l2re");
  h.push_back("stepsize_theta");
  return h;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  if (s.empty()) throw ParseError("empty field", line);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) throw ParseError("invalid number '" + s + "'", line);
  return x;
}

nlohmann::json num(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); }

}  // namespace

void write_trace(std::ostream& out, const RunTrace& tr) {
  out << "# schema=" << kTraceSchema << "\n";
  const std::vector<std::string> h = header_for(tr);
  for (std::size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
  out << "\n";
  for (const TraceRow& r : tr.rows) {
    out << r.t;
    for (double v : r.losses) out << "," << fmt(v);
    for (double v : r.pi) out << "," << fmt(v);
    out << "," << fmt(r.grad_theta_norm);
    if (tr.has_phi) out << "," << fmt(r.grad_phi_norm);
    out << "," << fmt(r.chi);
    if (tr.has_phi) out << "," << fmt(r.phi) << "," << fmt(r.bregman);
    if (tr.has_l2re) out << "," << fmt(r.l2re);
    out << "," << fmt(r.stepsize_theta) << "\n";
  }
}

std::string format_trace(const RunTrace& trace) {
  std::ostringstream ss;
  write_trace(ss, trace);
  return ss.str();
}

RunTrace parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trace", 1);
  ++no;
  if (line != std::string("# schema=") + kTraceSchema) throw ParseError("missing or unsupported schema line", no);
  if (!std::getline(in, line)) throw ParseError("missing header row", 2);
  ++no;
  const std::vector<std::string> cols = split(line, ',');
  RunTrace tr;
  for (const std::string& c : cols) {
    if (c.rfind("L_", 0) == 0) ++tr.num_losses;
  }
  tr.has_phi = false;
  for (const std::string& c : cols) {
    if (c == "phi") tr.has_phi = true;
    if (c == "l2re") tr.has_l2re = true;
  }
  if (tr.num_losses == 0 || cols != header_for(tr)) throw ParseError("unrecognised header row", no);

  while (std::getline(in, line)) {
    ++no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != cols.size()) {
      throw ParseError("expected " + std::to_string(cols.size()) + " fields, found " + std::to_string(f.size()), no);
    }
    TraceRow r;
    std::size_t k = 0;
    const double t = parse_double(f[k++], no);
    if (t < 0 || t != std::floor(t)) throw ParseError("iteration index must be a nonnegative integer", no);
    r.t = static_cast<std::size_t>(t);
    for (std::size_t i = 0; i < tr.num_losses; ++i) r.losses.push_back(parse_double(f[k++], no));
    for (std::size_t i = 0; i < tr.num_losses; ++i) r.pi.push_back(parse_double(f[k++], no));
    r.grad_theta_norm = parse_double(f[k++], no);
    r.grad_phi_norm = tr.has_phi ? parse_double(f[k++], no) : std::nan("");
    r.chi = parse_double(f[k++], no);
    if (tr.has_phi) {
      r.phi = parse_double(f[k++], no);
      r.bregman = parse_double(f[k++], no);
    } else {
      r.phi = r.bregman = std::nan("");
    }
    r.l2re = tr.has_l2re ? parse_double(f[k++], no) : std::nan("");
    r.stepsize_theta = parse_double(f[k++], no);
    if (!tr.rows.empty() && r.t != tr.rows.back().t + 1) throw ParseError("iteration indices must be consecutive", no);
    tr.rows.push_back(std::move(r));
  }
  if (tr.rows.empty()) throw ParseError("trace has no rows", no + 1);
  return tr;
}

RunTrace read_trace_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot read trace file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_trace(ss.str());
}

nlohmann::json summarize(const RunTrace& tr, const SummaryOptions& opts) {
  using nlohmann::json;
  if (tr.rows.empty()) throw InvalidInput("summarize: empty trace");
  json s;
  s["schema"] = kSummarySchema;
  s["iterations"] = tr.rows.size() - 1;
  const TraceRow& last = tr.rows.back();
  s["final_losses"] = last.losses;
  s["final_pi"] = last.pi;

  double final_l2re = std::nan("");
  for (auto it = tr.rows.rbegin(); it != tr.rows.rend() && tr.has_l2re; ++it) {
    if (std::isfinite(it->l2re)) {
      final_l2re = it->l2re;
      break;
    }
  }
  s["final_l2re"] = num(final_l2re);

  std::vector<double> chi;
  for (const TraceRow& r : tr.rows) chi.push_back(r.chi);
  json windows = json::array();
  for (const pinn::WindowStat& w : pinn::window_statistics(chi, opts.windows)) {
    windows.push_back({{"mean", num(w.mean)}, {"variance", num(w.variance)}, {"std", num(std::sqrt(w.variance))},
                       {"count", w.count}});
  }
  s["chi_windows"] = windows;

  if (tr.has_phi && tr.rows.size() > 1) {
    s["stationarity"] = num(synthetic::stationarity(tr));
  } else {
    s["stationarity"] = nullptr;
  }

  if (opts.contraction_info && tr.has_phi) {
    const synthetic::ContractionReport rep = synthetic::verify_contraction(tr, *opts.contraction_info);
    s["contraction"] = {{"kappa", rep.kappa},         {"factor", rep.factor},         {"coefficient", rep.coefficient},
                        {"steps", rep.steps},         {"violations", rep.violations}, {"min_slack", num(rep.min_slack)}};
  } else {
    s["contraction"] = nullptr;
  }
  return s;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write '" + tmp.string() + "'");
    f << contents;
    f.flush();
    if (!f) throw Error("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, target);
}

}  // namespace bgda
