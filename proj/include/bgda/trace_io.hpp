#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "bgda/optim.hpp"
#include "json.hpp"

namespace bgda {

inline constexpr const char* kTraceSchema = "bgda-trace/1";
inline constexpr const char* kSummarySchema = "bgda-summary/1";

/// CSV: a schema line, a header, then one row per iteration. Optional columns
/// (grad_phi_norm, phi, bregman_to_best_response, l2re) appear only when the
/// trace carries them. Floats use 17 significant digits.
std::string format_trace(const RunTrace& trace);
void write_trace(std::ostream& out, const RunTrace& trace);

/// Throws ParseError with the 1-based line number on malformed input,
/// including an empty trace.
RunTrace parse_trace(const std::string& text);
RunTrace read_trace_file(const std::string& path);

struct SummaryOptions {
  std::size_t windows = 3;
  /// When set, the contraction report is included (needs the phi columns).
  std::optional<SmoothnessInfo> contraction_info;
};

/// Windowed chi statistics, final losses and weights, final L2RE and the
/// stationarity measure, all recomputable from the trace.
nlohmann::json summarize(const RunTrace& trace, const SummaryOptions& opts = {});

/// Write to a temporary sibling and rename over the target.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace bgda
