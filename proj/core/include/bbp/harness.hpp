#pragma once
// Built-in benchmark targets with known block decompositions, a benchmark
// runner that scores detected structure and validation error against the
// ground truth, a direct-GP comparison producing the acceleration ratio
// eta = T_direct / T_BBP, and report emission (json, csv, text table).

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbp/expr.hpp"
#include "bbp/matrix.hpp"
#include "bbp/oracle.hpp"
#include "bbp/pipeline.hpp"
#include "bbp/structure.hpp"

namespace bbp {

// Rows where a case's guarded denominator falls below this magnitude are
// marked invalid by its oracle (and rejected during data generation).
inline constexpr double kDenominatorGuard = 1e-3;

struct TargetCase {
  int id = 0;
  Expr expression;   // the target over global variables x1..xn
  int dimension = 0;
  Box domain;        // per-variable intervals
  int sample_count = 0;       // benchmark default rows per sample
  SeparableStructure truth;   // ground-truth decomposition, canonical
  std::vector<double> beta;   // ground-truth b0..b_p in canonical block order
  Expr guard_denominator;     // when set, |value| < kDenominatorGuard is rejected
  std::string note;           // recorded deviations from the plain protocol
};

// The ten built-in cases, constructed once.
const std::vector<TargetCase>& builtin_cases();

// The case's black-box: its expression oracle, with guarded-denominator
// rows marked invalid so every downstream stage rejects them uniformly.
Oracle case_oracle(const TargetCase& c);

// A "[lo,hi]^n" rendering of a box, listing any deviating variables.
std::string format_domain(const Box& box);

struct CaseResult {
  int id = 0;
  int dimension = 0;
  std::string domain_text;
  int samples = 0;
  bool ran = false;          // false: the pipeline raised; see `error`
  std::string error;
  bool structure_match = false;  // detected partition equals the ground truth
  double mse = kInfiniteMse;     // validation MSE of the assembled model
  double t1 = 0.0, t2 = 0.0, t3 = 0.0, t = 0.0;
  double ratio = 0.0;  // t1 / t, the detection share of the run, in [0, 1]
  std::optional<double> direct_seconds;  // set only when the comparison ran
  std::optional<double> eta;             // T_direct / T_BBP, ditto
  bool eta_lower_bound = false;  // the direct run hit its cap; eta is a floor
  std::string note;
};

struct BenchReport {
  std::vector<CaseResult> cases;
  std::uint64_t seed = 0;
  PipelineConfig config;  // echo of the shared run configuration
};

// Run the pipeline on the given case ids (subset of 1..10; empty -> empty
// report). config.sample_count > 0 overrides the per-case default.
// Per-case failures are recorded in the report, never thrown. When
// with_direct is set the GP engine is required and each case also gets a
// budget-capped direct GP run for eta.
BenchReport run_benchmark(std::span<const int> case_ids, const PipelineConfig& config,
                          bool with_direct = false);

struct DirectComparison {
  int case_id = 0;
  double direct_seconds = 0.0;  // whole-target GP fit, 20x budget, 5-minute cap
  double direct_mse = kInfiniteMse;
  bool direct_converged = false;
  double bbp_seconds = 0.0;  // full pipeline, same engine config
  double bbp_mse = kInfiniteMse;
  bool bbp_converged = false;
  double eta = 0.0;            // direct_seconds / bbp_seconds
  bool eta_lower_bound = false;  // direct run capped before reaching tolerance
};

// Time the GP engine directly on (X, f(X)) for the whole target, then the
// GP-powered pipeline, under the same master seed. Requires the GP engine.
DirectComparison compare_direct(const TargetCase& c, const PipelineConfig& config);

// Serialize a report: "json" (lossless), "csv" (one row per case, fixed
// header), or "table" (text table with the detection-share column).
// Throws Errc::InvalidInput for unknown formats.
std::string emit_report(const BenchReport& report, const std::string& format);

// Parse emit_report's json output back into an equal report.
BenchReport report_from_json(const std::string& text);

}  // namespace bbp
