#pragma once
// End-to-end regression pipeline: detect the additive/multiplicative
// structure of a black-box target, model every factor with a fitting engine,
// then assemble the global model by linear least squares. The final model is
// f(x) = b0 + sum_i b_i * prod_j psi_ij(x_ij), reported together with
// per-stage wall times (t1 detection, t2 factor modelling, t3 assembly).

#include <cstdint>
#include <string>
#include <vector>

#include "bbp/engines.hpp"
#include "bbp/expr.hpp"
#include "bbp/matrix.hpp"
#include "bbp/oracle.hpp"
#include "bbp/sampling.hpp"
#include "bbp/separability.hpp"
#include "bbp/structure.hpp"

namespace bbp {

struct PipelineConfig {
  DetectionConfig detection;  // stage-1 thresholds; its seed is re-derived
  EngineConfig engine;        // factor-fitting engine and its budgets
  int sample_count = 0;       // rows per factor/fit sample; 0 = 100 * dimension
  int validation_count = 1000;  // rows of the held-out validation sample
  std::uint64_t seed = 1729;    // master seed; every stage derives from it
};

// The engine's convergence target (library or GP, per config.kind).
inline double engine_target(const EngineConfig& config) {
  return config.kind == EngineKind::Library ? config.library.target_mse
                                            : config.gp.target_mse;
}

// Bookkeeping for one factor fit inside run_bbp, in block-major order.
struct FactorDiagnostics {
  int block = 0;
  int factor = 0;
  int fit_attempts = 0;    // engine runs, each with a fresh derived seed
  int anchor_redraws = 0;  // extra sample/anchor draws forced by degeneracy
  bool gp_fallback = false;  // library engine refused the arity; GP took over
};

// Fit one factor's shape: draw a base sample, pin the complementary
// variables at paired central anchors, regress the (difference) response
// with the configured engine, and return the shape rewritten onto the
// factor's own variable indices. Degenerate anchors (a flat response or
// more than half the rows invalid) are redrawn up to five times; the engine
// is reseeded up to three times, keeping the best model, stopping early on
// convergence. Throws Errc::DegenerateData when no usable response or model
// survives the retries.
FactorModel model_factor(const Oracle& oracle, const SeparableStructure& structure,
                         int block, int factor, const EngineConfig& engine,
                         const SamplingPlan& plan,
                         FactorDiagnostics* diagnostics = nullptr);

// A fully assembled model: the detected structure, one fitted shape per
// factor (variables already global), and the linear coefficients.
struct AssembledModel {
  SeparableStructure structure;
  std::vector<std::vector<FactorModel>> factors;  // [block][factor]
  std::vector<double> beta;    // b0 then one coefficient per block
  double validation_mse = 0.0;  // on the held-out sample; rows valid both sides
  bool collinear = false;       // design matrix was rank-deficient (min-norm fit)
};

// Solve for beta by least squares on x_fit (rows where the oracle and every
// factor shape are valid and finite), then score on x_validate. A constant
// structure takes beta = {mean of the oracle on x_fit} with no factors. A
// rank-deficient design sets `collinear` and returns the minimum-norm
// solution. Throws Errc::InvalidInput when factors do not match the
// structure and Errc::InsufficientData when too few usable rows remain.
AssembledModel assemble_global(const Oracle& oracle, const SeparableStructure& structure,
                               const std::vector<std::vector<FactorModel>>& factors,
                               const Matrix& x_fit, const Matrix& x_validate);

// The assembled model as a single expression:
// b0 + b1 * psi_11 * psi_12 ... per block, left-associated in block order.
Expr flattened_expression(const AssembledModel& model);

// Evaluate the assembled model without flattening, accumulating per block in
// the same operation order as the flattened expression so both paths agree
// bit for bit on every valid row.
EvalResult evaluate_structured(const AssembledModel& model, const Matrix& x);

struct BBPResult {
  AssembledModel model;
  std::vector<FactorDiagnostics> diagnostics;  // block-major, one per factor
  double t1 = 0.0;  // seconds: structure detection
  double t2 = 0.0;  // seconds: factor modelling
  double t3 = 0.0;  // seconds: sampling + global assembly
  double t = 0.0;   // exact sum t1 + t2 + t3
  bool converged = false;  // validation MSE met the engine target
  PipelineConfig config;   // echo of the run configuration
  int resolved_samples = 0;  // sample_count after the 100 * dimension default
};

// Full run on a black-box oracle over `domain`: detection, per-factor
// modelling, assembly, validation. Deterministic in config.seed; every
// stage draws from an independent derived stream.
BBPResult run_bbp(const Oracle& oracle, const Box& domain,
                  const PipelineConfig& config = {});

// Lossless JSON report: structure, per-factor expressions and fit
// diagnostics, beta, validation MSE, flags, timings, seeds.
std::string bbp_result_to_json(const BBPResult& result);

}  // namespace bbp
