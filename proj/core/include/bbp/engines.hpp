#pragma once
// Factor-fitting engines behind one interface. The library engine walks a
// fixed shelf of parameterized model shapes in row order, fitting each with a
// bounded differential-evolution search (leading scale solved in closed form
// per candidate) plus a coordinate-descent polish, and accepts the first row
// that reaches tolerance. The GP engine evolves a single expression tree with
// tournament selection, subtree crossover, and subtree/point mutation,
// restarting on stagnation until a total generation budget is spent. Both
// return the fitted shape with its scale (and optional intercept) reported
// separately so the caller's global assembly owns every linear coefficient.

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bbp/expr.hpp"
#include "bbp/matrix.hpp"

namespace bbp {

enum class EngineKind { Library, Gp };

// How the linear part is fitted around the engine's shape: factors that share
// a block with others must scale through zero; a block's only factor keeps an
// intercept because its response carries the other blocks' anchored offset.
enum class FitMode { Scale, ScaleIntercept };

struct LibraryConfig {
  double param_lo = -50.0;  // bounds for evolved shape parameters
  double param_hi = 50.0;   // (the closed-form scale is unbounded by construction)
  int population_base = 10;
  int population_per_arity = 10;  // N_p = base + per_arity * arity
  int generation_factor = 3;      // generations = factor * N_p
  double target_mse = 1e-6;
};

struct GpConfig {
  int population = 100;
  long long generation_budget = 100000;  // total generations across restarts
  double target_mse = 1e-8;
  int tournament = 4;
  double crossover_rate = 0.85;  // remaining offspring mutate (half subtree, half point)
  int max_initial_depth = 4;
  int max_depth = 10;
  int max_nodes = 80;
  int stall_generations = 50;    // restart after this many near-flat generations
  double stall_epsilon = 1e-12;  // improvement below this counts as flat
  double constant_lo = -5.0;     // ephemeral constant range
  double constant_hi = 5.0;
  double max_seconds = 0.0;  // wall cap checked at generation boundaries; 0 = off
};

struct EngineConfig {
  EngineKind kind = EngineKind::Library;
  LibraryConfig library;
  GpConfig gp;
  std::uint64_t seed = 0;
};

constexpr double kInfiniteMse = std::numeric_limits<double>::infinity();

struct FactorModel {
  Expr expression;         // fitted shape; the leading scale is normalized out
  double scale = 1.0;      // diagnostic: the discarded linear coefficient
  double intercept = 0.0;  // diagnostic: offset (ScaleIntercept mode only)
  double mse = kInfiniteMse;  // training MSE of scale*shape + intercept
  bool converged = false;     // mse <= the engine's target
  std::string engine;         // "library" or "gp"
  std::string template_id;    // winning library row id, empty for gp
  bool reciprocal = false;    // library: shape fitted against 1/y and inverted
  bool swapped = false;       // library: two-variable row matched with swapped inputs
  int attempts = 0;           // library: row fits tried; gp: populations started
  long long generations = 0;  // generations consumed by the winning search
  std::vector<double> best_history;  // best MSE after each generation (monotone)
};

// The model shelf: four one-variable rows then four two-variable rows, in
// search order. Row ids are "uni1".."uni4" and "bi1".."bi4".
const std::vector<ModelTemplate>& model_library();

struct ParamFit {
  std::vector<double> params;  // full slot vector; slot 0 holds the fitted scale
  double intercept = 0.0;
  double mse = kInfiniteMse;
  long long generations = 0;
  std::vector<double> best_history;  // entries: initial population, each
                                     // generation, and the final polish
};

// Global parameter search for one template: seeded differential evolution over
// the shape slots (population 10+10*arity, 3*N_p generations, bounds
// respected), exponent-marked slots tried both free and integer-snapped, then
// a coordinate-descent polish. Throws Errc::DegenerateData when every
// candidate stays invalid on the data.
ParamFit optimize_params(const ModelTemplate& tpl, const Matrix& x, std::span<const double> y,
                         FitMode mode, const LibraryConfig& config, std::uint64_t seed);

// Sequence search over the shelf rows of matching arity; first row reaching
// tolerance wins. Two-variable ratio rows are retried with swapped inputs,
// and when no direct row passes, every row is retried against 1/y with the
// result inverted. Throws Errc::Unsupported for arity > 2.
FactorModel fit_library(const Matrix& x, std::span<const double> y, FitMode mode,
                        const EngineConfig& config);

// Single-tree GP over +,-,*,/,sin,cos,exp,ln with ephemeral constants.
// Individuals hitting any invalid row get infinite fitness. Throws
// Errc::InsufficientData for fewer than 10 rows.
FactorModel fit_gp(const Matrix& x, std::span<const double> y, FitMode mode,
                   const EngineConfig& config);

// Dispatch on config.kind; the caller stays engine-agnostic.
FactorModel fit_factor(const Matrix& x, std::span<const double> y, FitMode mode,
                       const EngineConfig& config);

}  // namespace bbp
