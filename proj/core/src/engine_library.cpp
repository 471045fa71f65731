// Library engine: a fixed shelf of parameterized model shapes searched in row
// order. Each row is fitted by differential evolution over its shape slots;
// the leading scale (and, when requested, an intercept) is solved in closed
// form for every candidate, so the stochastic search only ever sees the
// nonlinear parameters. Sine rows also solve their phase slot in closed form
// through k*sin(u + phi) = a*sin(u) + b*cos(u), which removes the phase
// dimension (and the sin-versus-cos distinction) from the search. Exponent
// slots are evaluated both free and snapped to the nearest integer and the
// better variant counts, which keeps power rows usable on sign-changing
// domains. A coordinate-descent polish with parabolic steps sharpens the
// winner to near machine precision. When no row reaches tolerance directly,
// every row is retried against 1/y and the fitted shape is inverted, which
// covers targets with whole sub-expressions in the denominator; the returned
// MSE is always measured in y-space.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "bbp/engines.hpp"
#include "bbp/error.hpp"
#include "bbp/rng.hpp"
#include "engine_common.hpp"

namespace bbp {
namespace {

using detail::LinearFit;
using detail::solve_linear;

// ---------------------------------------------------------------------------
// Model shelf

Expr op(BinaryOp o, Expr a, Expr b) { return Expr::binary(o, std::move(a), std::move(b)); }
Expr op(UnaryOp o, Expr a) { return Expr::unary(o, std::move(a)); }
Expr slot(int s) { return Expr::parameter(s); }
Expr arg(int i) { return Expr::variable(i); }

ModelTemplate make_row(std::string id, int arity, int slots, Expr body,
                       std::vector<std::uint8_t> exponent_mask, int phase_slot = -1) {
  ModelTemplate row;
  row.id = std::move(id);
  row.arity = arity;
  row.slot_count = slots;
  row.body = std::move(body);
  row.exponent_slot = std::move(exponent_mask);
  row.phase_slot = phase_slot;
  return row;
}

std::vector<ModelTemplate> build_library() {
  using B = BinaryOp;
  using U = UnaryOp;
  std::vector<ModelTemplate> rows;
  rows.reserve(8);

  // p0 * (x^p1 + p2)
  rows.push_back(make_row(
      "uni1", 1, 3,
      op(B::Mul, slot(0), op(B::Add, op(B::Pow, arg(0), slot(1)), slot(2))),
      {0, 1, 0}));
  // p0 * (exp(p1*x) + p2)
  rows.push_back(make_row(
      "uni2", 1, 3,
      op(B::Mul, slot(0), op(B::Add, op(U::Exp, op(B::Mul, slot(1), arg(0))), slot(2))),
      {0, 0, 0}));
  // p0 * sin(p1*x^p2 + p3); p3 is resolved in closed form, not searched
  rows.push_back(make_row(
      "uni3", 1, 4,
      op(B::Mul, slot(0),
         op(U::Sin, op(B::Add, op(B::Mul, slot(1), op(B::Pow, arg(0), slot(2))), slot(3)))),
      {0, 0, 1, 0}, 3));
  // p0 * ln(p1*x + p2)
  rows.push_back(make_row(
      "uni4", 1, 3,
      op(B::Mul, slot(0), op(U::Ln, op(B::Add, op(B::Mul, slot(1), arg(0)), slot(2)))),
      {0, 0, 0}));

  // p0 * (p1*u + p2*v + p3)
  rows.push_back(make_row(
      "bi1", 2, 4,
      op(B::Mul, slot(0),
         op(B::Add, op(B::Add, op(B::Mul, slot(1), arg(0)), op(B::Mul, slot(2), arg(1))),
            slot(3))),
      {0, 0, 0, 0}));
  // p0 * ((p1*u + p2) / (p3*v + p4))
  rows.push_back(make_row(
      "bi2", 2, 5,
      op(B::Mul, slot(0),
         op(B::Div, op(B::Add, op(B::Mul, slot(1), arg(0)), slot(2)),
            op(B::Add, op(B::Mul, slot(3), arg(1)), slot(4)))),
      {0, 0, 0, 0, 0}));
  // p0 * (exp(p1*u*v) + p2)
  rows.push_back(make_row(
      "bi3", 2, 3,
      op(B::Mul, slot(0),
         op(B::Add, op(U::Exp, op(B::Mul, slot(1), op(B::Mul, arg(0), arg(1)))), slot(2))),
      {0, 0, 0}));
  // p0 * sin(p1*u + p2*v + p3*u*v + p4); p4 is resolved in closed form
  rows.push_back(make_row(
      "bi4", 2, 5,
      op(B::Mul, slot(0),
         op(U::Sin,
            op(B::Add,
               op(B::Add, op(B::Add, op(B::Mul, slot(1), arg(0)), op(B::Mul, slot(2), arg(1))),
                  op(B::Mul, slot(3), op(B::Mul, arg(0), arg(1)))),
               slot(4)))),
      {0, 0, 0, 0, 0}, 4));
  return rows;
}

// ---------------------------------------------------------------------------
// Two-basis closed-form fit for sine rows: y ~ a*sin(psi) + b*cos(psi) (+ d),
// which equals k*sin(psi + phi) with k = hypot(a, b), phi = atan2(b, a). A
// refinement round against the residuals absorbs accumulated rounding, as in
// solve_linear.

struct HarmonicFit {
  double a = 0.0;
  double b = 0.0;
  double intercept = 0.0;
  double mse = kInfiniteMse;
};

double harmonic_residual_mse(std::span<const double> s, std::span<const double> c,
                             std::span<const double> y, double a, double b, double d) {
  double sq = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double r = y[i] - a * s[i] - b * c[i] - d;
    sq += r * r;
  }
  const double mse = sq / static_cast<double>(s.size());
  return std::isfinite(mse) ? mse : kInfiniteMse;
}

HarmonicFit solve_harmonic(std::span<const double> s, std::span<const double> c,
                           std::span<const double> y, FitMode mode) {
  const std::size_t n = y.size();
  HarmonicFit fit;
  if (n == 0) return fit;

  for (int round = 0; round < 2; ++round) {
    double sm = 0.0, cm = 0.0, rm = 0.0;
    if (mode == FitMode::ScaleIntercept) {
      for (std::size_t i = 0; i < n; ++i) {
        sm += s[i];
        cm += c[i];
        rm += y[i] - fit.a * s[i] - fit.b * c[i] - fit.intercept;
      }
      sm /= static_cast<double>(n);
      cm /= static_cast<double>(n);
      rm /= static_cast<double>(n);
    }
    double ss = 0.0, cc = 0.0, sc = 0.0, sr = 0.0, cr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double si = s[i] - sm;
      const double ci = c[i] - cm;
      const double ri = y[i] - fit.a * s[i] - fit.b * c[i] - fit.intercept - rm;
      ss += si * si;
      cc += ci * ci;
      sc += si * ci;
      sr += si * ri;
      cr += ci * ri;
    }
    const double det = ss * cc - sc * sc;
    if (!(det > 1e-12 * std::max(ss * cc, 1e-300))) break;  // bases collinear
    const double da = (cc * sr - sc * cr) / det;
    const double db = (ss * cr - sc * sr) / det;
    const double dd = mode == FitMode::ScaleIntercept ? rm - da * sm - db * cm : 0.0;
    if (!std::isfinite(da) || !std::isfinite(db) || !std::isfinite(dd)) break;
    const double next_a = fit.a + da;
    const double next_b = fit.b + db;
    const double next_d = fit.intercept + dd;
    const double next_mse = harmonic_residual_mse(s, c, y, next_a, next_b, next_d);
    if (round > 0 && !(next_mse < fit.mse)) break;
    fit.a = next_a;
    fit.b = next_b;
    fit.intercept = next_d;
    fit.mse = next_mse;
    if (fit.mse == 0.0) break;
  }
  if (fit.mse == kInfiniteMse)
    fit.mse = harmonic_residual_mse(s, c, y, fit.a, fit.b, fit.intercept);
  return fit;
}

// ---------------------------------------------------------------------------
// Candidate objective: shape slots in, resolved slots + linear fit out. The
// resolved vector differs from the genotype when integer-snapping an exponent
// slot evaluates strictly better, and a phase slot is always overwritten with
// its closed-form solution (the genotype value there is inert).

class Objective {
public:
  Objective(const ModelTemplate& tpl, const Matrix& x, std::span<const double> y, FitMode mode)
      : tpl_(tpl), x_(x), y_(y), mode_(mode), full_(static_cast<std::size_t>(tpl.slot_count)) {
    for (std::size_t j = 1; j < static_cast<std::size_t>(tpl.slot_count); ++j)
      if (j < tpl_.exponent_slot.size() && tpl_.exponent_slot[j]) exponent_dims_.push_back(j - 1);
    if (tpl_.phase_slot >= 1) phase_dim_ = tpl_.phase_slot - 1;
  }

  int dims() const { return tpl_.slot_count - 1; }

  // Shape dim whose genotype value the objective ignores (-1 when none).
  int inert_dim() const { return phase_dim_; }

  // Linear fit for exactly these shape values; infinite when any row is invalid.
  LinearFit fit_shape(std::span<const double> shape) {
    full_[0] = 1.0;
    std::copy(shape.begin(), shape.end(), full_.begin() + 1);
    if (phase_dim_ < 0) {
      const EvalResult res = evaluate_with_params(tpl_.body, x_, full_);
      if (res.valid_count != x_.rows()) return LinearFit{};
      return solve_linear(res.values, y_, mode_);
    }
    const std::size_t phase = static_cast<std::size_t>(tpl_.phase_slot);
    full_[phase] = 0.0;
    const EvalResult sin_part = evaluate_with_params(tpl_.body, x_, full_);
    if (sin_part.valid_count != x_.rows()) return LinearFit{};
    full_[phase] = 1.5707963267948966;  // pi/2 turns the sine basis into cosine
    const EvalResult cos_part = evaluate_with_params(tpl_.body, x_, full_);
    if (cos_part.valid_count != x_.rows()) return LinearFit{};
    const HarmonicFit h = solve_harmonic(sin_part.values, cos_part.values, y_, mode_);
    last_phase_ = std::atan2(h.b, h.a);
    LinearFit out;
    out.scale = std::hypot(h.a, h.b);
    out.intercept = h.intercept;
    out.mse = h.mse;
    return out;
  }

  // Evaluate the genotype; `resolved` receives the variant that counted.
  LinearFit evaluate(std::span<const double> shape, std::vector<double>& resolved) {
    resolved.assign(shape.begin(), shape.end());
    LinearFit best = fit_shape(shape);
    double best_phase = last_phase_;
    if (!exponent_dims_.empty()) {
      snapped_.assign(shape.begin(), shape.end());
      bool changed = false;
      for (std::size_t d : exponent_dims_) {
        const double r = std::round(snapped_[d]);
        if (r != snapped_[d]) {
          snapped_[d] = r;
          changed = true;
        }
      }
      if (changed) {
        const LinearFit alt = fit_shape(snapped_);
        if (alt.mse < best.mse) {
          best = alt;
          resolved = snapped_;
          best_phase = last_phase_;
        }
      }
    }
    if (phase_dim_ >= 0) resolved[static_cast<std::size_t>(phase_dim_)] = best_phase;
    return best;
  }

private:
  const ModelTemplate& tpl_;
  const Matrix& x_;
  std::span<const double> y_;
  FitMode mode_;
  std::vector<double> full_;
  std::vector<double> snapped_;
  std::vector<std::size_t> exponent_dims_;  // 0-based shape dims that are exponents
  int phase_dim_ = -1;                      // 0-based shape dim solved in closed form
  double last_phase_ = 0.0;                 // phase from the most recent fit_shape
};

double clamp_to(double v, const LibraryConfig& cfg) {
  return std::clamp(v, cfg.param_lo, cfg.param_hi);
}

// Biased initialization: mostly small values (most shape parameters in
// practice are O(1)), a wider shell, and an occasional full-range draw.
double draw_coordinate(Rng& rng, const LibraryConfig& cfg) {
  const double r = rng.uniform();
  double v = 0.0;
  if (r < 0.7)
    v = 2.5 * rng.normal();
  else if (r < 0.9)
    v = 8.0 * rng.normal();
  else
    v = rng.uniform(cfg.param_lo, cfg.param_hi);
  return clamp_to(v, cfg);
}

// Coordinate descent with parabolic steps. Each coordinate gets a shrinking
// step schedule; a convex three-point bracket proposes the parabola vertex.
void polish(Objective& objective, std::vector<double>& p, LinearFit& fit,
            const LibraryConfig& cfg) {
  const int dims = static_cast<int>(p.size());
  if (dims == 0 || !std::isfinite(fit.mse)) return;
  auto eval_at = [&](int j, double v) {
    const double saved = p[static_cast<std::size_t>(j)];
    p[static_cast<std::size_t>(j)] = clamp_to(v, cfg);
    const LinearFit f = objective.fit_shape(p);
    p[static_cast<std::size_t>(j)] = saved;
    return f;
  };
  for (int sweep = 0; sweep < 60; ++sweep) {
    bool improved = false;
    for (int j = 0; j < dims; ++j) {
      if (j == objective.inert_dim()) continue;  // phase is solved, not stepped
      double step = 1e-2 * std::max(1.0, std::abs(p[static_cast<std::size_t>(j)]));
      for (int shrink = 0; shrink < 16 && step > 1e-15; ++shrink, step *= 0.2) {
        const double pj = p[static_cast<std::size_t>(j)];
        const LinearFit fm = eval_at(j, pj - step);
        const LinearFit fp = eval_at(j, pj + step);
        double cand = pj;
        LinearFit fc = fit;
        if (fm.mse < fc.mse) {
          cand = pj - step;
          fc = fm;
        }
        if (fp.mse < fc.mse) {
          cand = pj + step;
          fc = fp;
        }
        const double denom = fm.mse - 2.0 * fit.mse + fp.mse;
        if (std::isfinite(denom) && denom > 0.0) {
          const double delta = 0.5 * step * (fm.mse - fp.mse) / denom;
          if (std::isfinite(delta) && std::abs(delta) <= 8.0 * step) {
            const LinearFit fv = eval_at(j, pj + delta);
            if (fv.mse < fc.mse) {
              cand = pj + delta;
              fc = fv;
            }
          }
        }
        if (fc.mse < fit.mse) {
          p[static_cast<std::size_t>(j)] = clamp_to(cand, cfg);
          fit = fc;
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
}

}  // namespace

const std::vector<ModelTemplate>& model_library() {
  static const std::vector<ModelTemplate> rows = build_library();
  return rows;
}

ParamFit optimize_params(const ModelTemplate& tpl, const Matrix& x, std::span<const double> y,
                         FitMode mode, const LibraryConfig& config, std::uint64_t seed) {
  if (tpl.slot_count < 1 || tpl.body.empty())
    throw Error(Errc::InvalidInput, "model template has no body or slots");
  if (static_cast<int>(x.cols()) != tpl.arity)
    throw Error(Errc::InvalidInput, "sample arity does not match the template");
  if (y.size() != x.rows())
    throw Error(Errc::InvalidInput, "response length does not match the sample");
  if (x.rows() == 0) throw Error(Errc::InsufficientData, "no rows to fit");
  if (!(config.param_lo < config.param_hi))
    throw Error(Errc::InvalidInput, "parameter bounds are empty");

  Objective objective(tpl, x, y, mode);
  const int dims = objective.dims();
  Rng rng(seed);

  ParamFit out;
  if (dims == 0) {
    std::vector<double> none;
    std::vector<double> resolved;
    const LinearFit fit = objective.evaluate(none, resolved);
    if (!std::isfinite(fit.mse))
      throw Error(Errc::DegenerateData, "model shape is invalid on the sampled rows");
    out.params = {fit.scale};
    out.intercept = fit.intercept;
    out.mse = fit.mse;
    out.best_history = {fit.mse};
    return out;
  }

  const int population =
      std::max(4, config.population_base + config.population_per_arity * tpl.arity);
  const int generations = std::max(1, config.generation_factor * population);
  constexpr double kWeight = 0.7;     // differential weight
  constexpr double kCrossover = 0.9;  // per-coordinate crossover rate

  std::vector<std::vector<double>> genotype(static_cast<std::size_t>(population));
  std::vector<std::vector<double>> resolved(static_cast<std::size_t>(population));
  std::vector<LinearFit> fitness(static_cast<std::size_t>(population));

  auto draw_candidate = [&](std::vector<double>& g) {
    g.resize(static_cast<std::size_t>(dims));
    for (double& v : g) v = draw_coordinate(rng, config);
  };

  int best = 0;
  for (int i = 0; i < population; ++i) {
    auto& g = genotype[static_cast<std::size_t>(i)];
    draw_candidate(g);
    fitness[static_cast<std::size_t>(i)] = objective.evaluate(g, resolved[static_cast<std::size_t>(i)]);
    if (fitness[static_cast<std::size_t>(i)].mse < fitness[static_cast<std::size_t>(best)].mse)
      best = i;
  }

  out.best_history.reserve(static_cast<std::size_t>(generations) + 2);
  out.best_history.push_back(fitness[static_cast<std::size_t>(best)].mse);

  std::vector<double> trial(static_cast<std::size_t>(dims));
  std::vector<double> trial_resolved;
  double previous_best = fitness[static_cast<std::size_t>(best)].mse;
  int stall = 0;

  for (int gen = 0; gen < generations; ++gen) {
    for (int i = 0; i < population; ++i) {
      int r1 = i;
      while (r1 == i) r1 = static_cast<int>(rng.uniform_int(0, population - 1));
      int r2 = i;
      while (r2 == i || r2 == r1) r2 = static_cast<int>(rng.uniform_int(0, population - 1));
      const auto& gi = genotype[static_cast<std::size_t>(i)];
      const auto& gb = genotype[static_cast<std::size_t>(best)];
      const auto& g1 = genotype[static_cast<std::size_t>(r1)];
      const auto& g2 = genotype[static_cast<std::size_t>(r2)];
      const int forced = static_cast<int>(rng.uniform_int(0, dims - 1));
      for (int j = 0; j < dims; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        const double mutant = gi[ju] + kWeight * (gb[ju] - gi[ju]) + kWeight * (g1[ju] - g2[ju]);
        trial[ju] = (rng.uniform() < kCrossover || j == forced) ? clamp_to(mutant, config) : gi[ju];
      }
      const LinearFit trial_fit = objective.evaluate(trial, trial_resolved);
      if (trial_fit.mse < fitness[static_cast<std::size_t>(i)].mse) {
        genotype[static_cast<std::size_t>(i)] = trial;
        resolved[static_cast<std::size_t>(i)] = trial_resolved;
        fitness[static_cast<std::size_t>(i)] = trial_fit;
        if (trial_fit.mse < fitness[static_cast<std::size_t>(best)].mse) best = i;
      }
    }
    // Restart everything but the incumbent after a flat stretch.
    const double current = fitness[static_cast<std::size_t>(best)].mse;
    if (previous_best - current > 1e-14) {
      stall = 0;
      previous_best = current;
    } else if (++stall >= population) {
      for (int i = 0; i < population; ++i) {
        if (i == best) continue;
        auto& g = genotype[static_cast<std::size_t>(i)];
        draw_candidate(g);
        fitness[static_cast<std::size_t>(i)] =
            objective.evaluate(g, resolved[static_cast<std::size_t>(i)]);
      }
      stall = 0;
    }
    out.best_history.push_back(fitness[static_cast<std::size_t>(best)].mse);
  }

  LinearFit fit = fitness[static_cast<std::size_t>(best)];
  if (!std::isfinite(fit.mse))
    throw Error(Errc::DegenerateData, "model shape is invalid on every candidate tried");

  std::vector<double> shape = resolved[static_cast<std::size_t>(best)];
  polish(objective, shape, fit, config);
  {
    // Re-resolve so snapped exponents and the closed-form phase match the
    // polished coordinates.
    std::vector<double> refreshed;
    const LinearFit final_fit = objective.evaluate(shape, refreshed);
    if (final_fit.mse <= fit.mse) {
      fit = final_fit;
      shape = std::move(refreshed);
    }
  }
  out.best_history.push_back(fit.mse);

  out.params.resize(static_cast<std::size_t>(tpl.slot_count));
  out.params[0] = fit.scale;
  std::copy(shape.begin(), shape.end(), out.params.begin() + 1);
  out.intercept = fit.intercept;
  out.mse = fit.mse;
  out.generations = generations;
  return out;
}

namespace {

// Shape expression with the leading scale normalized to one.
Expr unit_shape(const ModelTemplate& tpl, const std::vector<double>& params, bool swapped) {
  std::vector<double> unit = params;
  unit[0] = 1.0;
  Expr shape = instantiate_template(tpl, unit);
  if (swapped) {
    const std::vector<int> order = {1, 0};
    shape = remap_variables(shape, order);
  }
  return shape;
}

struct SequenceState {
  FactorModel best;
  int attempts = 0;
};

void consider(SequenceState& state, FactorModel candidate) {
  if (candidate.mse < state.best.mse) state.best = std::move(candidate);
}

}  // namespace

FactorModel fit_library(const Matrix& x, std::span<const double> y, FitMode mode,
                        const EngineConfig& config) {
  const std::size_t rows = x.rows();
  const int arity = static_cast<int>(x.cols());
  if (arity == 0 || rows == 0) throw Error(Errc::InvalidInput, "empty sample");
  if (y.size() != rows) throw Error(Errc::InvalidInput, "response length does not match sample");
  if (arity > 2)
    throw Error(Errc::Unsupported,
                "library engine handles one- and two-variable factors only; got arity " +
                    std::to_string(arity));

  const double target = config.library.target_mse;
  std::vector<const ModelTemplate*> shelf;
  for (const ModelTemplate& row : model_library())
    if (row.arity == arity) shelf.push_back(&row);

  Matrix swapped_x;
  if (arity == 2) {
    const std::vector<int> order = {1, 0};
    swapped_x = x.select_columns(order);
  }

  // The reciprocal pass fits 1/y, so it needs y bounded away from zero.
  double y_max = 0.0, y_min_abs = std::numeric_limits<double>::infinity();
  for (const double v : y) {
    y_max = std::max(y_max, std::abs(v));
    y_min_abs = std::min(y_min_abs, std::abs(v));
  }
  const bool reciprocal_usable = y_max > 0.0 && y_min_abs > 1e-9 * y_max;
  std::vector<double> inverse_y;

  SequenceState state;
  state.best.engine = "library";
  state.best.converged = false;

  for (int pass = 0; pass < 2; ++pass) {
    const bool reciprocal = pass == 1;
    if (reciprocal) {
      if (!reciprocal_usable) break;
      inverse_y.resize(rows);
      for (std::size_t i = 0; i < rows; ++i) inverse_y[i] = 1.0 / y[i];
    }
    for (std::size_t row_index = 0; row_index < shelf.size(); ++row_index) {
      const ModelTemplate& row = *shelf[row_index];
      const int orientations = row.id == "bi2" ? 2 : 1;
      for (int orientation = 0; orientation < orientations; ++orientation) {
        const bool swap = orientation == 1;
        const Matrix& inputs = swap ? swapped_x : x;
        const std::uint64_t attempt_seed =
            derive_seed(config.seed, {0x11b7a7ee5ULL, static_cast<std::uint64_t>(pass),
                                      static_cast<std::uint64_t>(row_index),
                                      static_cast<std::uint64_t>(orientation)});
        ParamFit fit;
        try {
          // Inverted fits carry the intercept in y-space instead, below.
          const FitMode pass_mode = reciprocal ? FitMode::Scale : mode;
          fit = optimize_params(row, inputs, reciprocal ? std::span<const double>(inverse_y) : y,
                                pass_mode, config.library, attempt_seed);
        } catch (const Error& e) {
          if (e.code() == Errc::DegenerateData) {
            ++state.attempts;
            continue;
          }
          throw;
        }
        ++state.attempts;

        FactorModel candidate;
        candidate.engine = "library";
        candidate.template_id = row.id;
        candidate.reciprocal = reciprocal;
        candidate.swapped = swap;
        candidate.generations = fit.generations;
        candidate.best_history = fit.best_history;

        if (!reciprocal) {
          candidate.expression = unit_shape(row, fit.params, swap);
          candidate.scale = fit.params[0];
          candidate.intercept = fit.intercept;
          candidate.mse = fit.mse;
        } else {
          // Invert the fitted shape and re-solve the linear part against y.
          Expr inverted =
              Expr::binary(BinaryOp::Div, Expr::constant(1.0), unit_shape(row, fit.params, swap));
          const EvalResult res = evaluate(inverted, x);
          if (res.valid_count != rows) continue;  // inverted shape crosses zero
          const LinearFit linear = solve_linear(res.values, y, mode);
          if (!std::isfinite(linear.mse)) continue;
          candidate.expression = std::move(inverted);
          candidate.scale = linear.scale;
          candidate.intercept = linear.intercept;
          candidate.mse = linear.mse;
        }
        candidate.converged = candidate.mse <= target;
        const bool done = candidate.converged;
        consider(state, std::move(candidate));
        if (done) {
          state.best.attempts = state.attempts;
          return state.best;
        }
      }
    }
  }
  if (state.best.expression.empty())
    throw Error(Errc::DegenerateData, "every model row was invalid on the given data");
  state.best.attempts = state.attempts;
  return state.best;
}

FactorModel fit_factor(const Matrix& x, std::span<const double> y, FitMode mode,
                       const EngineConfig& config) {
  switch (config.kind) {
    case EngineKind::Library:
      return fit_library(x, y, mode, config);
    case EngineKind::Gp:
      return fit_gp(x, y, mode, config);
  }
  throw Error(Errc::InvalidInput, "unknown engine kind");
}

}  // namespace bbp
