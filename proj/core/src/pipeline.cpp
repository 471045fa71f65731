#include "bbp/pipeline.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>

#include <json.hpp>

#include "bbp/error.hpp"
#include "bbp/rng.hpp"

namespace bbp {
namespace {

// Retry budgets: anchors whose response carries no signal (or loses more
// than half its rows) are redrawn; the engine is reseeded while it misses
// its target, keeping the best model found.
constexpr int kMaxAnchorRedraws = 5;
constexpr int kMaxFitAttempts = 3;

// Independent seed streams derived from the master seed.
constexpr std::uint64_t kDetectionStream = 1;
constexpr std::uint64_t kFactorStream = 2;
constexpr std::uint64_t kFitSampleStream = 3;
constexpr std::uint64_t kValidationStream = 4;
constexpr std::uint64_t kAnchorStream = 0xA2C4;
constexpr std::uint64_t kEngineStream = 0xE26;

// Rank threshold for the assembly least squares: singular values below
// max_sv * kRankThreshold are treated as zero (collinear design).
constexpr double kRankThreshold = 1e-10;

// A factor response is degenerate when its spread vanishes relative to its
// level: a constant response cannot constrain a shape.
bool response_is_degenerate(std::span<const double> f) {
  if (f.size() < 2) return true;
  double mean = 0.0;
  for (double v : f) mean += v;
  mean /= static_cast<double>(f.size());
  double var = 0.0;
  for (double v : f) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.size());
  const double spread = std::sqrt(var);
  return spread <= 1e-8 * std::max(std::abs(mean), 1e-12);
}

std::vector<int> complement_in_block(const SeparableStructure& structure, int block,
                                     int factor) {
  std::vector<int> cols;
  const auto& b = structure.blocks[static_cast<std::size_t>(block)];
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (static_cast<int>(j) == factor) continue;
    cols.insert(cols.end(), b[j].begin(), b[j].end());
  }
  std::sort(cols.begin(), cols.end());
  return cols;
}

std::vector<int> outside_block(const SeparableStructure& structure, int block) {
  std::vector<char> in_block(static_cast<std::size_t>(structure.dimension), 0);
  for (const auto& f : structure.blocks[static_cast<std::size_t>(block)])
    for (int v : f) in_block[static_cast<std::size_t>(v)] = 1;
  std::vector<int> cols;
  for (int v = 0; v < structure.dimension; ++v)
    if (!in_block[static_cast<std::size_t>(v)]) cols.push_back(v);
  return cols;
}

EvalResult call_oracle(const Oracle& oracle, const Matrix& x) {
  if (!oracle) throw Error(Errc::InvalidInput, "oracle is empty");
  EvalResult y = oracle(x);
  if (y.values.size() != x.rows() || y.valid.size() != x.rows())
    throw Error(Errc::InvalidInput, "oracle result size does not match the sample");
  return y;
}

double held_out_mse(const Oracle& oracle, const AssembledModel& model, const Matrix& x) {
  const EvalResult y = call_oracle(oracle, x);
  const EvalResult pred = evaluate_structured(model, x);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!y.valid[r] || !pred.valid[r]) continue;
    const double d = pred.values[r] - y.values[r];
    sum += d * d;
    ++n;
  }
  return n == 0 ? kInfiniteMse : sum / static_cast<double>(n);
}

double seconds_between(std::chrono::steady_clock::time_point a,
                       std::chrono::steady_clock::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

}  // namespace

FactorModel model_factor(const Oracle& oracle, const SeparableStructure& structure,
                         int block, int factor, const EngineConfig& engine,
                         const SamplingPlan& plan, FactorDiagnostics* diagnostics) {
  structure.validate();
  if (structure.degenerate_constant)
    throw Error(Errc::InvalidInput, "a constant structure has no factors to model");
  if (block < 0 || block >= structure.block_count())
    throw Error(Errc::InvalidInput, "block index out of range");
  const auto& block_factors = structure.blocks[static_cast<std::size_t>(block)];
  if (factor < 0 || factor >= static_cast<int>(block_factors.size()))
    throw Error(Errc::InvalidInput, "factor index out of range");
  if (static_cast<int>(plan.box.size()) != structure.dimension)
    throw Error(Errc::InvalidInput, "sampling box does not match the structure dimension");

  const std::vector<int>& factor_vars = block_factors[static_cast<std::size_t>(factor)];
  const std::vector<int> complement = complement_in_block(structure, block, factor);
  const std::vector<int> outer = outside_block(structure, block);
  const bool multi_factor = block_factors.size() > 1;

  SamplingPlan local = plan;
  if (local.sample_count <= 0) local.sample_count = default_sample_count(plan.dimension);

  // Draw the response, redrawing sample and anchors while it is unusable.
  std::optional<DifferenceResponse> response;
  int redraws_used = 0;
  for (int attempt = 0; attempt <= kMaxAnchorRedraws; ++attempt) {
    Rng rng(derive_seed(plan.seed, {kAnchorStream, static_cast<std::uint64_t>(block),
                                    static_cast<std::uint64_t>(factor),
                                    static_cast<std::uint64_t>(attempt)}));
    SamplingPlan draw = local;
    draw.seed = rng.next_raw();
    const Matrix base = draw_base_sample(draw);

    std::vector<double> anchor_a, anchor_b;
    if (multi_factor) {
      anchor_a = draw_central_anchor(plan.box, complement, rng);
      anchor_b = draw_central_anchor(plan.box, complement, rng);
      for (int guard = 0; guard < 32 && anchor_a == anchor_b; ++guard)
        anchor_b = draw_central_anchor(plan.box, complement, rng);
    }
    const std::vector<double> anchor_g = draw_central_anchor(plan.box, outer, rng);

    DifferenceResponse candidate;
    try {
      const FactorSlices slices =
          build_factor_slices(base, structure, block, factor, anchor_a, anchor_b, anchor_g);
      candidate = difference_response(oracle, slices);
    } catch (const Error& e) {
      if (e.code() == Errc::InsufficientData) continue;  // redraw
      throw;
    }
    if (2 * candidate.rows_kept < candidate.rows_total) continue;  // mostly invalid
    if (response_is_degenerate(candidate.f_train)) continue;       // flat slice
    redraws_used = attempt;
    response = std::move(candidate);
    break;
  }
  if (!response)
    throw Error(Errc::DegenerateData,
                "factor response stayed degenerate after anchor redraws");

  // A block's only factor keeps the other blocks' anchored offset in its
  // response, so it is fitted with an intercept; factors sharing a block
  // must scale through zero.
  const FitMode mode = response->single_factor ? FitMode::ScaleIntercept : FitMode::Scale;

  EngineConfig engine_run = engine;
  FactorModel best;
  bool have_best = false;
  bool gp_fallback = false;
  int fits = 0;
  for (int attempt = 0; attempt < kMaxFitAttempts; ++attempt) {
    engine_run.seed = derive_seed(plan.seed, {kEngineStream, static_cast<std::uint64_t>(block),
                                              static_cast<std::uint64_t>(factor),
                                              static_cast<std::uint64_t>(attempt)});
    ++fits;
    try {
      FactorModel candidate;
      try {
        candidate = fit_factor(response->x_train, response->f_train, mode, engine_run);
      } catch (const Error& e) {
        if (e.code() == Errc::Unsupported && engine_run.kind == EngineKind::Library) {
          engine_run.kind = EngineKind::Gp;  // arity beyond the shelf: hand to GP
          gp_fallback = true;
          candidate = fit_factor(response->x_train, response->f_train, mode, engine_run);
        } else {
          throw;
        }
      }
      if (!have_best || candidate.mse < best.mse) {
        best = std::move(candidate);
        have_best = true;
      }
    } catch (const Error& e) {
      if (e.code() == Errc::DegenerateData) continue;  // reseed and retry
      throw;
    }
    if (best.converged) break;
  }
  if (!have_best)
    throw Error(Errc::DegenerateData, "every engine attempt degenerated on the response");

  // The engine saw only the factor's columns; rewrite the shape onto the
  // factor's global variable indices.
  best.expression = remap_variables(best.expression, factor_vars);

  if (diagnostics) {
    diagnostics->block = block;
    diagnostics->factor = factor;
    diagnostics->fit_attempts = fits;
    diagnostics->anchor_redraws = redraws_used;
    diagnostics->gp_fallback = gp_fallback;
  }
  return best;
}

AssembledModel assemble_global(const Oracle& oracle, const SeparableStructure& structure,
                               const std::vector<std::vector<FactorModel>>& factors,
                               const Matrix& x_fit, const Matrix& x_validate) {
  structure.validate();
  const int dim = structure.dimension;
  if (static_cast<int>(x_fit.cols()) != dim || static_cast<int>(x_validate.cols()) != dim)
    throw Error(Errc::InvalidInput, "sample dimension does not match the structure");

  AssembledModel model;
  model.structure = structure;

  if (structure.degenerate_constant) {
    if (!factors.empty())
      throw Error(Errc::InvalidInput, "a constant structure takes no factor models");
    const EvalResult y = call_oracle(oracle, x_fit);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < x_fit.rows(); ++r) {
      if (!y.valid[r]) continue;
      sum += y.values[r];
      ++n;
    }
    if (n == 0)
      throw Error(Errc::InsufficientData, "no valid rows to average the constant target");
    model.beta = {sum / static_cast<double>(n)};
    model.validation_mse = held_out_mse(oracle, model, x_validate);
    return model;
  }

  const int p = structure.block_count();
  if (static_cast<int>(factors.size()) != p)
    throw Error(Errc::InvalidInput, "factor models do not cover every block");
  for (int i = 0; i < p; ++i) {
    const auto& expected = structure.blocks[static_cast<std::size_t>(i)];
    const auto& given = factors[static_cast<std::size_t>(i)];
    if (given.size() != expected.size())
      throw Error(Errc::InvalidInput, "factor models do not cover every factor");
    for (const FactorModel& fm : given) {
      if (fm.expression.empty())
        throw Error(Errc::InvalidInput, "factor model carries an empty expression");
      if (fm.expression.max_variable_index() >= dim)
        throw Error(Errc::InvalidInput, "factor expression exceeds the dimension");
      if (fm.expression.max_parameter_slot() >= 0)
        throw Error(Errc::InvalidInput, "factor expression still has parameter slots");
    }
  }
  model.factors = factors;

  const std::size_t rows = x_fit.rows();
  const EvalResult y = call_oracle(oracle, x_fit);

  // Per-block basis column: the product of the block's factor shapes.
  std::vector<std::vector<double>> phi(static_cast<std::size_t>(p),
                                       std::vector<double>(rows, 0.0));
  std::vector<std::uint8_t> usable(rows, 1);
  for (std::size_t r = 0; r < rows; ++r) usable[r] = y.valid[r];
  for (int i = 0; i < p; ++i) {
    auto& column = phi[static_cast<std::size_t>(i)];
    const auto& block_models = factors[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < block_models.size(); ++j) {
      const EvalResult e = evaluate(block_models[j].expression, x_fit);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!e.valid[r]) usable[r] = 0;
        column[r] = (j == 0) ? e.values[r] : column[r] * e.values[r];
        if (!std::isfinite(column[r])) usable[r] = 0;
      }
    }
  }

  std::size_t n = 0;
  for (std::size_t r = 0; r < rows; ++r) n += usable[r];
  if (n < static_cast<std::size_t>(p) + 1 || n < 2)
    throw Error(Errc::InsufficientData, "too few usable rows to fit the coefficients");

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), p + 1);
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  Eigen::Index k = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!usable[r]) continue;
    design(k, 0) = 1.0;
    for (int i = 0; i < p; ++i) design(k, i + 1) = phi[static_cast<std::size_t>(i)][r];
    target(k) = y.values[r];
    ++k;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kRankThreshold);
  model.collinear = svd.rank() < p + 1;  // solve() then yields the min-norm fit
  const Eigen::VectorXd solution = svd.solve(target);
  model.beta.assign(solution.data(), solution.data() + solution.size());

  model.validation_mse = held_out_mse(oracle, model, x_validate);
  return model;
}

Expr flattened_expression(const AssembledModel& model) {
  if (model.beta.size() != model.factors.size() + 1)
    throw Error(Errc::InvalidInput, "coefficient count does not match the blocks");
  Expr out = Expr::constant(model.beta[0]);
  for (std::size_t i = 0; i < model.factors.size(); ++i) {
    Expr term = Expr::constant(model.beta[i + 1]);
    for (const FactorModel& fm : model.factors[i])
      term = Expr::binary(BinaryOp::Mul, term, fm.expression);
    out = Expr::binary(BinaryOp::Add, out, term);
  }
  return out;
}

EvalResult evaluate_structured(const AssembledModel& model, const Matrix& x) {
  if (model.beta.size() != model.factors.size() + 1)
    throw Error(Errc::InvalidInput, "coefficient count does not match the blocks");
  const std::size_t rows = x.rows();
  EvalResult out;
  out.values.assign(rows, model.beta[0]);
  out.valid.assign(rows, 1);
  // Accumulate per block exactly as the flattened expression evaluates:
  // term = b_i, then one multiply per factor, then one add into the total.
  std::vector<double> term(rows);
  for (std::size_t i = 0; i < model.factors.size(); ++i) {
    std::fill(term.begin(), term.end(), model.beta[i + 1]);
    for (const FactorModel& fm : model.factors[i]) {
      const EvalResult e = evaluate(fm.expression, x);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!e.valid[r]) out.valid[r] = 0;
        term[r] *= e.values[r];
        if (!std::isfinite(term[r])) out.valid[r] = 0;
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      out.values[r] += term[r];
      if (!std::isfinite(out.values[r])) out.valid[r] = 0;
    }
  }
  out.valid_count = 0;
  for (std::size_t r = 0; r < rows; ++r) out.valid_count += out.valid[r];
  return out;
}

BBPResult run_bbp(const Oracle& oracle, const Box& domain, const PipelineConfig& config) {
  if (domain.empty()) throw Error(Errc::InvalidInput, "domain must have at least one interval");
  if (config.validation_count <= 0)
    throw Error(Errc::InvalidInput, "validation_count must be positive");
  const int dim = static_cast<int>(domain.size());
  const int samples =
      config.sample_count > 0 ? config.sample_count : default_sample_count(dim);

  BBPResult result;
  result.config = config;
  result.resolved_samples = samples;

  const auto start = std::chrono::steady_clock::now();
  DetectionConfig detection = config.detection;
  detection.seed = derive_seed(config.seed, {kDetectionStream});
  const SeparableStructure structure = detect_structure(oracle, domain, detection);
  const auto after_detect = std::chrono::steady_clock::now();

  std::vector<std::vector<FactorModel>> factors;
  if (!structure.degenerate_constant) {
    factors.resize(static_cast<std::size_t>(structure.block_count()));
    for (int i = 0; i < structure.block_count(); ++i) {
      const auto& block = structure.blocks[static_cast<std::size_t>(i)];
      for (int j = 0; j < static_cast<int>(block.size()); ++j) {
        SamplingPlan plan;
        plan.dimension = dim;
        plan.box = domain;
        plan.sample_count = samples;
        plan.seed = derive_seed(config.seed, {kFactorStream, static_cast<std::uint64_t>(i),
                                              static_cast<std::uint64_t>(j)});
        FactorDiagnostics diag;
        factors[static_cast<std::size_t>(i)].push_back(
            model_factor(oracle, structure, i, j, config.engine, plan, &diag));
        result.diagnostics.push_back(diag);
      }
    }
  }
  const auto after_factors = std::chrono::steady_clock::now();

  SamplingPlan fit_plan;
  fit_plan.dimension = dim;
  fit_plan.box = domain;
  fit_plan.sample_count = samples;
  fit_plan.seed = derive_seed(config.seed, {kFitSampleStream});
  const Matrix x_fit = draw_base_sample(fit_plan);

  SamplingPlan validation_plan;
  validation_plan.dimension = dim;
  validation_plan.box = domain;
  validation_plan.sample_count = config.validation_count;
  validation_plan.seed = derive_seed(config.seed, {kValidationStream});
  const Matrix x_validate = draw_base_sample(validation_plan);

  result.model = assemble_global(oracle, structure, factors, x_fit, x_validate);
  const auto after_assembly = std::chrono::steady_clock::now();

  result.t1 = seconds_between(start, after_detect);
  result.t2 = seconds_between(after_detect, after_factors);
  result.t3 = seconds_between(after_factors, after_assembly);
  result.t = result.t1 + result.t2 + result.t3;
  result.converged = result.model.validation_mse <= engine_target(config.engine);
  return result;
}

std::string bbp_result_to_json(const BBPResult& result) {
  using nlohmann::json;
  json j;
  j["seed"] = result.config.seed;
  j["samples"] = result.resolved_samples;
  j["validation_samples"] = result.config.validation_count;
  j["engine"] = result.config.engine.kind == EngineKind::Library ? "library" : "gp";
  j["epsilon"] = result.config.detection.epsilon;
  j["structure"] = json::parse(result.model.structure.to_json_string());
  j["beta"] = result.model.beta;
  j["validation_mse"] = result.model.validation_mse;
  j["collinear"] = result.model.collinear;
  j["converged"] = result.converged;
  j["timings"] = {{"t1", result.t1}, {"t2", result.t2}, {"t3", result.t3}, {"t", result.t}};

  json factor_rows = json::array();
  std::size_t diag_index = 0;
  for (std::size_t i = 0; i < result.model.factors.size(); ++i) {
    for (std::size_t fj = 0; fj < result.model.factors[i].size(); ++fj) {
      const FactorModel& fm = result.model.factors[i][fj];
      json row;
      row["block"] = i + 1;
      row["factor"] = fj + 1;
      json vars = json::array();
      for (int v : result.model.structure.blocks[i][fj]) vars.push_back(v + 1);
      row["variables"] = vars;
      row["expression"] = to_string(fm.expression);
      row["engine"] = fm.engine;
      row["template"] = fm.template_id;
      row["mse"] = fm.mse;
      row["scale"] = fm.scale;
      row["intercept"] = fm.intercept;
      row["converged"] = fm.converged;
      row["reciprocal"] = fm.reciprocal;
      row["swapped"] = fm.swapped;
      row["row_attempts"] = fm.attempts;
      row["generations"] = fm.generations;
      if (diag_index < result.diagnostics.size()) {
        const FactorDiagnostics& d = result.diagnostics[diag_index];
        row["fit_attempts"] = d.fit_attempts;
        row["anchor_redraws"] = d.anchor_redraws;
        row["gp_fallback"] = d.gp_fallback;
      }
      ++diag_index;
      factor_rows.push_back(std::move(row));
    }
  }
  j["factors"] = std::move(factor_rows);
  j["flattened"] = to_string(flattened_expression(result.model));
  return j.dump(2);
}

}  // namespace bbp
