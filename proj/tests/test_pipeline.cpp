// End-to-end pipeline: factor modelling against black-box oracles, global
// least-squares assembly, flattening, timing split, and JSON reporting.
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bbp/error.hpp"
#include "bbp/expr.hpp"
#include "bbp/oracle.hpp"
#include "bbp/pipeline.hpp"
#include "bbp/rng.hpp"
#include "bbp/sampling.hpp"
#include "bbp/structure.hpp"

namespace {

using namespace bbp;

Box uniform_box(int dim, double lo, double hi) { return Box(static_cast<std::size_t>(dim), Interval{lo, hi}); }

Matrix fresh_sample(int dim, double lo, double hi, int count, std::uint64_t seed) {
  SamplingPlan plan;
  plan.dimension = dim;
  plan.box = uniform_box(dim, lo, hi);
  plan.sample_count = count;
  plan.seed = seed;
  return draw_base_sample(plan);
}

Oracle oracle_for(const std::string& text, int dim) {
  return make_expression_oracle(parse_expression(text), dim);
}

SeparableStructure make_structure(int dim, std::vector<std::vector<std::vector<int>>> blocks) {
  SeparableStructure s;
  s.dimension = dim;
  s.blocks = std::move(blocks);
  s.canonicalize();
  s.validate();
  return s;
}

FactorModel exact_shape(const std::string& text) {
  FactorModel fm;
  fm.expression = parse_expression(text);
  fm.mse = 0.0;
  fm.converged = true;
  fm.engine = "exact";
  return fm;
}

// Values of an expression on a sample where every row must be valid.
std::vector<double> shape_values(const Expr& expr, const Matrix& x) {
  const EvalResult r = evaluate(expr, x);
  REQUIRE(r.valid_count == x.rows());
  return r.values;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() > 1);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cab = 0.0, caa = 0.0, cbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cab += (a[i] - ma) * (b[i] - mb);
    caa += (a[i] - ma) * (a[i] - ma);
    cbb += (b[i] - mb) * (b[i] - mb);
  }
  return cab / std::sqrt(caa * cbb);
}

template <typename Fn>
std::optional<Errc> error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

SamplingPlan plan_for(int dim, double lo, double hi, int count, std::uint64_t seed) {
  SamplingPlan plan;
  plan.dimension = dim;
  plan.box = uniform_box(dim, lo, hi);
  plan.sample_count = count;
  plan.seed = seed;
  return plan;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("model_factor recovers a sine factor inside a product block") {
    const Oracle oracle = oracle_for("0.5*exp(x3)*sin(x1)*cos(x2)", 3);
    const SeparableStructure structure = make_structure(3, {{{0}, {1}, {2}}});
    EngineConfig engine;
    FactorDiagnostics diag;
    const FactorModel model =
        model_factor(oracle, structure, 0, 0, engine, plan_for(3, -3.0, 3.0, 300, 777), &diag);

    CHECK(model.engine == "library");
    CHECK(model.template_id == "uni3");
    CHECK(model.converged);
    CHECK(model.expression.variables() == std::vector<int>{0});
    CHECK(diag.block == 0);
    CHECK(diag.factor == 0);
    CHECK(diag.fit_attempts == 1);
    CHECK_FALSE(diag.gp_fallback);

    const Matrix probe = fresh_sample(3, -3.0, 3.0, 400, 999);
    const std::vector<double> fitted = shape_values(model.expression, probe);
    std::vector<double> reference(probe.rows());
    for (std::size_t r = 0; r < probe.rows(); ++r) reference[r] = std::sin(probe.at(r, 0));
    CHECK(std::abs(pearson(fitted, reference)) >= 1.0 - 1e-8);
  }

  TEST_CASE("model_factor recovers a quadratic single-factor block with intercept") {
    const Oracle oracle = oracle_for("1.2 + 10*sin(2*x1 - x3) - 3*x2^2", 3);
    const SeparableStructure structure = make_structure(3, {{{0, 2}}, {{1}}});
    EngineConfig engine;
    const FactorModel model =
        model_factor(oracle, structure, 1, 0, engine, plan_for(3, -3.0, 3.0, 300, 4242));

    CHECK(model.engine == "library");
    CHECK(model.template_id == "uni1");
    CHECK(model.converged);
    CHECK(model.expression.variables() == std::vector<int>{1});

    const Matrix probe = fresh_sample(3, -3.0, 3.0, 400, 1234);
    const std::vector<double> fitted = shape_values(model.expression, probe);
    std::vector<double> reference(probe.rows());
    for (std::size_t r = 0; r < probe.rows(); ++r)
      reference[r] = probe.at(r, 1) * probe.at(r, 1);
    CHECK(std::abs(pearson(fitted, reference)) >= 1.0 - 1e-8);
  }

  TEST_CASE("model_factor gives up when the oracle stays invalid on most rows") {
    const Oracle inner = oracle_for("0.5*exp(x3)*sin(x1)*cos(x2)", 3);
    const Oracle gated = [&inner](const Matrix& x) {
      EvalResult r = inner(x);
      for (std::size_t row = 0; row < x.rows(); ++row) {
        if (x.at(row, 0) <= 2.7 && r.valid[row]) {
          r.valid[row] = 0;
          --r.valid_count;
        }
      }
      return r;
    };
    const SeparableStructure structure = make_structure(3, {{{0}, {1}, {2}}});
    EngineConfig engine;
    const auto code = error_code_of([&] {
      model_factor(gated, structure, 0, 0, engine, plan_for(3, -3.0, 3.0, 300, 7));
    });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::DegenerateData);
  }

  TEST_CASE("model_factor gives up when the response never moves") {
    // The structure claims x2 matters but the oracle ignores it, so every
    // slice of factor {x2} is flat and every anchor redraw is spent.
    const Oracle oracle = oracle_for("sin(x1)", 2);
    const SeparableStructure structure = make_structure(2, {{{0}}, {{1}}});
    EngineConfig engine;
    const auto code = error_code_of([&] {
      model_factor(oracle, structure, 1, 0, engine, plan_for(2, -3.0, 3.0, 200, 55));
    });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::DegenerateData);
  }

  TEST_CASE("model_factor validates its inputs") {
    const Oracle oracle = oracle_for("sin(x1)*cos(x2)", 2);
    const SeparableStructure structure = make_structure(2, {{{0}, {1}}});
    EngineConfig engine;
    const SamplingPlan plan = plan_for(2, -3.0, 3.0, 200, 1);

    auto code = error_code_of([&] { model_factor(oracle, structure, 1, 0, engine, plan); });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);

    code = error_code_of([&] { model_factor(oracle, structure, 0, 2, engine, plan); });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);

    code = error_code_of([&] {
      model_factor(oracle, structure, 0, 0, engine, plan_for(3, -3.0, 3.0, 200, 1));
    });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);

    SeparableStructure constant = make_structure(2, {{{0, 1}}});
    constant.degenerate_constant = true;
    code = error_code_of([&] { model_factor(oracle, constant, 0, 0, engine, plan); });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);
  }

  TEST_CASE("model_factor falls back to GP for arities beyond the shelf") {
    const Oracle oracle = oracle_for("sin(x1 + x2*x3)", 3);
    const SeparableStructure structure = make_structure(3, {{{0, 1, 2}}});
    EngineConfig engine;  // library by default; the shelf stops at two variables
    engine.gp.generation_budget = 40;
    engine.gp.population = 64;
    FactorDiagnostics diag;
    const FactorModel model =
        model_factor(oracle, structure, 0, 0, engine, plan_for(3, -2.0, 2.0, 200, 31), &diag);

    CHECK(model.engine == "gp");
    CHECK(diag.gp_fallback);
    CHECK(model.expression.max_variable_index() <= 2);
    CHECK(std::isfinite(model.mse));
  }

  TEST_CASE("model_factor is deterministic in the plan seed") {
    const Oracle oracle = oracle_for("0.5*exp(x3)*sin(x1)*cos(x2)", 3);
    const SeparableStructure structure = make_structure(3, {{{0}, {1}, {2}}});
    EngineConfig engine;
    const SamplingPlan plan = plan_for(3, -3.0, 3.0, 300, 20260817);
    const FactorModel a = model_factor(oracle, structure, 0, 1, engine, plan);
    const FactorModel b = model_factor(oracle, structure, 0, 1, engine, plan);
    CHECK(to_string(a.expression) == to_string(b.expression));
    CHECK(a.scale == b.scale);
    CHECK(a.intercept == b.intercept);
    CHECK(a.mse == b.mse);
    CHECK(a.template_id == b.template_id);
  }

  TEST_CASE("assemble_global recovers the linear coefficients from exact shapes") {
    const Oracle oracle = oracle_for("1.2 + 10*sin(2*x1 - x3) - 3*x2^2", 3);
    const SeparableStructure structure = make_structure(3, {{{0, 2}}, {{1}}});
    const std::vector<std::vector<FactorModel>> factors = {
        {exact_shape("sin(2*x1 - x3)")},
        {exact_shape("x2^2")},
    };
    const Matrix x_fit = fresh_sample(3, -3.0, 3.0, 300, 11);
    const Matrix x_val = fresh_sample(3, -3.0, 3.0, 500, 12);
    const AssembledModel model = assemble_global(oracle, structure, factors, x_fit, x_val);

    REQUIRE(model.beta.size() == 3);
    CHECK(model.beta[0] == doctest::Approx(1.2).epsilon(1e-6));
    CHECK(model.beta[1] == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(model.beta[2] == doctest::Approx(-3.0).epsilon(1e-6));
    CHECK_FALSE(model.collinear);
    CHECK(model.validation_mse <= 1e-12);
  }

  TEST_CASE("assemble_global absorbs shape offsets into the leading coefficient") {
    // Shapes carry additive offsets (+0.5 and -2); the block coefficients
    // must stay (0.2, -5, 1, -1.2) while beta0 absorbs the remainder:
    // 10 - 1*0.5 + (-1.2)*(-(-2)) = 10 - 0.5 - 2.4 = 7.1.
    const Oracle oracle = oracle_for(
        "10 + 0.2*x1 - 5*sin(5*x2 + x3) + ln(3*x4 + 1.2) - 1.2*exp(0.5*x5)", 5);
    const SeparableStructure structure = make_structure(5, {{{0}}, {{1, 2}}, {{3}}, {{4}}});
    const std::vector<std::vector<FactorModel>> factors = {
        {exact_shape("x1")},
        {exact_shape("sin(5*x2 + x3)")},
        {exact_shape("ln(3*x4 + 1.2) + 0.5")},
        {exact_shape("exp(0.5*x5) - 2")},
    };
    const Matrix x_fit = fresh_sample(5, 1.0, 4.0, 400, 21);
    const Matrix x_val = fresh_sample(5, 1.0, 4.0, 600, 22);
    const AssembledModel model = assemble_global(oracle, structure, factors, x_fit, x_val);

    REQUIRE(model.beta.size() == 5);
    CHECK(model.beta[0] == doctest::Approx(7.1).epsilon(1e-6));
    CHECK(model.beta[1] == doctest::Approx(0.2).epsilon(1e-6));
    CHECK(model.beta[2] == doctest::Approx(-5.0).epsilon(1e-6));
    CHECK(model.beta[3] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(model.beta[4] == doctest::Approx(-1.2).epsilon(1e-6));
    CHECK(model.validation_mse <= 1e-12);
  }

  TEST_CASE("assemble_global flags a collinear design and fits minimum norm") {
    const Oracle oracle = oracle_for("2*sin(x1)", 2);
    const SeparableStructure structure = make_structure(2, {{{0}}, {{1}}});
    const std::vector<std::vector<FactorModel>> factors = {
        {exact_shape("sin(x1)")},
        {exact_shape("sin(x1)")},  // deliberately identical basis column
    };
    const Matrix x_fit = fresh_sample(2, -3.0, 3.0, 200, 31);
    const Matrix x_val = fresh_sample(2, -3.0, 3.0, 300, 32);
    const AssembledModel model = assemble_global(oracle, structure, factors, x_fit, x_val);

    CHECK(model.collinear);
    REQUIRE(model.beta.size() == 3);
    // The minimum-norm solution splits the weight evenly across the twins.
    CHECK(model.beta[1] == doctest::Approx(model.beta[2]).epsilon(1e-8));
    CHECK(model.beta[1] + model.beta[2] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(model.validation_mse <= 1e-10);
  }

  TEST_CASE("assemble_global drops invalid rows and errors when none remain") {
    const Oracle inner = oracle_for("1.2 + 10*sin(2*x1 - x3) - 3*x2^2", 3);
    const Oracle gated = [&inner](const Matrix& x) {
      EvalResult r = inner(x);
      for (std::size_t row = 0; row < x.rows(); ++row) {
        if (x.at(row, 0) < 0.0 && r.valid[row]) {
          r.valid[row] = 0;
          --r.valid_count;
        }
      }
      return r;
    };
    const SeparableStructure structure = make_structure(3, {{{0, 2}}, {{1}}});
    const std::vector<std::vector<FactorModel>> factors = {
        {exact_shape("sin(2*x1 - x3)")},
        {exact_shape("x2^2")},
    };
    const Matrix x_fit = fresh_sample(3, -3.0, 3.0, 300, 41);
    const Matrix x_val = fresh_sample(3, -3.0, 3.0, 300, 42);
    const AssembledModel model = assemble_global(gated, structure, factors, x_fit, x_val);
    CHECK(model.beta[0] == doctest::Approx(1.2).epsilon(1e-6));
    CHECK(model.beta[1] == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(model.beta[2] == doctest::Approx(-3.0).epsilon(1e-6));

    const Oracle never = [](const Matrix& x) {
      EvalResult r;
      r.values.assign(x.rows(), 0.0);
      r.valid.assign(x.rows(), 0);
      r.valid_count = 0;
      return r;
    };
    const auto code = error_code_of([&] {
      assemble_global(never, structure, factors, x_fit, x_val);
    });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InsufficientData);
  }

  TEST_CASE("assemble_global validates the factor layout") {
    const Oracle oracle = oracle_for("sin(x1) + x2", 2);
    const SeparableStructure structure = make_structure(2, {{{0}}, {{1}}});
    const Matrix x_fit = fresh_sample(2, -3.0, 3.0, 100, 51);
    const Matrix x_val = fresh_sample(2, -3.0, 3.0, 100, 52);

    auto code = error_code_of([&] {
      assemble_global(oracle, structure, {{exact_shape("sin(x1)")}}, x_fit, x_val);
    });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);

    SeparableStructure constant = make_structure(2, {{{0, 1}}});
    constant.degenerate_constant = true;
    code = error_code_of([&] {
      assemble_global(oracle, constant, {{exact_shape("x1")}}, x_fit, x_val);
    });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);
  }

  TEST_CASE("a constant structure averages the oracle") {
    SeparableStructure structure = make_structure(2, {{{0, 1}}});
    structure.degenerate_constant = true;
    const Oracle oracle = oracle_for("4.2", 2);
    const Matrix x_fit = fresh_sample(2, -1.0, 1.0, 250, 61);
    const Matrix x_val = fresh_sample(2, -1.0, 1.0, 250, 62);
    const AssembledModel model = assemble_global(oracle, structure, {}, x_fit, x_val);

    REQUIRE(model.beta.size() == 1);
    CHECK(model.beta[0] == doctest::Approx(4.2).epsilon(1e-12));
    CHECK(model.factors.empty());
    CHECK(model.validation_mse <= 1e-20);

    const EvalResult pred = evaluate_structured(model, x_val);
    CHECK(pred.valid_count == x_val.rows());
    CHECK(pred.values[0] == model.beta[0]);
  }

  TEST_CASE("flattened and structured evaluation agree bit for bit") {
    const Oracle oracle = oracle_for("1.2 + 10*sin(2*x1 - x3) - 3*x2^2", 3);
    const SeparableStructure structure = make_structure(3, {{{0, 2}}, {{1}}});
    const std::vector<std::vector<FactorModel>> factors = {
        {exact_shape("sin(2*x1 - x3)")},
        {exact_shape("x2^2")},
    };
    const Matrix x_fit = fresh_sample(3, -3.0, 3.0, 300, 71);
    const Matrix x_val = fresh_sample(3, -3.0, 3.0, 300, 72);
    const AssembledModel model = assemble_global(oracle, structure, factors, x_fit, x_val);

    const Matrix probe = fresh_sample(3, -3.0, 3.0, 1000, 73);
    const EvalResult structured = evaluate_structured(model, probe);
    const EvalResult flattened = evaluate(flattened_expression(model), probe);
    REQUIRE(structured.values.size() == flattened.values.size());
    bool masks_equal = true;
    bool values_equal = true;
    for (std::size_t r = 0; r < probe.rows(); ++r) {
      masks_equal = masks_equal && structured.valid[r] == flattened.valid[r];
      if (structured.valid[r] && flattened.valid[r])
        values_equal = values_equal && structured.values[r] == flattened.values[r];
    }
    CHECK(masks_equal);
    CHECK(values_equal);
    CHECK(structured.valid_count == flattened.valid_count);
  }

  TEST_CASE("the round-trip also holds for models with guarded divisions") {
    const Oracle oracle = oracle_for("5*sin(3*x1*x2)/(x3 + x4)", 4);
    const SeparableStructure structure = make_structure(4, {{{0, 1}, {2, 3}}});
    const std::vector<std::vector<FactorModel>> factors = {
        {exact_shape("sin(3*x1*x2)"), exact_shape("1/(x3 + x4)")},
    };
    const Matrix x_fit = fresh_sample(4, -3.0, 3.0, 400, 81);
    const Matrix x_val = fresh_sample(4, -3.0, 3.0, 400, 82);
    const AssembledModel model = assemble_global(oracle, structure, factors, x_fit, x_val);
    CHECK(model.beta[1] == doctest::Approx(5.0).epsilon(1e-6));

    const Matrix probe = fresh_sample(4, -3.0, 3.0, 1000, 83);
    const EvalResult structured = evaluate_structured(model, probe);
    const EvalResult flattened = evaluate(flattened_expression(model), probe);
    bool agree = structured.valid_count == flattened.valid_count;
    for (std::size_t r = 0; r < probe.rows() && agree; ++r) {
      agree = structured.valid[r] == flattened.valid[r] &&
              (!structured.valid[r] || structured.values[r] == flattened.values[r]);
    }
    CHECK(agree);
  }

  TEST_CASE("factor shapes are invariant under oracle rescaling") {
    const SeparableStructure structure = make_structure(3, {{{0}, {1}, {2}}});
    const Expr base = parse_expression("0.5*exp(x3)*sin(x1)*cos(x2)");
    EngineConfig engine;
    const SamplingPlan plan = plan_for(3, -3.0, 3.0, 300, 616);
    const Matrix probe = fresh_sample(3, -3.0, 3.0, 200, 617);

    const FactorModel reference =
        model_factor(make_expression_oracle(base, 3), structure, 0, 0, engine, plan);
    const std::vector<double> ref_values = shape_values(reference.expression, probe);
    double ref_peak = 0.0;
    for (double v : ref_values) ref_peak = std::max(ref_peak, std::abs(v));

    for (double scale : {37.5, -2.0}) {
      const Expr scaled =
          Expr::binary(BinaryOp::Mul, Expr::constant(scale), base);
      const FactorModel model =
          model_factor(make_expression_oracle(scaled, 3), structure, 0, 0, engine, plan);
      const std::vector<double> values = shape_values(model.expression, probe);

      double ratio = 0.0;
      bool have_ratio = false;
      bool constant_ratio = true;
      for (std::size_t r = 0; r < values.size(); ++r) {
        if (std::abs(ref_values[r]) < 1e-6 * ref_peak) continue;  // near shape zeros
        const double q = values[r] / ref_values[r];
        if (!have_ratio) {
          ratio = q;
          have_ratio = true;
        } else if (std::abs(q - ratio) > 1e-8 * std::abs(ratio)) {
          constant_ratio = false;
        }
      }
      CHECK(have_ratio);
      CHECK(constant_ratio);
    }
  }

  TEST_CASE("run_bbp solves a three-factor product end to end") {
    const Oracle oracle = oracle_for("0.5*exp(x3)*sin(x1)*cos(x2)", 3);
    PipelineConfig config;
    const BBPResult result = run_bbp(oracle, uniform_box(3, -3.0, 3.0), config);

    const SeparableStructure expected = make_structure(3, {{{0}, {1}, {2}}});
    CHECK(result.model.structure.same_partition(expected));
    CHECK(result.model.structure.block_count() == 1);
    CHECK(result.model.structure.factor_count() == 3);
    CHECK(result.converged);
    CHECK(result.model.validation_mse <= 1e-6);
    CHECK(result.diagnostics.size() == 3);
    CHECK(result.resolved_samples == 300);

    CHECK(result.t1 >= 0.0);
    CHECK(result.t2 >= 0.0);
    CHECK(result.t3 >= 0.0);
    CHECK(result.t == result.t1 + result.t2 + result.t3);

    // Deterministic in the master seed: a second run reproduces the model.
    const BBPResult again = run_bbp(oracle, uniform_box(3, -3.0, 3.0), config);
    CHECK(again.model.beta == result.model.beta);
    CHECK(again.model.validation_mse == result.model.validation_mse);
    REQUIRE(again.model.factors.size() == result.model.factors.size());
    for (std::size_t i = 0; i < result.model.factors.size(); ++i)
      for (std::size_t j = 0; j < result.model.factors[i].size(); ++j)
        CHECK(to_string(again.model.factors[i][j].expression) ==
              to_string(result.model.factors[i][j].expression));
  }

  TEST_CASE("run_bbp reports a constant target as its mean") {
    const Oracle oracle = oracle_for("4.2", 2);
    PipelineConfig config;
    const BBPResult result = run_bbp(oracle, uniform_box(2, -1.0, 1.0), config);

    CHECK(result.model.structure.degenerate_constant);
    REQUIRE(result.model.beta.size() == 1);
    CHECK(result.model.beta[0] == doctest::Approx(4.2).epsilon(1e-12));
    CHECK(result.model.factors.empty());
    CHECK(result.diagnostics.empty());
    CHECK(result.converged);
    CHECK(result.t >= 0.0);
  }

  TEST_CASE("a below-tolerance run is flagged, not raised") {
    const Oracle oracle = oracle_for("1.2 + 10*sin(2*x1 - x3) - 3*x2^2", 3);
    PipelineConfig config;
    config.engine.kind = EngineKind::Gp;  // starved GP cannot reach its target
    config.engine.gp.population = 16;
    config.engine.gp.generation_budget = 3;
    BBPResult result;
    CHECK_NOTHROW(result = run_bbp(oracle, uniform_box(3, -3.0, 3.0), config));
    CHECK_FALSE(result.converged);
    CHECK(result.model.validation_mse > config.engine.gp.target_mse);
  }

  TEST_CASE("run_bbp validates its inputs") {
    const Oracle oracle = oracle_for("x1", 1);
    auto code = error_code_of([&] { run_bbp(oracle, Box{}, {}); });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);

    PipelineConfig config;
    config.validation_count = 0;
    code = error_code_of([&] { run_bbp(oracle, uniform_box(1, 0.0, 1.0), config); });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);
  }

  TEST_CASE("run_bbp results serialize to JSON") {
    const Oracle oracle = oracle_for("0.5*exp(x3)*sin(x1)*cos(x2)", 3);
    PipelineConfig config;
    const BBPResult result = run_bbp(oracle, uniform_box(3, -3.0, 3.0), config);
    const std::string text = bbp_result_to_json(result);

    const nlohmann::json j = nlohmann::json::parse(text);
    CHECK(j.at("seed").get<std::uint64_t>() == config.seed);
    CHECK(j.at("samples").get<int>() == result.resolved_samples);
    CHECK(j.at("engine").get<std::string>() == "library");
    CHECK(j.at("converged").get<bool>() == result.converged);
    CHECK(j.at("collinear").get<bool>() == result.model.collinear);
    CHECK(j.at("validation_mse").get<double>() == result.model.validation_mse);

    const auto& beta = j.at("beta");
    REQUIRE(beta.size() == result.model.beta.size());
    for (std::size_t i = 0; i < beta.size(); ++i)
      CHECK(beta[i].get<double>() == result.model.beta[i]);

    const auto& timings = j.at("timings");
    CHECK(timings.at("t").get<double>() == result.t);
    CHECK(timings.at("t").get<double>() ==
          timings.at("t1").get<double>() + timings.at("t2").get<double>() +
              timings.at("t3").get<double>());

    const auto& rows = j.at("factors");
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
      CHECK_NOTHROW(parse_expression(row.at("expression").get<std::string>()));
      CHECK(row.at("engine").get<std::string>() == "library");
      CHECK(row.contains("fit_attempts"));
      CHECK(row.contains("anchor_redraws"));
    }
    CHECK_NOTHROW(parse_expression(j.at("flattened").get<std::string>()));
    CHECK(j.at("structure").at("blocks").size() == 1);
  }

  TEST_CASE("flattened_expression validates the coefficient count") {
    AssembledModel model;
    model.beta = {1.0, 2.0};  // one block's coefficient but no factors
    const auto code = error_code_of([&] { flattened_expression(model); });
    REQUIRE(code.has_value());
    CHECK(*code == Errc::InvalidInput);
  }
}
