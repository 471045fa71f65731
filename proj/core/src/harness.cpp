#include "bbp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <utility>

#include <json.hpp>

#include "bbp/engines.hpp"
#include "bbp/error.hpp"
#include "bbp/rng.hpp"
#include "bbp/sampling.hpp"
#include "bbp/separability.hpp"

namespace bbp {
namespace {

constexpr std::uint64_t kCaseStream = 0xCA5E;
constexpr std::uint64_t kDirectStream = 0xD12EC7;

// The direct whole-target GP run gets 20x the per-factor generation budget,
// capped at five minutes of wall clock.
constexpr int kDirectBudgetMultiplier = 20;
constexpr double kDirectSecondsCap = 300.0;

Box uniform_box(int dim, double lo, double hi) {
  return Box(static_cast<std::size_t>(dim), Interval{lo, hi});
}

TargetCase make_case(int id, const char* text, int dim, Box domain, int samples,
                     std::vector<std::vector<std::vector<int>>> blocks,
                     std::vector<double> beta, const char* guard, const char* note) {
  TargetCase c;
  c.id = id;
  c.expression = parse_expression(text);
  c.dimension = dim;
  c.domain = std::move(domain);
  c.sample_count = samples;
  c.truth.dimension = dim;
  c.truth.blocks = std::move(blocks);
  c.truth.canonicalize();
  c.truth.validate();
  c.beta = std::move(beta);
  if (guard != nullptr && guard[0] != '\0') c.guard_denominator = parse_expression(guard);
  c.note = note == nullptr ? "" : note;
  if (c.expression.max_variable_index() >= dim)
    throw Error(Errc::Internal, "benchmark case exceeds its declared dimension");
  if (c.beta.size() != c.truth.blocks.size() + 1)
    throw Error(Errc::Internal, "benchmark case coefficients do not match its blocks");
  return c;
}

std::vector<TargetCase> build_cases() {
  std::vector<TargetCase> cases;
  cases.reserve(10);
  cases.push_back(make_case(1, "1.2 + 10*sin(2*x1 - x3) - 3*x2^2", 3,
                            uniform_box(3, -3.0, 3.0), 300, {{{0, 2}}, {{1}}},
                            {1.2, 10.0, -3.0}, "", ""));
  cases.push_back(make_case(2, "0.5*exp(x3)*sin(x1)*cos(x2)", 3, uniform_box(3, -3.0, 3.0),
                            300, {{{0}, {1}, {2}}}, {0.0, 0.5}, "", ""));
  cases.push_back(make_case(3, "cos(x1 + x2) + sin(3*x3 - x4)", 4, uniform_box(4, -3.0, 3.0),
                            400, {{{0, 1}}, {{2, 3}}}, {0.0, 1.0, 1.0}, "", ""));
  cases.push_back(make_case(4, "5*sin(3*x1*x2)/(x3 + x4)", 4, uniform_box(4, -3.0, 3.0), 400,
                            {{{0, 1}, {2, 3}}}, {0.0, 5.0}, "x3 + x4", ""));
  cases.push_back(make_case(5, "2*x1*sin(x2 + x3) - cos(x4)", 4, uniform_box(4, -3.0, 3.0),
                            400, {{{0}, {1, 2}}, {{3}}}, {0.0, 2.0, -1.0}, "", ""));
  cases.push_back(make_case(
      6, "10 + 0.2*x1 - 5*sin(5*x2 + x3) + ln(3*x4 + 1.2) - 1.2*exp(0.5*x5)", 5,
      uniform_box(5, 1.0, 4.0), 300, {{{0}}, {{1, 2}}, {{3}}, {{4}}},
      {10.0, 0.2, -5.0, 1.0, -1.2}, "",
      "sample count stays 300 at dimension 5 by benchmark convention"));
  cases.push_back(make_case(7, "10*sin(x1*x2)*x3/(x4 + x5)", 5, uniform_box(5, -3.0, 3.0),
                            500, {{{0, 1}, {2}, {3, 4}}}, {0.0, 10.0}, "x4 + x5", ""));
  cases.push_back(make_case(
      8, "1.2 + 2*x4*cos(x2) + 0.5*exp(1.2*x3)*sin(3*x1) - 2*cos(1.5*x5 + 5)", 5,
      uniform_box(5, -3.0, 3.0), 500, {{{0}, {2}}, {{1}, {3}}, {{4}}},
      {1.2, 0.5, 2.0, -2.0}, "", ""));
  Box nine = uniform_box(6, -3.0, 3.0);
  nine[1] = Interval{0.1, 3.0};
  cases.push_back(make_case(9, "100*cos(x3*x4)/(exp(x1)*x2^1.2)*sin(1.5*x5 - 2*x6)", 6,
                            std::move(nine), 600, {{{0}, {1}, {2, 3}, {4, 5}}},
                            {0.0, 100.0}, "", "x2 restricted to [0.1, 3] so x2^1.2 stays real"));
  cases.push_back(make_case(10, "(x1 + x2)/x3 + x4*sin(x5*x6)", 6, uniform_box(6, -3.0, 3.0),
                            600, {{{0, 1}, {2}}, {{3}, {4, 5}}}, {0.0, 1.0, 1.0}, "x3", ""));
  return cases;
}

std::string format_interval(const Interval& iv) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "[%g,%g]", iv.lo, iv.hi);
  return buf;
}

// The per-case sampling row count: an explicit config override wins.
int case_samples(const TargetCase& c, const PipelineConfig& config) {
  return config.sample_count > 0 ? config.sample_count : c.sample_count;
}

struct DirectRun {
  double seconds = 0.0;
  double mse = kInfiniteMse;
  bool converged = false;
};

// Whole-target GP fit on one clean sample, timed. `config.seed` is expected
// to be the case-derived seed so benchmark rows and compare_direct agree.
DirectRun run_direct_gp(const TargetCase& c, const PipelineConfig& config) {
  SamplingPlan plan;
  plan.dimension = c.dimension;
  plan.box = c.domain;
  plan.sample_count = case_samples(c, config);
  plan.seed = derive_seed(config.seed, {kDirectStream, static_cast<std::uint64_t>(c.id)});

  Matrix x;
  if (c.guard_denominator.empty()) {
    x = draw_base_sample(plan);
  } else {
    const Expr guard = c.guard_denominator;
    const int dim = c.dimension;
    x = draw_base_sample(plan, [&guard, dim](std::span<const double> row) {
      Matrix one(1, static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) one.at(0, static_cast<std::size_t>(i)) = row[static_cast<std::size_t>(i)];
      const EvalResult g = evaluate(guard, one);
      return g.valid[0] == 1 && std::abs(g.values[0]) >= kDenominatorGuard;
    });
  }

  const EvalResult y = case_oracle(c)(x);
  std::vector<std::size_t> keep;
  for (std::size_t r = 0; r < x.rows(); ++r)
    if (y.valid[r]) keep.push_back(r);
  Matrix x_clean = keep.size() == x.rows() ? std::move(x) : x.select_rows(keep);
  std::vector<double> y_clean;
  y_clean.reserve(keep.size());
  for (std::size_t r : keep) y_clean.push_back(y.values[r]);

  EngineConfig direct = config.engine;
  direct.kind = EngineKind::Gp;
  direct.gp.generation_budget =
      config.engine.gp.generation_budget * kDirectBudgetMultiplier;
  direct.gp.max_seconds =
      config.engine.gp.max_seconds > 0.0
          ? std::min(config.engine.gp.max_seconds * kDirectBudgetMultiplier, kDirectSecondsCap)
          : kDirectSecondsCap;
  direct.seed = derive_seed(config.seed, {kDirectStream, static_cast<std::uint64_t>(c.id), 1});

  const auto start = std::chrono::steady_clock::now();
  const FactorModel model = fit_gp(x_clean, y_clean, FitMode::ScaleIntercept, direct);
  const auto stop = std::chrono::steady_clock::now();

  DirectRun out;
  out.seconds = std::chrono::duration<double>(stop - start).count();
  out.mse = model.mse;
  out.converged = model.converged;
  return out;
}

std::string format_double(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

nlohmann::json config_to_json(const PipelineConfig& config) {
  nlohmann::json j;
  j["seed"] = config.seed;
  j["sample_count"] = config.sample_count;
  j["validation_count"] = config.validation_count;
  j["detection"] = {{"epsilon", config.detection.epsilon},
                    {"repetitions", config.detection.repetitions},
                    {"samples_per_test", config.detection.samples_per_test},
                    {"max_degenerate_redraws", config.detection.max_degenerate_redraws},
                    {"seed", config.detection.seed}};
  j["engine"] = {
      {"kind", config.engine.kind == EngineKind::Library ? "library" : "gp"},
      {"seed", config.engine.seed},
      {"library",
       {{"param_lo", config.engine.library.param_lo},
        {"param_hi", config.engine.library.param_hi},
        {"population_base", config.engine.library.population_base},
        {"population_per_arity", config.engine.library.population_per_arity},
        {"generation_factor", config.engine.library.generation_factor},
        {"target_mse", config.engine.library.target_mse}}},
      {"gp",
       {{"population", config.engine.gp.population},
        {"generation_budget", config.engine.gp.generation_budget},
        {"target_mse", config.engine.gp.target_mse},
        {"tournament", config.engine.gp.tournament},
        {"crossover_rate", config.engine.gp.crossover_rate},
        {"max_initial_depth", config.engine.gp.max_initial_depth},
        {"max_depth", config.engine.gp.max_depth},
        {"max_nodes", config.engine.gp.max_nodes},
        {"stall_generations", config.engine.gp.stall_generations},
        {"stall_epsilon", config.engine.gp.stall_epsilon},
        {"constant_lo", config.engine.gp.constant_lo},
        {"constant_hi", config.engine.gp.constant_hi},
        {"max_seconds", config.engine.gp.max_seconds}}}};
  return j;
}

PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig config;
  config.seed = j.at("seed").get<std::uint64_t>();
  config.sample_count = j.at("sample_count").get<int>();
  config.validation_count = j.at("validation_count").get<int>();
  const auto& det = j.at("detection");
  config.detection.epsilon = det.at("epsilon").get<double>();
  config.detection.repetitions = det.at("repetitions").get<int>();
  config.detection.samples_per_test = det.at("samples_per_test").get<int>();
  config.detection.max_degenerate_redraws = det.at("max_degenerate_redraws").get<int>();
  config.detection.seed = det.at("seed").get<std::uint64_t>();
  const auto& eng = j.at("engine");
  config.engine.kind =
      eng.at("kind").get<std::string>() == "gp" ? EngineKind::Gp : EngineKind::Library;
  config.engine.seed = eng.at("seed").get<std::uint64_t>();
  const auto& lib = eng.at("library");
  config.engine.library.param_lo = lib.at("param_lo").get<double>();
  config.engine.library.param_hi = lib.at("param_hi").get<double>();
  config.engine.library.population_base = lib.at("population_base").get<int>();
  config.engine.library.population_per_arity = lib.at("population_per_arity").get<int>();
  config.engine.library.generation_factor = lib.at("generation_factor").get<int>();
  config.engine.library.target_mse = lib.at("target_mse").get<double>();
  const auto& gp = eng.at("gp");
  config.engine.gp.population = gp.at("population").get<int>();
  config.engine.gp.generation_budget = gp.at("generation_budget").get<long long>();
  config.engine.gp.target_mse = gp.at("target_mse").get<double>();
  config.engine.gp.tournament = gp.at("tournament").get<int>();
  config.engine.gp.crossover_rate = gp.at("crossover_rate").get<double>();
  config.engine.gp.max_initial_depth = gp.at("max_initial_depth").get<int>();
  config.engine.gp.max_depth = gp.at("max_depth").get<int>();
  config.engine.gp.max_nodes = gp.at("max_nodes").get<int>();
  config.engine.gp.stall_generations = gp.at("stall_generations").get<int>();
  config.engine.gp.stall_epsilon = gp.at("stall_epsilon").get<double>();
  config.engine.gp.constant_lo = gp.at("constant_lo").get<double>();
  config.engine.gp.constant_hi = gp.at("constant_hi").get<double>();
  config.engine.gp.max_seconds = gp.at("max_seconds").get<double>();
  return config;
}

double json_mse(const nlohmann::json& value) {
  return value.is_null() ? kInfiniteMse : value.get<double>();
}

std::string emit_json(const BenchReport& report) {
  nlohmann::json j;
  j["seed"] = report.seed;
  j["config"] = config_to_json(report.config);
  nlohmann::json rows = nlohmann::json::array();
  for (const CaseResult& c : report.cases) {
    nlohmann::json row;
    row["case"] = c.id;
    row["dim"] = c.dimension;
    row["domain"] = c.domain_text;
    row["samples"] = c.samples;
    row["ran"] = c.ran;
    row["error"] = c.error;
    row["structure_match"] = c.structure_match;
    row["mse"] = c.mse;
    row["t1"] = c.t1;
    row["t2"] = c.t2;
    row["t3"] = c.t3;
    row["t"] = c.t;
    row["ratio"] = c.ratio;
    row["note"] = c.note;
    if (c.direct_seconds) row["direct_seconds"] = *c.direct_seconds;
    if (c.eta) {
      row["eta"] = *c.eta;
      row["eta_lower_bound"] = c.eta_lower_bound;
    }
    rows.push_back(std::move(row));
  }
  j["cases"] = std::move(rows);
  return j.dump(2);
}

std::string emit_csv(const BenchReport& report) {
  std::string out = "case,dim,domain,samples,structure_match,mse,t1,t2,t3,t,ratio,eta\n";
  for (const CaseResult& c : report.cases) {
    char buf[512];
    const std::string eta =
        c.eta ? format_double(*c.eta, "%.10g") : std::string();
    std::snprintf(buf, sizeof buf, "%d,%d,\"%s\",%d,%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%s\n",
                  c.id, c.dimension, c.domain_text.c_str(), c.samples,
                  c.structure_match ? "true" : "false", c.mse, c.t1, c.t2, c.t3, c.t,
                  c.ratio, eta.c_str());
    out += buf;
  }
  return out;
}

std::string emit_table(const BenchReport& report) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-5s %-4s %-28s %-8s %-6s %-12s %-9s %-9s %-9s %-9s %-13s %-10s %s\n",
                "Case", "Dim", "Domain", "Samples", "Match", "MSE", "t1(s)", "t2(s)",
                "t3(s)", "t(s)", "T_d/T_BBP(%)", "eta", "Note");
  std::string out = buf;
  out += std::string(out.size() - 1, '-') + "\n";
  for (const CaseResult& c : report.cases) {
    std::string eta = "-";
    if (c.eta) eta = (c.eta_lower_bound ? ">" : "") + format_double(*c.eta, "%.3g");
    std::string note = c.note;
    if (!c.ran) note = note.empty() ? ("failed: " + c.error) : (note + "; failed: " + c.error);
    std::snprintf(buf, sizeof buf, "%-5d %-4d %-28s %-8d %-6s %-12.4g %-9.4f %-9.4f %-9.4f %-9.4f %-13.2f %-10s %s\n",
                  c.id, c.dimension, c.domain_text.c_str(), c.samples,
                  c.structure_match ? "yes" : "no", c.mse, c.t1, c.t2, c.t3, c.t,
                  c.ratio * 100.0, eta.c_str(), note.c_str());
    out += buf;
  }
  return out;
}

}  // namespace

const std::vector<TargetCase>& builtin_cases() {
  static const std::vector<TargetCase> cases = build_cases();
  return cases;
}

Oracle case_oracle(const TargetCase& c) {
  Oracle base = make_expression_oracle(c.expression, c.dimension);
  if (c.guard_denominator.empty()) return base;
  const Expr guard = c.guard_denominator;
  return [base = std::move(base), guard](const Matrix& x) {
    EvalResult r = base(x);
    const EvalResult g = evaluate(guard, x);
    for (std::size_t row = 0; row < x.rows(); ++row) {
      if (!r.valid[row]) continue;
      if (!g.valid[row] || std::abs(g.values[row]) < kDenominatorGuard) {
        r.valid[row] = 0;
        --r.valid_count;
      }
    }
    return r;
  };
}

std::string format_domain(const Box& box) {
  if (box.empty()) return "[]";
  const Interval& base = box[0];
  std::string out = format_interval(base) + "^" + std::to_string(box.size());
  std::string extras;
  for (std::size_t i = 1; i < box.size(); ++i) {
    if (box[i].lo == base.lo && box[i].hi == base.hi) continue;
    if (!extras.empty()) extras += ", ";
    extras += "x" + std::to_string(i + 1) + " in " + format_interval(box[i]);
  }
  if (!extras.empty()) out += " (" + extras + ")";
  return out;
}

BenchReport run_benchmark(std::span<const int> case_ids, const PipelineConfig& config,
                          bool with_direct) {
  if (with_direct && config.engine.kind != EngineKind::Gp)
    throw Error(Errc::InvalidInput, "the direct comparison requires the GP engine");
  const std::vector<TargetCase>& cases = builtin_cases();
  BenchReport report;
  report.seed = config.seed;
  report.config = config;
  for (int id : case_ids) {
    if (id < 1 || id > static_cast<int>(cases.size()))
      throw Error(Errc::InvalidInput, "case ids must lie in 1..10");
    const TargetCase& c = cases[static_cast<std::size_t>(id - 1)];

    PipelineConfig run = config;
    run.sample_count = case_samples(c, config);
    run.seed = derive_seed(config.seed, {kCaseStream, static_cast<std::uint64_t>(id)});

    CaseResult row;
    row.id = id;
    row.dimension = c.dimension;
    row.domain_text = format_domain(c.domain);
    row.samples = run.sample_count;
    row.note = c.note;
    try {
      const BBPResult result = run_bbp(case_oracle(c), c.domain, run);
      row.ran = true;
      row.structure_match = !result.model.structure.degenerate_constant &&
                            result.model.structure.same_partition(c.truth);
      row.mse = result.model.validation_mse;
      row.t1 = result.t1;
      row.t2 = result.t2;
      row.t3 = result.t3;
      row.t = result.t;
      row.ratio = result.t > 0.0 ? result.t1 / result.t : 0.0;
    } catch (const Error& e) {
      row.ran = false;
      row.error = e.what();
    }
    if (with_direct && row.ran) {
      try {
        const DirectRun direct = run_direct_gp(c, run);
        row.direct_seconds = direct.seconds;
        if (row.t > 0.0) {
          row.eta = direct.seconds / row.t;
          row.eta_lower_bound = !direct.converged;
        }
      } catch (const Error& e) {
        row.error = e.what();
      }
    }
    report.cases.push_back(std::move(row));
  }
  return report;
}

DirectComparison compare_direct(const TargetCase& c, const PipelineConfig& config) {
  if (config.engine.kind != EngineKind::Gp)
    throw Error(Errc::InvalidInput, "the direct comparison requires the GP engine");
  PipelineConfig run = config;
  run.sample_count = case_samples(c, config);
  run.seed = derive_seed(config.seed, {kCaseStream, static_cast<std::uint64_t>(c.id)});

  DirectComparison out;
  out.case_id = c.id;

  const DirectRun direct = run_direct_gp(c, run);
  out.direct_seconds = direct.seconds;
  out.direct_mse = direct.mse;
  out.direct_converged = direct.converged;

  const BBPResult result = run_bbp(case_oracle(c), c.domain, run);
  out.bbp_seconds = result.t;
  out.bbp_mse = result.model.validation_mse;
  out.bbp_converged = result.converged;

  out.eta = out.bbp_seconds > 0.0 ? out.direct_seconds / out.bbp_seconds : 0.0;
  out.eta_lower_bound = !direct.converged;
  return out;
}

std::string emit_report(const BenchReport& report, const std::string& format) {
  if (format == "json") return emit_json(report);
  if (format == "csv") return emit_csv(report);
  if (format == "table") return emit_table(report);
  throw Error(Errc::InvalidInput, "unknown report format: " + format);
}

BenchReport report_from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    BenchReport report;
    report.seed = j.at("seed").get<std::uint64_t>();
    report.config = config_from_json(j.at("config"));
    for (const auto& row : j.at("cases")) {
      CaseResult c;
      c.id = row.at("case").get<int>();
      c.dimension = row.at("dim").get<int>();
      c.domain_text = row.at("domain").get<std::string>();
      c.samples = row.at("samples").get<int>();
      c.ran = row.at("ran").get<bool>();
      c.error = row.at("error").get<std::string>();
      c.structure_match = row.at("structure_match").get<bool>();
      c.mse = json_mse(row.at("mse"));
      c.t1 = row.at("t1").get<double>();
      c.t2 = row.at("t2").get<double>();
      c.t3 = row.at("t3").get<double>();
      c.t = row.at("t").get<double>();
      c.ratio = row.at("ratio").get<double>();
      c.note = row.at("note").get<std::string>();
      if (row.contains("direct_seconds"))
        c.direct_seconds = row.at("direct_seconds").get<double>();
      if (row.contains("eta")) {
        c.eta = row.at("eta").get<double>();
        c.eta_lower_bound = row.value("eta_lower_bound", false);
      }
      report.cases.push_back(std::move(c));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("bad report json: ") + e.what());
  }
}

}  // namespace bbp
