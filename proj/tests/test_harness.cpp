#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "bbp/error.hpp"
#include "bbp/harness.hpp"
#include "bbp/separability.hpp"

using namespace bbp;

namespace {

std::optional<Errc> error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

Matrix single_row(std::vector<double> values) {
  Matrix m(1, values.size());
  for (std::size_t c = 0; c < values.size(); ++c) m.at(0, c) = values[c];
  return m;
}

PipelineConfig tiny_gp_config() {
  PipelineConfig config;
  config.engine.kind = EngineKind::Gp;
  config.engine.gp.population = 40;
  config.engine.gp.generation_budget = 10;
  config.sample_count = 120;
  config.validation_count = 200;
  return config;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("builtin cases are ten audited fixtures") {
  const auto& cases = builtin_cases();
  REQUIRE(cases.size() == 10);
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const TargetCase& c = cases[i];
    CAPTURE(c.id);
    CHECK(c.id == static_cast<int>(i) + 1);
    CHECK(c.dimension >= 3);
    CHECK(c.expression.max_variable_index() == c.dimension - 1);
    CHECK(c.domain.size() == static_cast<std::size_t>(c.dimension));
    CHECK(c.sample_count > 0);
    CHECK(c.truth.dimension == c.dimension);
    CHECK_NOTHROW(c.truth.validate());
    CHECK(!c.truth.degenerate_constant);
    CHECK(c.beta.size() == c.truth.blocks.size() + 1);
    // The fixture partitions are stored canonically.
    SeparableStructure copy = c.truth;
    copy.canonicalize();
    CHECK(copy.blocks == c.truth.blocks);
  }

  // Guarded denominators exist exactly where the target divides by a variable
  // expression that can vanish inside the box.
  for (const TargetCase& c : cases) {
    const bool guarded = c.id == 4 || c.id == 7 || c.id == 10;
    CHECK(c.guard_denominator.empty() == !guarded);
  }
}

TEST_CASE("case fixtures match their published definitions") {
  const auto& cases = builtin_cases();

  SUBCASE("case 3 splits into two coupled pair blocks") {
    const TargetCase& c = cases[2];
    const std::vector<std::vector<std::vector<int>>> want = {{{0, 1}}, {{2, 3}}};
    CHECK(c.truth.blocks == want);
    CHECK(c.dimension == 4);
  }

  SUBCASE("case 5 prints in its canonical form") {
    const TargetCase& c = cases[4];
    CHECK(to_string(c.expression) == "2 * x1 * sin(x2 + x3) - cos(x4)");
    const std::vector<std::vector<std::vector<int>>> want = {{{0}, {1, 2}}, {{3}}};
    CHECK(c.truth.blocks == want);
    CHECK(c.beta == std::vector<double>{0.0, 2.0, -1.0});
  }

  SUBCASE("case 7 uses the five-dimensional symmetric box with 500 samples") {
    const TargetCase& c = cases[6];
    CHECK(c.dimension == 5);
    CHECK(c.sample_count == 500);
    CHECK(format_domain(c.domain) == "[-3,3]^5");
    const std::vector<std::vector<std::vector<int>>> want = {{{0, 1}, {2}, {3, 4}}};
    CHECK(c.truth.blocks == want);
  }

  SUBCASE("case 6 keeps 300 samples at dimension five and says why") {
    const TargetCase& c = cases[5];
    CHECK(c.dimension == 5);
    CHECK(c.sample_count == 300);
    CHECK(format_domain(c.domain) == "[1,4]^5");
    CHECK(!c.note.empty());
  }

  SUBCASE("case 9 narrows x2 to keep the fractional power real") {
    const TargetCase& c = cases[8];
    CHECK(c.domain[1].lo == doctest::Approx(0.1));
    CHECK(c.domain[1].hi == doctest::Approx(3.0));
    CHECK(format_domain(c.domain) == "[-3,3]^6 (x2 in [0.1,3])");
    CHECK(!c.note.empty());
  }
}

TEST_CASE("case oracle marks near-singular denominators invalid") {
  const auto& cases = builtin_cases();

  SUBCASE("case 10 guards x3") {
    const Oracle oracle = case_oracle(cases[9]);
    Matrix x(2, 6);
    const double row0[] = {1.0, 2.0, 1e-9, 0.5, 1.0, 1.0};
    const double row1[] = {1.0, 2.0, 0.5, 0.5, 1.0, 1.0};
    for (std::size_t c = 0; c < 6; ++c) {
      x.at(0, c) = row0[c];
      x.at(1, c) = row1[c];
    }
    const EvalResult r = oracle(x);
    CHECK(r.valid[0] == 0);
    CHECK(r.valid[1] == 1);
    CHECK(r.valid_count == 1);
    const double expected = (1.0 + 2.0) / 0.5 + 0.5 * std::sin(1.0);
    CHECK(r.values[1] == doctest::Approx(expected).epsilon(1e-12));
  }

  SUBCASE("case 4 guards the x3 + x4 sum even when both parts are large") {
    const Oracle oracle = case_oracle(cases[3]);
    const EvalResult r = oracle(single_row({1.0, 1.0, 2.0, -2.0 + 5e-4}));
    CHECK(r.valid[0] == 0);
    CHECK(r.valid_count == 0);
  }

  SUBCASE("unguarded cases pass plain rows through") {
    const Oracle oracle = case_oracle(cases[0]);
    const EvalResult r = oracle(single_row({0.5, 1.0, -0.5}));
    CHECK(r.valid[0] == 1);
    const double expected = 1.2 + 10.0 * std::sin(2.0 * 0.5 + 0.5) - 3.0;
    CHECK(r.values[0] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("format_domain summarizes boxes compactly") {
  CHECK(format_domain({}) == "[]");
  CHECK(format_domain({{-3.0, 3.0}, {-3.0, 3.0}}) == "[-3,3]^2");
  CHECK(format_domain({{1.0, 4.0}}) == "[1,4]^1");
  Box mixed = {{-3.0, 3.0}, {0.1, 3.0}, {-3.0, 3.0}, {-2.0, 2.0}};
  CHECK(format_domain(mixed) == "[-3,3]^4 (x2 in [0.1,3], x4 in [-2,2])");
}

TEST_CASE("run_benchmark validates its input") {
  PipelineConfig config;

  SUBCASE("empty id list gives an empty report") {
    const BenchReport report = run_benchmark({}, config);
    CHECK(report.cases.empty());
    CHECK(report.seed == config.seed);
  }

  SUBCASE("ids outside 1..10 are rejected") {
    const std::vector<int> zero = {0};
    const std::vector<int> eleven = {11};
    CHECK(error_code_of([&] { run_benchmark(zero, config); }) == Errc::InvalidInput);
    CHECK(error_code_of([&] { run_benchmark(eleven, config); }) == Errc::InvalidInput);
  }

  SUBCASE("the direct comparison needs the GP engine") {
    const std::vector<int> ids = {2};
    CHECK(config.engine.kind == EngineKind::Library);
    CHECK(error_code_of([&] { run_benchmark(ids, config, true); }) == Errc::InvalidInput);
  }
}

TEST_CASE("library benchmark recovers the easy cases deterministically") {
  PipelineConfig config;
  const std::vector<int> ids = {1, 2};
  const BenchReport first = run_benchmark(ids, config);
  const BenchReport second = run_benchmark(ids, config);
  REQUIRE(first.cases.size() == 2);
  REQUIRE(second.cases.size() == 2);

  for (std::size_t i = 0; i < first.cases.size(); ++i) {
    const CaseResult& row = first.cases[i];
    CAPTURE(row.id);
    CHECK(row.ran);
    CHECK(row.error.empty());
    CHECK(row.structure_match);
    CHECK(row.mse <= 1e-6);
    CHECK(row.ratio >= 0.0);
    CHECK(row.ratio <= 1.0);
    CHECK(row.t == row.t1 + row.t2 + row.t3);
    // Factor modelling dominates detection and assembly on library runs.
    CHECK(row.t2 >= row.t1);
    CHECK(row.t2 >= row.t3);
    CHECK(!row.eta.has_value());
    CHECK(!row.direct_seconds.has_value());

    // Seed-derived outcomes are bitwise reproducible; wall times are not.
    const CaseResult& again = second.cases[i];
    CHECK(row.mse == again.mse);
    CHECK(row.structure_match == again.structure_match);
    CHECK(row.samples == again.samples);
  }

  CHECK(first.cases[0].samples == 300);
  CHECK(first.cases[1].samples == 300);

  SUBCASE("an explicit sample count overrides the per-case default") {
    PipelineConfig small = config;
    small.sample_count = 150;
    const std::vector<int> one = {1};
    const BenchReport report = run_benchmark(one, small);
    CHECK(report.cases[0].samples == 150);
  }
}

TEST_CASE("detection recovers the published partition of every case") {
  for (const TargetCase& c : builtin_cases()) {
    CAPTURE(c.id);
    DetectionConfig config;  // default seed and thresholds
    const SeparableStructure found = detect_structure(case_oracle(c), c.domain, config);
    CHECK(!found.degenerate_constant);
    CHECK(found.same_partition(c.truth));
  }
}

TEST_CASE("compare_direct requires the GP engine") {
  PipelineConfig library;
  CHECK(error_code_of([&] { compare_direct(builtin_cases()[1], library); }) ==
        Errc::InvalidInput);
}

TEST_CASE("compare_direct prices block building against a whole-target run") {
  const TargetCase& c = builtin_cases()[1];  // three one-variable factors
  const PipelineConfig config = tiny_gp_config();

  const DirectComparison out = compare_direct(c, config);
  CHECK(out.case_id == 2);
  CHECK(out.direct_seconds > 0.0);
  CHECK(out.bbp_seconds > 0.0);
  CHECK(out.bbp_converged);
  CHECK(out.bbp_mse <= config.engine.gp.target_mse);
  // A 20x budget on the raw target still costs far more wall clock than the
  // factor-wise runs, which close out in a handful of generations each.
  CHECK(out.eta > 1.0);
  CHECK(out.eta_lower_bound == !out.direct_converged);

  // Seed-derived outcomes repeat exactly.
  const DirectComparison again = compare_direct(c, config);
  CHECK(out.direct_mse == again.direct_mse);
  CHECK(out.bbp_mse == again.bbp_mse);
  CHECK(out.direct_converged == again.direct_converged);
}

TEST_CASE("run_benchmark can attach the direct comparison per case") {
  const PipelineConfig config = tiny_gp_config();
  const std::vector<int> ids = {2};
  const BenchReport report = run_benchmark(ids, config, true);
  REQUIRE(report.cases.size() == 1);
  const CaseResult& row = report.cases[0];
  CHECK(row.ran);
  REQUIRE(row.direct_seconds.has_value());
  REQUIRE(row.eta.has_value());
  CHECK(*row.direct_seconds > 0.0);
  CHECK(*row.eta > 0.0);
}

TEST_CASE("emit_report covers json, csv and table") {
  BenchReport report;
  report.seed = 99;
  report.config.engine.kind = EngineKind::Gp;
  report.config.engine.gp.population = 64;
  report.config.sample_count = 250;

  CaseResult ok;
  ok.id = 4;
  ok.dimension = 4;
  ok.domain_text = "[-3,3]^4";
  ok.samples = 400;
  ok.ran = true;
  ok.structure_match = true;
  ok.mse = 2.5e-9;
  ok.t1 = 0.25;
  ok.t2 = 8.0;
  ok.t3 = 0.75;
  ok.t = 9.0;
  ok.ratio = 0.25 / 9.0;
  ok.direct_seconds = 120.0;
  ok.eta = 120.0 / 9.0;
  ok.eta_lower_bound = true;

  CaseResult failed;
  failed.id = 9;
  failed.dimension = 6;
  failed.domain_text = "[-3,3]^6 (x2 in [0.1,3])";
  failed.samples = 600;
  failed.ran = false;
  failed.error = "factor response carried no signal";
  failed.note = "x2 restricted to [0.1, 3] so x2^1.2 stays real";

  report.cases = {ok, failed};

  SUBCASE("unknown formats are rejected") {
    CHECK(error_code_of([&] { emit_report(report, "xml"); }) == Errc::InvalidInput);
  }

  SUBCASE("csv uses the fixed header and quotes the domain") {
    const std::string csv = emit_report(report, "csv");
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header == "case,dim,domain,samples,structure_match,mse,t1,t2,t3,t,ratio,eta");
    CHECK(csv.find("\"[-3,3]^4\"") != std::string::npos);
    CHECK(csv.find("\"[-3,3]^6 (x2 in [0.1,3])\"") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
    // The failed case has no eta: its row ends on an empty final field.
    const std::string tail = csv.substr(csv.rfind(',') + 1);
    CHECK(tail == "\n");
    // An unfinished run shows an infinite error.
    CHECK(csv.find(",inf,") != std::string::npos);
  }

  SUBCASE("the table carries the timing-ratio column and flags bounds") {
    const std::string table = emit_report(report, "table");
    CHECK(table.find("T_d/T_BBP(%)") != std::string::npos);
    CHECK(table.find(">13.3") != std::string::npos);  // capped direct run: eta is a floor
    CHECK(table.find("failed: factor response carried no signal") != std::string::npos);
  }

  SUBCASE("json round-trips losslessly") {
    const std::string once = emit_report(report, "json");
    const BenchReport parsed = report_from_json(once);
    const std::string twice = emit_report(parsed, "json");
    CHECK(once == twice);

    REQUIRE(parsed.cases.size() == 2);
    CHECK(parsed.seed == 99);
    CHECK(parsed.config.engine.kind == EngineKind::Gp);
    CHECK(parsed.config.engine.gp.population == 64);
    CHECK(parsed.config.sample_count == 250);
    CHECK(parsed.cases[0].eta.has_value());
    CHECK(*parsed.cases[0].eta == *ok.eta);
    CHECK(parsed.cases[0].eta_lower_bound);
    CHECK(parsed.cases[0].mse == ok.mse);
    CHECK(!parsed.cases[1].ran);
    CHECK(std::isinf(parsed.cases[1].mse));
    CHECK(parsed.cases[1].error == failed.error);
    CHECK(!parsed.cases[1].eta.has_value());
  }

  SUBCASE("malformed report json raises a parse error") {
    CHECK(error_code_of([&] { report_from_json("{"); }) == Errc::ParseError);
    CHECK(error_code_of([&] { report_from_json("{}"); }) == Errc::ParseError);
  }
}

}  // TEST_SUITE
