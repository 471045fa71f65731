// bbp — symbolic regression by block building.
//
// Subcommands
//   fit     run the full pipeline on a parsed target expression
//   detect  report the additive/multiplicative partition only
//   bench   run the built-in benchmark cases and emit a report
//
// A JSON config file (--config) may supply any flag by its long name;
// explicit command-line flags override file values. Exit codes: 0 success,
// 2 below-tolerance result, 3 invalid input, 4 internal failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbp/error.hpp"
#include "bbp/harness.hpp"
#include "bbp/pipeline.hpp"
#include "bbp/separability.hpp"

namespace {

using bbp::Errc;
using bbp::Error;

constexpr int kExitSuccess = 0;
constexpr int kExitBelowTolerance = 2;
constexpr int kExitInvalidInput = 3;
constexpr int kExitInternal = 4;

constexpr std::uint64_t kDefaultSeed = 1729;

// Values shared by the subcommands; zero/empty means "not provided" only
// where the comment says so.
struct Options {
  std::string config_path;
  std::string target;
  int dim = 0;
  std::string domain;       // "a,b"
  std::string engine = "library";
  double eps = 0.0;         // 0 = keep the engine's own default target
  int samples = 0;          // 0 = pipeline default (100 per dimension)
  std::uint64_t seed = kDefaultSeed;
  std::string out;
  std::string cases = "1-10";
  std::string format = "table";
  bool compare_direct = false;
};

// Fill flags the command line left unset from the JSON config file.
class ConfigOverlay {
public:
  ConfigOverlay(const CLI::App& cmd, const std::string& path) : cmd_(cmd) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw Error(Errc::InvalidInput, "cannot open config file: " + path);
    try {
      in >> json_;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, "bad config json: " + std::string(e.what()));
    }
    if (!json_.is_object())
      throw Error(Errc::InvalidInput, "config file must hold a JSON object");
  }

  template <typename T>
  void fill(const std::string& flag, T& value) const {
    const std::string key = flag.substr(2);  // strip the leading "--"
    if (cmd_.count(flag) > 0 || !json_.contains(key)) return;
    try {
      value = json_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw Error(Errc::InvalidInput, "config key '" + key + "' has the wrong type");
    }
  }

  bool provided(const std::string& flag) const {
    return cmd_.count(flag) > 0 || json_.contains(flag.substr(2));
  }

private:
  const CLI::App& cmd_;
  nlohmann::json json_ = nlohmann::json::object();
};

bbp::Interval parse_domain(const std::string& text) {
  const std::size_t comma = text.find(',');
  if (comma == std::string::npos)
    throw Error(Errc::InvalidInput, "--domain expects two comma-separated bounds, e.g. -3,3");
  bbp::Interval iv{};
  try {
    std::size_t used = 0;
    iv.lo = std::stod(text.substr(0, comma), &used);
    if (used != comma) throw std::invalid_argument("trailing text");
    const std::string hi = text.substr(comma + 1);
    iv.hi = std::stod(hi, &used);
    if (used != hi.size()) throw std::invalid_argument("trailing text");
  } catch (const std::exception&) {
    throw Error(Errc::InvalidInput, "--domain bounds must be numbers: " + text);
  }
  if (!(iv.lo < iv.hi))
    throw Error(Errc::InvalidInput, "--domain lower bound must be below the upper bound");
  return iv;
}

std::vector<int> parse_cases(const std::string& text) {
  std::vector<int> ids;
  std::stringstream stream(text);
  std::string token;
  const auto to_id = [](const std::string& s) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument("trailing text");
      return v;
    } catch (const std::exception&) {
      throw Error(Errc::InvalidInput, "--cases expects numbers or ranges like 1,3,5-7");
    }
  };
  while (std::getline(stream, token, ',')) {
    if (token.empty())
      throw Error(Errc::InvalidInput, "--cases has an empty entry: " + text);
    const std::size_t dash = token.find('-');
    if (dash == std::string::npos) {
      ids.push_back(to_id(token));
      continue;
    }
    const int lo = to_id(token.substr(0, dash));
    const int hi = to_id(token.substr(dash + 1));
    if (lo > hi) throw Error(Errc::InvalidInput, "--cases range is reversed: " + token);
    for (int id = lo; id <= hi; ++id) ids.push_back(id);
  }
  if (ids.empty()) throw Error(Errc::InvalidInput, "--cases selected nothing");
  return ids;
}

void require(const ConfigOverlay& overlay, const std::string& flag) {
  if (!overlay.provided(flag))
    throw Error(Errc::InvalidInput, flag + " is required (flag or config file)");
}

bbp::Expr parse_target(const std::string& text, int dim) {
  if (dim <= 0) throw Error(Errc::InvalidInput, "--dim must be positive");
  const bbp::Expr target = bbp::parse_expression(text);
  if (target.max_variable_index() >= dim)
    throw Error(Errc::InvalidInput,
                "target references x" + std::to_string(target.max_variable_index() + 1) +
                    " beyond --dim " + std::to_string(dim));
  return target;
}

bbp::PipelineConfig pipeline_config(const Options& o) {
  bbp::PipelineConfig config;
  config.seed = o.seed;
  config.sample_count = o.samples;
  if (o.engine == "gp") config.engine.kind = bbp::EngineKind::Gp;
  if (o.eps > 0.0) {
    config.engine.library.target_mse = o.eps;
    config.engine.gp.target_mse = o.eps;
  } else if (o.eps < 0.0) {
    throw Error(Errc::InvalidInput, "--eps must be positive");
  }
  return config;
}

int run_fit(const Options& o) {
  const bbp::Expr target = parse_target(o.target, o.dim);
  const bbp::Box box(static_cast<std::size_t>(o.dim), parse_domain(o.domain));
  const bbp::PipelineConfig config = pipeline_config(o);

  const bbp::BBPResult result =
      bbp::run_bbp(bbp::make_expression_oracle(target, o.dim), box, config);
  const std::string json = bbp::bbp_result_to_json(result);

  if (o.out.empty()) {
    std::cout << json << "\n";
  } else {
    std::ofstream out(o.out);
    if (!out) throw Error(Errc::InvalidInput, "cannot write report file: " + o.out);
    out << json << "\n";
    std::cout << "model: " << bbp::to_string(bbp::flattened_expression(result.model)) << "\n";
    std::cout << "validation mse " << result.model.validation_mse << " ("
              << (result.converged ? "converged" : "below tolerance") << ") -> " << o.out
              << "\n";
  }
  return result.converged ? kExitSuccess : kExitBelowTolerance;
}

int run_detect(const Options& o) {
  const bbp::Expr target = parse_target(o.target, o.dim);
  const bbp::Box box(static_cast<std::size_t>(o.dim), parse_domain(o.domain));

  bbp::DetectionConfig config;
  config.seed = o.seed;
  const bbp::SeparableStructure structure =
      bbp::detect_structure(bbp::make_expression_oracle(target, o.dim), box, config);

  std::cout << "classification: " << bbp::to_string(structure.classification()) << "\n";
  if (structure.degenerate_constant)
    std::cout << "note: target is constant on the box; the partition below is formal\n";
  for (std::size_t b = 0; b < structure.blocks.size(); ++b) {
    std::cout << "block " << b + 1 << ": ";
    for (std::size_t f = 0; f < structure.blocks[b].size(); ++f) {
      if (f > 0) std::cout << " * ";
      std::cout << "{";
      for (std::size_t v = 0; v < structure.blocks[b][f].size(); ++v) {
        if (v > 0) std::cout << ", ";
        std::cout << "x" << structure.blocks[b][f][v] + 1;
      }
      std::cout << "}";
    }
    std::cout << "\n";
  }
  return kExitSuccess;
}

int run_bench(const Options& o) {
  const std::vector<int> ids = parse_cases(o.cases);
  const bbp::PipelineConfig config = pipeline_config(o);

  const bbp::BenchReport report = bbp::run_benchmark(ids, config, o.compare_direct);
  std::cout << bbp::emit_report(report, o.format);

  const double target = bbp::engine_target(config.engine);
  for (const bbp::CaseResult& row : report.cases)
    if (!row.ran || row.mse > target) return kExitBelowTolerance;
  return kExitSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbolic regression by block building"};
  app.require_subcommand(1);

  Options o;

  const auto add_common = [&o](CLI::App* cmd) {
    cmd->add_option("--config", o.config_path, "JSON file supplying any flag; flags override");
    cmd->add_option("--seed", o.seed, "RNG seed (fixed default keeps runs reproducible)");
  };
  const auto add_target = [&o](CLI::App* cmd) {
    cmd->add_option("--target", o.target, "target expression, e.g. \"sin(x1) * x2\"");
    cmd->add_option("--dim", o.dim, "number of input variables");
    cmd->add_option("--domain", o.domain, "sampling interval a,b applied to every variable");
  };
  const auto add_engine = [&o](CLI::App* cmd) {
    cmd->add_option("--engine", o.engine, "factor modelling engine")
        ->check(CLI::IsMember({"library", "gp"}));
  };

  CLI::App* fit = app.add_subcommand("fit", "Fit a model to a target expression");
  add_common(fit);
  add_target(fit);
  add_engine(fit);
  fit->add_option("--eps", o.eps, "target validation MSE (engine default when omitted)");
  fit->add_option("--samples", o.samples, "training sample count (default 100 per dimension)");
  fit->add_option("--out", o.out, "write the JSON report here instead of stdout");

  CLI::App* detect = app.add_subcommand("detect", "Print the detected block/factor partition");
  add_common(detect);
  add_target(detect);

  CLI::App* bench = app.add_subcommand("bench", "Run the built-in benchmark cases");
  add_common(bench);
  add_engine(bench);
  bench->add_option("--cases", o.cases, "case ids, e.g. 1,3,5-7 (default 1-10)");
  bench->add_option("--format", o.format, "report format")
      ->check(CLI::IsMember({"json", "csv", "table"}));
  bench->add_flag("--compare-direct", o.compare_direct,
                  "also time a whole-target GP run and report the speed ratio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitSuccess : kExitInvalidInput;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const ConfigOverlay overlay(*cmd, o.config_path);
    overlay.fill("--seed", o.seed);
    if (cmd == fit || cmd == detect) {
      overlay.fill("--target", o.target);
      overlay.fill("--dim", o.dim);
      overlay.fill("--domain", o.domain);
      require(overlay, "--target");
      require(overlay, "--dim");
      require(overlay, "--domain");
    }
    if (cmd == fit) {
      overlay.fill("--engine", o.engine);
      overlay.fill("--eps", o.eps);
      overlay.fill("--samples", o.samples);
      overlay.fill("--out", o.out);
      return run_fit(o);
    }
    if (cmd == detect) return run_detect(o);
    overlay.fill("--engine", o.engine);
    overlay.fill("--cases", o.cases);
    overlay.fill("--format", o.format);
    overlay.fill("--compare-direct", o.compare_direct);
    return run_bench(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.code()) {
      case Errc::InvalidInput:
      case Errc::ParseError:
        return kExitInvalidInput;
      case Errc::DegenerateData:
      case Errc::InsufficientData:
        return kExitBelowTolerance;
      default:
        return kExitInternal;
    }
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
