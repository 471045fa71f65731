// GP engine: single-tree genetic programming over +,-,*,/,sin,cos,exp,ln with
// ephemeral constants. Fitness is the linear-scaling MSE (scale and optional
// intercept solved in closed form around the tree), individuals touching any
// invalid row score infinite, and a stalled run restarts with a fresh
// population until the total generation budget is spent. Every population is
// seeded with the bare and function-wrapped input variables plus a unit
// constant, so trivially shaped factors resolve in the first generation.

#include <algorithm>
#include <chrono>
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

constexpr UnaryOp kUnaryOps[] = {UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Ln};
constexpr BinaryOp kBinaryOps[] = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div};

int child_count(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::Unary:
      return 1;
    case NodeKind::Binary:
      return 2;
    default:
      return 0;
  }
}

// Pre-order subtree lookup; `index` counts down as nodes are passed.
Expr subtree_walk(const Expr& e, int& index) {
  if (index == 0) return e;
  --index;
  for (int c = 0; c < child_count(e); ++c) {
    Expr hit = subtree_walk(e.child(static_cast<std::size_t>(c)), index);
    if (!hit.empty()) return hit;
  }
  return Expr();
}

Expr subtree_at(const Expr& e, int index) { return subtree_walk(e, index); }

// Rebuild `e` with the node at pre-order `index` replaced by `repl`; only the
// spine above the splice point is copied, untouched branches are shared.
// `index` goes negative once the replacement has been made.
Expr replace_walk(const Expr& e, int& index, const Expr& repl) {
  if (index == 0) {
    index = -1;
    return repl;
  }
  --index;
  switch (e.kind()) {
    case NodeKind::Unary: {
      Expr child = replace_walk(e.child(0), index, repl);
      return index < 0 ? Expr::unary(e.unary_op(), std::move(child)) : e;
    }
    case NodeKind::Binary: {
      Expr lhs = replace_walk(e.child(0), index, repl);
      if (index < 0) return Expr::binary(e.binary_op(), std::move(lhs), e.child(1));
      Expr rhs = replace_walk(e.child(1), index, repl);
      if (index < 0) return Expr::binary(e.binary_op(), e.child(0), std::move(rhs));
      return e;
    }
    default:
      return e;
  }
}

Expr replace_at(const Expr& e, int index, const Expr& repl) {
  return replace_walk(e, index, repl);
}

Expr random_terminal(Rng& rng, int arity, const GpConfig& cfg) {
  if (rng.uniform() < 0.5) return Expr::variable(rng.uniform_int(0, arity - 1));
  return Expr::constant(rng.uniform(cfg.constant_lo, cfg.constant_hi));
}

// `full` forces internal nodes until the depth budget runs out; grow mode may
// stop early at a terminal.
Expr random_tree(Rng& rng, int depth_budget, int arity, const GpConfig& cfg, bool full) {
  if (depth_budget <= 1 || (!full && rng.uniform() < 0.3))
    return random_terminal(rng, arity, cfg);
  const int pick = rng.uniform_int(0, 7);
  if (pick < 4) {
    Expr lhs = random_tree(rng, depth_budget - 1, arity, cfg, full);
    Expr rhs = random_tree(rng, depth_budget - 1, arity, cfg, full);
    return Expr::binary(kBinaryOps[pick], std::move(lhs), std::move(rhs));
  }
  return Expr::unary(kUnaryOps[pick - 4],
                     random_tree(rng, depth_budget - 1, arity, cfg, full));
}

bool within_limits(const Expr& e, const GpConfig& cfg) {
  return e.depth() <= cfg.max_depth && e.node_count() <= cfg.max_nodes;
}

Expr crossover(Rng& rng, const Expr& a, const Expr& b, const GpConfig& cfg) {
  const int splice = rng.uniform_int(0, a.node_count() - 1);
  const int donor_index = rng.uniform_int(0, b.node_count() - 1);
  Expr child = replace_at(a, splice, subtree_at(b, donor_index));
  return within_limits(child, cfg) ? child : a;
}

Expr subtree_mutated(Rng& rng, const Expr& a, int arity, const GpConfig& cfg) {
  const int splice = rng.uniform_int(0, a.node_count() - 1);
  Expr child = replace_at(a, splice, random_tree(rng, 3, arity, cfg, false));
  return within_limits(child, cfg) ? child : a;
}

// Swap one node for a same-shape peer: perturb or redraw a constant, redraw a
// variable, or change an operator in place.
Expr point_mutated(Rng& rng, const Expr& a, int arity, const GpConfig& cfg) {
  const int target = rng.uniform_int(0, a.node_count() - 1);
  const Expr node = subtree_at(a, target);
  Expr fresh;
  switch (node.kind()) {
    case NodeKind::Constant:
      fresh = rng.uniform() < 0.25
                  ? Expr::constant(rng.uniform(cfg.constant_lo, cfg.constant_hi))
                  : Expr::constant(node.constant_value() + 0.3 * rng.normal());
      break;
    case NodeKind::Variable:
      fresh = Expr::variable(rng.uniform_int(0, arity - 1));
      break;
    case NodeKind::Unary:
      fresh = Expr::unary(kUnaryOps[rng.uniform_int(0, 3)], node.child(0));
      break;
    case NodeKind::Binary:
      fresh = Expr::binary(kBinaryOps[rng.uniform_int(0, 3)], node.child(0), node.child(1));
      break;
    case NodeKind::Parameter:
      return a;  // GP trees never carry parameter slots
  }
  return replace_at(a, target, fresh);
}

struct Scored {
  Expr tree;
  LinearFit fit;
};

LinearFit assess(const Expr& tree, const Matrix& x, std::span<const double> y, FitMode mode) {
  const EvalResult res = evaluate(tree, x);
  if (res.valid_count != x.rows()) return LinearFit{};  // any invalid row: infinite fitness
  return solve_linear(res.values, y, mode);
}

std::size_t population_best(const std::vector<Scored>& pop) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (pop[i].fit.mse < pop[best].fit.mse) best = i;
  return best;
}

std::size_t tournament_pick(Rng& rng, const std::vector<Scored>& pop, int rounds) {
  auto pick = [&] { return static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(pop.size()) - 1)); };
  std::size_t best = pick();
  for (int i = 1; i < rounds; ++i) {
    const std::size_t c = pick();
    if (pop[c].fit.mse < pop[best].fit.mse) best = c;
  }
  return best;
}

// Hand-picked starters present in every fresh population: each variable bare
// and wrapped in each unary, plus a unit constant so constant targets resolve
// immediately.
void inject_primitives(std::vector<Expr>& trees, int arity, std::size_t cap) {
  auto push = [&](Expr e) {
    if (trees.size() < cap) trees.push_back(std::move(e));
  };
  push(Expr::constant(1.0));
  for (int v = 0; v < arity; ++v) push(Expr::variable(v));
  for (UnaryOp u : kUnaryOps)
    for (int v = 0; v < arity; ++v) push(Expr::unary(u, Expr::variable(v)));
}

}  // namespace

FactorModel fit_gp(const Matrix& x, std::span<const double> y, FitMode mode,
                   const EngineConfig& config) {
  const std::size_t rows = x.rows();
  const int arity = static_cast<int>(x.cols());
  if (arity == 0) throw Error(Errc::InvalidInput, "empty sample");
  if (y.size() != rows) throw Error(Errc::InvalidInput, "response length does not match sample");
  if (rows < 10)
    throw Error(Errc::InsufficientData,
                "tree search needs at least 10 rows; got " + std::to_string(rows));
  const GpConfig& cfg = config.gp;
  if (cfg.population < 4) throw Error(Errc::InvalidInput, "population must be at least 4");
  if (cfg.max_depth < cfg.max_initial_depth || cfg.max_initial_depth < 2)
    throw Error(Errc::InvalidInput, "depth limits are inconsistent");
  if (!(cfg.target_mse > 0.0)) throw Error(Errc::InvalidInput, "target tolerance must be positive");
  const int tournament = std::clamp(cfg.tournament, 1, cfg.population);

  Rng rng(derive_seed(config.seed, {0x6b9e2ed5a11ULL}));
  const auto started = std::chrono::steady_clock::now();
  const auto out_of_time = [&] {
    if (cfg.max_seconds <= 0.0) return false;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
    return elapsed.count() >= cfg.max_seconds;
  };

  FactorModel out;
  out.engine = "gp";
  Scored champion;  // best ever, across restarts
  long long used = 0;
  bool stop = false;

  while (!stop && used < cfg.generation_budget) {
    ++out.attempts;

    // Fresh population: injected starters, then ramped half-and-half.
    std::vector<Expr> trees;
    trees.reserve(static_cast<std::size_t>(cfg.population));
    inject_primitives(trees, arity, static_cast<std::size_t>(cfg.population));
    const int depth_span = cfg.max_initial_depth - 1;  // depths 2..max_initial_depth
    for (int i = 0; trees.size() < static_cast<std::size_t>(cfg.population); ++i) {
      const int depth = 2 + i % depth_span;
      trees.push_back(random_tree(rng, depth, arity, cfg, (i / depth_span) % 2 == 0));
    }
    std::vector<Scored> pop(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i) {
      pop[i].tree = std::move(trees[i]);
      pop[i].fit = assess(pop[i].tree, x, y, mode);
    }
    ++used;  // the initial evaluation spends one generation of budget

    std::size_t leader = population_best(pop);
    if (champion.tree.empty() || pop[leader].fit.mse < champion.fit.mse) champion = pop[leader];
    out.best_history.push_back(champion.fit.mse);
    if (champion.fit.mse <= cfg.target_mse || out_of_time()) break;

    double run_best = pop[leader].fit.mse;
    int stall = 0;
    while (used < cfg.generation_budget) {
      std::vector<Scored> next;
      next.reserve(pop.size());
      next.push_back(pop[leader]);  // elite
      while (next.size() < pop.size()) {
        const Scored& first = pop[tournament_pick(rng, pop, tournament)];
        Expr child;
        if (rng.uniform() < cfg.crossover_rate) {
          const Scored& second = pop[tournament_pick(rng, pop, tournament)];
          child = crossover(rng, first.tree, second.tree, cfg);
        } else if (rng.uniform() < 0.5) {
          child = subtree_mutated(rng, first.tree, arity, cfg);
        } else {
          child = point_mutated(rng, first.tree, arity, cfg);
        }
        Scored scored;
        scored.fit = assess(child, x, y, mode);
        scored.tree = std::move(child);
        next.push_back(std::move(scored));
      }
      pop = std::move(next);
      ++used;
      leader = population_best(pop);
      if (pop[leader].fit.mse < champion.fit.mse) champion = pop[leader];
      out.best_history.push_back(champion.fit.mse);
      if (champion.fit.mse <= cfg.target_mse || out_of_time()) {
        stop = true;
        break;
      }
      // Elitism keeps the run's best in the population, so this difference
      // is the run's improvement since the stall window began.
      if (run_best - pop[leader].fit.mse > cfg.stall_epsilon) {
        run_best = pop[leader].fit.mse;
        stall = 0;
      } else if (++stall >= cfg.stall_generations) {
        break;  // restart with a fresh population
      }
    }
  }

  out.expression = champion.tree;
  out.scale = champion.fit.scale;
  out.intercept = champion.fit.intercept;
  out.mse = champion.fit.mse;
  out.converged = champion.fit.mse <= cfg.target_mse;
  out.generations = used;
  return out;
}

}  // namespace bbp
