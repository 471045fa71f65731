#include "bbp/separability.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>

#include "bbp/sampling.hpp"

namespace bbp {
namespace {

constexpr double kTinyDenominator = 1e-300;
constexpr std::size_t kMinUsableRows = 10;

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stdev_of(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double correlation = 0.0;
};

// Ordinary least squares of y on x plus the Pearson correlation.
LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  const double mx = mean_of(x);
  const double my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  LineFit fit;
  fit.slope = sxy / (sxx + kTinyDenominator);
  fit.intercept = my - fit.slope * mx;
  fit.correlation = sxy / (std::sqrt(sxx * syy) + kTinyDenominator);
  return fit;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[static_cast<std::size_t>(a)] != a) {
      parent[static_cast<std::size_t>(a)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
      a = parent[static_cast<std::size_t>(a)];
    }
    return a;
  }
  void unite(int a, int b) { parent[static_cast<std::size_t>(find(a))] = find(b); }
  std::vector<std::vector<int>> groups() {
    std::vector<std::vector<int>> out;
    std::vector<int> root_slot(parent.size(), -1);
    for (int v = 0; v < static_cast<int>(parent.size()); ++v) {
      const int r = find(v);
      if (root_slot[static_cast<std::size_t>(r)] < 0) {
        root_slot[static_cast<std::size_t>(r)] = static_cast<int>(out.size());
        out.emplace_back();
      }
      out[static_cast<std::size_t>(root_slot[static_cast<std::size_t>(r)])].push_back(v);
    }
    return out;
  }
};

// Everything a single anchored probe needs: a fresh sample of the left
// variables and one full-width matrix per anchor of the right variables,
// with remaining variables pinned at a shared context point.
struct SliceSet {
  std::vector<std::vector<double>> f;  // one response vector per anchor, same rows
  std::size_t rows = 0;
};

std::vector<int> complement_of(int dimension, std::span<const int> left,
                               std::span<const int> right) {
  std::vector<char> used(static_cast<std::size_t>(dimension), 0);
  for (int v : left) used[static_cast<std::size_t>(v)] = 1;
  for (int v : right) used[static_cast<std::size_t>(v)] = 1;
  std::vector<int> out;
  for (int v = 0; v < dimension; ++v)
    if (!used[static_cast<std::size_t>(v)]) out.push_back(v);
  return out;
}

void check_groups(int dimension, std::span<const int> left, std::span<const int> right) {
  if (left.empty() || right.empty())
    throw Error(Errc::InvalidInput, "split test needs two non-empty variable groups");
  std::vector<char> used(static_cast<std::size_t>(dimension), 0);
  for (int v : left) {
    if (v < 0 || v >= dimension) throw Error(Errc::InvalidInput, "variable index out of range");
    if (used[static_cast<std::size_t>(v)]++)
      throw Error(Errc::InvalidInput, "variable groups overlap");
  }
  for (int v : right) {
    if (v < 0 || v >= dimension) throw Error(Errc::InvalidInput, "variable index out of range");
    if (used[static_cast<std::size_t>(v)]++)
      throw Error(Errc::InvalidInput, "variable groups overlap");
  }
}

// An anchor for `columns` that differs from every vector in `avoid` in at
// least one coordinate. Exact collisions have probability zero; the loop is
// a guard against pathological boxes.
std::vector<double> draw_distinct_anchor(const Box& box, std::span<const int> columns, Rng& rng,
                                         const std::vector<std::vector<double>>& avoid) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto a = draw_central_anchor(box, columns, rng);
    bool clash = false;
    for (const auto& other : avoid)
      if (other == a) clash = true;
    if (!clash) return a;
  }
  throw Error(Errc::DegenerateData, "could not draw distinct anchors");
}

// Evaluate the oracle on one matrix per right-anchor, sharing the left sample
// and context, and keep only rows valid under every anchor.
SliceSet probe_slices(const Oracle& oracle, const Box& box, std::span<const int> left,
                      std::span<const int> right, std::span<const int> ctx,
                      const std::vector<std::vector<double>>& anchors,
                      std::span<const double> context, int sample_count, Rng& rng) {
  const int dimension = static_cast<int>(box.size());
  SamplingPlan plan;
  plan.dimension = static_cast<int>(left.size());
  for (int v : left) plan.box.push_back(box[static_cast<std::size_t>(v)]);
  plan.sample_count = sample_count;
  plan.seed = rng.next_raw();
  const Matrix base = draw_base_sample(plan);

  Matrix slice(base.rows(), static_cast<std::size_t>(dimension));
  for (std::size_t r = 0; r < base.rows(); ++r) {
    for (std::size_t k = 0; k < left.size(); ++k)
      slice.at(r, static_cast<std::size_t>(left[k])) = base.at(r, k);
    for (std::size_t k = 0; k < ctx.size(); ++k)
      slice.at(r, static_cast<std::size_t>(ctx[k])) = context[k];
  }

  std::vector<EvalResult> results;
  results.reserve(anchors.size());
  for (const auto& anchor : anchors) {
    for (std::size_t r = 0; r < slice.rows(); ++r)
      for (std::size_t k = 0; k < right.size(); ++k)
        slice.at(r, static_cast<std::size_t>(right[k])) = anchor[k];
    results.push_back(oracle(slice));
  }

  SliceSet out;
  out.f.resize(anchors.size());
  for (std::size_t r = 0; r < slice.rows(); ++r) {
    bool ok = true;
    for (const auto& res : results) ok = ok && res.valid[r];
    if (!ok) continue;
    for (std::size_t a = 0; a < results.size(); ++a) out.f[a].push_back(results[a].values[r]);
    ++out.rows;
  }
  return out;
}

enum class AttemptOutcome { Separable, Coupled, Resample };

struct Attempt {
  AttemptOutcome outcome = AttemptOutcome::Resample;
  double statistic = 0.0;
  double correlation = 0.0;
  double slope = 0.0;
};

Attempt additive_attempt(const Oracle& oracle, const Box& box, std::span<const int> left,
                         std::span<const int> right, std::span<const int> ctx,
                         const DetectionConfig& config, Rng& rng) {
  std::vector<std::vector<double>> anchors;
  anchors.push_back(draw_central_anchor(box, right, rng));
  anchors.push_back(draw_distinct_anchor(box, right, rng, anchors));
  const auto context = draw_central_anchor(box, ctx, rng);

  const SliceSet s = probe_slices(oracle, box, left, right, ctx, anchors, context,
                                  config.samples_per_test, rng);
  Attempt a;
  if (s.rows < kMinUsableRows) return a;

  const auto& f1 = s.f[0];
  const auto& f2 = s.f[1];
  const double scale = std::max(stdev_of(f1), stdev_of(f2));
  if (scale <= 1e-12 * std::max(1.0, std::abs(mean_of(f1)))) return a;  // flat slice

  std::vector<double> d(f1.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = f1[i] - f2[i];
  a.statistic = stdev_of(d) / std::max(std::abs(mean_of(d)), scale * 1e-3);
  a.outcome = a.statistic < config.epsilon ? AttemptOutcome::Separable : AttemptOutcome::Coupled;
  return a;
}

Attempt multiplicative_attempt(const Oracle& oracle, const Box& box, std::span<const int> left,
                               std::span<const int> right, std::span<const int> ctx,
                               const DetectionConfig& config, Rng& rng) {
  std::vector<std::vector<double>> anchors;
  anchors.push_back(draw_central_anchor(box, right, rng));
  anchors.push_back(draw_distinct_anchor(box, right, rng, anchors));
  anchors.push_back(draw_distinct_anchor(box, right, rng, anchors));
  const auto context = draw_central_anchor(box, ctx, rng);

  const SliceSet s = probe_slices(oracle, box, left, right, ctx, anchors, context,
                                  config.samples_per_test, rng);
  Attempt a;
  if (s.rows < kMinUsableRows) return a;

  const auto& fa = s.f[0];
  const auto& fb = s.f[1];
  const auto& fc = s.f[2];
  const double slice_scale = std::max({stdev_of(fa), stdev_of(fb), stdev_of(fc)});
  if (slice_scale <= 1e-12 * std::max(1.0, std::abs(mean_of(fa)))) return a;  // flat slice

  std::vector<double> u(fa.size()), w(fa.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = fa[i] - fb[i];
    w[i] = fa[i] - fc[i];
  }

  // Anchor coincidences leave a difference at rounding level; redraw those.
  const double u_mag = std::max(std::abs(mean_of(u)), stdev_of(u));
  const double w_mag = std::max(std::abs(mean_of(w)), stdev_of(w));
  if (u_mag <= 1e-12 * slice_scale || w_mag <= 1e-12 * slice_scale) return a;

  // A difference that is constant but clearly nonzero means the right group
  // enters additively next to the left one: the block does not factor here.
  if (stdev_of(u) <= 1e-7 * std::abs(mean_of(u)) ||
      stdev_of(w) <= 1e-7 * std::abs(mean_of(w))) {
    a.outcome = AttemptOutcome::Coupled;
    a.statistic = 1.0;
    return a;
  }

  const LineFit fit = fit_line(w, u);
  a.slope = fit.slope;
  a.correlation = fit.correlation;
  a.statistic = std::abs(fit.intercept) /
                (std::abs(fit.slope) * stdev_of(w) + kTinyDenominator);
  const bool proportional =
      a.statistic < config.epsilon && std::abs(fit.correlation) >= 1.0 - config.epsilon;
  a.outcome = proportional ? AttemptOutcome::Separable : AttemptOutcome::Coupled;
  return a;
}

template <typename AttemptFn>
SliceVerdict run_split_test(const Oracle& oracle, const Box& box, std::span<const int> left,
                            std::span<const int> right, const DetectionConfig& config, Rng& rng,
                            AttemptFn&& attempt_fn) {
  const int dimension = static_cast<int>(box.size());
  check_groups(dimension, left, right);
  const std::vector<int> ctx = complement_of(dimension, left, right);

  SliceVerdict verdict;
  int usable = 0;
  for (int rep = 0; rep < config.repetitions; ++rep) {
    Attempt a;
    for (int draw = 0; draw <= config.max_degenerate_redraws; ++draw) {
      a = attempt_fn(oracle, box, left, right, std::span<const int>(ctx), config, rng);
      if (a.outcome != AttemptOutcome::Resample) break;
      ++verdict.redraws;
    }
    if (a.outcome == AttemptOutcome::Resample) continue;  // repetition never woke up

    ++usable;
    if (a.statistic > verdict.statistic || a.outcome == AttemptOutcome::Coupled) {
      verdict.statistic = std::max(verdict.statistic, a.statistic);
      verdict.correlation = a.correlation;
      verdict.slope = a.slope;
    }
    if (a.outcome == AttemptOutcome::Coupled) {
      verdict.outcome = SliceOutcome::Coupled;
      return verdict;
    }
  }
  verdict.outcome = usable > 0 ? SliceOutcome::Separable : SliceOutcome::Degenerate;
  return verdict;
}

}  // namespace

SliceVerdict additive_split_test(const Oracle& oracle, const Box& box, std::span<const int> left,
                                 std::span<const int> right, const DetectionConfig& config,
                                 Rng& rng) {
  return run_split_test(oracle, box, left, right, config, rng,
                        [](const Oracle& o, const Box& b, std::span<const int> l,
                           std::span<const int> r, std::span<const int> c,
                           const DetectionConfig& cfg, Rng& g) {
                          return additive_attempt(o, b, l, r, c, cfg, g);
                        });
}

SliceVerdict multiplicative_split_test(const Oracle& oracle, const Box& box,
                                       std::span<const int> left, std::span<const int> right,
                                       const DetectionConfig& config, Rng& rng) {
  return run_split_test(oracle, box, left, right, config, rng,
                        [](const Oracle& o, const Box& b, std::span<const int> l,
                           std::span<const int> r, std::span<const int> c,
                           const DetectionConfig& cfg, Rng& g) {
                          return multiplicative_attempt(o, b, l, r, c, cfg, g);
                        });
}

namespace {

// Shared pairwise + union-find + singleton-confirmation driver. `pair_test`
// and `joint_test` run the appropriate split test; `degenerate_couples`
// controls whether an unresolvable pair is merged (factors) or left split
// (blocks, where a flat slice means the variable simply has no influence).
template <typename PairTest, typename JointTest>
std::vector<std::vector<int>> partition_variables(std::span<const int> vars, PairTest&& pair_test,
                                                  JointTest&& joint_test,
                                                  bool degenerate_couples) {
  const int m = static_cast<int>(vars.size());
  if (m == 1) return {{vars[0]}};

  UnionFind uf(m);
  std::vector<double> stat(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) {
      const SliceVerdict v = pair_test(vars[static_cast<std::size_t>(i)],
                                       vars[static_cast<std::size_t>(j)]);
      stat[static_cast<std::size_t>(i * m + j)] = v.statistic;
      stat[static_cast<std::size_t>(j * m + i)] = v.statistic;
      if (v.outcome == SliceOutcome::Coupled ||
          (degenerate_couples && v.outcome == SliceOutcome::Degenerate))
        uf.unite(i, j);
    }

  // Confirm each singleton against everything else at once; pairwise probes
  // can miss joint interactions. A failed singleton joins its most-coupled
  // partner so the merge stays minimal.
  std::vector<int> singletons;
  {
    std::vector<int> comp_size(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) ++comp_size[static_cast<std::size_t>(uf.find(i))];
    for (int i = 0; i < m; ++i)
      if (comp_size[static_cast<std::size_t>(uf.find(i))] == 1) singletons.push_back(i);
  }
  for (int i : singletons) {
    std::vector<int> rest;
    for (int j = 0; j < m; ++j)
      if (j != i) rest.push_back(vars[static_cast<std::size_t>(j)]);
    const SliceVerdict v = joint_test(vars[static_cast<std::size_t>(i)], rest);
    const bool must_merge = v.outcome == SliceOutcome::Coupled ||
                            (degenerate_couples && v.outcome == SliceOutcome::Degenerate);
    if (must_merge) {
      int best = i == 0 ? 1 : 0;
      for (int j = 0; j < m; ++j)
        if (j != i && stat[static_cast<std::size_t>(i * m + j)] >
                          stat[static_cast<std::size_t>(i * m + best)])
          best = j;
      uf.unite(i, best);
    }
  }

  std::vector<std::vector<int>> groups = uf.groups();
  for (auto& g : groups)
    for (int& idx : g) idx = vars[static_cast<std::size_t>(idx)];
  return groups;
}

}  // namespace

std::vector<std::vector<int>> detect_blocks(const Oracle& oracle, const Box& box,
                                            const DetectionConfig& config, Rng& rng) {
  const int n = static_cast<int>(box.size());
  std::vector<int> vars(static_cast<std::size_t>(n));
  std::iota(vars.begin(), vars.end(), 0);
  return partition_variables(
      vars,
      [&](int i, int j) {
        const int l[] = {i}, r[] = {j};
        return additive_split_test(oracle, box, l, r, config, rng);
      },
      [&](int i, const std::vector<int>& rest) {
        const int l[] = {i};
        return additive_split_test(oracle, box, l, rest, config, rng);
      },
      /*degenerate_couples=*/false);
}

std::vector<std::vector<int>> split_factors(const Oracle& oracle, const Box& box,
                                            std::span<const int> block,
                                            const DetectionConfig& config, Rng& rng) {
  return partition_variables(
      block,
      [&](int i, int j) {
        const int l[] = {i}, r[] = {j};
        return multiplicative_split_test(oracle, box, l, r, config, rng);
      },
      [&](int i, const std::vector<int>& rest) {
        const int l[] = {i};
        return multiplicative_split_test(oracle, box, l, rest, config, rng);
      },
      /*degenerate_couples=*/true);
}

SeparableStructure detect_structure(const Oracle& oracle, const Box& box,
                                    const DetectionConfig& config) {
  const int n = static_cast<int>(box.size());
  if (n <= 0) throw Error(Errc::InvalidInput, "detection needs at least one variable");

  SeparableStructure structure;
  structure.dimension = n;
  structure.epsilon = config.epsilon;
  structure.seed = config.seed;

  Rng rng(derive_seed(config.seed, {0x5e9a7ab111ull}));

  // Constant screen: a flat response makes every anchored difference trivial,
  // so short-circuit to one formal block covering all variables.
  {
    SamplingPlan plan;
    plan.dimension = n;
    plan.box = box;
    plan.sample_count = std::max(config.samples_per_test, 50);
    plan.seed = rng.next_raw();
    const Matrix probe = draw_base_sample(plan);
    const EvalResult res = oracle(probe);
    std::vector<double> f;
    for (std::size_t r = 0; r < probe.rows(); ++r)
      if (res.valid[r]) f.push_back(res.values[r]);
    if (f.size() < kMinUsableRows)
      throw Error(Errc::InsufficientData, "target is invalid almost everywhere on the box");
    if (stdev_of(f) <= 1e-10 * std::max(1.0, std::abs(mean_of(f)))) {
      structure.degenerate_constant = true;
      std::vector<int> all(static_cast<std::size_t>(n));
      std::iota(all.begin(), all.end(), 0);
      structure.blocks = {{all}};
      structure.canonicalize();
      structure.validate();
      return structure;
    }
  }

  const auto blocks = detect_blocks(oracle, box, config, rng);
  for (const auto& block : blocks)
    structure.blocks.push_back(split_factors(oracle, box, block, config, rng));

  structure.canonicalize();
  structure.validate();
  return structure;
}

}  // namespace bbp
