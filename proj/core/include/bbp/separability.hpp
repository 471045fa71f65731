#pragma once
// Separability detection via paired-anchor slice tests. The target is probed
// along one variable group while the complementary group is pinned at two
// (additive) or three (multiplicative) anchors; constancy or zero-intercept
// proportionality of the slice differences decides whether the groups split.
// Pairwise verdicts are merged with union-find into additive blocks and,
// within each block, multiplicative factors.

#include <cstdint>
#include <span>
#include <vector>

#include "bbp/matrix.hpp"
#include "bbp/oracle.hpp"
#include "bbp/rng.hpp"
#include "bbp/structure.hpp"

namespace bbp {

struct DetectionConfig {
  double epsilon = 1e-6;           // slice-test threshold
  int repetitions = 3;             // independent anchor draws; all must agree to split
  int samples_per_test = 100;      // rows per slice
  int max_degenerate_redraws = 5;  // extra anchor draws when a slice carries no signal
  std::uint64_t seed = 1729;
};

enum class SliceOutcome {
  Separable,
  Coupled,
  Degenerate,  // no usable signal at any drawn anchor
};

struct SliceVerdict {
  SliceOutcome outcome = SliceOutcome::Degenerate;
  double statistic = 0.0;    // additive: relative spread of the slice difference;
                             // multiplicative: relative intercept magnitude
  double correlation = 0.0;  // multiplicative fit only
  double slope = 0.0;        // multiplicative fit only
  int redraws = 0;           // degenerate redraws consumed across repetitions
};

// Is the target additively separable between `left` and `right`? Variables in
// neither group are pinned at a fresh central context each repetition. A
// repetition without usable signal is redrawn and, past the budget, skipped;
// the verdict is Degenerate only when every repetition ends that way.
SliceVerdict additive_split_test(const Oracle& oracle, const Box& box,
                                 std::span<const int> left, std::span<const int> right,
                                 const DetectionConfig& config, Rng& rng);

// Is the target multiplicatively separable between `left` and `right` once
// the shared context cancels? A constant nonzero slice difference means the
// groups combine additively inside their block and counts as Coupled.
SliceVerdict multiplicative_split_test(const Oracle& oracle, const Box& box,
                                       std::span<const int> left, std::span<const int> right,
                                       const DetectionConfig& config, Rng& rng);

// Partition all variables into additive blocks: pairwise tests feed a
// union-find, then every singleton is confirmed against the rest of the
// variables jointly and merged with its most-coupled partner on failure.
std::vector<std::vector<int>> detect_blocks(const Oracle& oracle, const Box& box,
                                            const DetectionConfig& config, Rng& rng);

// Split one block's variables into multiplicative factors. Pairs whose tests
// stay degenerate past the redraw budget are kept together; singleton factors
// are confirmed against the rest of the block jointly.
std::vector<std::vector<int>> split_factors(const Oracle& oracle, const Box& box,
                                            std::span<const int> block,
                                            const DetectionConfig& config, Rng& rng);

// Full detection: constant screen first (a flat target yields one formal
// block flagged degenerate_constant), then block partition and per-block
// factor split. The result is canonical, validated, and deterministic in
// config.seed.
SeparableStructure detect_structure(const Oracle& oracle, const Box& box,
                                    const DetectionConfig& config = {});

}  // namespace bbp
