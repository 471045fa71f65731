#pragma once
// The detected shape of a target: an ordered partition of the variables into
// additive blocks, each an ordered list of multiplicative factors, each
// factor a sorted set of 0-based variable indices.

#include <cstdint>
#include <string>
#include <vector>

#include "bbp/error.hpp"

namespace bbp {

enum class Classification {
  CompletelySeparable,  // every factor is a single variable
  PartiallySeparable,   // at least one factor couples two or more variables
};

struct SeparableStructure {
  int dimension = 0;
  // blocks[i][j] is factor j of block i.
  std::vector<std::vector<std::vector<int>>> blocks;
  bool degenerate_constant = false;  // oracle was constant; partition is formal
  double epsilon = 0.0;              // detection threshold used
  std::uint64_t seed = 0;            // detection seed used

  int block_count() const { return static_cast<int>(blocks.size()); }
  int factor_count() const {
    int n = 0;
    for (const auto& b : blocks) n += static_cast<int>(b.size());
    return n;
  }

  Classification classification() const {
    for (const auto& b : blocks)
      for (const auto& f : b)
        if (f.size() > 1) return Classification::PartiallySeparable;
    return Classification::CompletelySeparable;
  }

  // Sort variables in factors, factors by first variable, blocks by first
  // variable. Partition comparisons use the canonical form.
  void canonicalize();

  // True when both describe the same partition (canonical forms equal).
  bool same_partition(const SeparableStructure& other) const;

  // Throws Errc::Internal unless the factors partition {0..dimension-1}.
  void validate() const;

  // JSON with 1-based variable indices, classification, epsilon and seed.
  std::string to_json_string() const;
  static SeparableStructure from_json_string(const std::string& text);
};

std::string to_string(Classification c);

}  // namespace bbp
