#pragma once
// Seeded sampling over box domains plus the slice construction used for
// factor modeling: shared free columns, complement columns pinned at two
// anchors, out-of-block columns pinned at a third, and the difference
// response that cancels everything except the factor under study.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bbp/matrix.hpp"
#include "bbp/oracle.hpp"
#include "bbp/rng.hpp"
#include "bbp/structure.hpp"

namespace bbp {

struct SamplingPlan {
  int dimension = 0;
  Box box;                 // one interval per variable
  int sample_count = 0;    // rows to draw; see default_sample_count
  std::uint64_t seed = 0;
};

// Default sampling budget: 100 rows per dimension.
inline int default_sample_count(int dimension) { return 100 * dimension; }

// Optional per-row acceptance predicate (rejection resampling). Used by the
// benchmark harness to keep rows away from division poles.
using RowFilter = std::function<bool(std::span<const double>)>;

// Uniform iid rows over the box. Throws for sample_count < 2, an empty or
// inverted box, or (with a filter) when a row cannot be accepted within a
// bounded number of redraws.
Matrix draw_base_sample(const SamplingPlan& plan);
Matrix draw_base_sample(const SamplingPlan& plan, const RowFilter& keep_row);

// A point in the central 60% of each listed column's interval (anchors stay
// away from domain edges, where responses degenerate more often).
std::vector<double> draw_central_anchor(const Box& box, std::span<const int> columns, Rng& rng);

struct FactorSlices {
  Matrix x1;                         // free columns shared with x2, complement at anchor A
  Matrix x2;                         // complement at anchor B (equals x1 in single-factor mode)
  Matrix x_train;                    // the free columns only, N x s
  std::vector<int> free_columns;     // the factor's variables, ascending
  std::vector<int> complement_columns;  // other factors in the same block
  std::vector<int> outer_columns;    // variables of all other blocks
  std::vector<double> anchor_a;      // aligned with complement_columns
  std::vector<double> anchor_b;
  std::vector<double> anchor_g;      // aligned with outer_columns
  bool single_factor = false;        // block has exactly one factor
};

// Build the paired evaluation matrices for factor `factor` of block `block`.
// In multi-factor blocks anchors A and B must differ in at least one
// coordinate; single-factor blocks take empty A/B. anchor_g must cover the
// out-of-block columns.
FactorSlices build_factor_slices(const Matrix& base, const SeparableStructure& structure,
                                 int block, int factor, std::span<const double> anchor_a,
                                 std::span<const double> anchor_b,
                                 std::span<const double> anchor_g);

struct DifferenceResponse {
  Matrix x_train;                 // valid rows only
  std::vector<double> f_train;    // f(X1) - f(X2), or f(X1) in single-factor mode
  std::size_t rows_total = 0;
  std::size_t rows_kept = 0;
  bool single_factor = false;
};

// Evaluate the oracle on both slices and keep rows valid on both sides.
// Throws Errc::InsufficientData when fewer than 10 valid rows remain.
DifferenceResponse difference_response(const Oracle& oracle, const FactorSlices& slices);

}  // namespace bbp
