#pragma once
// The target function under study, seen as a black box over sample matrices.
// Expression targets wrap their guarded evaluator; external callers may plug
// in anything with the same row-validity contract.

#include <functional>

#include "bbp/expr.hpp"
#include "bbp/matrix.hpp"

namespace bbp {

using Oracle = std::function<EvalResult(const Matrix&)>;

// Wraps an expression; every call checks that the sample has at least
// `dimension` columns so misuse fails loudly.
inline Oracle make_expression_oracle(Expr expr, int dimension) {
  if (expr.empty() || expr.max_parameter_slot() >= 0)
    throw Error(Errc::InvalidInput, "oracle expression must be complete");
  if (expr.max_variable_index() >= dimension)
    throw Error(Errc::InvalidInput, "oracle expression exceeds the declared dimension");
  return [expr = std::move(expr), dimension](const Matrix& x) {
    if (x.cols() < static_cast<std::size_t>(dimension))
      throw Error(Errc::InvalidInput, "sample has fewer columns than the oracle dimension");
    return evaluate(expr, x);
  };
}

}  // namespace bbp
