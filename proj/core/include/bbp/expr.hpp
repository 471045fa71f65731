#pragma once
// Expression trees: immutable nodes, an infix parser/printer pair, guarded
// batch evaluation over sample matrices, and parameterized model templates.
//
// Conventions
//   - Variables are 0-based internally and print as x1, x2, ... (1-based text).
//   - Printing emits text that parses back to a structurally identical tree.
//   - Evaluation never throws on numeric trouble; it returns per-row validity
//     flags instead. Guards: ln(v<=0) and sqrt(v<0) are invalid, |divisor| <
//     1e-12 is invalid, pow with a non-integer exponent and negative base is
//     invalid (integer exponents use repeated multiplication), and any
//     non-finite result is invalid.
//   - Parameter slots appear only in model templates; evaluating or printing
//     a tree that still contains one is an error.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bbp/error.hpp"
#include "bbp/matrix.hpp"

namespace bbp {

enum class NodeKind { Constant, Variable, Parameter, Unary, Binary };
enum class UnaryOp { Neg, Sin, Cos, Exp, Ln, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

class Expr {
public:
  Expr() = default;  // empty handle; every operation except empty() rejects it

  static Expr constant(double value);
  static Expr variable(int index);   // 0-based
  static Expr parameter(int slot);   // 0-based template slot
  // Note: unary(Neg, constant(c)) folds to constant(-c) so printed negative
  // literals round-trip structurally. No other folding is performed.
  static Expr unary(UnaryOp op, Expr child);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  bool empty() const { return node_ == nullptr; }
  NodeKind kind() const;
  double constant_value() const;
  int variable_index() const;
  int parameter_slot() const;
  UnaryOp unary_op() const;
  BinaryOp binary_op() const;
  const Expr& child(int i) const;  // i = 0 for unary, 0 or 1 for binary

  int node_count() const;
  int depth() const;               // a lone leaf has depth 1
  int max_variable_index() const;  // -1 when variable-free
  int max_parameter_slot() const;  // -1 when fully instantiated
  std::vector<int> variables() const;  // sorted, unique, 0-based

private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

bool structurally_equal(const Expr& a, const Expr& b);

// Infix text. Grammar (highest binding first): ^ (right-assoc), unary minus,
// * and / (left-assoc), + and - (left-assoc); parentheses; calls
// sin/cos/exp/ln/sqrt; variables x1..xn; decimal literals with optional
// exponent part. Throws Error(Errc::ParseError) with a byte position.
Expr parse_expression(std::string_view text);

// Minimal-parenthesis rendering; constants use shortest round-trip formatting.
// Throws on empty handles or remaining parameter slots.
std::string to_string(const Expr& expr);

struct EvalResult {
  std::vector<double> values;       // one per row; unspecified where invalid
  std::vector<std::uint8_t> valid;  // 1 = row produced a finite, guarded value
  std::size_t valid_count = 0;
};

// Evaluate over every row of X (columns are variables). Throws on dimension
// mismatch (a variable index >= X.cols()), empty handles, or parameter slots.
EvalResult evaluate(const Expr& expr, const Matrix& x);

// Same, but parameter slots read from `params` (broadcast like constants).
EvalResult evaluate_with_params(const Expr& expr, const Matrix& x,
                                std::span<const double> params);

// Replace each parameter slot i with constant(params[i]). Throws unless
// params covers exactly slots 0..max_parameter_slot().
Expr substitute_parameters(const Expr& expr, std::span<const double> params);

// Rewrite variable indices: old index i becomes map[i]. Throws when a variable
// falls outside the map.
Expr remap_variables(const Expr& expr, std::span<const int> map);

// A fit-model shape: an expression over variables x1..x_arity whose constants
// are parameter slots. Slot 0 is always the leading multiplicative scale.
struct ModelTemplate {
  std::string id;        // e.g. "uni3"
  int arity = 0;         // number of distinct variables (1 or 2)
  int slot_count = 0;    // parameter slots, including the leading scale
  Expr body;             // references parameter slots 0..slot_count-1
  std::vector<std::uint8_t> exponent_slot;  // marks slots used as pow exponents
  // Slot added inside a sin(...) argument, solved in closed form through
  // k*sin(u + phi) = a*sin(u) + b*cos(u) instead of searched; -1 when absent.
  int phase_slot = -1;
};

// Instantiate with a full parameter vector (size must equal slot_count).
Expr instantiate_template(const ModelTemplate& tpl, std::span<const double> params);

}  // namespace bbp
