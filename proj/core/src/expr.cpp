#include "bbp/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

namespace bbp {

// ============================================================================
// Nodes and builders
// ============================================================================

struct Expr::Node {
  NodeKind kind = NodeKind::Constant;
  double value = 0.0;  // Constant
  int index = 0;       // Variable index or Parameter slot
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  Expr lhs;  // Unary child lives here
  Expr rhs;
};

namespace {

constexpr double kDivisionGuard = 1e-12;
constexpr int kMaxParseDepth = 512;

[[noreturn]] void bad_handle() {
  throw Error(Errc::InvalidInput, "operation on empty expression handle");
}

}  // namespace

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(int index) {
  if (index < 0) throw Error(Errc::InvalidInput, "variable index must be non-negative");
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Variable;
  n->index = index;
  return Expr(std::move(n));
}

Expr Expr::parameter(int slot) {
  if (slot < 0) throw Error(Errc::InvalidInput, "parameter slot must be non-negative");
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Parameter;
  n->index = slot;
  return Expr(std::move(n));
}

Expr Expr::unary(UnaryOp op, Expr child) {
  if (child.empty()) bad_handle();
  // Fold -literal so that parse(to_string(e)) reproduces e exactly.
  if (op == UnaryOp::Neg && child.kind() == NodeKind::Constant)
    return constant(-child.constant_value());
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Unary;
  n->uop = op;
  n->lhs = std::move(child);
  return Expr(std::move(n));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  if (lhs.empty() || rhs.empty()) bad_handle();
  auto n = std::make_shared<Node>();
  n->kind = NodeKind::Binary;
  n->bop = op;
  n->lhs = std::move(lhs);
  n->rhs = std::move(rhs);
  return Expr(std::move(n));
}

NodeKind Expr::kind() const {
  if (!node_) bad_handle();
  return node_->kind;
}

double Expr::constant_value() const {
  if (!node_ || node_->kind != NodeKind::Constant)
    throw Error(Errc::InvalidInput, "node is not a constant");
  return node_->value;
}

int Expr::variable_index() const {
  if (!node_ || node_->kind != NodeKind::Variable)
    throw Error(Errc::InvalidInput, "node is not a variable");
  return node_->index;
}

int Expr::parameter_slot() const {
  if (!node_ || node_->kind != NodeKind::Parameter)
    throw Error(Errc::InvalidInput, "node is not a parameter");
  return node_->index;
}

UnaryOp Expr::unary_op() const {
  if (!node_ || node_->kind != NodeKind::Unary)
    throw Error(Errc::InvalidInput, "node is not a unary operation");
  return node_->uop;
}

BinaryOp Expr::binary_op() const {
  if (!node_ || node_->kind != NodeKind::Binary)
    throw Error(Errc::InvalidInput, "node is not a binary operation");
  return node_->bop;
}

const Expr& Expr::child(int i) const {
  if (!node_) bad_handle();
  if (node_->kind == NodeKind::Unary) {
    if (i != 0) throw Error(Errc::InvalidInput, "unary node has a single child");
    return node_->lhs;
  }
  if (node_->kind == NodeKind::Binary) {
    if (i == 0) return node_->lhs;
    if (i == 1) return node_->rhs;
    throw Error(Errc::InvalidInput, "binary node has two children");
  }
  throw Error(Errc::InvalidInput, "leaf node has no children");
}

int Expr::node_count() const {
  if (!node_) bad_handle();
  switch (node_->kind) {
    case NodeKind::Unary:
      return 1 + node_->lhs.node_count();
    case NodeKind::Binary:
      return 1 + node_->lhs.node_count() + node_->rhs.node_count();
    default:
      return 1;
  }
}

int Expr::depth() const {
  if (!node_) bad_handle();
  switch (node_->kind) {
    case NodeKind::Unary:
      return 1 + node_->lhs.depth();
    case NodeKind::Binary:
      return 1 + std::max(node_->lhs.depth(), node_->rhs.depth());
    default:
      return 1;
  }
}

int Expr::max_variable_index() const {
  if (!node_) bad_handle();
  switch (node_->kind) {
    case NodeKind::Variable:
      return node_->index;
    case NodeKind::Unary:
      return node_->lhs.max_variable_index();
    case NodeKind::Binary:
      return std::max(node_->lhs.max_variable_index(), node_->rhs.max_variable_index());
    default:
      return -1;
  }
}

int Expr::max_parameter_slot() const {
  if (!node_) bad_handle();
  switch (node_->kind) {
    case NodeKind::Parameter:
      return node_->index;
    case NodeKind::Unary:
      return node_->lhs.max_parameter_slot();
    case NodeKind::Binary:
      return std::max(node_->lhs.max_parameter_slot(), node_->rhs.max_parameter_slot());
    default:
      return -1;
  }
}

namespace {
void collect_variables(const Expr& e, std::vector<int>& out) {
  switch (e.kind()) {
    case NodeKind::Variable:
      out.push_back(e.variable_index());
      break;
    case NodeKind::Unary:
      collect_variables(e.child(0), out);
      break;
    case NodeKind::Binary:
      collect_variables(e.child(0), out);
      collect_variables(e.child(1), out);
      break;
    default:
      break;
  }
}
}  // namespace

std::vector<int> Expr::variables() const {
  std::vector<int> out;
  collect_variables(*this, out);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.empty() || b.empty()) return a.empty() && b.empty();
  if (a.kind() != b.kind()) return false;
  switch (a.kind()) {
    case NodeKind::Constant:
      return a.constant_value() == b.constant_value();
    case NodeKind::Variable:
      return a.variable_index() == b.variable_index();
    case NodeKind::Parameter:
      return a.parameter_slot() == b.parameter_slot();
    case NodeKind::Unary:
      return a.unary_op() == b.unary_op() && structurally_equal(a.child(0), b.child(0));
    case NodeKind::Binary:
      return a.binary_op() == b.binary_op() &&
             structurally_equal(a.child(0), b.child(0)) &&
             structurally_equal(a.child(1), b.child(1));
  }
  return false;
}

// ============================================================================
// Printing
// ============================================================================

namespace {

std::string format_double(double v) {
  if (!std::isfinite(v))
    throw Error(Errc::InvalidInput, "cannot print a non-finite constant");
  std::array<char, 40> buf;
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (res.ec != std::errc())
    throw Error(Errc::Internal, "constant formatting failed");
  return std::string(buf.data(), res.ptr);
}

// Binding strength used for minimal parenthesization. Must mirror the parser:
// ^ binds tighter than unary minus, which binds tighter than * and /, which
// bind tighter than + and -. Negative literals print with a leading '-', so
// they carry unary-minus strength.
int precedence(const Expr& e) {
  switch (e.kind()) {
    case NodeKind::Constant:
      return e.constant_value() < 0 ? 3 : 5;
    case NodeKind::Variable:
    case NodeKind::Parameter:
      return 5;
    case NodeKind::Unary:
      return e.unary_op() == UnaryOp::Neg ? 3 : 5;
    case NodeKind::Binary:
      switch (e.binary_op()) {
        case BinaryOp::Add:
        case BinaryOp::Sub:
          return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div:
          return 2;
        case BinaryOp::Pow:
          return 4;
      }
  }
  return 5;
}

const char* function_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Ln: return "ln";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Neg: break;
  }
  return "";
}

void print_node(const Expr& e, std::string& out, int min_prec) {
  if (e.kind() == NodeKind::Parameter)
    throw Error(Errc::InvalidInput, "cannot print an uninstantiated template slot");
  const int prec = precedence(e);
  const bool wrap = prec < min_prec;
  if (wrap) out += '(';
  switch (e.kind()) {
    case NodeKind::Constant:
      out += format_double(e.constant_value());
      break;
    case NodeKind::Variable:
      out += 'x';
      out += std::to_string(e.variable_index() + 1);
      break;
    case NodeKind::Unary:
      if (e.unary_op() == UnaryOp::Neg) {
        out += '-';
        print_node(e.child(0), out, 3);
      } else {
        out += function_name(e.unary_op());
        out += '(';
        print_node(e.child(0), out, 0);
        out += ')';
      }
      break;
    case NodeKind::Binary: {
      const Expr& l = e.child(0);
      const Expr& r = e.child(1);
      switch (e.binary_op()) {
        case BinaryOp::Add:
          print_node(l, out, 1); out += " + "; print_node(r, out, 2);
          break;
        case BinaryOp::Sub:
          print_node(l, out, 1); out += " - "; print_node(r, out, 2);
          break;
        case BinaryOp::Mul:
          print_node(l, out, 2); out += " * "; print_node(r, out, 3);
          break;
        case BinaryOp::Div:
          print_node(l, out, 2); out += " / "; print_node(r, out, 3);
          break;
        case BinaryOp::Pow:
          // Left side must be an atom ('^' is right-associative); the right
          // side may carry a unary minus without parentheses.
          print_node(l, out, 5); out += " ^ "; print_node(r, out, 3);
          break;
      }
      break;
    }
    case NodeKind::Parameter:
      break;  // unreachable
  }
  if (wrap) out += ')';
}

}  // namespace

std::string to_string(const Expr& expr) {
  if (expr.empty()) bad_handle();
  std::string out;
  print_node(expr, out, 0);
  return out;
}

// ============================================================================
// Parsing
// ============================================================================

namespace {

class Parser {
public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expr run() {
    skip_ws();
    if (eof()) fail("empty expression", 0);
    Expr e = parse_sum();
    skip_ws();
    if (!eof()) fail("unexpected trailing input", pos_);
    return e;
  }

private:
  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    throw Error(Errc::ParseError, msg + " (at offset " + std::to_string(at) + ")", at);
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return eof() ? '\0' : text_[pos_]; }

  void skip_ws() {
    while (!eof() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\n' ||
                      text_[pos_] == '\r'))
      ++pos_;
  }

  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxParseDepth) p_.fail("expression too deeply nested", p_.pos_);
    }
    ~DepthGuard() { --p_.depth_; }
    Parser& p_;
  };

  Expr parse_sum() {
    DepthGuard g(*this);
    Expr lhs = parse_product();
    for (;;) {
      skip_ws();
      if (consume('+')) lhs = Expr::binary(BinaryOp::Add, std::move(lhs), parse_product());
      else if (consume('-')) lhs = Expr::binary(BinaryOp::Sub, std::move(lhs), parse_product());
      else return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      skip_ws();
      if (consume('*')) lhs = Expr::binary(BinaryOp::Mul, std::move(lhs), parse_unary());
      else if (consume('/')) lhs = Expr::binary(BinaryOp::Div, std::move(lhs), parse_unary());
      else return lhs;
    }
  }

  Expr parse_unary() {
    DepthGuard g(*this);
    skip_ws();
    if (consume('-')) return Expr::unary(UnaryOp::Neg, parse_unary());
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_atom();
    skip_ws();
    if (consume('^')) {
      // Right-associative; the exponent may start with a unary minus.
      return Expr::binary(BinaryOp::Pow, std::move(base), parse_unary());
    }
    return base;
  }

  Expr parse_atom() {
    skip_ws();
    if (eof()) fail("unexpected end of input", pos_);
    const char c = peek();
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      if (!consume(')')) fail("expected ')'", pos_);
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_') return parse_ident();
    fail(std::string("unexpected character '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      bool any = false;
      while (!eof() && peek() >= '0' && peek() <= '9') { ++pos_; any = true; }
      return any;
    };
    bool int_part = digits();
    bool frac_part = false;
    if (peek() == '.') {
      const std::size_t dot = pos_;
      ++pos_;
      frac_part = digits();
      if (!frac_part) {
        // "5." is not a literal; leave the dot for the caller to reject.
        pos_ = dot;
      }
    }
    if (!int_part && !frac_part) fail("malformed numeric literal", start);
    if (peek() == 'e' || peek() == 'E') {
      const std::size_t mark = pos_;
      ++pos_;
      if (peek() == '+' || peek() == '-') ++pos_;
      if (!digits()) pos_ = mark;  // not an exponent part after all
    }
    double value = 0.0;
    const char* first = text_.data() + start;
    const char* last = text_.data() + pos_;
    auto res = std::from_chars(first, last, value);
    if (res.ec == std::errc::result_out_of_range)
      fail("numeric literal out of range", start);
    if (res.ec != std::errc() || res.ptr != last)
      fail("malformed numeric literal", start);
    return Expr::constant(value);
  }

  Expr parse_ident() {
    const std::size_t start = pos_;
    while (!eof() && ((peek() >= 'a' && peek() <= 'z') || (peek() >= 'A' && peek() <= 'Z') ||
                      (peek() >= '0' && peek() <= '9') || peek() == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);

    static constexpr std::pair<std::string_view, UnaryOp> kFunctions[] = {
        {"sin", UnaryOp::Sin}, {"cos", UnaryOp::Cos}, {"exp", UnaryOp::Exp},
        {"ln", UnaryOp::Ln},   {"sqrt", UnaryOp::Sqrt}};
    for (const auto& [fname, op] : kFunctions) {
      if (name == fname) {
        if (!consume('(')) fail("expected '(' after function name", pos_);
        Expr arg = parse_sum();
        if (!consume(')')) fail("expected ')'", pos_);
        return Expr::unary(op, std::move(arg));
      }
    }

    if (name.size() >= 2 && name[0] == 'x') {
      bool all_digits = true;
      for (std::size_t i = 1; i < name.size(); ++i)
        if (name[i] < '0' || name[i] > '9') { all_digits = false; break; }
      if (all_digits) {
        if (name[1] == '0')
          fail("variable indices are 1-based (x1, x2, ...)", start);
        if (name.size() > 7) fail("variable index too large", start);
        int idx = 0;
        for (std::size_t i = 1; i < name.size(); ++i) idx = idx * 10 + (name[i] - '0');
        return Expr::variable(idx - 1);
      }
    }
    fail("unknown identifier '" + std::string(name) + "'", start);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

}  // namespace

Expr parse_expression(std::string_view text) { return Parser(text).run(); }

// ============================================================================
// Evaluation
// ============================================================================

namespace {

// Integer power by repeated squaring. Returns false when the result blows up
// or a reciprocal of ~0 is requested.
bool powi(double base, long long n, double& out) {
  bool invert = false;
  if (n < 0) {
    invert = true;
    n = -n;
  }
  double acc = 1.0;
  double b = base;
  while (n > 0) {
    if (n & 1) acc *= b;
    b *= b;
    n >>= 1;
    if (!std::isfinite(acc)) return false;
    if (n > 0 && !std::isfinite(b)) return false;
  }
  if (invert) {
    if (std::abs(acc) < kDivisionGuard) return false;
    acc = 1.0 / acc;
  }
  if (!std::isfinite(acc)) return false;
  out = acc;
  return true;
}

struct BufferPool {
  std::vector<std::vector<double>> free;

  std::vector<double> acquire(std::size_t n) {
    if (!free.empty()) {
      auto b = std::move(free.back());
      free.pop_back();
      b.resize(n);
      return b;
    }
    return std::vector<double>(n);
  }
  void release(std::vector<double> b) { free.push_back(std::move(b)); }
};

class Evaluator {
public:
  Evaluator(const Matrix& x, std::span<const double> params,
            std::vector<std::uint8_t>& valid)
      : x_(x), params_(params), valid_(valid) {}

  std::vector<double> eval(const Expr& e) {
    const std::size_t n = x_.rows();
    switch (e.kind()) {
      case NodeKind::Constant: {
        auto out = pool_.acquire(n);
        std::fill(out.begin(), out.end(), e.constant_value());
        return out;
      }
      case NodeKind::Variable: {
        auto out = pool_.acquire(n);
        const std::size_t c = static_cast<std::size_t>(e.variable_index());
        for (std::size_t r = 0; r < n; ++r) out[r] = x_.at(r, c);
        return out;
      }
      case NodeKind::Parameter: {
        auto out = pool_.acquire(n);
        std::fill(out.begin(), out.end(), params_[static_cast<std::size_t>(e.parameter_slot())]);
        return out;
      }
      case NodeKind::Unary: {
        auto a = eval(e.child(0));
        apply_unary(e.unary_op(), a);
        return a;
      }
      case NodeKind::Binary: {
        auto a = eval(e.child(0));
        auto b = eval(e.child(1));
        apply_binary(e.binary_op(), a, b);
        pool_.release(std::move(b));
        return a;
      }
    }
    throw Error(Errc::Internal, "unhandled node kind");
  }

private:
  void apply_unary(UnaryOp op, std::vector<double>& a) {
    const std::size_t n = a.size();
    switch (op) {
      case UnaryOp::Neg:
        for (std::size_t r = 0; r < n; ++r) a[r] = -a[r];
        return;
      case UnaryOp::Sin:
        for (std::size_t r = 0; r < n; ++r) { a[r] = std::sin(a[r]); flag_finite(a[r], r); }
        return;
      case UnaryOp::Cos:
        for (std::size_t r = 0; r < n; ++r) { a[r] = std::cos(a[r]); flag_finite(a[r], r); }
        return;
      case UnaryOp::Exp:
        for (std::size_t r = 0; r < n; ++r) { a[r] = std::exp(a[r]); flag_finite(a[r], r); }
        return;
      case UnaryOp::Ln:
        for (std::size_t r = 0; r < n; ++r) {
          if (!(a[r] > 0.0)) { valid_[r] = 0; a[r] = 0.0; }
          else { a[r] = std::log(a[r]); flag_finite(a[r], r); }
        }
        return;
      case UnaryOp::Sqrt:
        for (std::size_t r = 0; r < n; ++r) {
          if (a[r] < 0.0 || !std::isfinite(a[r])) { valid_[r] = 0; a[r] = 0.0; }
          else a[r] = std::sqrt(a[r]);
        }
        return;
    }
  }

  void apply_binary(BinaryOp op, std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    switch (op) {
      case BinaryOp::Add:
        for (std::size_t r = 0; r < n; ++r) { a[r] += b[r]; flag_finite(a[r], r); }
        return;
      case BinaryOp::Sub:
        for (std::size_t r = 0; r < n; ++r) { a[r] -= b[r]; flag_finite(a[r], r); }
        return;
      case BinaryOp::Mul:
        for (std::size_t r = 0; r < n; ++r) { a[r] *= b[r]; flag_finite(a[r], r); }
        return;
      case BinaryOp::Div:
        for (std::size_t r = 0; r < n; ++r) {
          if (!(std::abs(b[r]) >= kDivisionGuard)) { valid_[r] = 0; a[r] = 0.0; }
          else { a[r] /= b[r]; flag_finite(a[r], r); }
        }
        return;
      case BinaryOp::Pow:
        for (std::size_t r = 0; r < n; ++r) {
          const double base = a[r];
          const double ex = b[r];
          if (!std::isfinite(base) || !std::isfinite(ex)) { valid_[r] = 0; a[r] = 0.0; continue; }
          if (ex == std::trunc(ex) && std::abs(ex) <= 1e9) {
            double v = 0.0;
            if (!powi(base, static_cast<long long>(ex), v)) { valid_[r] = 0; a[r] = 0.0; }
            else a[r] = v;
          } else if (base < 0.0) {
            valid_[r] = 0;  // non-integer power of a negative base
            a[r] = 0.0;
          } else {
            a[r] = std::pow(base, ex);
            flag_finite(a[r], r);
          }
        }
        return;
    }
  }

  void flag_finite(double& v, std::size_t r) {
    if (!std::isfinite(v)) { valid_[r] = 0; v = 0.0; }
  }

  const Matrix& x_;
  std::span<const double> params_;
  std::vector<std::uint8_t>& valid_;
  BufferPool pool_;
};

EvalResult evaluate_impl(const Expr& expr, const Matrix& x, std::span<const double> params) {
  if (expr.empty()) bad_handle();
  const int max_var = expr.max_variable_index();
  if (max_var >= 0 && static_cast<std::size_t>(max_var) >= x.cols())
    throw Error(Errc::InvalidInput,
                "expression references x" + std::to_string(max_var + 1) + " but the sample has " +
                    std::to_string(x.cols()) + " columns");
  const int max_slot = expr.max_parameter_slot();
  if (max_slot >= 0 && static_cast<std::size_t>(max_slot) >= params.size())
    throw Error(Errc::InvalidInput, "expression contains unbound parameter slots");

  EvalResult res;
  res.valid.assign(x.rows(), 1);
  Evaluator ev(x, params, res.valid);
  res.values = ev.eval(expr);
  res.valid_count = 0;
  for (auto v : res.valid) res.valid_count += v;
  return res;
}

}  // namespace

EvalResult evaluate(const Expr& expr, const Matrix& x) {
  if (!expr.empty() && expr.max_parameter_slot() >= 0)
    throw Error(Errc::InvalidInput, "cannot evaluate a template with unbound parameters");
  return evaluate_impl(expr, x, {});
}

EvalResult evaluate_with_params(const Expr& expr, const Matrix& x,
                                std::span<const double> params) {
  return evaluate_impl(expr, x, params);
}

// ============================================================================
// Template utilities
// ============================================================================

Expr substitute_parameters(const Expr& expr, std::span<const double> params) {
  if (expr.empty()) bad_handle();
  switch (expr.kind()) {
    case NodeKind::Parameter: {
      const int slot = expr.parameter_slot();
      if (static_cast<std::size_t>(slot) >= params.size())
        throw Error(Errc::InvalidInput, "parameter vector does not cover slot " +
                                            std::to_string(slot));
      return Expr::constant(params[static_cast<std::size_t>(slot)]);
    }
    case NodeKind::Unary:
      return Expr::unary(expr.unary_op(), substitute_parameters(expr.child(0), params));
    case NodeKind::Binary:
      return Expr::binary(expr.binary_op(), substitute_parameters(expr.child(0), params),
                          substitute_parameters(expr.child(1), params));
    default:
      return expr;
  }
}

Expr remap_variables(const Expr& expr, std::span<const int> map) {
  if (expr.empty()) bad_handle();
  switch (expr.kind()) {
    case NodeKind::Variable: {
      const int idx = expr.variable_index();
      if (static_cast<std::size_t>(idx) >= map.size())
        throw Error(Errc::InvalidInput, "variable map does not cover x" + std::to_string(idx + 1));
      return Expr::variable(map[static_cast<std::size_t>(idx)]);
    }
    case NodeKind::Unary:
      return Expr::unary(expr.unary_op(), remap_variables(expr.child(0), map));
    case NodeKind::Binary:
      return Expr::binary(expr.binary_op(), remap_variables(expr.child(0), map),
                          remap_variables(expr.child(1), map));
    default:
      return expr;
  }
}

Expr instantiate_template(const ModelTemplate& tpl, std::span<const double> params) {
  if (tpl.body.empty())
    throw Error(Errc::InvalidInput, "template has no body");
  if (params.size() != static_cast<std::size_t>(tpl.slot_count))
    throw Error(Errc::InvalidInput,
                "template '" + tpl.id + "' takes " + std::to_string(tpl.slot_count) +
                    " parameters, got " + std::to_string(params.size()));
  return substitute_parameters(tpl.body, params);
}

}  // namespace bbp
