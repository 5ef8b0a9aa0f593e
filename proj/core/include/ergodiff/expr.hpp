#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ergodiff/errors.hpp"

namespace ergodiff {

enum class NodeKind : std::uint8_t { Constant, Variable, Add, Mul, Div, Pow, Exp };

// Immutable symbolic scalar function of state variables x1..xn.
//
// Node set: constants, variables (1-based index), n-ary sums and products,
// quotients, real powers and the exponential. Square roots are pow(., 0.5);
// there is deliberately no log node — barrier code expands log(psi)
// analytically. Subtrees are shared (the structure is a DAG); nodes are
// never mutated after construction, so expressions can be evaluated from
// many threads at once.
class Expression {
public:
    struct Node;
    using NodePtr = std::shared_ptr<const Node>;

    struct Node {
        NodeKind kind;
        double value = 0.0; // Constant payload, or the exponent of Pow
        int var_index = 0;  // Variable payload, 1-based
        std::vector<NodePtr> kids;
    };

    Expression();

    static Expression constant(double v);
    static Expression variable(int index_1based);

    // Simplifying constructors: fold constants, drop 0/1 identities,
    // flatten nested sums and products.
    static Expression add(std::vector<Expression> terms);
    static Expression mul(std::vector<Expression> factors);
    static Expression div(Expression num, Expression den);
    static Expression pow(Expression base, double exponent);
    static Expression exp(Expression arg);

    // Exact arithmetic evaluation of the tree. Throws DomainError on
    // division by zero or an invalid power, with the offending node path.
    double evaluate(std::span<const double> x) const;

    // Exact symbolic partial derivative with respect to x_{var_index}.
    Expression differentiate(int var_index) const;

    // Bottom-up rebuild through the simplifying constructors.
    Expression simplify() const;

    int max_var_index() const;
    std::size_t node_count() const;

    bool is_constant() const;
    double constant_value() const;

    // Parenthesized prefix syntax, e.g.
    //   (mul (pow (var 1) 0.5) (exp (mul -0.5 (var 1))))
    // Printing and parsing round-trip exactly (parse preserves structure).
    std::string to_string() const;
    static Expression parse(std::string_view text);

    const NodePtr& root() const noexcept { return root_; }

    static Expression from_root(NodePtr root) { return Expression(std::move(root)); }

private:
    explicit Expression(NodePtr root) : root_(std::move(root)) {}
    NodePtr root_;
};

Expression operator+(Expression a, Expression b);
Expression operator-(Expression a, Expression b);
Expression operator*(Expression a, Expression b);
Expression operator/(Expression a, Expression b);
Expression operator-(Expression a);
Expression operator+(double a, Expression b);
Expression operator+(Expression a, double b);
Expression operator-(double a, Expression b);
Expression operator-(Expression a, double b);
Expression operator*(double a, Expression b);
Expression operator*(Expression a, double b);
Expression operator/(double a, Expression b);
Expression operator/(Expression a, double b);

// Flat evaluation tape compiled from an Expression. One slot per distinct
// DAG node; evaluation is a tight loop with no allocation. Use this in hot
// paths (path simulation, dense grid sweeps); Expression::evaluate is fine
// everywhere else.
class CompiledExpression {
public:
    CompiledExpression() = default;
    explicit CompiledExpression(const Expression& e);

    // scratch must have at least scratch_size() elements; it is reused
    // across calls and owned by the caller (one per thread).
    double operator()(std::span<const double> x, std::vector<double>& scratch) const;

    std::size_t scratch_size() const noexcept { return slots_; }

private:
    enum class Op : std::uint8_t {
        Const,
        Var,
        Add,
        Mul,
        Div,
        PowGeneral,
        Sqrt,
        Square,
        Recip,
        RecipSqrt,
        Exp,
    };
    struct Step {
        Op op;
        std::int32_t dst = 0;
        std::int32_t a = 0;
        std::int32_t b = 0;
        double c = 0.0;
    };
    std::vector<Step> steps_;
    std::size_t slots_ = 0;
    std::int32_t result_slot_ = 0;
};

} // namespace ergodiff
