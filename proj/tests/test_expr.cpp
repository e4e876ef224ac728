#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "parmp/expr.hpp"
#include "parmp/rng.hpp"

using namespace parmp;

namespace {

double eval_str(const std::string& src, double x1 = 0.0, double t = 0.0,
                double z1 = 0.0) {
    const auto e = parse_expression(src);
    EvalEnv env;
    env.x = &x1;
    env.n = 1;
    env.t = t;
    env.z = &z1;
    env.k = 1;
    return evaluate_expression(*e, env);
}

}  // namespace

TEST_CASE("parse builds the expected tree", "[expr]") {
    const auto e = parse_expression("2*z1*(1-z1)");
    REQUIRE(e->op == ExprOp::Mul);
    REQUIRE(e->lhs->op == ExprOp::Mul);
    REQUIRE(e->lhs->lhs->op == ExprOp::Literal);
    REQUIRE(e->lhs->lhs->literal == 2.0);
    REQUIRE(e->lhs->rhs->op == ExprOp::VarZ);
    REQUIRE(e->lhs->rhs->index == 1);
    REQUIRE(e->rhs->op == ExprOp::Sub);
    REQUIRE(e->rhs->lhs->literal == 1.0);
    REQUIRE(e->rhs->rhs->op == ExprOp::VarZ);
}

TEST_CASE("incomplete expression reports byte offset", "[expr]") {
    try {
        parse_expression("z1 + ");
        FAIL("expected ParseError");
    } catch (const ParseError& pe) {
        REQUIRE(pe.offset() == 5);
        REQUIRE_FALSE(pe.expected().empty());
    }
}

TEST_CASE("power binds tighter than unary minus", "[expr]") {
    const auto e = parse_expression("-x1^2");
    REQUIRE(e->op == ExprOp::Neg);
    REQUIRE(e->lhs->op == ExprOp::Pow);
    // Hand-expanded AST at x1 = 2: -(2^2) = -4.
    REQUIRE(eval_str("-x1^2", 2.0) == -4.0);
}

TEST_CASE("precedence and associativity", "[expr]") {
    REQUIRE(eval_str("2^3^2") == 512.0);      // right-assoc
    REQUIRE(eval_str("1-2-3") == -4.0);       // left-assoc
    REQUIRE(eval_str("2*3+4") == 10.0);
    REQUIRE(eval_str("2+3*4") == 14.0);
    REQUIRE(eval_str("2^-1") == 0.5);
    REQUIRE(eval_str(" 1 +\t2 ") == eval_str("1+2"));
}

TEST_CASE("evaluation basics", "[expr]") {
    REQUIRE(eval_str("exp(0)") == 1.0);
    REQUIRE(eval_str("min(t, 2)", 0.0, 3.0) == 2.0);
    REQUIRE(eval_str("max(t, 2)", 0.0, 3.0) == 3.0);
    REQUIRE(eval_str("abs(-3)") == 3.0);
    REQUIRE(eval_str("tanh(0)") == 0.0);
}

TEST_CASE("pythagorean identity holds at random points", "[expr]") {
    const auto e = parse_expression("sin(x1)^2 + cos(x1)^2");
    SplitMix64 rng(11);
    for (int i = 0; i < 200; ++i) {
        double x1 = rng.next_double(-50.0, 50.0);
        EvalEnv env;
        env.x = &x1;
        env.n = 1;
        REQUIRE(std::fabs(evaluate_expression(*e, env) - 1.0) <= 1e-12);
    }
}

TEST_CASE("evaluation errors", "[expr]") {
    REQUIRE_THROWS_AS(eval_str("1/(x1-x1)"), EvalError);
    REQUIRE_THROWS_AS(eval_str("(x1-x1)^-1"), EvalError);
    try {
        eval_str("1 + 2/(x1 - x1)");
        FAIL("expected EvalError");
    } catch (const EvalError& ee) {
        REQUIRE(ee.subexpr().find("/") != std::string::npos);
    }
}

TEST_CASE("unknown identifiers are rejected", "[expr]") {
    REQUIRE_THROWS_AS(parse_expression("y1"), ParseError);
    REQUIRE_THROWS_AS(parse_expression("x0"), ParseError);
    REQUIRE_THROWS_AS(parse_expression("x3", ExprDims{2, 2}), ParseError);
    REQUIRE_THROWS_AS(parse_expression("z3", ExprDims{2, 2}), ParseError);
    REQUIRE_NOTHROW(parse_expression("x2 + z2", ExprDims{2, 2}));
    try {
        parse_expression("2*foo(1)");
        FAIL("expected ParseError");
    } catch (const ParseError& pe) {
        REQUIRE(pe.offset() == 2);
    }
}

TEST_CASE("syntax errors", "[expr]") {
    REQUIRE_THROWS_AS(parse_expression("(1+2"), ParseError);
    REQUIRE_THROWS_AS(parse_expression("1 2"), ParseError);
    REQUIRE_THROWS_AS(parse_expression("min(1)"), ParseError);
    REQUIRE_THROWS_AS(parse_expression(""), ParseError);
    REQUIRE_THROWS_AS(parse_expression("1..2"), ParseError);
}

namespace {

ExprPtr random_expr(SplitMix64& rng, int depth) {
    const double pick = rng.next_double();
    if (depth <= 0 || pick < 0.3) {
        switch (rng.next_u64() % 4) {
            case 0: return make_literal(std::floor(rng.next_double(0.0, 100.0)) / 8.0);
            case 1: return make_var(ExprOp::VarX, 1 + static_cast<int>(rng.next_u64() % 2));
            case 2: return make_var(ExprOp::VarZ, 1 + static_cast<int>(rng.next_u64() % 2));
            default: return make_var(ExprOp::VarT, 0);
        }
    }
    switch (rng.next_u64() % 10) {
        case 0: return make_node(ExprOp::Add, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 1: return make_node(ExprOp::Sub, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 2: return make_node(ExprOp::Mul, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 3: return make_node(ExprOp::Div, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        case 4: return make_node(ExprOp::Pow, random_expr(rng, depth - 1), make_literal(2.0));
        case 5: return make_node(ExprOp::Neg, random_expr(rng, depth - 1));
        case 6: return make_node(ExprOp::Sin, random_expr(rng, depth - 1));
        case 7: return make_node(ExprOp::Tanh, random_expr(rng, depth - 1));
        case 8: return make_node(ExprOp::Min, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
        default: return make_node(ExprOp::Max, random_expr(rng, depth - 1), random_expr(rng, depth - 1));
    }
}

}  // namespace

TEST_CASE("print/parse round trip is the identity on the tree", "[expr]") {
    SplitMix64 rng(2024);
    for (int i = 0; i < 300; ++i) {
        const auto e = random_expr(rng, 5);
        const std::string printed = print_expression(*e);
        const auto reparsed = parse_expression(printed);
        INFO(printed);
        REQUIRE(expr_equal(*e, *reparsed));
    }
}

TEST_CASE("compiled evaluation matches the tree walker", "[expr]") {
    SplitMix64 rng(77);
    for (int i = 0; i < 200; ++i) {
        const auto e = random_expr(rng, 4);
        const CompiledExpr compiled(*e);
        for (int rep = 0; rep < 5; ++rep) {
            double xs[2] = {rng.next_double(-2.0, 2.0), rng.next_double(-2.0, 2.0)};
            double zs[2] = {rng.next_double(-2.0, 2.0), rng.next_double(-2.0, 2.0)};
            EvalEnv env;
            env.x = xs;
            env.n = 2;
            env.t = rng.next_double(0.0, 1.0);
            env.z = zs;
            env.k = 2;
            double tree = 0.0, flat = 0.0;
            bool tree_err = false, flat_err = false;
            try {
                tree = evaluate_expression(*e, env);
            } catch (const EvalError&) {
                tree_err = true;
            }
            try {
                flat = compiled.eval(env);
            } catch (const EvalError&) {
                flat_err = true;
            }
            REQUIRE(tree_err == flat_err);
            if (!tree_err && std::isfinite(tree)) {
                REQUIRE(flat == tree);
            }
        }
    }
}
