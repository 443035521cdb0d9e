#include <catch_amalgamated.hpp>

#include <numbers>

#include "cwkb/expr.hpp"

using namespace cwkb;
using expr::cplx;
using Catch::Matchers::WithinAbs;

namespace {

cplx at(const expr::Expression& e, cplx x) { return e.evaluate({{"x", x}}); }

}  // namespace

TEST_CASE("parse builds the expected trees") {
    auto e = expr::parse("tanh(x)");
    auto* u = std::get_if<expr::Unary>(&e.root().data);
    REQUIRE(u);
    CHECK(u->op == expr::UnaryOp::Tanh);
    CHECK(std::holds_alternative<expr::Variable>(u->arg->data));

    auto p = expr::parse("(x^2+1)*exp(-x)");
    auto* b = std::get_if<expr::Binary>(&p.root().data);
    REQUIRE(b);
    CHECK(b->op == expr::BinaryOp::Mul);
    CHECK_THAT(std::abs(at(p, 0.5) - (1.25 * std::exp(-0.5))), WithinAbs(0.0, 1e-15));

    // precedence and unary minus
    CHECK_THAT(std::abs(at(expr::parse("-x^2"), 3.0) + 9.0), WithinAbs(0.0, 1e-14));
    CHECK_THAT(std::abs(at(expr::parse("2*x+3*x/2"), 2.0) - 7.0), WithinAbs(0.0, 1e-14));
}

TEST_CASE("syntax errors carry the offset") {
    try {
        expr::parse("tanh(");
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.code() == ErrorCode::Syntax);
        CHECK(e.offset() == 5);
    }
    CHECK_THROWS_AS(expr::parse("x +* 2"), ParseError);
    try {
        expr::parse("foo(x)");
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.code() == ErrorCode::UnknownIdentifier);
    }
}

TEST_CASE("evaluation at complex points") {
    const double q = std::numbers::pi / 4;
    CHECK_THAT(std::abs(at(expr::parse("tanh(x)"), cplx(0, q)) - cplx(0, 1)), WithinAbs(0.0, 1e-14));
    CHECK_THAT(std::abs(at(expr::parse("x^2+1"), cplx(0, 1))), WithinAbs(0.0, 1e-15));
    CHECK_THAT(std::abs(at(expr::parse("sech(x)"), 0.0) - 1.0), WithinAbs(0.0, 1e-15));

    CHECK_THROWS_AS(expr::parse("x + delta").evaluate({{"x", 1.0}}), Error);
    CHECK_THROWS_AS(at(expr::parse("1/x"), 0.0), Error);
}

TEST_CASE("symbolic derivative") {
    auto t = expr::parse("tanh(x)");
    auto dt = expr::derivative(t, "x");
    const double x = 0.3, h = 1e-5;
    const cplx fd = (at(t, x + h) - at(t, x - h)) / (2 * h);
    CHECK_THAT(std::abs(at(dt, x) - fd), WithinAbs(0.0, 1e-9));
    const cplx s = 1.0 / std::cosh(cplx(x));
    CHECK_THAT(std::abs(at(dt, x) - s * s), WithinAbs(0.0, 1e-14));

    CHECK(expr::derivative(expr::parse("3*delta + 2"), "x").is_zero());

    auto c = expr::derivative(expr::parse("x^3"), "x");
    for (double v : {-1.5, 0.0, 2.0}) CHECK_THAT(std::abs(at(c, v) - 3 * v * v), WithinAbs(0.0, 1e-13));

    auto q = expr::derivative(expr::parse("sin(x)*exp(2*x)/cos(x)"), "x");
    const cplx z(0.4, 0.2);
    auto f = expr::parse("sin(x)*exp(2*x)/cos(x)");
    const cplx fdz = (at(f, z + h) - at(f, z - h)) / (2 * h);
    CHECK_THAT(std::abs(at(q, z) - fdz), WithinAbs(0.0, 1e-8));
}

TEST_CASE("compiled program matches the tree walk") {
    auto e = expr::parse("tanh(x)*delta - sech(x)^2 + E", {"x", "delta", "E"});
    expr::Program prog(e, {"x", "delta", "E"});
    for (cplx x : {cplx(0.1), cplx(-2.0, 0.3), cplx(1.0, -0.7)}) {
        std::array<cplx, 3> v{x, 0.25, 1.5};
        const cplx ref = e.evaluate({{"x", x}, {"delta", 0.25}, {"E", 1.5}});
        CHECK_THAT(std::abs(prog(v) - ref), WithinAbs(0.0, 1e-14));
    }
    CHECK(expr::Program(expr::parse("2*3"), {})(std::span<const cplx>{}) == cplx(6.0));
}

TEST_CASE("printing round-trips") {
    for (const char* s : {"tanh(x)*(1 + x^2)", "-x/(2 - delta)", "exp(-x^2/2)"}) {
        auto e = expr::parse(s);
        auto back = expr::parse(e.to_string());
        for (cplx x : {cplx(0.3), cplx(-1.1, 0.4)}) {
            const cplx a = e.evaluate({{"x", x}, {"delta", 0.2}}), b = back.evaluate({{"x", x}, {"delta", 0.2}});
            CHECK_THAT(std::abs(a - b), WithinAbs(0.0, 1e-14));
        }
    }
}
