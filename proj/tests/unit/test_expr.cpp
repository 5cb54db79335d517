#include "nht/expr.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace nht {
namespace {

std::map<std::string, double> no_params;

TEST(ExprParse, TorusSymbolShape) {
    Expr e = Expr::parse("xi_y + sin(x)*xi_x");
    const Node& r = e.root();
    ASSERT_EQ(r.op, Op::Add);
    EXPECT_EQ(r.a->op, Op::Name);
    EXPECT_EQ(r.a->name, "xi_y");
    ASSERT_EQ(r.b->op, Op::Mul);
    EXPECT_EQ(r.b->a->op, Op::Sin);
    EXPECT_EQ(r.b->a->a->name, "x");
    EXPECT_EQ(r.b->b->name, "xi_x");
}

TEST(ExprParse, ZeroIsConstant) {
    Expr e = Expr::parse("0");
    EXPECT_EQ(e.root().op, Op::Const);
    EXPECT_EQ(e.root().value, 0.0);
}

TEST(ExprParse, ScatteringSymbolRoundTrips) {
    const std::string s = "cos(2*theta)*(sigma^2 - eta^2) + 2*sin(2*theta)*sigma*eta + h";
    Expr e = Expr::parse(s);
    EXPECT_EQ(e.str(), s);
    EXPECT_EQ(Expr::parse(e.str()), e);
}

TEST(ExprParse, Precedence) {
    // pow binds tighter than unary minus, which binds tighter than mul
    Expr e = Expr::parse("-x^2");
    EXPECT_EQ(e.root().op, Op::Neg);
    EXPECT_EQ(e.root().a->op, Op::Pow);
    Expr f = Expr::parse("2^3^2");
    EXPECT_EQ(f.root().b->op, Op::Pow);
    EXPECT_DOUBLE_EQ(eval(f, {}, no_params).value, 512.0);
    Expr g = Expr::parse("a - b - c");
    EXPECT_EQ(g.root().a->op, Op::Sub);
    EXPECT_DOUBLE_EQ(eval(g, {{"a", 1}, {"b", 2}, {"c", 3}}, no_params).value, -4.0);
    Expr h = Expr::parse("a/b*c");
    EXPECT_EQ(h.root().op, Op::Mul);
    EXPECT_DOUBLE_EQ(eval(Expr::parse("x^-1"), {{"x", 4}}, no_params).value, 0.25);
}

TEST(ExprParse, SyntaxErrorsCarryOffsetAndHint) {
    try {
        Expr::parse("sin(x + ");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 8u);
        EXPECT_FALSE(e.expected().empty());
    }
    try {
        Expr::parse("(x + 1");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.expected(), "')'");
    }
    try {
        Expr::parse("foo(x)");
        FAIL();
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.offset(), 0u);
    }
    EXPECT_THROW(Expr::parse(""), SyntaxError);
    EXPECT_THROW(Expr::parse("x y"), SyntaxError);
    EXPECT_THROW(Expr::parse("x $ 2"), SyntaxError);
}

TEST(ExprParse, PrintKeepsTreeForAwkwardShapes) {
    for (const char* s : {"a - (b - c)", "a/(b*c)", "(-a)^b", "(a^b)^c", "a*-b", "--a",
                          "-(a + b)*c", "a^-b^2", "1e-10*x", "1.5e+20 + x", "neg(x)",
                          "abs(sign(x))", "tan(exp(log(sqrt(x))))"}) {
        Expr e = Expr::parse(s);
        EXPECT_EQ(Expr::parse(e.str()), e) << s << " printed as " << e.str();
    }
}

TEST(ExprEval, Basics) {
    EXPECT_EQ(eval(Expr::parse("sin(x)"), {{"x", 0.0}}, no_params).value, 0.0);
    Expr mu = Expr::parse("(r^2 + a^2)*(1 - Lambda*r^2/3) - 2*M*r");
    EXPECT_DOUBLE_EQ(eval(mu, {{"r", 2.0}}, {{"a", 0}, {"Lambda", 0}, {"M", 1}}).value, 0.0);
    Expr F = Expr::parse("((r^2 + a^2)*xi_t + a*xi_phi)^2/((r^2 + a^2)*(1 - Lambda*r^2/3) - 2*M*r)");
    EXPECT_DOUBLE_EQ(
        eval(F, {{"r", 3.0}, {"xi_t", 1.0}, {"xi_phi", 0.0}}, {{"a", 0}, {"Lambda", 0}, {"M", 1}})
            .value,
        27.0);
    EXPECT_DOUBLE_EQ(eval(Expr::parse("pi"), {}, no_params).value, std::numbers::pi);
}

TEST(ExprEval, UnboundNameIsBindError) {
    try {
        eval(Expr::parse("x + q"), {{"x", 1.0}}, no_params);
        FAIL();
    } catch (const BindError& e) {
        EXPECT_EQ(e.name(), "q");
    }
}

TEST(ExprEval, DomainErrorsNameSubexpression) {
    try {
        eval(Expr::parse("1 + sqrt(x - 2)"), {{"x", 1.0}}, no_params);
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_EQ(e.subexpression(), "sqrt(x - 2)");
    }
    EXPECT_THROW(eval(Expr::parse("log(x)"), {{"x", 0.0}}, no_params), DomainError);
    EXPECT_THROW(eval(Expr::parse("x^0.5"), {{"x", -1.0}}, no_params), DomainError);
    EXPECT_THROW(eval(Expr::parse("x^y"), {{"x", -1.0}, {"y", 2.0}}, no_params), DomainError);
}

TEST(ExprEval, NonFiniteAndKinkFlagged) {
    auto r = eval(Expr::parse("1/x"), {{"x", 0.0}}, no_params);
    EXPECT_TRUE(r.status.nonfinite);
    auto k = eval(Expr::parse("sign(x)*abs(x)"), {{"x", 5e-9}}, no_params);
    EXPECT_TRUE(k.status.kink);
    auto ok = eval(Expr::parse("abs(x)"), {{"x", 1e-3}}, no_params);
    EXPECT_FALSE(ok.status.kink);
    Compiled c(Expr::parse("abs(x)"), {"x"}, no_params);
    double x = 0.0;
    EXPECT_TRUE(c.jet2(&x).status.kink);
}

TEST(ExprJet, SquareAndChainRule) {
    DualTower d = eval_jet2(Expr::parse("x^2"), {"x"}, {3.0}, no_params);
    EXPECT_DOUBLE_EQ(d.value, 9.0);
    EXPECT_DOUBLE_EQ(d.first[0], 6.0);
    EXPECT_DOUBLE_EQ(d.second(0, 0), 2.0);

    DualTower e = eval_jet2(Expr::parse("sin(x)*xi_x"), {"x", "xi_x"},
                            {std::numbers::pi / 2, 2.0}, no_params);
    EXPECT_DOUBLE_EQ(e.value, 2.0);
    EXPECT_NEAR(e.first[0], 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(e.first[1], 1.0);
}

// Random smooth ASTs whose every node is defined on all of R^3.
class RandomAst {
public:
    explicit RandomAst(unsigned seed) : rng_(seed) {}

    Expr make(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 11);
        switch (pick(rng_)) {
        case 0: {
            // parsed trees only hold non-negative literals
            double c = std::uniform_real_distribution<double>(-2, 2)(rng_);
            return c < 0 ? Expr::unary(Op::Neg, Expr::constant(-c)) : Expr::constant(c);
        }
        case 1: return Expr::name(vars_[std::uniform_int_distribution<int>(0, 2)(rng_)]);
        case 2: return Expr::binary(Op::Add, make(depth - 1), make(depth - 1));
        case 3: return Expr::binary(Op::Sub, make(depth - 1), make(depth - 1));
        case 4: return Expr::binary(Op::Mul, make(depth - 1), make(depth - 1));
        case 5: return Expr::unary(Op::Sin, make(depth - 1));
        case 6: return Expr::unary(Op::Cos, make(depth - 1));
        case 7: return Expr::unary(Op::Exp, Expr::unary(Op::Sin, make(depth - 1)));
        case 8:
            return Expr::unary(Op::Sqrt, Expr::binary(Op::Add, Expr::constant(1),
                                                      Expr::binary(Op::Pow, make(depth - 1),
                                                                   Expr::constant(2))));
        case 9:
            return Expr::unary(Op::Log, Expr::binary(Op::Add, Expr::constant(2),
                                                     Expr::unary(Op::Cos, make(depth - 1))));
        case 10:
            return Expr::binary(Op::Div, make(depth - 1),
                                Expr::binary(Op::Add, Expr::constant(3),
                                             Expr::unary(Op::Sin, make(depth - 1))));
        default:
            return Expr::unary(Op::Neg, make(depth - 1));
        }
    }

    std::vector<double> point() {
        std::uniform_real_distribution<double> u(-1.5, 1.5);
        return {u(rng_), u(rng_), u(rng_)};
    }

    const std::vector<std::string>& vars() const { return vars_; }

private:
    std::mt19937_64 rng_;
    std::vector<std::string> vars_{"x", "y", "z"};
};

TEST(ExprJet, MatchesCentralDifferencesOnRandomTrees) {
    RandomAst gen(20240611);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        Expr e = gen.make(6);
        Compiled c(e, gen.vars(), no_params);
        auto x = gen.point();
        DualTower d = c.jet2(x.data());
        for (int k = 0; k < 3; ++k) {
            auto xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            double fd = (c(xp.data()) - c(xm.data())) / (2 * h);
            double scale = std::max({1.0, std::fabs(d.first[k]), std::fabs(d.value)});
            EXPECT_LE(std::fabs(fd - d.first[k]), 1e-6 * scale) << e.str();
            // Hessian row against differences of the analytic gradient
            DualTower dp = c.jet2(xp.data()), dm = c.jet2(xm.data());
            for (int j = 0; j < 3; ++j) {
                double fdh = (dp.first[j] - dm.first[j]) / (2 * h);
                double sc = std::max({1.0, std::fabs(d.second(k, j)), std::fabs(d.first[j])});
                EXPECT_LE(std::fabs(fdh - d.second(k, j)), 1e-6 * sc) << e.str();
            }
        }
    }
}

TEST(ExprJet, HessianSymmetric) {
    RandomAst gen(7);
    for (int trial = 0; trial < 200; ++trial) {
        Expr e = gen.make(6);
        auto x = gen.point();
        DualTower d = eval_jet2(e, gen.vars(), x, no_params);
        double scale = std::max(1.0, d.second.cwiseAbs().maxCoeff());
        EXPECT_LE((d.second - d.second.transpose()).cwiseAbs().maxCoeff(), 1e-12 * scale);
    }
}

TEST(ExprProperty, PrintParseIdentityOnRandomTrees) {
    RandomAst gen(99);
    for (int trial = 0; trial < 300; ++trial) {
        Expr e = gen.make(6);
        std::string s = e.str();
        Expr back = Expr::parse(s);
        EXPECT_EQ(back, e) << s;
        EXPECT_EQ(back.str(), s);
        auto x = gen.point();
        Compiled a(e, gen.vars(), no_params), b(back, gen.vars(), no_params);
        EXPECT_EQ(a(x.data()), b(x.data()));
    }
}

TEST(ExprProperty, CanonicalStringsAreFixedPoints) {
    for (const char* s : {"xi_y + sin(x)*xi_x", "x^2 - 2*x + 1", "-sqrt(a)/b^3",
                          "exp(-x^2/2)*cos(3*y)"}) {
        Expr e = Expr::parse(s);
        EXPECT_EQ(e.str(), s);
    }
}

}  // namespace
}  // namespace nht
