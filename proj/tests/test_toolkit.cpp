#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "r2a/toolkit.hpp"

using namespace r2a;

namespace {

PrimitiveRequest req(const std::string& name, double eps)
{
    PrimitiveRequest r;
    r.name = name;
    r.eps = eps;
    return r;
}

double compiled_at(const PrimitiveResult& p, std::vector<double> x)
{
    return transformer_forward(p.compiled.net, DenseMatrix::column(x))(0, 0);
}

} // namespace

TEST(Knots, GreedyMeetsTolerance)
{
    const auto f = [](double x) { return std::sqrt(x); };
    const auto f2 = [](double x) { return 0.25 * std::pow(x, -1.5); };
    const auto k = greedy_knots(f, f2, 0.1, 10.0, 1e-3);
    ASSERT_GE(k.size(), 2u);
    EXPECT_EQ(k.front().first, 0.1);
    EXPECT_EQ(k.back().first, 10.0);
    for (std::size_t i = 0; i + 1 < k.size(); ++i)
        for (int s = 1; s < 20; ++s) {
            const double x = k[i].first + (k[i + 1].first - k[i].first) * s / 20.0;
            const double lin = k[i].second + (k[i + 1].second - k[i].second) * s / 20.0;
            ASSERT_LE(std::abs(lin - f(x)), 1e-3);
        }
}

TEST(Knots, ErrorEstimateOfParabola)
{
    // x^2 on a uniform grid of step h: |f''| = 2, estimate h^2/4
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i <= 10; ++i)
        s.emplace_back(i * 0.1, i * i * 0.01);
    EXPECT_NEAR(interpolation_error_estimate(s), 0.01 / 4.0, 1e-12);
}

TEST(Primitive, TargetsByHand)
{
    auto r = req("clip", 0.1);
    r.c = 1.5;
    EXPECT_EQ(primitive_target(r, {3.0}), 1.5);
    EXPECT_EQ(primitive_target(req("inv", 0.1), {4.0}), 0.25);
    EXPECT_EQ(primitive_target(req("max", 0.1), {-1.0, 2.0}), 2.0);
    EXPECT_NEAR(primitive_target(req("alpha", 0.1), {2.0}), std::exp(-1.0), 1e-15);
    EXPECT_NEAR(primitive_target(req("sigma", 0.1), {1.0}), std::sqrt(1 - std::exp(-1.0)), 1e-15);
}

TEST(Primitive, InvShallowWithinBound)
{
    const auto p = build_primitive(req("inv", 0.1));
    EXPECT_EQ(p.compiled.report.K, 3u);
    double worst = 0.0;
    for (int i = 0; i <= 500; ++i) {
        const double x = 0.1 * std::pow(100.0, i / 500.0);
        worst = std::max(worst, std::abs(compiled_at(p, {x}) - 1.0 / x));
    }
    EXPECT_LE(worst, 0.2);
    EXPECT_LE(p.measured_max_error, 0.2);
    EXPECT_EQ(p.grid_points, 1000u);
}

TEST(Primitive, ExactOnesCompileNearExactly)
{
    for (const char* name : {"max", "min"}) {
        auto r = req(name, 0.05);
        r.C_X = 5.0;
        const auto p = build_primitive(r);
        EXPECT_LE(p.relu_measured_error, 1e-12);
        EXPECT_LE(p.measured_max_error, 0.05);
    }
}

TEST(Primitive, Preconditions)
{
    try {
        build_primitive(req("clip", 0.1));
        FAIL();
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("--c"), std::string::npos);
    }
    auto s = req("sigma", 0.1);
    s.C_X = 0.05;
    EXPECT_THROW(build_primitive(s), DomainError);
    auto m = req("mult", 0.1);
    m.dim = 0;
    EXPECT_THROW(build_primitive(m), DomainError);
    EXPECT_THROW(build_primitive(req("tan", 0.1)), DomainError);
    EXPECT_THROW(build_primitive(req("inv", 0.0)), DomainError);
}

TEST(Primitive, DeepRouteIsRefused)
{
    auto r = req("inv", 0.1);
    r.route = "deep";
    EXPECT_THROW(build_primitive(r), BudgetError);
}

TEST(Primitive, UapRejectsCoarseSamples)
{
    std::vector<std::pair<double, double>> s;
    for (int i = 0; i <= 4; ++i)
        s.emplace_back(i / 4.0, std::sin(std::numbers::pi * i / 4.0));
    EXPECT_THROW(build_uap_1d(s, 1e-3), DomainError);
}

TEST(Primitive, GridShapes)
{
    auto m = req("mult", 0.1);
    m.dim = 2;
    EXPECT_EQ(primitive_grid(m).size(), 41u * 41u);
    const auto g = primitive_grid(req("inv", 0.1));
    EXPECT_NEAR(g.front()[0], 0.1, 1e-15);
    EXPECT_NEAR(g.back()[0], 10.0, 1e-12);
}
