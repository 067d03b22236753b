#include <gtest/gtest.h>

#include <cmath>

#include "r2a/compiler.hpp"
#include "r2a/rng.hpp"
#include "r2a/verify.hpp"

using namespace r2a;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, SplitMix64& rng, double s = 1.0)
{
    DenseMatrix M(r, c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
            M.set(i, j, rng.uniform(-s, s));
    return M;
}

OneLayerSpec random_spec(std::size_t d_out, std::size_t d, std::size_t n, std::size_t N, SplitMix64& rng)
{
    OneLayerSpec s(d_out, d, n, N);
    for (auto& w : s.w)
        w = rng.uniform(-1, 1);
    for (auto& a : s.a)
        a = rng.uniform01() < 0.5 ? -1 : 1;
    return s;
}

// out[r][i] = sum_k a ReLU(sum_{j,t} w x[t][j]), written against the flat layout
DenseMatrix naive_spec(const OneLayerSpec& s, const DenseMatrix& X)
{
    DenseMatrix out(s.d_out, s.n);
    std::size_t wi = 0, ai = 0;
    for (std::size_t r = 0; r < s.d_out; ++r)
        for (std::size_t i = 0; i < s.n; ++i) {
            double f = 0.0;
            for (std::size_t k = 0; k < s.N; ++k) {
                double acc = 0.0;
                for (std::size_t j = 0; j < s.n; ++j)
                    for (std::size_t t = 0; t < s.d_tok; ++t)
                        acc += s.w[wi++] * X(t, j);
                f += s.a[ai++] * std::max(0.0, acc);
            }
            out.set(r, i, f);
        }
    return out;
}

ReluNetwork random_net(const std::vector<std::size_t>& dims, double B, SplitMix64& rng)
{
    std::vector<ReluLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l)
        layers.push_back({random_matrix(dims[l + 1], dims[l], rng, B), random_matrix(dims[l + 1], 1, rng, B)});
    return ReluNetwork(std::move(layers));
}

} // namespace

TEST(Spec, ForwardMatchesFlatLoops)
{
    SplitMix64 rng(1);
    const auto s = random_spec(2, 3, 2, 3, rng);
    for (int k = 0; k < 20; ++k) {
        const auto X = random_matrix(3, 2, rng, 2.0);
        EXPECT_LE(max_norm(subtract(spec_forward(s, X), naive_spec(s, X))), 1e-13);
    }
    OneLayerSpec bad = s;
    bad.a[0] = 0;
    EXPECT_THROW(bad.validate(), DomainError);
    EXPECT_THROW(OneLayerSpec(1, 1, 0, 1), DomainError);
}

TEST(Spec, AbsorbBiasOfReluLayer)
{
    SplitMix64 rng(2);
    const std::size_t d = 2, n = 3, m = 5;
    const ReluLayer L{random_matrix(m, d * n, rng), random_matrix(m, 1, rng)};
    const OneLayerSpec s = absorb_bias(L, n);
    EXPECT_TRUE(s.bias_coordinate);
    EXPECT_EQ(s.d_out, 2u); // ceil(5 / 3)
    for (int k = 0; k < 20; ++k) {
        const auto X = random_matrix(d, n, rng);
        // vec(X) column-major, then ReLU(A x + b)
        std::vector<double> h(m);
        for (std::size_t e = 0; e < m; ++e) {
            double acc = L.b(e, 0);
            for (std::size_t c = 0; c < d * n; ++c)
                acc += L.A(e, c) * X(c % d, c / d);
            h[e] = std::max(0.0, acc);
        }
        const auto got = spec_forward(s, X);
        for (std::size_t e = 0; e < s.d_out * n; ++e)
            EXPECT_NEAR(got(e % s.d_out, e / s.d_out), e < m ? h[e] : 0.0, 1e-13);
    }
    EXPECT_THROW(absorb_bias(ReluLayer{DenseMatrix(2, 5), DenseMatrix(2, 1)}, 2), ShapeError);
}

TEST(Spec, AbsorbBiasOfBiasedSpec)
{
    SplitMix64 rng(3);
    BiasedSpec b{random_spec(1, 2, 2, 2, rng), {}};
    for (std::size_t i = 0; i < 4; ++i)
        b.bias.push_back(rng.uniform(-1, 1));
    const auto s = absorb_bias(b);
    const auto X = random_matrix(2, 2, rng);
    const auto got = spec_forward(s, X);
    for (std::size_t i = 0; i < 2; ++i) {
        double f = 0.0;
        for (std::size_t k = 0; k < 2; ++k) {
            double acc = b.bias[i * 2 + k];
            for (std::size_t j = 0; j < 2; ++j)
                for (std::size_t t = 0; t < 2; ++t)
                    acc += b.spec.weight(0, i, k, j, t) * X(t, j);
            f += b.spec.sign(0, i, k) * std::max(0.0, acc);
        }
        EXPECT_NEAR(got(0, i), f, 1e-13);
    }
}

TEST(Budget, OneLayerSplits)
{
    const auto b = budget_one_layer(0.1, 2, 3, 4);
    EXPECT_DOUBLE_EQ(b.eps1, 0.1 / 72.0);
    EXPECT_DOUBLE_EQ(b.eps2, 0.1 / 12.0);
    EXPECT_DOUBLE_EQ(b.eps_relu, 0.1 / 27.0);
}

TEST(Budget, MultiLayerGrowth)
{
    const auto b = budget_multilayer(0.1, 2, 4, 1.0);
    EXPECT_DOUBLE_EQ(b.growth, 16.0);
    ASSERT_EQ(b.eps_k.size(), 2u);
    EXPECT_DOUBLE_EQ(b.eps_k[0], 0.1 / (2.0 * 16.0));
    // small weights do not shrink the bound
    EXPECT_DOUBLE_EQ(budget_multilayer(0.1, 3, 2, 0.25).growth, 1.0);
    EXPECT_THROW(budget_multilayer(0.1, 400, 100, 100.0), BudgetError);
}

TEST(Lift, SelectorOrganizerAndProducts)
{
    const auto S = selector_matrix(2, 5, 1);
    const auto O = organizer_matrix(5, 2, 3);
    ASSERT_EQ(S.rows(), 2u);
    ASSERT_EQ(S.cols(), 5u);
    ASSERT_EQ(O.rows(), 5u);
    ASSERT_EQ(O.cols(), 2u);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            EXPECT_EQ(S(i, j), j == i + 1 ? 1.0 : 0.0);
            EXPECT_EQ(O(j, i), j == i + 3 ? 1.0 : 0.0);
        }
    SplitMix64 rng(4);
    const AttnHead h(random_matrix(3, 2, rng), random_matrix(3, 2, rng), random_matrix(2, 2, rng));
    const AttnHead l = lift_head(h, O, S);
    EXPECT_EQ(l.W_K, matmul(h.W_K, S));
    EXPECT_EQ(l.W_Q, matmul(h.W_Q, S));
    EXPECT_EQ(l.W_V, matmul(matmul(O, h.W_V), S));
}

TEST(Block, HeadCountsAndShape)
{
    SplitMix64 rng(5);
    for (std::size_t R : {1u, 2u})
        for (std::size_t n : {1u, 3u})
            for (std::size_t N : {1u, 2u}) {
                const std::size_t d = 2;
                const auto b = compile_one_layer_matrix(random_spec(R, d, n, N, rng), 1.0, 0.1);
                ASSERT_EQ(b.net.layers().size(), 3u);
                EXPECT_EQ(b.cert.heads[0], R * (n * n * N + 1));
                EXPECT_EQ(b.cert.heads[1], R * (n * N + 1));
                EXPECT_EQ(b.cert.heads[2], R * n * N);
                EXPECT_EQ(b.net.layers()[0].heads.size(), b.cert.heads[0]);
                EXPECT_EQ(b.net.layers()[0].d_out(), R * (d * n * N + n + 1));
                EXPECT_EQ(b.net.layers()[1].d_out(), R * (n * N + n + 1));
                EXPECT_EQ(b.net.output_rows(), R);
            }
}

TEST(Block, ParametersFollowBudget)
{
    SplitMix64 rng(6);
    const auto s = random_spec(1, 2, 3, 2, rng);
    const auto b = compile_one_layer_matrix(s, 2.0, 0.05);
    const double Cs = 3.0 * 2.0 * s.w0() * 2.0;
    EXPECT_DOUBLE_EQ(b.cert.C_s, Cs);
    EXPECT_DOUBLE_EQ(b.cert.eps_relu, 0.05 / 15.0);
    EXPECT_DOUBLE_EQ(b.cert.lambda3, 2.0 * std::log(Cs * 3.0 / (0.05 / 15.0)) / (0.05 / 15.0));
    EXPECT_EQ(b.net.layers()[2].lambda, b.cert.lambda3);
    EXPECT_GE(b.cert.lambda1, b.cert.lambda_id);
}

TEST(Block, ErrorWithinEps)
{
    SplitMix64 rng(7);
    for (std::size_t d : {1u, 2u})
        for (std::size_t n : {1u, 2u, 3u})
            for (double C : {1.0, 3.0}) {
                const auto s = random_spec(1, d, n, 2, rng);
                const double eps = 0.05;
                const auto b = compile_one_layer_vector(s, C, eps);
                const auto inputs = sample_box({d, n}, C, 100, 9);
                const double err = max_error(b.net, inputs, [&](const DenseMatrix& X) { return naive_spec(s, X); });
                EXPECT_LE(err, eps) << d << " " << n << " " << C;
            }
}

TEST(Block, RefusesHugeScoreScale)
{
    SplitMix64 rng(8);
    auto s = random_spec(1, 2, 3, 4, rng);
    s.w[0] = 1e6;
    EXPECT_THROW(compile_one_layer_matrix(s, 10.0, 1e-6), BudgetError);
}

TEST(Network, ThreeLayerNetWithinEps)
{
    SplitMix64 rng(10);
    const auto f = random_net({4, 3, 2, 2}, 0.5, rng);
    const Layout lay{2, 2};
    const double eps = 0.1;
    const auto res = compile_network(f, lay, 1.0, eps);
    EXPECT_EQ(res.report.K, 9u);
    EXPECT_EQ(res.blocks.size(), 3u);
    EXPECT_EQ(res.output_entries, 2u);
    const std::size_t rows = res.net.output_rows();
    const auto inputs = sample_box(lay, 1.0, 200, 42);
    const double err = max_error(res.net, inputs, [&](const DenseMatrix& X) {
        // independent oracle: vec column-major, relu_forward, reshape
        std::vector<double> x;
        for (std::size_t j = 0; j < X.cols(); ++j)
            for (std::size_t i = 0; i < X.rows(); ++i)
                x.push_back(X(i, j));
        const auto y = relu_forward(f, x);
        DenseMatrix out(rows, lay.n);
        for (std::size_t e = 0; e < y.size(); ++e)
            out.set(e % rows, e / rows, y[e]);
        return out;
    });
    EXPECT_LE(err, eps);
}

TEST(Network, DeepNetRefusedWithGrowthDiagnostic)
{
    std::vector<ReluLayer> layers;
    for (int l = 0; l < 10; ++l)
        layers.push_back({scale(DenseMatrix::identity(10), 2.0), DenseMatrix(10, 1)});
    const ReluNetwork f(layers);
    try {
        compile_network(f, {10, 1}, 1.0, 0.1);
        FAIL() << "expected BudgetError";
    } catch (const BudgetError& e) {
        EXPECT_NE(std::string(e.what()).find("(W_f B)^K_f"), std::string::npos) << e.what();
    }
}

TEST(Network, InputDimMustMatchLayout)
{
    SplitMix64 rng(11);
    EXPECT_THROW(compile_network(random_net({3, 2, 1}, 1.0, rng), {2, 2}, 1.0, 0.1), ShapeError);
}

TEST(Network, TwoLayerFoldIsThreeLayers)
{
    SplitMix64 rng(12);
    const auto f = random_net({2, 5, 1}, 1.0, rng);
    const auto res = compile_two_layer(f, {1, 2}, 2.0, 0.05);
    EXPECT_EQ(res.report.K, 3u);
    const auto inputs = sample_box({1, 2}, 2.0, 200, 1);
    const auto rows = res.net.output_rows();
    EXPECT_LE(max_error(res.net, inputs, [&](const DenseMatrix& X) { return relu_reference(f, X, rows); }), 0.05);
    EXPECT_THROW(compile_two_layer(random_net({2, 3, 3, 1}, 1.0, rng), {1, 2}, 1.0, 0.1), DomainError);
}

TEST(Tune, LowersLambdaAndKeepsError)
{
    SplitMix64 rng(13);
    const auto f = random_net({2, 3, 1}, 1.0, rng);
    const auto res = compile_network(f, {1, 2}, 1.0, 0.1);
    const auto rows = res.net.output_rows();
    const Oracle o = [&](const DenseMatrix& X) { return relu_reference(f, X, rows); };
    const auto t = tune_lambda(res.net, o, 1.0, 0.1, 500, 42);
    ASSERT_EQ(t.theory_lambda.size(), res.net.layers().size());
    bool lowered = false;
    for (std::size_t l = 0; l < t.theory_lambda.size(); ++l) {
        EXPECT_LE(t.net.layers()[l].lambda, t.theory_lambda[l]);
        lowered |= t.net.layers()[l].lambda < t.theory_lambda[l];
    }
    EXPECT_TRUE(lowered);
    EXPECT_LE(t.measured_max_error, 0.1);
    EXPECT_LE(max_error(t.net, sample_box({1, 2}, 1.0, 500, 42), o), 0.1);
}

TEST(Certificate, KeysPresent)
{
    SplitMix64 rng(14);
    const auto f = random_net({2, 2, 1}, 1.0, rng);
    const auto res = compile_network(f, {1, 2}, 1.0, 0.1);
    const Json c = compile_certificate(res, 1e-6, 500, 42);
    for (const char* k : {"eps", "budget", "C_s", "theory_lambda", "measured_max_error", "samples", "seed", "blocks"})
        EXPECT_TRUE(c.contains(k)) << k;
    EXPECT_EQ(c["eps"].get<double>(), 0.1);
    EXPECT_EQ(c["blocks"].size(), 2u);
}
