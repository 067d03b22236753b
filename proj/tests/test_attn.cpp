#include <gtest/gtest.h>

#include <cmath>

#include "r2a/attn.hpp"
#include "r2a/rng.hpp"

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

// Direct loops: out = sum_h W_V Z softmax_p(lambda <W_K z_p, W_Q z_q>)
DenseMatrix naive_layer(const AttnLayer& L, const DenseMatrix& Z)
{
    const std::size_t c = Z.cols();
    DenseMatrix out(L.d_out(), c);
    for (const auto& h : L.heads) {
        const DenseMatrix K = matmul(h.W_K, Z), Q = matmul(h.W_Q, Z), V = matmul(h.W_V, Z);
        for (std::size_t q = 0; q < c; ++q) {
            std::vector<double> s(c);
            double mx = -INFINITY;
            for (std::size_t p = 0; p < c; ++p) {
                double dot = 0.0;
                for (std::size_t a = 0; a < K.rows(); ++a)
                    dot += K(a, p) * Q(a, q);
                s[p] = L.lambda * dot;
                mx = std::max(mx, s[p]);
            }
            double sum = 0.0;
            for (auto& v : s) {
                v = std::exp(v - mx);
                sum += v;
            }
            for (std::size_t r = 0; r < V.rows(); ++r) {
                double acc = 0.0;
                for (std::size_t p = 0; p < c; ++p)
                    acc += V(r, p) * s[p] / sum;
                out.add(r, q, acc);
            }
        }
    }
    return out;
}

AttnLayer random_layer(std::size_t heads, std::size_t d_in, std::size_t d_h, std::size_t d_out, double lam,
                       SplitMix64& rng)
{
    std::vector<AttnHead> hs;
    for (std::size_t h = 0; h < heads; ++h)
        hs.emplace_back(random_matrix(d_h, d_in, rng), random_matrix(d_h, d_in, rng), random_matrix(d_out, d_in, rng));
    return {std::move(hs), lam};
}

} // namespace

TEST(Preprocess, LayoutOfAugmentedInput)
{
    const auto X = DenseMatrix::from_rows({{1, 2, 3}, {4, 5, 6}});
    const auto Z = preprocess(X);
    ASSERT_EQ(Z.rows(), 2u + 3u + 1u);
    ASSERT_EQ(Z.cols(), 4u);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_EQ(Z(i, j), X(i, j));
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double want = 0.0;
            if (i < 2 && j < 3)
                want = X(i, j);
            else if (i >= 2 && i < 5 && j == i - 2)
                want = 1.0;
            else if (i == 5 && j == 3)
                want = 1.0;
            EXPECT_EQ(Z(i, j), want) << i << "," << j;
        }
    const auto T = truncate(Z);
    EXPECT_EQ(T.cols(), 3u);
    EXPECT_EQ(T(4, 2), 1.0);
}

TEST(AttnLayer, MatchesNaiveLoops)
{
    SplitMix64 rng(1);
    for (std::size_t c : {1u, 2u, 5u}) {
        const auto L = random_layer(3, 4, 2, 3, 1.7, rng);
        const auto Z = random_matrix(4, c, rng, 2.0);
        const auto got = attn_layer_forward(L, Z);
        const auto want = naive_layer(L, Z);
        for (std::size_t i = 0; i < want.rows(); ++i)
            for (std::size_t j = 0; j < want.cols(); ++j)
                EXPECT_NEAR(got(i, j), want(i, j), 1e-12);
    }
}

TEST(AttnLayer, SingleTokenIsValueMap)
{
    SplitMix64 rng(2);
    const auto L = random_layer(2, 3, 2, 2, 5.0, rng);
    const auto z = random_matrix(3, 1, rng);
    const auto want = add(matmul(L.heads[0].W_V, z), matmul(L.heads[1].W_V, z));
    const auto got = attn_layer_forward(L, z);
    EXPECT_NEAR(got(0, 0), want(0, 0), 1e-14);
    EXPECT_NEAR(got(1, 0), want(1, 0), 1e-14);
}

TEST(AttnLayer, ShapeChecks)
{
    SplitMix64 rng(3);
    EXPECT_THROW(AttnHead(DenseMatrix(2, 3), DenseMatrix(2, 4), DenseMatrix(1, 3)), ShapeError);
    EXPECT_THROW(AttnHead(DenseMatrix(2, 3), DenseMatrix(3, 3), DenseMatrix(1, 3)), ShapeError);
    const auto L = random_layer(1, 3, 2, 2, 1.0, rng);
    EXPECT_THROW(attn_layer_forward(L, DenseMatrix(4, 2)), ShapeError);
}

TEST(Transformer, ForwardIsPLayersT)
{
    SplitMix64 rng(4);
    const Layout lay{2, 3};
    const std::size_t D = lay.d + lay.n + 1;
    std::vector<AttnLayer> layers{random_layer(2, D, 2, 5, 0.8, rng), random_layer(1, 5, 3, 2, 1.3, rng)};
    const TransformerNetwork net(lay, true, layers, true);
    EXPECT_EQ(net.input_rows(), D);
    EXPECT_EQ(net.output_rows(), 2u);
    const auto X = random_matrix(2, 3, rng);
    const auto want = truncate(naive_layer(layers[1], naive_layer(layers[0], preprocess(X))));
    const auto got = transformer_forward(net, X);
    ASSERT_EQ(got.cols(), 3u);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_NEAR(got(i, j), want(i, j), 1e-12);

    const auto trace = transformer_trace(net, X);
    ASSERT_EQ(trace.size(), 3u);
    EXPECT_EQ(trace[0], preprocess(X));

    std::vector<DenseMatrix> Xs;
    for (int s = 0; s < 20; ++s)
        Xs.push_back(random_matrix(2, 3, rng));
    const auto batch = transformer_forward_batch(net, Xs);
    for (std::size_t s = 0; s < Xs.size(); ++s)
        EXPECT_EQ(batch[s], transformer_forward(net, Xs[s]));
    EXPECT_THROW(transformer_forward(net, DenseMatrix(3, 3)), ShapeError);
}

TEST(Transformer, LayerChainShapeMismatch)
{
    SplitMix64 rng(5);
    std::vector<AttnLayer> layers{random_layer(1, 4, 2, 5, 1.0, rng), random_layer(1, 4, 2, 2, 1.0, rng)};
    EXPECT_THROW(TransformerNetwork({1, 2}, true, layers, true), ShapeError);
}

TEST(Resources, ReportByHand)
{
    SplitMix64 rng(6);
    std::vector<AttnLayer> layers{random_layer(3, 4, 2, 6, 2.0, rng), random_layer(2, 6, 7, 4, 0.5, rng)};
    const TransformerNetwork net({1, 2}, true, layers, true);
    const auto r = resource_report(net);
    EXPECT_EQ(r.K, 2u);
    EXPECT_EQ(r.H, 3u);
    EXPECT_EQ(r.total_heads, 5u);
    EXPECT_EQ(r.W, 7u);
    EXPECT_EQ(r.lambda_max, 2.0);
    double cv = 0.0, ckq = 0.0;
    for (const auto& L : layers)
        for (const auto& h : L.heads) {
            cv = std::max(cv, fro_norm(h.W_V));
            ckq = std::max(ckq, fro_norm(matmul(h.W_K.transpose(), h.W_Q)));
        }
    EXPECT_NEAR(r.C_V, cv, 1e-12 * cv);
    EXPECT_NEAR(r.C_KQ, ckq, 1e-12 * ckq);
}
