#include <gtest/gtest.h>

#include <cmath>

#include "r2a/gadgets.hpp"
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

double gap_to(const DenseMatrix& got, const DenseMatrix& want)
{
    EXPECT_EQ(got.rows(), want.rows());
    EXPECT_EQ(got.cols(), want.cols());
    return max_norm(subtract(got, want));
}

// [M, 0]: one zero column appended
DenseMatrix pad_col(const DenseMatrix& M)
{
    DenseMatrix out(M.rows(), M.cols() + 1);
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t j = 0; j < M.cols(); ++j)
            out.set(i, j, M(i, j));
    return out;
}

} // namespace

TEST(Temperatures, ClosedForms)
{
    EXPECT_DOUBLE_EQ(hardmax_temperature_base(5, 0.5, 1e-2), (std::log(4.0) - std::log(1e-2)) / 0.5);
    EXPECT_DOUBLE_EQ(hardmax_temperature(5, 0.5, 1e-2), 2.0 * (std::log(4.0) - std::log(1e-2)) / 0.5);
    EXPECT_THROW(hardmax_temperature(2, 1.0, 2.0), DomainError);
    EXPECT_THROW(hardmax_temperature(1, 1.0, 0.1), DomainError);
    EXPECT_THROW(hardmax_temperature(3, 0.0, 0.1), DomainError);
    EXPECT_DOUBLE_EQ(soft_relu_temperature_base(10.0, 4, 1e-2), std::log(4000.0) / 1e-2);
    EXPECT_DOUBLE_EQ(soft_relu_temperature(10.0, 4, 1e-2), 2.0 * std::log(4000.0) / 1e-2);
    EXPECT_DOUBLE_EQ(linear_map_offset(4, 1e-3), 2.0 * (std::log(4.0) + std::log(1e3)) / (4.0 * std::log(2.0)));
}

TEST(Hardmax, RandomVectorsWithinEps)
{
    SplitMix64 rng(9);
    for (std::size_t n : {2u, 5u, 16u})
        for (double gap : {0.05, 1.0}) {
            const double eps = 1e-3;
            const double lam = hardmax_temperature(n, gap, eps);
            for (int s = 0; s < 200; ++s) {
                DenseMatrix x(n, 1);
                const std::size_t top = rng.next() % n;
                for (std::size_t i = 0; i < n; ++i)
                    x.set(i, 0, i == top ? 1.0 : 1.0 - gap - rng.uniform(0.0, 1.0));
                const auto p = softmax_columns(x, lam);
                for (std::size_t i = 0; i < n; ++i)
                    ASSERT_LE(std::abs(p(i, 0) - (i == top ? 1.0 : 0.0)), eps);
            }
        }
}

TEST(SoftRelu, ValuesAndBound)
{
    EXPECT_EQ(soft_relu(0.0, 5.0, 3), 0.0);
    // s sigma(lambda s + ln n) at lambda s = ln 2, n = 2: sigma(ln 4) = 4/5
    EXPECT_NEAR(soft_relu(std::log(2.0) / 7.0, 7.0, 2), 0.8 * std::log(2.0) / 7.0, 1e-15);
    const double lam = soft_relu_temperature(5.0, 3, 1e-2);
    for (int i = 0; i <= 2000; ++i) {
        const double s = -5.0 + i * 0.005;
        ASSERT_LE(std::abs(soft_relu(s, lam, 3) - std::max(0.0, s)), 2e-2);
    }
}

TEST(LinearMapHead, MatchesAXB)
{
    SplitMix64 rng(21);
    for (std::size_t n : {1u, 2u, 4u}) {
        const std::size_t d = 3;
        const auto A = random_matrix(2, d, rng);
        DenseMatrix B(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                B.set(i, j, 1.0 + 2.0 * rng.uniform01());
        const double eps = 1e-3;
        const auto g = build_linear_map_head(A, B, 1.0, eps);
        EXPECT_EQ(g.layer.heads.size(), 1u);
        for (int s = 0; s < 30; ++s) {
            const auto X = random_matrix(d, n, rng);
            const auto out = attn_layer_forward(g.layer, preprocess(X));
            EXPECT_LE(gap_to(out, pad_col(matmul(matmul(A, X), B))), eps) << "n=" << n;
        }
    }
}

TEST(LinearMapHead, Preconditions)
{
    const auto A = DenseMatrix::from_rows({{1.0}});
    EXPECT_THROW(build_linear_map_head(A, DenseMatrix(2, 2, 0.5), 1.0, 1e-2), DomainError);
    EXPECT_THROW(build_linear_map_head(A, DenseMatrix(2, 3, 2.0), 1.0, 1e-2), ShapeError);
    EXPECT_THROW(build_linear_map_head(A, DenseMatrix(2, 2, 2.0), 1.0, 0.0), DomainError);
}

TEST(LinearMapHead, GeneralBSplitsIntoTwoHeads)
{
    SplitMix64 rng(22);
    const std::size_t d = 2, n = 3;
    const auto A = random_matrix(2, d, rng);
    const auto B = random_matrix(n, n, rng, 3.0);
    const auto sp = split_general_B(B);
    // B = B1 - B2 with both parts at least 1 entrywise
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_GE(sp.B1(i, j), 1.0);
            EXPECT_GE(sp.B2(i, j), 1.0);
            EXPECT_NEAR(sp.B1(i, j) - sp.B2(i, j), B(i, j), 1e-12);
        }
    const auto g = build_general_linear_map_layer(A, B, 1.0, 1e-3);
    EXPECT_EQ(g.layer.heads.size(), 2u);
    for (int s = 0; s < 30; ++s) {
        const auto X = random_matrix(d, n, rng);
        const auto out = attn_layer_forward(g.layer, preprocess(X));
        EXPECT_LE(gap_to(out, pad_col(matmul(matmul(A, X), B))), 1e-3);
    }
}

TEST(EntrywiseMult, DataAndPositionalBlocks)
{
    SplitMix64 rng(23);
    const std::size_t d = 2, n = 3;
    std::vector<std::vector<double>> v(n, std::vector<double>(d));
    for (auto& vi : v)
        for (auto& x : vi)
            x = rng.uniform(-1, 1);
    const double eps = 1e-4;
    const auto g = build_entrywise_mult_layer(v, 1.0, eps);
    EXPECT_EQ(g.layer.heads.size(), n + 1);
    for (int s = 0; s < 30; ++s) {
        const auto X = random_matrix(d, n, rng);
        const auto out = attn_layer_forward(g.layer, preprocess(X));
        DenseMatrix want(d + n + 1, n + 1);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t t = 0; t < d; ++t)
                want.set(t, j, v[j][t] * X(t, j));
        for (std::size_t k = 0; k <= n; ++k)
            want.set(d + k, k, 1.0);
        EXPECT_LE(gap_to(out, want), eps);
    }
}

TEST(IdentityHead, CopiesPositionalBlock)
{
    const std::size_t n = 4, d_in = 3 + n + 1;
    const auto ih = build_identity_head(d_in, n, 1e-6);
    const AttnLayer L({ih.head}, ih.lambda);
    SplitMix64 rng(24);
    const auto Z = preprocess(random_matrix(3, n, rng));
    const auto out = attn_layer_forward(L, Z);
    DenseMatrix want(d_in, n + 1);
    for (std::size_t k = 0; k <= n; ++k)
        want.set(3 + k, k, 1.0);
    EXPECT_LE(gap_to(out, want), 1e-6);
}

TEST(Certificates, NormsMatchLayer)
{
    const auto A = DenseMatrix::from_rows({{1.0, -2.0}});
    const auto g = build_linear_map_head(A, DenseMatrix(2, 2, 2.0), 1.0, 1e-2);
    EXPECT_NEAR(g.cert.C_V, fro_norm(g.layer.heads[0].W_V), 1e-12);
    const auto& h = g.layer.heads[0];
    EXPECT_NEAR(g.cert.C_KQ, fro_norm(matmul(h.W_K.transpose(), h.W_Q)), 1e-9 * g.cert.C_KQ);
    EXPECT_EQ(g.cert.target_eps, 1e-2);
}
