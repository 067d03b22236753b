#include "r2a/relu.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace r2a {

namespace {

void require_tolerance(double eps, const char* who)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError(std::string(who) + ": eps must lie in (0,1)");
}

DenseMatrix col(std::initializer_list<double> v)
{
    return DenseMatrix::column(std::vector<double>(v));
}

ReluNetwork passthrough()
{
    return affine_net(DenseMatrix::identity(1));
}

// (x, y) in [-C, C]^2 -> ~xy with absolute error <= C^2 * 2^(-2 levels - 2)
ReluNetwork scaled_mult(std::size_t levels, double C)
{
    const ReluNetwork unit = build_pair_mult_net(levels);
    const ReluNetwork in = affine_net(scale(DenseMatrix::identity(2), 1.0 / C));
    const ReluNetwork out = affine_net(DenseMatrix::from_rows({{C * C}}));
    return compose(out, compose(unit, in));
}

ReluNetwork select(std::size_t in_dim, const std::vector<std::size_t>& idx)
{
    DenseMatrix S(idx.size(), in_dim);
    for (std::size_t i = 0; i < idx.size(); ++i)
        S.set(i, idx[i], 1.0);
    return affine_net(S);
}

} // namespace

ReluNetwork build_max_net(std::size_t count)
{
    if (count == 0)
        throw DomainError("build_max_net: count must be >= 1");
    const std::size_t c = count;
    DenseMatrix A1(3 * c, 2 * c), A2(c, 3 * c);
    for (std::size_t i = 0; i < c; ++i) {
        A1.set(i, i, 1.0);
        A1.set(i, c + i, -1.0);
        A1.set(c + i, c + i, 1.0);
        A1.set(2 * c + i, c + i, -1.0);
        A2.set(i, i, 1.0);
        A2.set(i, c + i, 1.0);
        A2.set(i, 2 * c + i, -1.0);
    }
    return ReluNetwork({{A1, DenseMatrix(3 * c, 1)}, {A2, DenseMatrix(c, 1)}});
}

ReluNetwork build_min_net(std::size_t count)
{
    if (count == 0)
        throw DomainError("build_min_net: count must be >= 1");
    const std::size_t c = count;
    DenseMatrix A1(3 * c, 2 * c), A2(c, 3 * c);
    for (std::size_t i = 0; i < c; ++i) {
        A1.set(i, i, 1.0);
        A1.set(c + i, i, -1.0);
        A1.set(2 * c + i, i, 1.0);
        A1.set(2 * c + i, c + i, -1.0);
        A2.set(i, i, 1.0);
        A2.set(i, c + i, -1.0);
        A2.set(i, 2 * c + i, -1.0);
    }
    return ReluNetwork({{A1, DenseMatrix(3 * c, 1)}, {A2, DenseMatrix(c, 1)}});
}

ReluNetwork build_clip_net(std::size_t count, double c)
{
    if (count == 0)
        throw DomainError("build_clip_net: count must be >= 1");
    if (!(c > 0.0) || !std::isfinite(c))
        throw DomainError("build_clip_net: c must be positive");
    DenseMatrix A1(2 * count, count), b1(2 * count, 1), A2(count, 2 * count), b2(count, 1, -c);
    for (std::size_t i = 0; i < count; ++i) {
        A1.set(i, i, 1.0);
        A1.set(count + i, i, 1.0);
        b1.set(i, 0, c);
        b1.set(count + i, 0, -c);
        A2.set(i, i, 1.0);
        A2.set(i, count + i, -1.0);
    }
    return ReluNetwork({{A1, b1}, {A2, b2}});
}

// Sawtooth squaring: x^2 ~ x - sum_s g_s(x) / 4^s on [0,1], applied to |t|.
// Channels per hidden stage: (g, g - 1/2, acc).
ReluNetwork build_square_net(std::size_t levels)
{
    std::vector<ReluLayer> layers;
    layers.push_back({DenseMatrix::from_rows({{1.0}, {-1.0}}), DenseMatrix(2, 1)});
    if (levels == 0) {
        layers.push_back({DenseMatrix::from_rows({{1.0, 1.0}}), DenseMatrix(1, 1)});
        return ReluNetwork(std::move(layers));
    }
    layers.push_back({DenseMatrix::from_rows({{1.0, 1.0}, {1.0, 1.0}, {1.0, 1.0}}), col({0.0, -0.5, 0.0})});
    double q = 1.0;
    for (std::size_t s = 1; s <= levels; ++s) {
        q *= 4.0;
        const std::vector<double> acc_row = {-2.0 / q, 4.0 / q, 1.0};
        if (s < levels) {
            layers.push_back({DenseMatrix::from_rows({{2.0, -4.0, 0.0}, {2.0, -4.0, 0.0}, acc_row}),
                              col({0.0, -0.5, 0.0})});
        } else {
            layers.push_back({DenseMatrix::from_rows({acc_row}), DenseMatrix(1, 1)});
        }
    }
    return ReluNetwork(std::move(layers));
}

std::size_t square_levels_for(double tol)
{
    if (!(tol > 0.0))
        throw DomainError("square_levels_for: tolerance must be positive");
    std::size_t m = 0;
    while (std::ldexp(1.0, -2 * static_cast<int>(m) - 2) > tol)
        ++m;
    return m;
}

// uv = ((u+v)/2)^2 - ((u-v)/2)^2; both squares overshoot by at most 2^(-2m-2),
// so their difference is off by at most that much. Output clipped to [-1,1].
ReluNetwork build_pair_mult_net(std::size_t levels)
{
    const ReluNetwork sq = build_square_net(levels);
    const ReluNetwork plus = compose(sq, affine_net(DenseMatrix::from_rows({{0.5, 0.5}})));
    const ReluNetwork minus = compose(sq, affine_net(DenseMatrix::from_rows({{0.5, -0.5}})));
    const ReluNetwork diff = compose(affine_net(DenseMatrix::from_rows({{1.0, -1.0}})), stack_shared({plus, minus}));
    return compose(build_clip_net(1, 1.0), diff);
}

ReluNetwork build_mult_net(std::size_t dim, double C_X, double eps)
{
    require_tolerance(eps, "build_mult_net");
    if (dim == 0)
        throw DomainError("build_mult_net: dim must be >= 1");
    if (!(C_X >= 1.0) || !std::isfinite(C_X))
        throw DomainError("build_mult_net: C_X must be >= 1");
    if (dim == 1)
        return affine_net(DenseMatrix::identity(1));

    // Every internal product node adds at most unit_tol; leaves stay in [-1,1].
    const double scale_out = std::pow(C_X, static_cast<double>(dim));
    const double unit_tol = eps / (static_cast<double>(dim - 1) * scale_out);
    const ReluNetwork pm = build_pair_mult_net(square_levels_for(unit_tol));

    ReluNetwork net = affine_net(scale(DenseMatrix::identity(dim), 1.0 / C_X));
    std::size_t width = dim;
    while (width > 1) {
        std::vector<Branch> branches;
        for (std::size_t i = 0; i + 1 < width; i += 2)
            branches.push_back({pm, {i, i + 1}});
        if (width % 2 == 1)
            branches.push_back({passthrough(), {width - 1}});
        net = compose(parallel(branches, width), net);
        width = branches.size();
    }
    return compose(affine_net(DenseMatrix::from_rows({{scale_out}})), net);
}

std::size_t newton_iterations(double eps)
{
    const double l = std::log2(1.0 / eps);
    const double a = l > 1.0 ? std::ceil(std::log2(l)) : 0.0;
    const double b = std::ceil(l);
    return std::max<std::size_t>(1, static_cast<std::size_t>(a + b));
}

namespace {

// Dyadic knots 2^k covering [eps, 1/eps] with values knot^power.
std::vector<std::pair<double, double>> dyadic_seed(double eps, double power)
{
    const int k0 = static_cast<int>(std::floor(std::log2(eps)));
    const int k1 = static_cast<int>(std::ceil(std::log2(1.0 / eps)));
    std::vector<std::pair<double, double>> s;
    for (int k = k0; k <= k1; ++k) {
        const double x = std::ldexp(1.0, k);
        s.emplace_back(x, std::pow(x, power));
    }
    return s;
}

} // namespace

// Newton for 1/x: z <- z (2 - x z). With products off by delta, the error
// e = 1/x - z settles near z*delta + delta, so delta scales with eps^2.
ReluNetwork build_reciprocal_net(double eps)
{
    require_tolerance(eps, "build_reciprocal_net");
    const std::size_t iters = newton_iterations(eps);
    const double C = 1.25 / eps;
    const double delta = eps * eps / (4.0 * static_cast<double>(iters));
    const ReluNetwork M = scaled_mult(square_levels_for(delta / (C * C)), C);
    const ReluNetwork two_minus = affine_net(DenseMatrix::from_rows({{1.0, 0.0}, {0.0, -1.0}}), col({0.0, 2.0}));

    // state (x, z)
    ReluNetwork net = parallel({{passthrough(), {0}}, {build_interpolant_1d(dyadic_seed(eps, -1.0)), {0}}}, 1);
    for (std::size_t t = 0; t < iters; ++t) {
        // (x, z) -> (x, z, u = xz)
        net = compose(parallel({{passthrough(), {0}}, {passthrough(), {1}}, {M, {0, 1}}}, 2), net);
        // (x, z, u) -> (x, z (2 - u))
        net = compose(parallel({{passthrough(), {0}}, {compose(M, two_minus), {1, 2}}}, 3), net);
    }
    return compose(select(2, {1}), net);
}

// Newton for x^(-1/2): r <- r (3 - x r^2) / 2, then sqrt(x) = x r.
ReluNetwork build_sqrt_net(double eps)
{
    require_tolerance(eps, "build_sqrt_net");
    const std::size_t iters = newton_iterations(eps);
    const double C = 1.25 / eps;
    const double delta = std::pow(eps, 4.0) / (8.0 * static_cast<double>(iters));
    const ReluNetwork M = scaled_mult(square_levels_for(delta / (C * C)), C);
    const ReluNetwork half_three_minus =
        affine_net(DenseMatrix::from_rows({{1.0, 0.0}, {0.0, -0.5}}), col({0.0, 1.5}));

    // state (x, r)
    ReluNetwork net = parallel({{passthrough(), {0}}, {build_interpolant_1d(dyadic_seed(eps, -0.5)), {0}}}, 1);
    for (std::size_t t = 0; t < iters; ++t) {
        // (x, r) -> (x, r, q = r^2)
        net = compose(parallel({{passthrough(), {0}}, {passthrough(), {1}}, {M, {1, 1}}}, 2), net);
        // (x, r, q) -> (x, r, p = x q)
        net = compose(parallel({{passthrough(), {0}}, {passthrough(), {1}}, {M, {0, 2}}}, 3), net);
        // (x, r, p) -> (x, r (3 - p) / 2)
        net = compose(parallel({{passthrough(), {0}}, {compose(M, half_three_minus), {1, 2}}}, 3), net);
    }
    return compose(M, net);
}

std::size_t exp_taylor_degree(double eps, double C_t)
{
    // smallest m with C_t^(m+1) / (m+1)! <= eps / 2
    double term = C_t; // C_t^1 / 1!
    std::size_t m = 0;
    while (term > eps / 2.0) {
        ++m;
        term *= C_t / static_cast<double>(m + 1);
        if (m > 10000)
            throw BudgetError("exp_taylor_degree: degree search did not terminate");
    }
    return std::max<std::size_t>(1, m);
}

ReluNetwork build_exp_half_net(double eps, double C_t)
{
    require_tolerance(eps, "build_exp_half_net");
    if (!(C_t >= 1.0) || !std::isfinite(C_t))
        throw DomainError("build_exp_half_net: C_t must be >= 1");
    const std::size_t m = exp_taylor_degree(eps, C_t);

    // coefficient of u^k with u = t / C_t
    std::vector<double> c(m + 1);
    c[0] = 1.0;
    for (std::size_t k = 1; k <= m; ++k)
        c[k] = c[k - 1] * (-0.5 * C_t) / static_cast<double>(k);

    // p_k = u * p_{k-1} drifts by at most (k-1) unit errors
    double unit_tol = 1.0;
    for (std::size_t k = 2; k <= m; ++k)
        unit_tol = std::min(unit_tol, eps / (2.0 * m * std::abs(c[k]) * static_cast<double>(k - 1)));
    const ReluNetwork pm = build_pair_mult_net(square_levels_for(unit_tol));

    // state (u, p, acc) starting at (u, u, 1 + c1 u)
    ReluNetwork net = affine_net(DenseMatrix::from_rows({{1.0 / C_t}, {1.0 / C_t}, {c[1] / C_t}}), col({0.0, 0.0, 1.0}));
    for (std::size_t k = 2; k <= m; ++k) {
        const ReluNetwork step = parallel({{passthrough(), {0}}, {pm, {1, 0}}, {passthrough(), {2}}}, 3);
        const ReluNetwork accumulate = affine_net(DenseMatrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, c[k], 1}}));
        net = compose(compose(accumulate, step), net);
    }
    return compose(select(3, {2}), net);
}

// sqrt(1 - e^-t) = sqrt(1 - alpha^2) with alpha = e^(-t/2).
ReluNetwork build_sigma_net(double eps, double C_X)
{
    require_tolerance(eps, "build_sigma_net");
    if (!(C_X > eps) || !std::isfinite(C_X))
        throw DomainError("build_sigma_net: requires C_X > eps");
    const double v_min = -std::expm1(-eps); // 1 - e^-eps
    const double inner_tol = eps * std::sqrt(v_min) / 8.0;

    const ReluNetwork alpha = build_exp_half_net(inner_tol, std::max(1.0, C_X));
    const ReluNetwork square =
        compose(build_pair_mult_net(square_levels_for(inner_tol)), affine_net(DenseMatrix::from_rows({{1.0}, {1.0}})));
    const ReluNetwork one_minus = affine_net(DenseMatrix::from_rows({{-1.0}}), col({1.0}));
    const ReluNetwork root = build_sqrt_net(std::min(eps / 2.0, v_min / 2.0));
    return compose(root, compose(one_minus, compose(square, alpha)));
}

ReluNetwork build_interpolant_1d(const std::vector<std::pair<double, double>>& samples)
{
    if (samples.size() < 2)
        throw DomainError("build_interpolant_1d: need at least 2 samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (!std::isfinite(samples[i].first) || !std::isfinite(samples[i].second))
            throw DomainError("build_interpolant_1d: non-finite sample");
        if (i > 0 && !(samples[i].first > samples[i - 1].first))
            throw DomainError("build_interpolant_1d: x must be strictly increasing");
    }
    const std::size_t K = samples.size();
    std::vector<double> slope(K - 1);
    for (std::size_t i = 0; i + 1 < K; ++i)
        slope[i] = (samples[i + 1].second - samples[i].second) / (samples[i + 1].first - samples[i].first);

    // Hidden units: a +/- pair carrying the linear part around an anchor knot,
    // then one kink per interior knot. Kinks face away from the anchor.
    auto build = [&](bool left) {
        const std::size_t H = 2 + (K - 2);
        const std::size_t a = left ? 0 : K - 1;
        const double x_a = samples[a].first;
        const double s_a = left ? slope.front() : slope.back();
        DenseMatrix A1(H, 1), b1(H, 1), A2(1, H), b2(1, 1, samples[a].second);
        A1.set(0, 0, 1.0);
        b1.set(0, 0, -x_a);
        A1.set(1, 0, -1.0);
        b1.set(1, 0, x_a);
        A2.set(0, 0, s_a);
        A2.set(0, 1, -s_a);
        for (std::size_t i = 1; i + 1 < K; ++i) {
            const double x_i = samples[i].first;
            A1.set(1 + i, 0, left ? 1.0 : -1.0);
            b1.set(1 + i, 0, left ? -x_i : x_i);
            A2.set(0, 1 + i, slope[i] - slope[i - 1]);
        }
        return ReluNetwork({{A1, b1}, {A2, b2}});
    };
    ReluNetwork left = build(true);
    ReluNetwork right = build(false);
    return relu_stats(right).weight_bound_B < relu_stats(left).weight_bound_B ? right : left;
}

} // namespace r2a
