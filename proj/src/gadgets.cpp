#include "r2a/gadgets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace r2a {

namespace {

void require_eps(double eps, const char* who)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError(std::string(who) + ": eps must lie in (0,1)");
}

} // namespace

double hardmax_temperature_base(std::size_t n, double gap, double eps)
{
    if (n < 2)
        throw DomainError("hardmax_temperature: n must be >= 2");
    if (!(gap > 0.0))
        throw DomainError("hardmax_temperature: gap must be positive (unique maximum required)");
    require_eps(eps, "hardmax_temperature");
    return std::max(0.0, std::log(static_cast<double>(n - 1)) - std::log(eps)) / gap;
}

double hardmax_temperature(std::size_t n, double gap, double eps)
{
    return 2.0 * hardmax_temperature_base(n, gap, eps);
}

double soft_relu(double s, double lambda, std::size_t n)
{
    if (!(lambda > 0.0))
        throw DomainError("soft_relu: lambda must be positive");
    if (n == 0)
        throw DomainError("soft_relu: n must be >= 1");
    return s * stable_sigmoid(lambda * s + std::log(static_cast<double>(n)));
}

double soft_relu_temperature_base(double C_s, std::size_t n, double eps_relu)
{
    if (!(C_s > 0.0) || !std::isfinite(C_s))
        throw DomainError("soft_relu_temperature: C_s must be positive");
    if (n == 0)
        throw DomainError("soft_relu_temperature: n must be >= 1");
    require_eps(eps_relu, "soft_relu_temperature");
    // the log is clamped at 1 so tiny C_s n still gets a usable temperature
    return std::max(1.0, std::log(C_s * static_cast<double>(n) / eps_relu)) / eps_relu;
}

double soft_relu_temperature(double C_s, std::size_t n, double eps_relu)
{
    return 2.0 * soft_relu_temperature_base(C_s, n, eps_relu);
}

double linear_map_offset(std::size_t n, double delta)
{
    if (!(delta > 0.0))
        throw DomainError("linear_map_offset: delta must be positive");
    if (std::isinf(delta))
        return 0.0;
    const double nn = static_cast<double>(n);
    return 2.0 * std::max(0.0, std::log(nn) - std::log(delta)) / (nn * std::numbers::ln2);
}

AttnHead linear_map_head_at(const DenseMatrix& A, const DenseMatrix& B, double T, const AugmentedRows& rows,
                            std::size_t out_dim, std::size_t out_offset, double lambda_layer)
{
    const std::size_t n = rows.n;
    if (B.rows() != n || B.cols() != n)
        throw ShapeError("linear map head: B must be n x n with n = " + std::to_string(n) + ", got " + B.shape_str());
    if (rows.data + A.cols() > rows.in_dim || rows.pos + n + 1 > rows.in_dim || out_offset + A.rows() > out_dim)
        throw ShapeError("linear map head: offsets exceed dimensions");

    // weights are proportional to B[p][q]; the reference column tops the
    // normalizer up to 3M where s_q is the column sum of B
    std::vector<double> colsum(n, 0.0);
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < n; ++q)
            colsum[q] += B(p, q);
    const double M = *std::max_element(colsum.begin(), colsum.end());

    DenseMatrix K(n, rows.in_dim), Q(n, rows.in_dim), V(out_dim, rows.in_dim);
    for (std::size_t q = 0; q < n; ++q) {
        for (std::size_t p = 0; p < n; ++p)
            K.set(q, rows.pos + p, std::log(B(p, q)));
        K.set(q, rows.pos + n, std::log(3.0 * M - colsum[q]));
        Q.set(q, rows.pos + q, 1.0 / lambda_layer);
        Q.set(q, rows.pos + n, T / lambda_layer);
    }
    for (std::size_t a = 0; a < A.rows(); ++a)
        for (std::size_t b = 0; b < A.cols(); ++b)
            if (A(a, b) != 0.0)
                V.set(out_offset + a, rows.data + b, 3.0 * M * A(a, b));
    return AttnHead(std::move(K), std::move(Q), std::move(V));
}

AttnHead routed_head_at(const AugmentedRows& rows, std::size_t token, DenseMatrix W_V, double q_scale)
{
    const std::size_t n = rows.n;
    if (rows.pos + n + 1 > rows.in_dim)
        throw ShapeError("routed head: positional block exceeds input");
    DenseMatrix K(n + 1, rows.in_dim), Q(n + 1, rows.in_dim);
    for (std::size_t p = 0; p <= n; ++p) {
        K.set(p, rows.pos + p, 1.0);
        const std::size_t target = token == n + 1 ? p : (p == token ? token : n);
        Q.add(target, rows.pos + p, q_scale);
    }
    return AttnHead(std::move(K), std::move(Q), std::move(W_V));
}

AttnHead identity_head_at(const AugmentedRows& rows, std::size_t out_dim, std::size_t out_pos, double q_scale)
{
    if (out_pos + rows.n + 1 > out_dim)
        throw ShapeError("identity head: positional block exceeds output");
    DenseMatrix V(out_dim, rows.in_dim);
    for (std::size_t p = 0; p <= rows.n; ++p)
        V.set(out_pos + p, rows.pos + p, 1.0);
    return routed_head_at(rows, rows.n + 1, std::move(V), q_scale);
}

void fill_norms(GadgetCertificate& cert, const AttnLayer& layer)
{
    cert.C_V = 0.0;
    cert.C_KQ = 0.0;
    for (const auto& h : layer.heads) {
        cert.C_V = std::max(cert.C_V, fro_norm(h.W_V));
        cert.C_KQ = std::max(cert.C_KQ, kq_fro_norm(h));
    }
}

GadgetLayer build_linear_map_head(const DenseMatrix& A, const DenseMatrix& B, double C_X, double eps)
{
    require_eps(eps, "build_linear_map_head");
    if (!(C_X >= 1.0))
        throw DomainError("build_linear_map_head: C_X must be >= 1");
    if (B.rows() != B.cols())
        throw ShapeError("build_linear_map_head: B must be square, got " + B.shape_str());
    for (double v : B.data())
        if (v < 1.0)
            throw DomainError("build_linear_map_head: B has an entry below 1; use split_general_B");
    const std::size_t d = A.cols(), n = B.rows();

    double M = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            s += B(p, q);
        M = std::max(M, s);
    }
    const double a_max = max_norm(A);
    const double denom = 3.0 * M * static_cast<double>(n) * a_max * static_cast<double>(d) * C_X;
    const double delta = denom > 0.0 ? eps / denom : std::numeric_limits<double>::infinity();
    const double T = linear_map_offset(n, delta);

    AttnHead head = linear_map_head_at(A, B, T, {d + n + 1, 0, d, n}, A.rows(), 0, 1.0);
    const double kq_bound = fro_norm(head.W_K) * fro_norm(head.W_Q);
    AttnLayer layer({std::move(head)}, 1.0);

    GadgetCertificate cert;
    cert.target_eps = eps;
    cert.lambda_used = 1.0;
    cert.lambda_base = 1.0;
    cert.params = {{"M", M}, {"T", T}, {"T_base", T / 2.0}, {"delta", std::isinf(delta) ? 0.0 : delta},
                   {"C_KQ_bound", kq_bound}};
    fill_norms(cert, layer);
    return {std::move(layer), std::move(cert)};
}

SplitB split_general_B(const DenseMatrix& B)
{
    double lo = B.data().front();
    for (double v : B.data())
        lo = std::min(lo, v);
    const double c = std::max(2.0, 2.0 - lo);
    DenseMatrix B1 = B, B2(B.rows(), B.cols(), c);
    for (std::size_t i = 0; i < B1.size(); ++i)
        B1.raw()[i] += c;
    return {std::move(B1), std::move(B2), c};
}

GadgetLayer build_general_linear_map_layer(const DenseMatrix& A, const DenseMatrix& B, double C_X, double eps)
{
    const SplitB s = split_general_B(B);
    GadgetLayer plus = build_linear_map_head(A, s.B1, C_X, eps / 2.0);
    GadgetLayer minus = build_linear_map_head(scale(A, -1.0), s.B2, C_X, eps / 2.0);
    std::vector<AttnHead> heads{plus.layer.heads.front(), minus.layer.heads.front()};
    AttnLayer layer(std::move(heads), 1.0);
    GadgetCertificate cert = plus.cert;
    cert.target_eps = eps;
    cert.params["c"] = s.c;
    cert.params["T_minus"] = minus.cert.params["T"];
    fill_norms(cert, layer);
    return {std::move(layer), std::move(cert)};
}

GadgetLayer build_entrywise_mult_layer(const std::vector<std::vector<double>>& v_list, double C_X, double eps)
{
    require_eps(eps, "build_entrywise_mult_layer");
    if (v_list.empty())
        throw DomainError("build_entrywise_mult_layer: need at least one vector");
    if (!(C_X > 0.0))
        throw DomainError("build_entrywise_mult_layer: C_X must be positive");
    const std::size_t n = v_list.size(), d = v_list.front().size();
    if (d == 0)
        throw DomainError("build_entrywise_mult_layer: vectors must be non-empty");
    double B_V = 0.0;
    for (const auto& v : v_list) {
        if (v.size() != d)
            throw ShapeError("build_entrywise_mult_layer: vectors differ in length");
        for (double x : v)
            B_V = std::max(B_V, std::abs(x));
    }
    const std::size_t D = d + n + 1;
    const AugmentedRows rows{D, 0, d, n};
    const double tol = eps / (static_cast<double>(n) * C_X * B_V + 1.0);
    const double lambda = hardmax_temperature(n + 1, 1.0, tol);

    std::vector<AttnHead> heads;
    for (std::size_t i = 0; i < n; ++i) {
        DenseMatrix V(D, D);
        for (std::size_t t = 0; t < d; ++t)
            if (v_list[i][t] != 0.0)
                V.set(t, t, v_list[i][t]);
        heads.push_back(routed_head_at(rows, i, std::move(V), 1.0));
    }
    heads.push_back(identity_head_at(rows, D, d, 1.0));
    AttnLayer layer(std::move(heads), lambda);

    GadgetCertificate cert;
    cert.target_eps = eps;
    cert.lambda_used = lambda;
    cert.lambda_base = lambda / 2.0;
    cert.params = {{"B_V", B_V}, {"hardmax_eps", tol}};
    fill_norms(cert, layer);
    return {std::move(layer), std::move(cert)};
}

IdentityHead build_identity_head(std::size_t d_in, std::size_t n, double eps)
{
    require_eps(eps, "build_identity_head");
    if (d_in < n + 1)
        throw ShapeError("build_identity_head: d_in must hold the positional block");
    const AugmentedRows rows{d_in, 0, d_in - n - 1, n};
    return {identity_head_at(rows, d_in, d_in - n - 1, 1.0), hardmax_temperature(n + 1, 1.0, eps)};
}

} // namespace r2a
