#include "r2a/compiler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "r2a/gadgets.hpp"
#include "r2a/verify.hpp"

namespace r2a {

namespace {

std::string num(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void require_eps(double eps, const char* who)
{
    if (!(eps > 0.0 && eps < 1.0))
        throw DomainError(std::string(who) + ": eps must lie in (0,1)");
}

std::size_t ceil_div(std::size_t a, std::size_t b)
{
    return (a + b - 1) / b;
}

} // namespace

// ---- spec ----------------------------------------------------------------

OneLayerSpec::OneLayerSpec(std::size_t d_out_, std::size_t d_tok_, std::size_t n_, std::size_t N_, bool bias)
    : d_out(d_out_), d_tok(d_tok_), n(n_), N(N_), bias_coordinate(bias)
{
    if (d_out == 0 || d_tok == 0 || n == 0 || N == 0)
        throw DomainError("OneLayerSpec: all sizes must be >= 1");
    if (bias && d_tok < 2)
        throw DomainError("OneLayerSpec: a bias coordinate needs at least one data row besides it");
    w.assign(d_out * n * N * n * d_tok, 0.0);
    a.assign(d_out * n * N, 1);
}

double& OneLayerSpec::weight(std::size_t r, std::size_t i, std::size_t k, std::size_t j, std::size_t t)
{
    return w[((((r * n + i) * N + k) * n + j) * d_tok) + t];
}

double OneLayerSpec::weight(std::size_t r, std::size_t i, std::size_t k, std::size_t j, std::size_t t) const
{
    return w[((((r * n + i) * N + k) * n + j) * d_tok) + t];
}

int& OneLayerSpec::sign(std::size_t r, std::size_t i, std::size_t k)
{
    return a[(r * n + i) * N + k];
}

int OneLayerSpec::sign(std::size_t r, std::size_t i, std::size_t k) const
{
    return a[(r * n + i) * N + k];
}

double OneLayerSpec::w0() const
{
    double m = 0.0;
    for (double v : w)
        m = std::max(m, std::abs(v));
    return m;
}

void OneLayerSpec::validate() const
{
    if (d_out == 0 || d_tok == 0 || n == 0 || N == 0)
        throw DomainError("OneLayerSpec: all sizes must be >= 1");
    if (bias_coordinate && d_tok < 2)
        throw DomainError("OneLayerSpec: a bias coordinate needs at least one data row besides it");
    if (w.size() != d_out * n * N * n * d_tok || a.size() != d_out * n * N)
        throw ShapeError("OneLayerSpec: weight or sign array has the wrong length");
    for (int s : a)
        if (s != 1 && s != -1)
            throw DomainError("OneLayerSpec: signs must be +1 or -1");
    for (double v : w)
        if (!std::isfinite(v))
            throw DomainError("OneLayerSpec: non-finite weight");
}

DenseMatrix spec_forward(const OneLayerSpec& spec, const DenseMatrix& X)
{
    spec.validate();
    const std::size_t dr = spec.data_rows();
    if (X.rows() != dr || X.cols() != spec.n)
        throw ShapeError("spec_forward: expected " + std::to_string(dr) + "x" + std::to_string(spec.n) + ", got " +
                         X.shape_str());
    DenseMatrix out(spec.d_out, spec.n);
    for (std::size_t r = 0; r < spec.d_out; ++r)
        for (std::size_t i = 0; i < spec.n; ++i) {
            double f = 0.0;
            for (std::size_t k = 0; k < spec.N; ++k) {
                double s = 0.0;
                for (std::size_t j = 0; j < spec.n; ++j)
                    for (std::size_t t = 0; t < spec.d_tok; ++t) {
                        const double x = t < dr ? X(t, j) : 1.0 / static_cast<double>(spec.n);
                        s += spec.weight(r, i, k, j, t) * x;
                    }
                f += spec.sign(r, i, k) * std::max(0.0, s);
            }
            out.set(r, i, f);
        }
    return out;
}

OneLayerSpec absorb_bias(const BiasedSpec& b)
{
    const OneLayerSpec& s = b.spec;
    s.validate();
    if (s.bias_coordinate)
        throw DomainError("absorb_bias: spec already carries a bias coordinate");
    if (b.bias.size() != s.d_out * s.n * s.N)
        throw ShapeError("absorb_bias: bias array has the wrong length");
    OneLayerSpec out(s.d_out, s.d_tok + 1, s.n, s.N, true);
    out.a = s.a;
    for (std::size_t r = 0; r < s.d_out; ++r)
        for (std::size_t i = 0; i < s.n; ++i)
            for (std::size_t k = 0; k < s.N; ++k)
                for (std::size_t j = 0; j < s.n; ++j) {
                    for (std::size_t t = 0; t < s.d_tok; ++t)
                        out.weight(r, i, k, j, t) = s.weight(r, i, k, j, t);
                    // n tokens each contribute bias * (1/n)
                    out.weight(r, i, k, j, s.d_tok) = b.bias[(r * s.n + i) * s.N + k];
                }
    return out;
}

OneLayerSpec absorb_bias(const ReluLayer& layer, std::size_t n)
{
    if (n == 0 || layer.A.cols() % n != 0)
        throw ShapeError("absorb_bias: input dim " + std::to_string(layer.A.cols()) + " is not a multiple of n");
    const std::size_t d_in = layer.A.cols() / n;
    const std::size_t m = layer.A.rows();
    const std::size_t d_out = ceil_div(m, n);
    BiasedSpec bs{OneLayerSpec(d_out, d_in, n, 1), std::vector<double>(d_out * n, 0.0)};
    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t r = e % d_out, i = e / d_out;
        for (std::size_t c = 0; c < layer.A.cols(); ++c)
            bs.spec.weight(r, i, 0, c / d_in, c % d_in) = layer.A(e, c);
        bs.bias[r * n + i] = layer.b(e, 0);
    }
    return absorb_bias(bs);
}

// ---- budgets -------------------------------------------------------------

ErrorBudget budget_one_layer(double eps, std::size_t d, std::size_t n, std::size_t N)
{
    require_eps(eps, "budget_one_layer");
    if (d == 0 || n == 0 || N == 0)
        throw DomainError("budget_one_layer: d, n, N must be >= 1");
    ErrorBudget b;
    b.eps = eps;
    b.eps1 = eps / (3.0 * static_cast<double>(d * n * N));
    b.eps2 = eps / (3.0 * static_cast<double>(N));
    b.eps_relu = eps / (6.0 * static_cast<double>(N) + 3.0);
    b.eps_k = {eps};
    return b;
}

ErrorBudget budget_multilayer(double eps, std::size_t K_f, std::size_t W_f, double B, double C_X)
{
    require_eps(eps, "budget_multilayer");
    if (K_f == 0)
        throw DomainError("budget_multilayer: K_f must be >= 1");
    // a per-layer gain below 1 would shrink the bound, so clamp it at 1
    const double gain = std::max(1.0, static_cast<double>(W_f) * B);
    const double growth = std::pow(gain, static_cast<double>(K_f));
    if (!std::isfinite(growth))
        throw BudgetError("budget_multilayer: (W_f B)^K_f = (" + num(gain) + ")^" + std::to_string(K_f) +
                          " overflows double precision");
    ErrorBudget b;
    b.eps = eps;
    b.growth = growth;
    const double ek = eps / (static_cast<double>(K_f) * growth);
    if (!(ek > 0.0))
        throw BudgetError("budget_multilayer: eps_k underflows for (W_f B)^K_f = " + num(growth));
    b.eps_k.assign(K_f, ek);
    for (std::size_t k = 0; k <= K_f; ++k)
        b.C_k.push_back(std::pow(gain, static_cast<double>(k)) * C_X);
    return b;
}

// ---- lifting -------------------------------------------------------------

DenseMatrix selector_matrix(std::size_t block, std::size_t total, std::size_t offset)
{
    if (offset + block > total)
        throw ShapeError("selector_matrix: block exceeds total");
    DenseMatrix S(block, total);
    for (std::size_t t = 0; t < block; ++t)
        S.set(t, offset + t, 1.0);
    return S;
}

DenseMatrix organizer_matrix(std::size_t total, std::size_t block, std::size_t offset)
{
    if (offset + block > total)
        throw ShapeError("organizer_matrix: block exceeds total");
    DenseMatrix O(total, block);
    for (std::size_t t = 0; t < block; ++t)
        O.set(offset + t, t, 1.0);
    return O;
}

AttnHead lift_head(const AttnHead& h, const DenseMatrix& O, const DenseMatrix& Q)
{
    return AttnHead(matmul(h.W_K, Q), matmul(h.W_Q, Q), matmul(O, matmul(h.W_V, Q)));
}

// ---- one-layer compile ---------------------------------------------------

namespace {

struct BlockParams {
    std::size_t n, N, d_tok, data_rows, in_dim, D1, D2, pos1, pos2;
    double lambda1, lambda2, lambda3, T, C_sup;
};

std::vector<AttnHead> row_layer1(const OneLayerSpec& s, std::size_t r, const BlockParams& p)
{
    const AugmentedRows rows{p.in_dim, 0, p.data_rows, p.n};
    std::vector<AttnHead> heads;
    for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t k = 0; k < p.N; ++k)
            for (std::size_t j = 0; j < p.n; ++j) {
                DenseMatrix V(p.D1, p.in_dim);
                for (std::size_t t = 0; t < p.d_tok; ++t) {
                    const double wv = s.weight(r, i, k, j, t);
                    if (wv == 0.0)
                        continue;
                    const std::size_t row = (i * p.N + k) * p.d_tok + t;
                    if (t < p.data_rows) {
                        V.set(row, t, wv);
                    } else {
                        // constant 1/n coordinate read off the positional rows
                        for (std::size_t q = 0; q < p.n; ++q)
                            V.set(row, p.data_rows + q, wv / static_cast<double>(p.n));
                    }
                }
                heads.push_back(routed_head_at(rows, j, std::move(V), 1.0));
            }
    heads.push_back(identity_head_at(rows, p.D1, p.pos1, 1.0));
    return heads;
}

std::vector<AttnHead> row_layer2(const BlockParams& p)
{
    const AugmentedRows rows{p.D1, 0, p.pos1, p.n};
    const DenseMatrix B(p.n, p.n, 2.0);
    std::vector<AttnHead> heads;
    for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t k = 0; k < p.N; ++k) {
            DenseMatrix A(1, p.pos1);
            for (std::size_t t = 0; t < p.d_tok; ++t)
                A.set(0, (i * p.N + k) * p.d_tok + t, 0.5);
            heads.push_back(linear_map_head_at(A, B, p.T, rows, p.D2, i * p.N + k, p.lambda2));
        }
    heads.push_back(identity_head_at(rows, p.D2, p.pos2, 1.0));
    return heads;
}

std::vector<AttnHead> row_layer3(const OneLayerSpec& s, std::size_t r, const BlockParams& p)
{
    std::vector<AttnHead> heads;
    for (std::size_t i = 0; i < p.n; ++i)
        for (std::size_t k = 0; k < p.N; ++k) {
            const std::size_t u = i * p.N + k;
            DenseMatrix K(2, p.D2), Q(2, p.D2), V(1, p.D2);
            K.set(0, u, 1.0);
            K.set(1, p.pos2 + p.n, p.C_sup);
            Q.set(0, p.pos2 + i, 1.0);
            for (std::size_t j = 0; j <= p.n; ++j)
                if (j != i)
                    Q.set(1, p.pos2 + j, 1.0);
            V.set(0, u, static_cast<double>(s.sign(r, i, k)));
            heads.emplace_back(std::move(K), std::move(Q), std::move(V));
        }
    return heads;
}

CompiledBlock compile_block(const OneLayerSpec& spec, double C_X, double eps)
{
    spec.validate();
    require_eps(eps, "compile_one_layer");
    if (!(C_X > 0.0) || !std::isfinite(C_X))
        throw DomainError("compile_one_layer: C_X must be positive");

    BlockCertificate c;
    c.d_out = spec.d_out;
    c.d_tok = spec.d_tok;
    c.n = spec.n;
    c.N = spec.N;
    c.bias_coordinate = spec.bias_coordinate;
    c.eps = eps;
    c.C_X = C_X;
    const ErrorBudget b = budget_one_layer(eps, spec.d_tok, spec.n, spec.N);
    c.eps1 = b.eps1;
    c.eps2 = b.eps2;
    c.eps_relu = b.eps_relu;

    const double n = static_cast<double>(spec.n), N = static_cast<double>(spec.N);
    const double d = static_cast<double>(spec.d_tok);
    const double C = std::max(C_X, 1.0);
    c.w0 = spec.w0();
    c.C_s = n * d * c.w0 * C;
    const double Cs = std::max(c.C_s, 1e-12);

    c.lambda3_base = soft_relu_temperature_base(Cs, spec.n, c.eps_relu);
    c.lambda3 = soft_relu_temperature(Cs, spec.n, c.eps_relu);
    if (c.lambda3 * c.C_s > kMaxScoreScale)
        throw BudgetError("compile: lambda_3 * C_s = " + num(c.lambda3 * c.C_s) + " exceeds " + num(kMaxScoreScale) +
                          " (eps=" + num(eps) + ", N=" + std::to_string(spec.N) + ", C_s=" + num(c.C_s) + ")");

    // positional and reference leaks reach the gate scores multiplied by
    // lambda_3 C_s, so auxiliary routing is held to this tolerance
    c.delta_aux = c.eps_relu / (8.0 * n * n * N * (c.lambda3 * c.C_s + 1.0) * (c.C_s + 1.0));
    c.lambda_id = hardmax_temperature(spec.n + 1, 1.0, c.delta_aux);
    c.lambda1 = std::max(hardmax_temperature(spec.n + 1, 1.0, c.eps1 / (n * C * c.w0 + 1.0)), c.lambda_id);
    c.lambda2 = c.lambda_id;
    const double M = 2.0 * n;
    c.T = linear_map_offset(spec.n, std::min(c.eps2, c.delta_aux) / (3.0 * M * n * d * c.w0 * C + 1.0));
    c.suppression_C =
        std::max(0.0, 2.0 * std::log(n * n * N * Cs / std::min(c.eps_relu, c.delta_aux)) / c.lambda3);

    BlockParams p;
    p.n = spec.n;
    p.N = spec.N;
    p.d_tok = spec.d_tok;
    p.data_rows = spec.data_rows();
    p.in_dim = p.data_rows + p.n + 1;
    p.pos1 = p.d_tok * p.n * p.N;
    p.pos2 = p.n * p.N;
    p.D1 = p.pos1 + p.n + 1;
    p.D2 = p.pos2 + p.n + 1;
    p.lambda1 = c.lambda1;
    p.lambda2 = c.lambda2;
    p.lambda3 = c.lambda3;
    p.T = c.T;
    p.C_sup = c.suppression_C;

    const std::size_t R = spec.d_out;
    std::vector<AttnHead> L1, L2, L3;
    const DenseMatrix Q1 = DenseMatrix::identity(p.in_dim);
    for (std::size_t r = 0; r < R; ++r) {
        const DenseMatrix O1 = organizer_matrix(R * p.D1, p.D1, r * p.D1);
        for (const auto& h : row_layer1(spec, r, p))
            L1.push_back(lift_head(h, O1, Q1));

        const DenseMatrix Q2 = selector_matrix(p.D1, R * p.D1, r * p.D1);
        const DenseMatrix O2 = organizer_matrix(R * p.D2, p.D2, r * p.D2);
        for (const auto& h : row_layer2(p))
            L2.push_back(lift_head(h, O2, Q2));

        const DenseMatrix Q3 = selector_matrix(p.D2, R * p.D2, r * p.D2);
        const DenseMatrix O3 = organizer_matrix(R, 1, r);
        for (const auto& h : row_layer3(spec, r, p))
            L3.push_back(lift_head(h, O3, Q3));
    }
    c.heads[0] = L1.size();
    c.heads[1] = L2.size();
    c.heads[2] = L3.size();

    std::vector<AttnLayer> layers;
    layers.emplace_back(std::move(L1), c.lambda1);
    layers.emplace_back(std::move(L2), c.lambda2);
    layers.emplace_back(std::move(L3), c.lambda3);
    return {TransformerNetwork({p.data_rows, p.n}, true, std::move(layers), true), c};
}

} // namespace

CompiledBlock compile_one_layer_matrix(const OneLayerSpec& spec, double C_X, double eps)
{
    return compile_block(spec, C_X, eps);
}

CompiledBlock compile_one_layer_vector(const OneLayerSpec& spec, double C_X, double eps)
{
    if (spec.d_out != 1)
        throw DomainError("compile_one_layer_vector: spec must have a single output row");
    return compile_block(spec, C_X, eps);
}

// ---- fusion --------------------------------------------------------------

TransformerNetwork fuse_layers(const std::vector<CompiledBlock>& blocks)
{
    if (blocks.empty())
        throw DomainError("fuse_layers: no blocks");
    std::vector<AttnLayer> layers;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& net = blocks[b].net;
        const auto& c = blocks[b].cert;
        if (net.layers().size() != 3 || !net.preprocess() || !net.truncate())
            throw ShapeError("fuse_layers: block " + std::to_string(b) + " is not a P + 3 layers + T block");
        if (b + 1 == blocks.size()) {
            layers.insert(layers.end(), net.layers().begin(), net.layers().end());
            break;
        }
        const auto& next = blocks[b + 1];
        if (next.net.layout().n != c.n || next.net.layout().d != c.d_out)
            throw ShapeError("fuse_layers: block " + std::to_string(b + 1) + " expects layout " +
                             std::to_string(next.net.layout().d) + "x" + std::to_string(next.net.layout().n) +
                             " but block " + std::to_string(b) + " produces " + std::to_string(c.d_out) + "x" +
                             std::to_string(c.n));
        layers.push_back(net.layers()[0]);
        layers.push_back(net.layers()[1]);

        // third layer: widen outputs and carry the positional block of row 0
        const AttnLayer& L3 = net.layers()[2];
        const std::size_t out = c.d_out + c.n + 1;
        std::vector<AttnHead> heads;
        for (const auto& h : L3.heads) {
            DenseMatrix V(out, h.d_in());
            std::copy(h.W_V.raw(), h.W_V.raw() + h.W_V.size(), V.raw());
            heads.emplace_back(h.W_K, h.W_Q, std::move(V));
        }
        const double lambda_id = hardmax_temperature(c.n + 1, 1.0, next.cert.delta_aux);
        const AugmentedRows rows{L3.d_in(), 0, c.n * c.N, c.n};
        heads.push_back(identity_head_at(rows, out, c.d_out, std::max(1.0, lambda_id / L3.lambda)));
        layers.emplace_back(std::move(heads), L3.lambda);
    }
    return TransformerNetwork(blocks.front().net.layout(), true, std::move(layers), true);
}

// ---- networks ------------------------------------------------------------

DenseMatrix relu_reference(const ReluNetwork& net, const DenseMatrix& X, std::size_t out_rows)
{
    const std::size_t d = X.rows(), n = X.cols();
    std::vector<double> v(d * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t t = 0; t < d; ++t)
            v[j * d + t] = X(t, j);
    const std::vector<double> y = relu_forward(net, v);
    if (out_rows * n < y.size())
        throw ShapeError("relu_reference: output does not fit " + std::to_string(out_rows) + "x" + std::to_string(n));
    DenseMatrix out(out_rows, n);
    for (std::size_t e = 0; e < y.size(); ++e)
        out.set(e % out_rows, e / out_rows, y[e]);
    return out;
}

namespace {

struct Unit {
    int sign;
    std::vector<std::pair<std::size_t, double>> w; // (input entry, weight)
    double bias;
};

// Units per output entry -> spec over tokens. Input entry c sits at token
// c / d_in, row c % d_in; output entry e at row e % d_out, token e / d_out.
OneLayerSpec spec_from_units(const std::vector<std::vector<Unit>>& units, std::size_t d_in, std::size_t n)
{
    const std::size_t m = units.size();
    const std::size_t d_out = ceil_div(m, n);
    std::size_t N = 1;
    bool has_bias = false;
    for (const auto& u : units) {
        N = std::max(N, u.size());
        for (const auto& x : u)
            has_bias = has_bias || x.bias != 0.0;
    }
    BiasedSpec bs{OneLayerSpec(d_out, d_in, n, N), std::vector<double>(d_out * n * N, 0.0)};
    for (std::size_t e = 0; e < m; ++e) {
        const std::size_t r = e % d_out, i = e / d_out;
        for (std::size_t k = 0; k < units[e].size(); ++k) {
            const Unit& u = units[e][k];
            bs.spec.sign(r, i, k) = u.sign;
            for (const auto& [c, v] : u.w)
                bs.spec.weight(r, i, k, c / d_in, c % d_in) += v;
            bs.bias[(r * n + i) * N + k] = u.bias;
        }
    }
    return has_bias ? absorb_bias(bs) : bs.spec;
}

int sign_of(double v)
{
    return v < 0.0 ? -1 : 1;
}

void check_inputs(const ReluNetwork& net, Layout layout, double C_X, double eps, const char* who)
{
    require_eps(eps, who);
    if (!(C_X >= 1.0) || !std::isfinite(C_X))
        throw DomainError(std::string(who) + ": C_X must be >= 1");
    if (layout.d == 0 || layout.n == 0 || net.input_dim() != layout.d * layout.n)
        throw ShapeError(std::string(who) + ": network input dim " + std::to_string(net.input_dim()) +
                         " does not equal d*n for layout " + std::to_string(layout.d) + "x" +
                         std::to_string(layout.n));
}

CompileResult finish(std::vector<CompiledBlock> blocks, ErrorBudget budget, std::size_t entries)
{
    for (std::size_t b = 0; b + 1 < blocks.size(); ++b)
        blocks[b].cert.intermediate = true;
    TransformerNetwork net = fuse_layers(blocks);
    budget.eps1 = blocks.front().cert.eps1;
    budget.eps2 = blocks.front().cert.eps2;
    budget.eps_relu = blocks.front().cert.eps_relu;
    for (const auto& b : blocks)
        budget.C_s = std::max(budget.C_s, b.cert.C_s);
    std::vector<BlockCertificate> certs;
    for (const auto& b : blocks)
        certs.push_back(b.cert);
    ResourceReport rep = resource_report(net);
    return {std::move(net), std::move(budget), std::move(rep), std::move(certs), entries};
}

} // namespace

CompileResult compile_network(const ReluNetwork& net, Layout layout, double C_X, double eps)
{
    check_inputs(net, layout, C_X, eps, "compile_network");
    const ReluStats st = relu_stats(net);
    ErrorBudget budget = budget_multilayer(eps, st.depth_Kf, st.width_Wf, st.weight_bound_B, C_X);
    const std::size_t n = layout.n;

    std::vector<CompiledBlock> blocks;
    double bound = C_X;
    std::size_t d_in = layout.d;
    for (std::size_t k = 0; k < net.depth(); ++k) {
        const ReluLayer& L = net.layers()[k];
        std::vector<std::vector<Unit>> units(ceil_div(L.A.rows(), n) * n);
        for (std::size_t e = 0; e < L.A.rows(); ++e) {
            if (k == 0) {
                // affine first layer: t = ReLU(t) - ReLU(-t)
                Unit pos{1, {}, L.b(e, 0)}, neg{-1, {}, -L.b(e, 0)};
                for (std::size_t c = 0; c < L.A.cols(); ++c)
                    if (L.A(e, c) != 0.0) {
                        pos.w.push_back({c, L.A(e, c)});
                        neg.w.push_back({c, -L.A(e, c)});
                    }
                units[e] = {pos, neg};
            } else {
                for (std::size_t c = 0; c < L.A.cols(); ++c)
                    if (L.A(e, c) != 0.0)
                        units[e].push_back({sign_of(L.A(e, c)), {{c, std::abs(L.A(e, c))}}, 0.0});
                if (L.b(e, 0) != 0.0)
                    units[e].push_back({sign_of(L.b(e, 0)), {}, std::abs(L.b(e, 0))});
            }
        }
        const OneLayerSpec spec = spec_from_units(units, d_in, n);
        const double domain = k == 0 ? C_X : std::max(budget.C_k[k], bound + eps);
        try {
            blocks.push_back(compile_block(spec, domain, budget.eps_k[k]));
        } catch (const BudgetError& e) {
            throw BudgetError(std::string(e.what()) + "; layer " + std::to_string(k + 1) + " of K_f=" +
                              std::to_string(st.depth_Kf) + ", (W_f B)^K_f = " + num(budget.growth) + " with W_f=" +
                              std::to_string(st.width_Wf) + ", B=" + num(st.weight_bound_B));
        }
        double next = 0.0;
        for (std::size_t e = 0; e < L.A.rows(); ++e) {
            double s = std::abs(L.b(e, 0));
            for (std::size_t c = 0; c < L.A.cols(); ++c)
                s += std::abs(L.A(e, c)) * bound;
            next = std::max(next, s);
        }
        bound = next;
        d_in = spec.d_out;
    }
    return finish(std::move(blocks), std::move(budget), net.output_dim());
}

CompileResult compile_two_layer(const ReluNetwork& net, Layout layout, double C_X, double eps)
{
    check_inputs(net, layout, C_X, eps, "compile_two_layer");
    if (net.depth() != 2)
        throw DomainError("compile_two_layer: network must have exactly two affine layers");
    const ReluLayer& L1 = net.layers()[0];
    const ReluLayer& L2 = net.layers()[1];
    const std::size_t n = layout.n;

    // a * ReLU(c (A1 x + b1)) = a c ReLU(A1 x + b1) for c > 0
    std::vector<std::vector<Unit>> units(ceil_div(L2.A.rows(), n) * n);
    for (std::size_t e = 0; e < L2.A.rows(); ++e) {
        for (std::size_t m = 0; m < L2.A.cols(); ++m) {
            const double c = L2.A(e, m);
            if (c == 0.0)
                continue;
            Unit u{sign_of(c), {}, std::abs(c) * L1.b(m, 0)};
            for (std::size_t x = 0; x < L1.A.cols(); ++x)
                if (L1.A(m, x) != 0.0)
                    u.w.push_back({x, std::abs(c) * L1.A(m, x)});
            units[e].push_back(std::move(u));
        }
        if (L2.b(e, 0) != 0.0)
            units[e].push_back({sign_of(L2.b(e, 0)), {}, std::abs(L2.b(e, 0))});
    }
    const OneLayerSpec spec = spec_from_units(units, layout.d, n);
    ErrorBudget budget;
    budget.eps = eps;
    budget.eps_k = {eps};
    budget.C_k = {C_X};
    std::vector<CompiledBlock> blocks;
    blocks.push_back(compile_block(spec, C_X, eps));
    return finish(std::move(blocks), std::move(budget), net.output_dim());
}

// ---- tuning --------------------------------------------------------------

TuneResult tune_lambda(const TransformerNetwork& net, const Oracle& oracle, double C_X, double eps,
                       std::size_t samples, std::uint64_t seed)
{
    if (samples < 500)
        throw DomainError("tune_lambda: needs at least 500 validation samples");
    const auto inputs = sample_box(net.layout(), C_X, samples, seed);
    TuneResult res{net, {}, max_error(net, inputs, oracle)};
    for (const auto& L : net.layers())
        res.theory_lambda.push_back(L.lambda);
    if (res.measured_max_error > eps)
        return res;
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        for (int step = 0; step < 64; ++step) {
            TransformerNetwork cand = res.net;
            cand.mutable_layers()[l].lambda *= 0.5;
            const double e = max_error(cand, inputs, oracle);
            if (!(e <= eps))
                break;
            res.net = std::move(cand);
            res.measured_max_error = e;
        }
    }
    return res;
}

// ---- certificates --------------------------------------------------------

Json block_to_json(const BlockCertificate& c)
{
    return Json{{"d_out", c.d_out},
                {"d_tok", c.d_tok},
                {"n", c.n},
                {"N", c.N},
                {"bias_coordinate", c.bias_coordinate},
                {"intermediate", c.intermediate},
                {"eps", c.eps},
                {"eps1", c.eps1},
                {"eps2", c.eps2},
                {"eps_relu", c.eps_relu},
                {"C_X", c.C_X},
                {"w0", c.w0},
                {"C_s", c.C_s},
                {"lambda", {c.lambda1, c.lambda2, c.lambda3}},
                {"lambda3_base", c.lambda3_base},
                {"lambda_id", c.lambda_id},
                {"T", c.T},
                {"suppression_C", c.suppression_C},
                {"delta_aux", c.delta_aux},
                {"heads", {c.heads[0], c.heads[1], c.heads[2]}}};
}

Json compile_certificate(const CompileResult& r, double measured_max_error, std::size_t samples, std::uint64_t seed)
{
    Json blocks = Json::array();
    for (const auto& b : r.blocks)
        blocks.push_back(block_to_json(b));
    return Json{{"eps", r.budget.eps},
                {"budget",
                 {{"eps1", r.budget.eps1},
                  {"eps2", r.budget.eps2},
                  {"eps_relu", r.budget.eps_relu},
                  {"eps_k", r.budget.eps_k}}},
                {"C_s", r.budget.C_s},
                {"theory_lambda", r.report.lambda_per_layer},
                {"measured_max_error", measured_max_error},
                {"samples", samples},
                {"seed", seed},
                {"blocks", blocks}};
}

} // namespace r2a
