#include "r2a/attn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "r2a/parallel.hpp"

namespace r2a {

AttnHead::AttnHead(DenseMatrix K, DenseMatrix Q, DenseMatrix V) : W_K(std::move(K)), W_Q(std::move(Q)), W_V(std::move(V))
{
    require_shape(W_K.rows() == W_Q.rows() && W_K.cols() == W_Q.cols(), "head W_K vs W_Q", W_K, W_Q);
    require_shape(W_V.cols() == W_K.cols(), "head W_V vs W_K", W_V, W_K);
}

AttnLayer::AttnLayer(std::vector<AttnHead> hs, double lam) : heads(std::move(hs)), lambda(lam)
{
    if (heads.empty())
        throw ShapeError("attention layer needs at least one head");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw DomainError("attention layer lambda must be positive and finite");
    for (const auto& h : heads)
        if (h.d_in() != d_in() || h.d_out() != d_out())
            throw ShapeError("attention heads disagree on d_in/d_out");
}

TransformerNetwork::TransformerNetwork(Layout layout, bool pre, std::vector<AttnLayer> layers, bool trunc)
    : layout_(layout), preprocess_(pre), layers_(std::move(layers)), truncate_(trunc)
{
    if (layout_.d == 0 || layout_.n == 0)
        throw ShapeError("layout needs d >= 1 and n >= 1");
    std::size_t rows = input_rows();
    for (std::size_t j = 0; j < layers_.size(); ++j) {
        if (layers_[j].d_in() != rows)
            throw ShapeError("layer " + std::to_string(j) + " expects d_in " + std::to_string(layers_[j].d_in()) +
                             " but receives " + std::to_string(rows));
        rows = layers_[j].d_out();
    }
}

std::size_t TransformerNetwork::input_rows() const noexcept
{
    return preprocess_ ? layout_.d + layout_.n + 1 : layout_.d;
}

std::size_t TransformerNetwork::output_rows() const noexcept
{
    return layers_.empty() ? input_rows() : layers_.back().d_out();
}

DenseMatrix preprocess(const DenseMatrix& X)
{
    const std::size_t d = X.rows(), n = X.cols();
    DenseMatrix Z(d + n + 1, n + 1);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < n; ++j)
            Z.raw()[i * (n + 1) + j] = X(i, j);
    for (std::size_t j = 0; j < n; ++j)
        Z.raw()[(d + j) * (n + 1) + j] = 1.0;
    Z.raw()[(d + n) * (n + 1) + n] = 1.0;
    return Z;
}

DenseMatrix truncate(const DenseMatrix& Z)
{
    if (Z.cols() < 2)
        throw ShapeError("truncate: need at least 2 columns, got " + Z.shape_str());
    DenseMatrix out(Z.rows(), Z.cols() - 1);
    for (std::size_t i = 0; i < Z.rows(); ++i)
        for (std::size_t j = 0; j + 1 < Z.cols(); ++j)
            out.raw()[i * out.cols() + j] = Z(i, j);
    return out;
}

namespace {

struct Entry {
    std::size_t row, col;
    double v;
};

std::vector<Entry> nonzeros(const DenseMatrix& M)
{
    std::vector<Entry> out;
    for (std::size_t i = 0; i < M.rows(); ++i)
        for (std::size_t j = 0; j < M.cols(); ++j)
            if (M(i, j) != 0.0)
                out.push_back({i, j, M(i, j)});
    return out;
}

struct PreparedHead {
    std::size_t d_h;
    std::vector<Entry> K, Q, V;
    std::vector<std::size_t> v_cols; // distinct input rows read by W_V
};

struct PreparedLayer {
    std::size_t d_in, d_out;
    double lambda;
    std::vector<PreparedHead> heads;
};

PreparedLayer prepare(const AttnLayer& layer)
{
    PreparedLayer p{layer.d_in(), layer.d_out(), layer.lambda, {}};
    for (const auto& h : layer.heads) {
        PreparedHead ph{h.d_h(), nonzeros(h.W_K), nonzeros(h.W_Q), nonzeros(h.W_V), {}};
        for (const auto& e : ph.V)
            ph.v_cols.push_back(e.col);
        std::sort(ph.v_cols.begin(), ph.v_cols.end());
        ph.v_cols.erase(std::unique(ph.v_cols.begin(), ph.v_cols.end()), ph.v_cols.end());
        p.heads.push_back(std::move(ph));
    }
    return p;
}

// Scratch buffers reused across heads of one forward call.
struct Scratch {
    std::vector<double> K, Q, S, Y;
    std::vector<std::size_t> slot;
};

DenseMatrix run_layer(const PreparedLayer& L, const DenseMatrix& Z, Scratch& sc)
{
    if (Z.rows() != L.d_in)
        throw ShapeError("attention layer expects " + std::to_string(L.d_in) + " rows, got " + Z.shape_str());
    const std::size_t c = Z.cols();
    const double* z = Z.raw();
    DenseMatrix out(L.d_out, c);
    double* o = out.raw();
    sc.slot.assign(L.d_in, 0);

    for (const auto& h : L.heads) {
        sc.K.assign(h.d_h * c, 0.0);
        sc.Q.assign(h.d_h * c, 0.0);
        for (const auto& e : h.K)
            for (std::size_t j = 0; j < c; ++j)
                sc.K[e.row * c + j] += e.v * z[e.col * c + j];
        for (const auto& e : h.Q)
            for (std::size_t j = 0; j < c; ++j)
                sc.Q[e.row * c + j] += e.v * z[e.col * c + j];

        // S[p][q] = lambda * <K[:,p], Q[:,q]>, then softmax over p per column q
        sc.S.assign(c * c, 0.0);
        for (std::size_t a = 0; a < h.d_h; ++a)
            for (std::size_t p = 0; p < c; ++p) {
                const double kp = sc.K[a * c + p];
                if (kp == 0.0)
                    continue;
                for (std::size_t q = 0; q < c; ++q)
                    sc.S[p * c + q] += kp * sc.Q[a * c + q];
            }
        for (std::size_t q = 0; q < c; ++q) {
            double mx = -INFINITY;
            for (std::size_t p = 0; p < c; ++p)
                mx = std::max(mx, L.lambda * sc.S[p * c + q]);
            double sum = 0.0;
            for (std::size_t p = 0; p < c; ++p) {
                const double e = std::exp(L.lambda * sc.S[p * c + q] - mx);
                sc.S[p * c + q] = e;
                sum += e;
            }
            for (std::size_t p = 0; p < c; ++p)
                sc.S[p * c + q] /= sum;
        }

        // Y[b] = Z[b,:] * P for every input row read by W_V
        sc.Y.assign(h.v_cols.size() * c, 0.0);
        for (std::size_t t = 0; t < h.v_cols.size(); ++t) {
            const std::size_t b = h.v_cols[t];
            sc.slot[b] = t;
            for (std::size_t p = 0; p < c; ++p) {
                const double zp = z[b * c + p];
                if (zp == 0.0)
                    continue;
                for (std::size_t q = 0; q < c; ++q)
                    sc.Y[t * c + q] += zp * sc.S[p * c + q];
            }
        }
        for (const auto& e : h.V) {
            const double* y = &sc.Y[sc.slot[e.col] * c];
            for (std::size_t q = 0; q < c; ++q)
                o[e.row * c + q] += e.v * y[q];
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i)
        if (!std::isfinite(o[i]))
            throw DomainError("attention forward produced a non-finite value");
    return out;
}

DenseMatrix check_and_preprocess(const TransformerNetwork& net, const DenseMatrix& X)
{
    const Layout& lay = net.layout();
    if (X.rows() != lay.d || X.cols() != lay.n)
        throw ShapeError("input " + X.shape_str() + " does not match layout " + std::to_string(lay.d) + "x" +
                         std::to_string(lay.n));
    return net.preprocess() ? preprocess(X) : X;
}

} // namespace

DenseMatrix attn_layer_forward(const AttnLayer& layer, const DenseMatrix& Z)
{
    Scratch sc;
    return run_layer(prepare(layer), Z, sc);
}

std::vector<DenseMatrix> transformer_forward_batch(const TransformerNetwork& net, const std::vector<DenseMatrix>& Xs)
{
    std::vector<PreparedLayer> prepared;
    prepared.reserve(net.layers().size());
    for (const auto& L : net.layers())
        prepared.push_back(prepare(L));

    std::vector<DenseMatrix> out(Xs.size());
    parallel_chunks(Xs.size(), [&](std::size_t b, std::size_t e) {
        Scratch sc;
        for (std::size_t s = b; s < e; ++s) {
            DenseMatrix Z = check_and_preprocess(net, Xs[s]);
            for (const auto& L : prepared)
                Z = run_layer(L, Z, sc);
            out[s] = net.truncate() ? truncate(Z) : std::move(Z);
        }
    });
    return out;
}

DenseMatrix transformer_forward(const TransformerNetwork& net, const DenseMatrix& X)
{
    return transformer_forward_batch(net, {X}).front();
}

std::vector<DenseMatrix> transformer_trace(const TransformerNetwork& net, const DenseMatrix& X)
{
    std::vector<DenseMatrix> trace{check_and_preprocess(net, X)};
    Scratch sc;
    for (const auto& L : net.layers())
        trace.push_back(run_layer(prepare(L), trace.back(), sc));
    return trace;
}

double kq_fro_norm(const AttnHead& h)
{
    // ||K^T Q||_F^2 = sum_{a,b} (K K^T)_{ab} (Q Q^T)_{ab}
    const DenseMatrix KK = matmul(h.W_K, h.W_K.transpose());
    const DenseMatrix QQ = matmul(h.W_Q, h.W_Q.transpose());
    double s = 0.0;
    for (std::size_t i = 0; i < KK.size(); ++i)
        s += KK.raw()[i] * QQ.raw()[i];
    return std::sqrt(std::max(0.0, s));
}

ResourceReport resource_report(const TransformerNetwork& net)
{
    ResourceReport r;
    r.K = net.layers().size();
    r.W = net.input_rows();
    for (const auto& L : net.layers()) {
        r.H = std::max(r.H, L.heads.size());
        r.total_heads += L.heads.size();
        r.W = std::max({r.W, L.d_in(), L.d_out()});
        r.lambda_per_layer.push_back(L.lambda);
        r.lambda_max = std::max(r.lambda_max, L.lambda);
        for (const auto& h : L.heads) {
            r.W = std::max(r.W, h.d_h());
            r.C_V = std::max(r.C_V, fro_norm(h.W_V));
            r.C_KQ = std::max(r.C_KQ, kq_fro_norm(h));
        }
    }
    return r;
}

} // namespace r2a
