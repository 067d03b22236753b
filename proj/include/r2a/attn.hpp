#pragma once

#include <cstddef>
#include <vector>

#include "r2a/numerics.hpp"

namespace r2a {

struct AttnHead {
    DenseMatrix W_K; // d_h x d_in
    DenseMatrix W_Q; // d_h x d_in
    DenseMatrix W_V; // d_out x d_in

    AttnHead(DenseMatrix K, DenseMatrix Q, DenseMatrix V);

    std::size_t d_in() const noexcept { return W_K.cols(); }
    std::size_t d_h() const noexcept { return W_K.rows(); }
    std::size_t d_out() const noexcept { return W_V.rows(); }
};

struct AttnLayer {
    std::vector<AttnHead> heads;
    double lambda = 1.0;

    AttnLayer(std::vector<AttnHead> hs, double lam);

    std::size_t d_in() const noexcept { return heads.front().d_in(); }
    std::size_t d_out() const noexcept { return heads.front().d_out(); }
};

struct Layout {
    std::size_t d = 1; // rows of X
    std::size_t n = 1; // tokens
    bool operator==(const Layout&) const = default;
};

/**
 * @brief tau = T o Attn_K o ... o Attn_1 o P.
 *
 * P maps X (d x n) to [[X, 0], [I_n, 0], [0, 1]]; T drops the last column.
 * Both are flags. A network may have no layers.
 */
class TransformerNetwork {
public:
    TransformerNetwork(Layout layout, bool preprocess, std::vector<AttnLayer> layers, bool truncate);

    const Layout& layout() const noexcept { return layout_; }
    bool preprocess() const noexcept { return preprocess_; }
    bool truncate() const noexcept { return truncate_; }
    const std::vector<AttnLayer>& layers() const noexcept { return layers_; }
    std::vector<AttnLayer>& mutable_layers() noexcept { return layers_; }

    // row count fed to the first layer
    std::size_t input_rows() const noexcept;
    std::size_t output_rows() const noexcept;

private:
    Layout layout_;
    bool preprocess_;
    std::vector<AttnLayer> layers_;
    bool truncate_;
};

struct ResourceReport {
    std::size_t H = 0;
    std::size_t W = 0;
    std::size_t K = 0;
    double C_V = 0.0;
    double C_KQ = 0.0;
    double lambda_max = 0.0;
    std::vector<double> lambda_per_layer;
    std::size_t total_heads = 0;
};

DenseMatrix preprocess(const DenseMatrix& X);
DenseMatrix truncate(const DenseMatrix& Z);

DenseMatrix attn_layer_forward(const AttnLayer& layer, const DenseMatrix& Z);
DenseMatrix transformer_forward(const TransformerNetwork& net, const DenseMatrix& X);
// Same as transformer_forward per input; heads are prepared once and inputs
// are split across RELU2ATTN_THREADS workers.
std::vector<DenseMatrix> transformer_forward_batch(const TransformerNetwork& net, const std::vector<DenseMatrix>& Xs);
// Activation after P and after every layer (T not applied).
std::vector<DenseMatrix> transformer_trace(const TransformerNetwork& net, const DenseMatrix& X);

// ||W_K^T W_Q||_F without forming the d_in x d_in product.
double kq_fro_norm(const AttnHead& h);
ResourceReport resource_report(const TransformerNetwork& net);

} // namespace r2a
