#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "r2a/attn.hpp"
#include "r2a/json_io.hpp"
#include "r2a/relu.hpp"

namespace r2a {

/**
 * @brief One hidden ReLU layer in sign/weight form.
 *
 * f[r][i] = sum_k a[r][i][k] * ReLU( sum_j <w[r][i][k][j], x'_j> )
 *
 * x'_j is token j of the input (d_tok values). With bias_coordinate set, the
 * last coordinate of every token is the constant 1/n and is not part of the
 * data; the compiled network synthesizes it from the positional block.
 */
struct OneLayerSpec {
    std::size_t d_out = 1;
    std::size_t d_tok = 1;
    std::size_t n = 1;
    std::size_t N = 1;
    bool bias_coordinate = false;
    std::vector<double> w; // [r][i][k][j][t]
    std::vector<int> a;    // [r][i][k]

    OneLayerSpec() = default;
    OneLayerSpec(std::size_t d_out, std::size_t d_tok, std::size_t n, std::size_t N, bool bias_coordinate = false);

    double& weight(std::size_t r, std::size_t i, std::size_t k, std::size_t j, std::size_t t);
    double weight(std::size_t r, std::size_t i, std::size_t k, std::size_t j, std::size_t t) const;
    int& sign(std::size_t r, std::size_t i, std::size_t k);
    int sign(std::size_t r, std::size_t i, std::size_t k) const;

    std::size_t data_rows() const noexcept { return d_tok - (bias_coordinate ? 1 : 0); }
    double w0() const;
    void validate() const;
};

// Exact evaluation of a OneLayerSpec on X (data_rows x n); returns d_out x n.
DenseMatrix spec_forward(const OneLayerSpec& spec, const DenseMatrix& X);

// A spec whose units also carry a scalar bias: s = sum_j <w, x_j> + bias.
struct BiasedSpec {
    OneLayerSpec spec;      // bias_coordinate must be false
    std::vector<double> bias; // [r][i][k]
};

// Appends the bias as an extra token coordinate: w' = (w, b), x' = (x, 1/n).
OneLayerSpec absorb_bias(const BiasedSpec& biased);
// x -> ReLU(A vec(X) + b) with vec column-major over tokens; output entry e
// lands at row e % d_out, token e / d_out where d_out = ceil(rows(A) / n).
OneLayerSpec absorb_bias(const ReluLayer& layer, std::size_t n);

struct ErrorBudget {
    double eps = 0.0;
    double eps1 = 0.0;
    double eps2 = 0.0;
    double eps_relu = 0.0;
    std::vector<double> eps_k;
    double C_s = 0.0;
    std::vector<double> C_k;
    double growth = 1.0; // (W_f B)^K_f
};

ErrorBudget budget_one_layer(double eps, std::size_t d, std::size_t n, std::size_t N);
ErrorBudget budget_multilayer(double eps, std::size_t K_f, std::size_t W_f, double B, double C_X = 1.0);

struct BlockCertificate {
    std::size_t d_out = 0, d_tok = 0, n = 0, N = 0;
    bool bias_coordinate = false;
    bool intermediate = false;
    double eps = 0.0, eps1 = 0.0, eps2 = 0.0, eps_relu = 0.0;
    double C_X = 0.0; // domain bound of the block input
    double w0 = 0.0;
    double C_s = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
    double lambda3_base = 0.0;
    double lambda_id = 0.0;
    double T = 0.0;
    double suppression_C = 0.0;
    double delta_aux = 0.0;
    std::size_t heads[3] = {0, 0, 0}; // counted while emitting
};

struct CompiledBlock {
    TransformerNetwork net; // P + 3 layers + T
    BlockCertificate cert;
};

// Refusal threshold on lambda_3 * C_s.
inline constexpr double kMaxScoreScale = 1e8;

CompiledBlock compile_one_layer_vector(const OneLayerSpec& spec, double C_X, double eps);
CompiledBlock compile_one_layer_matrix(const OneLayerSpec& spec, double C_X, double eps);

DenseMatrix selector_matrix(std::size_t block, std::size_t total, std::size_t offset);  // block x total
DenseMatrix organizer_matrix(std::size_t total, std::size_t block, std::size_t offset); // total x block
// (W_K Q, W_Q Q, O W_V Q)
AttnHead lift_head(const AttnHead& h, const DenseMatrix& O, const DenseMatrix& Q);

// One P and one T; every block but the last gets a positional identity head
// in its third layer.
TransformerNetwork fuse_layers(const std::vector<CompiledBlock>& blocks);

struct CompileResult {
    TransformerNetwork net;
    ErrorBudget budget;
    ResourceReport report;
    std::vector<BlockCertificate> blocks;
    std::size_t output_entries = 0; // entries of f; output matrix is padded past this
};

// Layer-by-layer translation, 3 attention layers per affine layer.
CompileResult compile_network(const ReluNetwork& net, Layout layout, double C_X, double eps);
// Two-layer nets only: folds both affine maps into a single sign/weight block.
CompileResult compile_two_layer(const ReluNetwork& net, Layout layout, double C_X, double eps);

// f(vec X) laid out as the compiled output: entry e at (e % rows, e / rows).
DenseMatrix relu_reference(const ReluNetwork& net, const DenseMatrix& X, std::size_t out_rows);

using Oracle = std::function<DenseMatrix(const DenseMatrix&)>;

struct TuneResult {
    TransformerNetwork net;
    std::vector<double> theory_lambda;
    double measured_max_error = 0.0;
};
// Halves each layer's lambda while the sampled error stays within eps.
TuneResult tune_lambda(const TransformerNetwork& net, const Oracle& oracle, double C_X, double eps,
                       std::size_t samples = 500, std::uint64_t seed = 42);

Json block_to_json(const BlockCertificate& c);
Json compile_certificate(const CompileResult& r, double measured_max_error, std::size_t samples, std::uint64_t seed);

} // namespace r2a
