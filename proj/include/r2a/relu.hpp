#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "r2a/numerics.hpp"

namespace r2a {

struct ReluLayer {
    DenseMatrix A; // d_{i+1} x d_i
    DenseMatrix b; // d_{i+1} x 1
};

/**
 * @brief Stack of affine layers f = (A_K ReLU[.] + b_K) o ... o (A_1 x + b_1).
 *
 * ReLU is applied to the input of every layer except the first.
 */
class ReluNetwork {
public:
    explicit ReluNetwork(std::vector<ReluLayer> layers);

    const std::vector<ReluLayer>& layers() const noexcept { return layers_; }
    std::size_t depth() const noexcept { return layers_.size(); }
    std::size_t input_dim() const noexcept { return layers_.front().A.cols(); }
    std::size_t output_dim() const noexcept { return layers_.back().A.rows(); }

private:
    std::vector<ReluLayer> layers_;
};

struct ReluStats {
    std::size_t depth_Kf = 0;
    std::size_t width_Wf = 0;
    std::size_t sparsity_S = 0;
    double weight_bound_B = 0.0;
};

// x is input_dim x 1; a wider x is treated as a batch of columns.
DenseMatrix relu_forward(const ReluNetwork& net, const DenseMatrix& x);
std::vector<double> relu_forward(const ReluNetwork& net, const std::vector<double>& x);
ReluStats relu_stats(const ReluNetwork& net);

// ---- combinators ---------------------------------------------------------

ReluNetwork affine_net(const DenseMatrix& A, const DenseMatrix& b);
ReluNetwork affine_net(const DenseMatrix& A);
// outer o inner; the last affine map of inner merges into the first of outer
ReluNetwork compose(const ReluNetwork& outer, const ReluNetwork& inner);
// exact identity of the given depth (t = ReLU(t) - ReLU(-t) for depth >= 2)
ReluNetwork identity_net(std::size_t dim, std::size_t depth);
ReluNetwork pad_to_depth(const ReluNetwork& net, std::size_t depth);
// nets reading the same input, outputs concatenated; depths are padded
ReluNetwork stack_shared(const std::vector<ReluNetwork>& nets);

struct Branch {
    ReluNetwork net;
    std::vector<std::size_t> inputs; // indices into the shared input
};
ReluNetwork parallel(const std::vector<Branch>& branches, std::size_t in_dim);

// ---- exact builders --------------------------------------------------------

ReluNetwork build_max_net(std::size_t count);
ReluNetwork build_min_net(std::size_t count);
ReluNetwork build_clip_net(std::size_t count, double c);

// ---- approximate builders --------------------------------------------------

// |t| -> interpolant of t^2 on [-1,1] with 2^levels pieces per side;
// error <= 2^(-2 levels - 2)
ReluNetwork build_square_net(std::size_t levels);
// (u, v) in [-1,1]^2 -> uv clipped to [-1,1]; error <= 2^(-2 levels - 2)
ReluNetwork build_pair_mult_net(std::size_t levels);
std::size_t square_levels_for(double tol);

ReluNetwork build_mult_net(std::size_t dim, double C_X, double eps);
ReluNetwork build_reciprocal_net(double eps);
ReluNetwork build_sqrt_net(double eps);
ReluNetwork build_exp_half_net(double eps, double C_t);
ReluNetwork build_sigma_net(double eps, double C_X);

std::size_t newton_iterations(double eps);
std::size_t exp_taylor_degree(double eps, double C_t);

// Piecewise-linear interpolant of (x, y) samples with one hidden layer.
ReluNetwork build_interpolant_1d(const std::vector<std::pair<double, double>>& samples);

} // namespace r2a
