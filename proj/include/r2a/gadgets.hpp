#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "r2a/attn.hpp"

namespace r2a {

struct GadgetCertificate {
    double target_eps = 0.0;
    double lambda_used = 0.0;
    double lambda_base = 0.0; // closed-form bound before the safety factor
    std::optional<double> suppression_C;
    double C_V = 0.0;
    double C_KQ = 0.0;
    std::map<std::string, double> params;
};

struct GadgetLayer {
    AttnLayer layer;
    GadgetCertificate cert;
};

// max(0, ln(n-1) - ln eps) / gap
double hardmax_temperature_base(std::size_t n, double gap, double eps);
// twice the base bound
double hardmax_temperature(std::size_t n, double gap, double eps);

double soft_relu(double s, double lambda, std::size_t n);
// max(1, ln(C_s n / eps_relu)) / eps_relu
double soft_relu_temperature_base(double C_s, std::size_t n, double eps_relu);
// twice the base bound
double soft_relu_temperature(double C_s, std::size_t n, double eps_relu);

// Row offsets of an augmented representation: data rows, then n positional
// rows, then the reference row at pos + n.
struct AugmentedRows {
    std::size_t in_dim;
    std::size_t data; // first data row
    std::size_t pos;  // first positional row
    std::size_t n;
};

// Reference-token offset T for the linear-map head: gap T n ln2 >= ln n - ln delta,
// times 2. Zero when delta is infinite.
double linear_map_offset(std::size_t n, double delta);

// Head computing [A X B, 0] on the data rows starting at rows.data (A.cols of
// them), written to output rows out_offset..out_offset+A.rows. Scores are
// divided by lambda_layer so the head runs at unit temperature.
AttnHead linear_map_head_at(const DenseMatrix& A, const DenseMatrix& B, double T, const AugmentedRows& rows,
                            std::size_t out_dim, std::size_t out_offset, double lambda_layer);

// Keys are positions; query column `token` picks token `token` and every other
// query picks the reference column. `token` = n routes all queries to the
// reference; `token` = n + 1 gives the identity routing used by identity heads.
AttnHead routed_head_at(const AugmentedRows& rows, std::size_t token, DenseMatrix W_V, double q_scale);
// Copies the positional block (n+1 rows) to out rows out_pos..out_pos+n.
AttnHead identity_head_at(const AugmentedRows& rows, std::size_t out_dim, std::size_t out_pos, double q_scale);

// Single head on Z = [[X,0],[I_n,0],[0,1]] returning [A X B, 0].
GadgetLayer build_linear_map_head(const DenseMatrix& A, const DenseMatrix& B, double C_X, double eps);

struct SplitB {
    DenseMatrix B1, B2;
    double c;
};
SplitB split_general_B(const DenseMatrix& B);
// Two heads (A, B1) and (-A, B2), each at eps/2, for arbitrary real B.
GadgetLayer build_general_linear_map_layer(const DenseMatrix& A, const DenseMatrix& B, double C_X, double eps);

// n product heads plus one identity head; output [[diag(v_i) x_i ..., 0], [I_{n+1}]].
GadgetLayer build_entrywise_mult_layer(const std::vector<std::vector<double>>& v_list, double C_X, double eps);

struct IdentityHead {
    AttnHead head;
    double lambda;
};
IdentityHead build_identity_head(std::size_t d_in, std::size_t n, double eps);

void fill_norms(GadgetCertificate& cert, const AttnLayer& layer);

} // namespace r2a
