#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "r2a/attn.hpp"
#include "r2a/compiler.hpp"
#include "r2a/json_io.hpp"
#include "r2a/relu.hpp"

namespace r2a {

// Uniform samples on [-C_X, C_X]^{d x n}: one SplitMix64 stream seeded with
// `seed`, entries drawn sample by sample in row-major order.
std::vector<DenseMatrix> sample_box(Layout layout, double C_X, std::size_t samples, std::uint64_t seed);

// max over inputs of ||net(X) - oracle(X)||_max
double max_error(const TransformerNetwork& net, const std::vector<DenseMatrix>& inputs, const Oracle& oracle);

struct VerificationReport {
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    double C_X = 0.0;
    Layout layout;
    double measured_max_error = 0.0;
    double target_eps = 0.0;
    bool pass = false;
    double wall_time_ms = 0.0;
};

VerificationReport verify_networks(const ReluNetwork& relu, const TransformerNetwork& attn, std::size_t samples,
                                   std::uint64_t seed, double C_X, double eps);
// wall time is left out unless asked for, so reports stay byte-stable
Json report_to_json(const VerificationReport& r, bool with_time);

} // namespace r2a
