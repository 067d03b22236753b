#include "r2a/verify.hpp"

#include <algorithm>
#include <chrono>

#include "r2a/rng.hpp"

namespace r2a {

std::vector<DenseMatrix> sample_box(Layout layout, double C_X, std::size_t samples, std::uint64_t seed)
{
    SplitMix64 rng(seed);
    std::vector<DenseMatrix> out;
    out.reserve(samples);
    for (std::size_t s = 0; s < samples; ++s) {
        DenseMatrix X(layout.d, layout.n);
        for (std::size_t i = 0; i < X.size(); ++i)
            X.raw()[i] = rng.uniform(-C_X, C_X);
        out.push_back(std::move(X));
    }
    return out;
}

double max_error(const TransformerNetwork& net, const std::vector<DenseMatrix>& inputs, const Oracle& oracle)
{
    const std::vector<DenseMatrix> got = transformer_forward_batch(net, inputs);
    double err = 0.0;
    for (std::size_t s = 0; s < inputs.size(); ++s) {
        const DenseMatrix want = oracle(inputs[s]);
        if (want.rows() != got[s].rows() || want.cols() != got[s].cols())
            throw ShapeError("max_error: network output " + got[s].shape_str() + " vs reference " + want.shape_str());
        err = std::max(err, max_norm(subtract(got[s], want)));
    }
    return err;
}

VerificationReport verify_networks(const ReluNetwork& relu, const TransformerNetwork& attn, std::size_t samples,
                                   std::uint64_t seed, double C_X, double eps)
{
    const auto t0 = std::chrono::steady_clock::now();
    const Layout lay = attn.layout();
    if (relu.input_dim() != lay.d * lay.n)
        throw DomainError("verify: ReLU input dim " + std::to_string(relu.input_dim()) + " does not match layout " +
                          std::to_string(lay.d) + "x" + std::to_string(lay.n));
    const std::size_t rows = attn.output_rows();
    if (!attn.truncate() || rows * lay.n < relu.output_dim())
        throw DomainError("verify: transformer output cannot hold the ReLU output");

    VerificationReport r;
    r.samples = samples;
    r.seed = seed;
    r.C_X = C_X;
    r.layout = lay;
    r.target_eps = eps;
    const auto inputs = sample_box(lay, C_X, samples, seed);
    r.measured_max_error =
        max_error(attn, inputs, [&](const DenseMatrix& X) { return relu_reference(relu, X, rows); });
    r.pass = r.measured_max_error <= eps;
    r.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

Json report_to_json(const VerificationReport& r, bool with_time)
{
    Json j{{"samples", r.samples},
           {"seed", r.seed},
           {"domain", {{"C_X", r.C_X}, {"layout", {{"d", r.layout.d}, {"n", r.layout.n}}}}},
           {"measured_max_error", r.measured_max_error},
           {"target_eps", r.target_eps},
           {"pass", r.pass}};
    if (with_time)
        j["wall_time_ms"] = r.wall_time_ms;
    return j;
}

} // namespace r2a
