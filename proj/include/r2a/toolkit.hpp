#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "r2a/compiler.hpp"
#include "r2a/json_io.hpp"
#include "r2a/relu.hpp"

namespace r2a {

struct PrimitiveRequest {
    std::string name; // mult, inv, max, min, clip, sqrt, alpha, sigma, uap1d
    double eps = 0.0;
    std::optional<double> C_X;
    std::optional<double> c;          // clip
    std::optional<std::size_t> dim;   // mult
    std::vector<std::pair<double, double>> samples; // uap1d
    double relu_share = 0.5;          // fraction of eps given to the ReLU stage
    std::string route = "shallow";    // or "deep": multi-layer builder through compile_network
};

struct PrimitiveResult {
    std::string name;
    ReluNetwork relu;
    CompileResult compiled;
    double relu_eps = 0.0;
    double compile_eps = 0.0;
    double domain_lo = 0.0, domain_hi = 0.0;
    std::size_t knots = 0;
    // grid self-check against the exact target
    std::size_t grid_points = 0;
    double relu_measured_error = 0.0;
    double measured_max_error = 0.0;
    Json certificate;
};

// Exact target of a primitive at x (x.size() = input dim).
double primitive_target(const PrimitiveRequest& req, const std::vector<double>& x);

// Piecewise-linear knots with interpolation error <= tol on [lo, hi], for f
// whose |f''| is non-increasing on the interval (step h = sqrt(8 tol / |f''(x)|)).
std::vector<std::pair<double, double>> greedy_knots(const std::function<double(double)>& f,
                                                    const std::function<double(double)>& f2_abs, double lo, double hi,
                                                    double tol);

// Largest h^2/8 |f''| estimate from second divided differences.
double interpolation_error_estimate(const std::vector<std::pair<double, double>>& samples);

// Two-layer net for the primitive at tolerance tol.
ReluNetwork primitive_relu_net(const PrimitiveRequest& req, double tol);

PrimitiveResult build_primitive(const PrimitiveRequest& req);
PrimitiveResult build_uap_1d(const std::vector<std::pair<double, double>>& samples, double eps);

// Grid used for the self-check: log-spaced on [eps, 1/eps] for inv/sqrt,
// uniform otherwise, 41 points per axis for the 2-D and 3-D primitives.
std::vector<std::vector<double>> primitive_grid(const PrimitiveRequest& req, std::size_t points_1d = 1000);

} // namespace r2a
