#include "r2a/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "r2a/rng.hpp"
#include "r2a/verify.hpp"

namespace r2a {

namespace {

const std::set<std::string> kNames = {"mult", "inv", "max", "min", "clip", "sqrt", "alpha", "sigma", "uap1d"};

double factorial(std::size_t k)
{
    double f = 1.0;
    for (std::size_t i = 2; i <= k; ++i)
        f *= static_cast<double>(i);
    return f;
}

std::size_t input_dim(const PrimitiveRequest& r)
{
    if (r.name == "mult")
        return r.dim.value_or(2);
    if (r.name == "max" || r.name == "min")
        return 2;
    return 1;
}

double cx(const PrimitiveRequest& r)
{
    if (r.C_X)
        return *r.C_X;
    if (r.name == "clip" && r.c)
        return std::max(1.0, 2.0 * *r.c);
    return 1.0;
}

// bound on |input entries| handed to the compiler
double compile_domain(const PrimitiveRequest& r)
{
    if (r.name == "inv" || r.name == "sqrt")
        return 1.0 / r.eps;
    if (r.name == "uap1d")
        return 1.0;
    return cx(r);
}

void validate(const PrimitiveRequest& r)
{
    if (!kNames.count(r.name))
        throw DomainError("unknown primitive '" + r.name + "'");
    if (!(r.eps > 0.0 && r.eps < 1.0))
        throw DomainError(r.name + ": eps must lie in (0,1)");
    if (!(r.relu_share > 0.0 && r.relu_share < 1.0))
        throw DomainError(r.name + ": relu_share must lie in (0,1)");
    if (r.route != "shallow" && r.route != "deep")
        throw DomainError("route must be 'shallow' or 'deep'");
    const double C = cx(r);
    if (!std::isfinite(C))
        throw DomainError(r.name + ": C_X must be finite");
    if (r.name == "sigma") {
        if (!(C > r.eps))
            throw DomainError("sigma schedule requires C_X > eps");
        if (!(C >= 1.0))
            throw DomainError("sigma schedule: C_X must be >= 1 for the compiler domain");
    } else if (!(C >= 1.0)) {
        throw DomainError(r.name + ": C_X must be >= 1");
    }
    if (r.name == "mult" && r.dim && (*r.dim == 0 || *r.dim > 12))
        throw DomainError("monomial approximation needs 1 <= dim <= 12");
    if (r.name == "clip") {
        if (!r.c)
            throw DomainError("clip requires parameter c (--c)");
        if (!(*r.c > 0.0))
            throw DomainError("clip requires c > 0");
    }
    if (r.name == "uap1d") {
        if (r.samples.size() < 2)
            throw DomainError("uap1d needs at least 2 samples");
        for (std::size_t i = 0; i < r.samples.size(); ++i) {
            const double x = r.samples[i].first;
            if (!(x >= 0.0 && x <= 1.0))
                throw DomainError("uap1d samples must lie in [0,1]");
            if (i > 0 && !(x > r.samples[i - 1].first))
                throw DomainError("uap1d samples must have strictly increasing x");
        }
    }
}

std::pair<double, double> domain_1d(const PrimitiveRequest& r)
{
    if (r.name == "inv" || r.name == "sqrt")
        return {r.eps, 1.0 / r.eps};
    if (r.name == "alpha")
        return {0.0, cx(r)};
    if (r.name == "sigma")
        return {r.eps, cx(r)};
    if (r.name == "uap1d")
        return {0.0, 1.0};
    return {-cx(r), cx(r)};
}

double sigma_f2(double t)
{
    const double g = -std::expm1(-t);
    const double e = std::exp(-t);
    return e / (2.0 * std::sqrt(g)) + e * e / (4.0 * g * std::sqrt(g));
}

// prod x = 1/(2^(d-1) d!) sum_{s_1 = 1} (prod s) (s . x)^d with t^d interpolated on [-dC, dC]
ReluNetwork polarization_net(std::size_t dim, double C, double tol)
{
    if (dim == 1)
        return identity_net(1, 2);
    const double fact = factorial(dim);
    const double R = static_cast<double>(dim) * C;
    const double f2 = static_cast<double>(dim * (dim - 1)) * std::pow(R, static_cast<double>(dim) - 2.0);
    const double h = std::sqrt(8.0 * tol * fact / f2);
    const std::size_t pieces = static_cast<std::size_t>(std::ceil(2.0 * R / h));
    std::vector<std::pair<double, double>> knots;
    for (std::size_t i = 0; i <= pieces; ++i) {
        const double t = -R + 2.0 * R * static_cast<double>(i) / static_cast<double>(pieces);
        knots.emplace_back(t, std::pow(t, static_cast<double>(dim)));
    }
    const ReluNetwork power = build_interpolant_1d(knots);

    const std::size_t terms = std::size_t{1} << (dim - 1);
    std::vector<ReluNetwork> parts;
    DenseMatrix coef(1, terms);
    for (std::size_t mask = 0; mask < terms; ++mask) {
        DenseMatrix row(1, dim);
        double sign = 1.0;
        row.set(0, 0, 1.0);
        for (std::size_t i = 1; i < dim; ++i) {
            const double s = (mask >> (i - 1)) & 1 ? -1.0 : 1.0;
            row.set(0, i, s);
            sign *= s;
        }
        parts.push_back(compose(power, affine_net(row)));
        coef.set(0, mask, sign / (static_cast<double>(terms) * fact));
    }
    return compose(affine_net(coef), stack_shared(parts));
}

ReluNetwork deep_net(const PrimitiveRequest& r, double tol)
{
    if (r.name == "inv")
        return build_reciprocal_net(tol);
    if (r.name == "sqrt")
        return build_sqrt_net(tol);
    if (r.name == "alpha")
        return build_exp_half_net(tol, cx(r));
    if (r.name == "sigma")
        return build_sigma_net(tol, cx(r));
    if (r.name == "mult")
        return build_mult_net(input_dim(r), cx(r), tol);
    return primitive_relu_net(r, tol);
}

} // namespace

double primitive_target(const PrimitiveRequest& r, const std::vector<double>& x)
{
    if (r.name == "inv")
        return 1.0 / x[0];
    if (r.name == "sqrt")
        return std::sqrt(x[0]);
    if (r.name == "alpha")
        return std::exp(-x[0] / 2.0);
    if (r.name == "sigma")
        return std::sqrt(-std::expm1(-x[0]));
    if (r.name == "clip")
        return std::clamp(x[0], -*r.c, *r.c);
    if (r.name == "max")
        return std::max(x[0], x[1]);
    if (r.name == "min")
        return std::min(x[0], x[1]);
    if (r.name == "mult") {
        double p = 1.0;
        for (double v : x)
            p *= v;
        return p;
    }
    if (r.name == "uap1d") {
        // the piecewise-linear interpolant of the samples
        const auto& s = r.samples;
        const double t = std::clamp(x[0], s.front().first, s.back().first);
        auto it = std::upper_bound(s.begin(), s.end(), t, [](double v, const auto& p) { return v < p.first; });
        if (it == s.end())
            return s.back().second;
        if (it == s.begin())
            return s.front().second;
        const auto& b = *it;
        const auto& a = *(it - 1);
        return a.second + (b.second - a.second) * (t - a.first) / (b.first - a.first);
    }
    throw DomainError("unknown primitive '" + r.name + "'");
}

std::vector<std::pair<double, double>> greedy_knots(const std::function<double(double)>& f,
                                                    const std::function<double(double)>& f2_abs, double lo, double hi,
                                                    double tol)
{
    if (!(hi > lo) || !(tol > 0.0))
        throw DomainError("greedy_knots: need lo < hi and tol > 0");
    std::vector<std::pair<double, double>> knots{{lo, f(lo)}};
    double x = lo;
    while (x < hi) {
        const double c = std::max(f2_abs(x), 1e-300);
        double next = x + std::sqrt(8.0 * tol / c);
        if (next >= hi - 1e-12 * (hi - lo))
            next = hi;
        knots.emplace_back(next, f(next));
        x = next;
        if (knots.size() > 1000000)
            throw BudgetError("greedy_knots: more than 10^6 knots required");
    }
    return knots;
}

double interpolation_error_estimate(const std::vector<std::pair<double, double>>& s)
{
    double est = 0.0;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
        const double h0 = s[i].first - s[i - 1].first, h1 = s[i + 1].first - s[i].first;
        const double d0 = (s[i].second - s[i - 1].second) / h0;
        const double d1 = (s[i + 1].second - s[i].second) / h1;
        const double f2 = 2.0 * (d1 - d0) / (h0 + h1);
        const double h = std::max(h0, h1);
        est = std::max(est, h * h / 8.0 * std::abs(f2));
    }
    return est;
}

ReluNetwork primitive_relu_net(const PrimitiveRequest& r, double tol)
{
    const auto [lo, hi] = domain_1d(r);
    if (r.name == "inv")
        return build_interpolant_1d(greedy_knots([](double x) { return 1.0 / x; },
                                                 [](double x) { return 2.0 / (x * x * x); }, lo, hi, tol));
    if (r.name == "sqrt")
        return build_interpolant_1d(greedy_knots([](double x) { return std::sqrt(x); },
                                                 [](double x) { return 0.25 / (x * std::sqrt(x)); }, lo, hi, tol));
    if (r.name == "alpha")
        return build_interpolant_1d(greedy_knots([](double t) { return std::exp(-t / 2.0); },
                                                 [](double t) { return 0.25 * std::exp(-t / 2.0); }, lo, hi, tol));
    if (r.name == "sigma")
        return build_interpolant_1d(
            greedy_knots([](double t) { return std::sqrt(-std::expm1(-t)); }, sigma_f2, lo, hi, tol));
    if (r.name == "mult")
        return polarization_net(input_dim(r), cx(r), tol);
    if (r.name == "max")
        return build_max_net(1);
    if (r.name == "min")
        return build_min_net(1);
    if (r.name == "clip")
        return build_clip_net(1, *r.c);
    if (r.name == "uap1d")
        return build_interpolant_1d(r.samples);
    throw DomainError("unknown primitive '" + r.name + "'");
}

std::vector<std::vector<double>> primitive_grid(const PrimitiveRequest& r, std::size_t points_1d)
{
    std::vector<std::vector<double>> g;
    const std::size_t dim = input_dim(r);
    if (dim == 1) {
        const auto [lo, hi] = domain_1d(r);
        const bool log_grid = r.name == "inv" || r.name == "sqrt";
        for (std::size_t i = 0; i < points_1d; ++i) {
            const double u = points_1d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points_1d - 1);
            g.push_back({log_grid ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u});
        }
        return g;
    }
    const double C = cx(r);
    if (dim <= 3) {
        const std::size_t m = 41;
        std::size_t total = 1;
        for (std::size_t i = 0; i < dim; ++i)
            total *= m;
        for (std::size_t idx = 0; idx < total; ++idx) {
            std::vector<double> x(dim);
            std::size_t rest = idx;
            for (std::size_t i = 0; i < dim; ++i) {
                x[i] = -C + 2.0 * C * static_cast<double>(rest % m) / static_cast<double>(m - 1);
                rest /= m;
            }
            g.push_back(std::move(x));
        }
        return g;
    }
    SplitMix64 rng(42);
    for (std::size_t s = 0; s < 4000; ++s) {
        std::vector<double> x(dim);
        for (auto& v : x)
            v = rng.uniform(-C, C);
        g.push_back(std::move(x));
    }
    return g;
}

PrimitiveResult build_primitive(const PrimitiveRequest& req)
{
    validate(req);
    const double relu_eps = req.eps * req.relu_share;
    const double compile_eps = req.eps - relu_eps;
    const Layout layout{input_dim(req), 1};
    const double C = compile_domain(req);
    const bool shallow = req.route == "shallow";
    ReluNetwork relu = shallow ? primitive_relu_net(req, relu_eps) : deep_net(req, relu_eps);
    CompileResult compiled = shallow ? compile_two_layer(relu, layout, C, compile_eps)
                                     : compile_network(relu, layout, C, compile_eps);
    PrimitiveResult res{req.name, std::move(relu), std::move(compiled), 0, 0, 0, 0, 0, 0, 0, 0, {}};
    res.relu_eps = relu_eps;
    res.compile_eps = compile_eps;
    if (input_dim(req) == 1) {
        const auto [lo, hi] = domain_1d(req);
        res.domain_lo = lo;
        res.domain_hi = hi;
    } else {
        res.domain_lo = -cx(req);
        res.domain_hi = cx(req);
    }
    res.knots = res.relu.depth() == 2 ? res.relu.layers()[0].A.rows() : 0;

    const auto grid = primitive_grid(req);
    std::vector<DenseMatrix> inputs;
    inputs.reserve(grid.size());
    for (const auto& x : grid)
        inputs.push_back(DenseMatrix::column(x));
    const auto out = transformer_forward_batch(res.compiled.net, inputs);
    const DenseMatrix batch = relu_forward(res.relu, [&] {
        DenseMatrix B(layout.d, grid.size());
        for (std::size_t s = 0; s < grid.size(); ++s)
            for (std::size_t i = 0; i < layout.d; ++i)
                B.set(i, s, grid[s][i]);
        return B;
    }());
    for (std::size_t s = 0; s < grid.size(); ++s) {
        const double want = primitive_target(req, grid[s]);
        res.relu_measured_error = std::max(res.relu_measured_error, std::abs(batch(0, s) - want));
        res.measured_max_error = std::max(res.measured_max_error, std::abs(out[s](0, 0) - want));
    }
    res.grid_points = grid.size();

    const ReluStats st = relu_stats(res.relu);
    Json cert = compile_certificate(res.compiled, res.measured_max_error, res.grid_points, 0);
    cert["eps"] = req.eps;
    cert["primitive"] = req.name;
    cert["route"] = req.route;
    cert["relu_eps"] = res.relu_eps;
    cert["compile_eps"] = res.compile_eps;
    cert["relu_stage_measured_error"] = res.relu_measured_error;
    cert["domain"] = {res.domain_lo, res.domain_hi};
    cert["relu_stats"] = {{"K_f", st.depth_Kf}, {"W_f", st.width_Wf}, {"S", st.sparsity_S}, {"B", st.weight_bound_B}};
    cert["resource"] = report_to_json(res.compiled.report);
    cert["grid_points"] = res.grid_points;
    res.certificate = std::move(cert);
    return res;
}

PrimitiveResult build_uap_1d(const std::vector<std::pair<double, double>>& samples, double eps)
{
    PrimitiveRequest req;
    req.name = "uap1d";
    req.eps = eps;
    req.samples = samples;
    validate(req);
    const double est = interpolation_error_estimate(samples);
    if (est > eps * req.relu_share)
        throw DomainError("uap1d: estimated interpolation error " + std::to_string(est) + " exceeds " +
                          std::to_string(eps * req.relu_share) + "; more knots are needed");
    PrimitiveResult res = build_primitive(req);
    res.certificate["interpolation_error_estimate"] = est;
    return res;
}

} // namespace r2a
