#include "r2a/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>

#include "r2a/compiler.hpp"
#include "r2a/gadgets.hpp"
#include "r2a/json_io.hpp"
#include "r2a/rng.hpp"
#include "r2a/toolkit.hpp"
#include "r2a/verify.hpp"

namespace r2a {

namespace {

std::string g17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Layout parse_layout(const std::string& s)
{
    const auto comma = s.find(',');
    try {
        if (comma == std::string::npos)
            throw std::invalid_argument(s);
        std::size_t used = 0;
        const long d = std::stol(s.substr(0, comma), &used);
        const long n = std::stol(s.substr(comma + 1));
        if (d < 1 || n < 1)
            throw std::invalid_argument(s);
        return {static_cast<std::size_t>(d), static_cast<std::size_t>(n)};
    } catch (const std::exception&) {
        throw ParseError("--layout expects <d>,<n> with positive integers, got '" + s + "'");
    }
}

std::string cert_path(const std::string& out)
{
    return out + ".cert.json";
}

// ---- compile -------------------------------------------------------------

struct CompileArgs {
    std::string relu, layout, out;
    double eps = 0.0, cx = 1.0;
    bool tune = false, shallow = false;
    std::size_t samples = 500;
    std::uint64_t seed = 42;
};

int cmd_compile(const CompileArgs& a, std::ostream& out)
{
    const Layout layout = parse_layout(a.layout);
    const ReluNetwork relu = relu_from_json(read_file(a.relu));
    CompileResult res = a.shallow ? compile_two_layer(relu, layout, a.cx, a.eps)
                                  : compile_network(relu, layout, a.cx, a.eps);
    const std::size_t rows = res.net.output_rows();
    const Oracle oracle = [&](const DenseMatrix& X) { return relu_reference(relu, X, rows); };
    const auto inputs = sample_box(layout, a.cx, a.samples, a.seed);
    const double measured = max_error(res.net, inputs, oracle);
    Json cert = compile_certificate(res, measured, a.samples, a.seed);
    TransformerNetwork emitted = res.net;
    if (a.tune) {
        TuneResult t = tune_lambda(res.net, oracle, a.cx, a.eps, std::max<std::size_t>(a.samples, 500), a.seed);
        std::vector<double> tuned;
        for (const auto& L : t.net.layers())
            tuned.push_back(L.lambda);
        cert["tuned_lambda"] = tuned;
        cert["tuned_measured_max_error"] = t.measured_max_error;
        emitted = std::move(t.net);
    }
    cert["resource"] = report_to_json(resource_report(emitted));
    write_file_atomic(a.out, transformer_to_json(emitted));
    write_file_atomic(cert_path(a.out), canonical_dump(cert));
    out << "compiled K=" << res.report.K << " H=" << res.report.H << " W=" << res.report.W
        << " lambda_max=" << g17(res.report.lambda_max) << " measured_max_error=" << g17(measured) << " eps=" << g17(a.eps)
        << "\n";
    return kExitOk;
}

// ---- verify --------------------------------------------------------------

struct VerifyArgs {
    std::string relu, attn, report;
    std::size_t samples = 500;
    std::uint64_t seed = 42;
    double cx = 1.0, eps = 0.0;
    bool timing = false;
};

int cmd_verify(const VerifyArgs& a, std::ostream& out)
{
    const ReluNetwork relu = relu_from_json(read_file(a.relu));
    const TransformerNetwork attn = transformer_from_json(read_file(a.attn));
    const VerificationReport r = verify_networks(relu, attn, a.samples, a.seed, a.cx, a.eps);
    const std::string text = canonical_dump(report_to_json(r, a.timing));
    if (!a.report.empty())
        write_file_atomic(a.report, text);
    out << "samples             " << r.samples << "\n"
        << "seed                " << r.seed << "\n"
        << "domain              [-" << g17(r.C_X) << ", " << g17(r.C_X) << "]^{" << r.layout.d << "x" << r.layout.n
        << "}\n"
        << "measured_max_error  " << g17(r.measured_max_error) << "\n"
        << "target_eps          " << g17(r.target_eps) << "\n"
        << "pass                " << (r.pass ? "true" : "false") << "\n"
        << "wall_time_ms        " << r.wall_time_ms << "\n";
    if (a.report.empty())
        out << text << "\n";
    return kExitOk;
}

// ---- primitive -----------------------------------------------------------

struct PrimitiveArgs {
    std::string name, out, route = "shallow", samples_path, fn;
    double eps = 0.0;
    std::optional<double> cx, c;
    std::optional<std::size_t> dim;
    std::size_t knots = 65;
    double share = 0.5;
};

std::vector<std::pair<double, double>> uap_samples(const PrimitiveArgs& a)
{
    std::vector<std::pair<double, double>> s;
    if (!a.samples_path.empty()) {
        Json j;
        try {
            j = Json::parse(read_file(a.samples_path));
        } catch (const Json::exception& e) {
            throw ParseError(std::string("samples file: ") + e.what());
        }
        if (!j.is_array())
            throw ParseError("samples file: expected [[x, y], ...]");
        for (const auto& p : j) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
                throw ParseError("samples file: expected [[x, y], ...]");
            s.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
        return s;
    }
    if (a.fn.empty())
        throw DomainError("uap1d requires --samples <file> or --fn <sin_pi|identity|const>");
    if (a.knots < 2)
        throw DomainError("uap1d requires --knots >= 2");
    for (std::size_t i = 0; i < a.knots; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(a.knots - 1);
        double y;
        if (a.fn == "sin_pi")
            y = std::sin(std::numbers::pi * x);
        else if (a.fn == "identity")
            y = x;
        else if (a.fn == "const")
            y = 0.5;
        else
            throw DomainError("unknown --fn '" + a.fn + "'");
        s.emplace_back(x, y);
    }
    return s;
}

int cmd_primitive(const PrimitiveArgs& a, std::ostream& out)
{
    PrimitiveRequest req;
    req.name = a.name;
    req.eps = a.eps;
    req.C_X = a.cx;
    req.c = a.c;
    req.dim = a.dim;
    req.route = a.route;
    req.relu_share = a.share;
    PrimitiveResult res = [&] {
        if (a.name == "uap1d")
            return build_uap_1d(uap_samples(a), a.eps);
        return build_primitive(req);
    }();
    write_file_atomic(a.out, transformer_to_json(res.compiled.net));
    write_file_atomic(cert_path(a.out), canonical_dump(res.certificate));
    const bool pass = res.measured_max_error <= a.eps;
    out << "primitive " << a.name << " grid_points=" << res.grid_points
        << " relu_stage_error=" << g17(res.relu_measured_error) << " measured_max_error=" << g17(res.measured_max_error)
        << " eps=" << g17(a.eps) << " grid " << (pass ? "pass" : "FAIL") << "\n";
    return kExitOk;
}

// ---- sweep ---------------------------------------------------------------

struct SweepArgs {
    std::string gadget, csv;
    std::size_t n = 0; // 0: gadget default
    double gap = 1.0;
    double eps = 0.1;
    double lambda_min = 0.0, lambda_max = 0.0; // 0: gadget default
    std::size_t lambda_steps = 10;
    std::size_t vectors = 1000;
    double cs = 10.0, eps_relu = 1e-2;
    std::size_t grid = 10000;
    std::size_t d = 2, N = 3, halvings = 3, samples = 500;
    double cx = 1.0, eps_max = 0.1;
    std::uint64_t seed = 42;
};

std::vector<double> lambda_grid(double lo, double hi, std::size_t steps, bool geometric)
{
    if (steps == 0 || !(lo > 0.0) || !(hi >= lo))
        throw DomainError("sweep: empty or invalid lambda range");
    std::vector<double> v;
    for (std::size_t i = 0; i < steps; ++i) {
        const double u = steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        v.push_back(geometric ? lo * std::pow(hi / lo, u) : lo + (hi - lo) * u);
    }
    return v;
}

std::string sweep_csv(const SweepArgs& a)
{
    std::string csv = "lambda,eps_target,measured_error,n,gap_or_Cs,seed\n";
    auto row = [&](double lam, double eps, double err, std::size_t n, double g) {
        csv += g17(lam) + "," + g17(eps) + "," + g17(err) + "," + std::to_string(n) + "," + g17(g) + "," +
               std::to_string(a.seed) + "\n";
    };
    if (a.gadget == "hardmax") {
        const std::size_t n = a.n ? a.n : 2;
        if (n < 2 || !(a.gap > 0.0) || a.vectors == 0)
            throw DomainError("hardmax sweep needs n >= 2, gap > 0 and at least one vector");
        const double lo = a.lambda_min > 0 ? a.lambda_min : 1.0;
        const double hi = a.lambda_max > 0 ? a.lambda_max : 10.0;
        // fixed score vectors: max at a random slot, runner-up exactly gap below
        SplitMix64 rng(a.seed);
        std::vector<DenseMatrix> vecs;
        std::vector<std::size_t> top;
        for (std::size_t v = 0; v < a.vectors; ++v) {
            DenseMatrix x(n, 1);
            const std::size_t t = static_cast<std::size_t>(rng.next() % n);
            const std::size_t second = (t + 1) % n;
            for (std::size_t i = 0; i < n; ++i)
                x.set(i, 0, i == t ? 0.0 : (i == second ? -a.gap : -a.gap - rng.uniform(0.0, 2.0)));
            vecs.push_back(std::move(x));
            top.push_back(t);
        }
        for (double lam : lambda_grid(lo, hi, a.lambda_steps, false)) {
            double err = 0.0;
            for (std::size_t v = 0; v < vecs.size(); ++v) {
                const DenseMatrix s = softmax_columns(vecs[v], lam);
                for (std::size_t i = 0; i < n; ++i)
                    err = std::max(err, std::abs(s(i, 0) - (i == top[v] ? 1.0 : 0.0)));
            }
            row(lam, a.eps, err, n, a.gap);
        }
    } else if (a.gadget == "softrelu") {
        const std::size_t n = a.n ? a.n : 4;
        if (a.grid < 2)
            throw DomainError("softrelu sweep needs --grid >= 2");
        const double base = soft_relu_temperature_base(a.cs, n, a.eps_relu);
        const double lo = a.lambda_min > 0 ? a.lambda_min : base / 4.0;
        const double hi = a.lambda_max > 0 ? a.lambda_max : base * 4.0;
        for (double lam : lambda_grid(lo, hi, a.lambda_steps, true)) {
            double err = 0.0;
            for (std::size_t g = 0; g < a.grid; ++g) {
                const double s = -a.cs + 2.0 * a.cs * static_cast<double>(g) / static_cast<double>(a.grid - 1);
                err = std::max(err, std::abs(std::max(0.0, s) - soft_relu(s, lam, n)));
            }
            row(lam, 2.0 * a.eps_relu, err, n, a.cs);
        }
    } else if (a.gadget == "onelayer") {
        const std::size_t n = a.n ? a.n : 2;
        if (a.d == 0 || a.N == 0 || a.samples == 0)
            throw DomainError("onelayer sweep needs d, N, samples >= 1");
        if (!(a.eps_max > 0.0 && a.eps_max < 1.0))
            throw DomainError("onelayer sweep needs --eps-max in (0,1)");
        SplitMix64 rng(a.seed);
        OneLayerSpec spec(a.d, a.d, n, a.N);
        for (auto& w : spec.w)
            w = rng.uniform(-1.0, 1.0);
        for (auto& s : spec.a)
            s = rng.uniform01() < 0.5 ? -1 : 1;
        const auto inputs = sample_box({a.d, n}, a.cx, a.samples, a.seed);
        double eps = a.eps_max;
        for (std::size_t h = 0; h <= a.halvings; ++h, eps /= 2.0) {
            const CompiledBlock b = compile_one_layer_matrix(spec, a.cx, eps);
            const double err =
                max_error(b.net, inputs, [&](const DenseMatrix& X) { return spec_forward(spec, X); });
            row(resource_report(b.net).lambda_max, eps, err, n, b.cert.C_s);
        }
    } else {
        throw DomainError("unknown gadget '" + a.gadget + "' (hardmax, softrelu, onelayer)");
    }
    return csv;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out)
{
    const std::string csv = sweep_csv(a);
    write_file_atomic(a.csv, csv);
    out << "sweep " << a.gadget << ": " << std::count(csv.begin(), csv.end(), '\n') - 1 << " rows -> " << a.csv
        << "\n";
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Compile ReLU networks into attention-only transformers"};
    app.require_subcommand(1);

    CompileArgs ca;
    auto* compile = app.add_subcommand("compile", "compile a ReLU network JSON into a transformer JSON");
    compile->add_option("--relu", ca.relu, "ReLU network JSON")->required();
    compile->add_option("--layout", ca.layout, "<d>,<n>")->required();
    compile->add_option("--epsilon", ca.eps, "target max-norm error")->required();
    compile->add_option("--cx", ca.cx, "input box bound C_X")->required();
    compile->add_option("--out", ca.out, "output transformer JSON")->required();
    compile->add_flag("--tune-lambda", ca.tune, "lower per-layer lambda while sampled error stays within eps");
    compile->add_flag("--shallow", ca.shallow, "two-layer nets only: fold into one three-layer block");
    compile->add_option("--samples", ca.samples, "samples for the certificate measurement");
    compile->add_option("--seed", ca.seed, "sampling seed");

    VerifyArgs va;
    auto* verify = app.add_subcommand("verify", "measure a transformer against a ReLU network");
    verify->add_option("--relu", va.relu)->required();
    verify->add_option("--attn", va.attn)->required();
    verify->add_option("--samples", va.samples);
    verify->add_option("--seed", va.seed);
    verify->add_option("--cx", va.cx)->required();
    verify->add_option("--epsilon", va.eps)->required();
    verify->add_option("--report", va.report, "write the JSON report here");
    verify->add_flag("--timing", va.timing, "include wall_time_ms in the JSON report");

    PrimitiveArgs pa;
    auto* prim = app.add_subcommand("primitive", "build a toolkit approximator");
    prim->add_option("--name", pa.name, "mult, inv, max, min, clip, sqrt, alpha, sigma, uap1d")->required();
    prim->add_option("--epsilon", pa.eps)->required();
    prim->add_option("--cx", pa.cx);
    prim->add_option("--c", pa.c, "clip level");
    prim->add_option("--dim", pa.dim, "monomial degree / input count");
    prim->add_option("--out", pa.out)->required();
    prim->add_option("--route", pa.route, "shallow (default) or deep");
    prim->add_option("--share", pa.share, "fraction of eps given to the ReLU stage");
    prim->add_option("--samples", pa.samples_path, "uap1d: JSON file [[x, y], ...]");
    prim->add_option("--fn", pa.fn, "uap1d: sin_pi, identity or const");
    prim->add_option("--knots", pa.knots, "uap1d with --fn: knot count");

    SweepArgs sa;
    auto* sweep = app.add_subcommand("sweep", "lambda-vs-error sweeps to CSV");
    sweep->add_option("--gadget", sa.gadget, "hardmax, softrelu or onelayer")->required();
    sweep->add_option("--csv", sa.csv)->required();
    sweep->add_option("--n", sa.n);
    sweep->add_option("--gap", sa.gap);
    sweep->add_option("--eps", sa.eps, "hardmax: eps_target column");
    sweep->add_option("--lambda-min", sa.lambda_min);
    sweep->add_option("--lambda-max", sa.lambda_max);
    sweep->add_option("--lambda-steps", sa.lambda_steps);
    sweep->add_option("--vectors", sa.vectors);
    sweep->add_option("--cs", sa.cs);
    sweep->add_option("--eps-relu", sa.eps_relu);
    sweep->add_option("--grid", sa.grid);
    sweep->add_option("--d", sa.d);
    sweep->add_option("--N", sa.N);
    sweep->add_option("--cx", sa.cx);
    sweep->add_option("--eps-max", sa.eps_max);
    sweep->add_option("--halvings", sa.halvings);
    sweep->add_option("--samples", sa.samples);
    sweep->add_option("--seed", sa.seed);

    std::vector<std::string> argv_store{"relu2attn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_store)
        argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitParse;
    }

    try {
        if (*compile)
            return cmd_compile(ca, out);
        if (*verify)
            return cmd_verify(va, out);
        if (*prim)
            return cmd_primitive(pa, out);
        return cmd_sweep(sa, out);
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << "\n";
        return kExitParse;
    } catch (const BudgetError& e) {
        err << "budget error: " << e.what() << "\n";
        return kExitBudget;
    } catch (const DomainError& e) {
        err << "precondition violated: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const ShapeError& e) {
        err << "precondition violated: " << e.what() << "\n";
        return kExitPrecondition;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

} // namespace r2a
