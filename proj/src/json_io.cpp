#include "r2a/json_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace r2a {

namespace {

void put_double(std::string& out, double v)
{
    if (!std::isfinite(v))
        throw DomainError("refusing to serialize a non-finite number");
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void dump(const Json& j, std::string& out)
{
    switch (j.type()) {
    case Json::value_t::object: {
        out += '{';
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) { // std::map keeps keys sorted
            if (!first)
                out += ',';
            first = false;
            out += Json(it.key()).dump();
            out += ':';
            dump(it.value(), out);
        }
        out += '}';
        break;
    }
    case Json::value_t::array: {
        out += '[';
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i)
                out += ',';
            dump(j[i], out);
        }
        out += ']';
        break;
    }
    case Json::value_t::number_float:
        put_double(out, j.get<double>());
        break;
    default:
        out += j.dump();
    }
}

void put_matrix(std::string& out, const DenseMatrix& M)
{
    out += '[';
    for (std::size_t i = 0; i < M.rows(); ++i) {
        if (i)
            out += ',';
        out += '[';
        for (std::size_t k = 0; k < M.cols(); ++k) {
            if (k)
                out += ',';
            put_double(out, M(i, k));
        }
        out += ']';
    }
    out += ']';
}

DenseMatrix matrix_from(const Json& j, const char* what)
{
    if (!j.is_array() || j.empty() || !j[0].is_array() || j[0].empty())
        throw ParseError(std::string(what) + ": expected a non-empty array of rows");
    const std::size_t rows = j.size(), cols = j[0].size();
    std::vector<double> data;
    data.reserve(rows * cols);
    for (const auto& row : j) {
        if (!row.is_array() || row.size() != cols)
            throw ParseError(std::string(what) + ": ragged rows");
        for (const auto& v : row) {
            if (!v.is_number())
                throw ParseError(std::string(what) + ": non-numeric entry");
            data.push_back(v.get<double>());
        }
    }
    return DenseMatrix(rows, cols, std::move(data));
}

Json parse(const std::string& text)
{
    try {
        return Json::parse(text);
    } catch (const Json::exception& e) {
        throw ParseError(std::string("invalid JSON: ") + e.what());
    }
}

} // namespace

std::string canonical_dump(const Json& j)
{
    std::string out;
    dump(j, out);
    return out;
}

std::string relu_to_json(const ReluNetwork& net)
{
    std::string out = "{\"layers\":[";
    for (std::size_t l = 0; l < net.depth(); ++l) {
        const auto& L = net.layers()[l];
        if (l)
            out += ',';
        out += "{\"A\":";
        put_matrix(out, L.A);
        out += ",\"b\":[";
        for (std::size_t i = 0; i < L.b.rows(); ++i) {
            if (i)
                out += ',';
            put_double(out, L.b(i, 0));
        }
        out += "]}";
    }
    out += "]}";
    return out;
}

ReluNetwork relu_from_json(const std::string& text)
{
    const Json j = parse(text);
    try {
        if (!j.is_object() || !j.contains("layers") || !j["layers"].is_array())
            throw ParseError("relu JSON: missing \"layers\" array");
        std::vector<ReluLayer> layers;
        for (const auto& L : j["layers"]) {
            if (!L.is_object() || !L.contains("A") || !L.contains("b") || !L["b"].is_array())
                throw ParseError("relu JSON: each layer needs \"A\" and \"b\"");
            DenseMatrix A = matrix_from(L["A"], "A");
            std::vector<double> b;
            for (const auto& v : L["b"]) {
                if (!v.is_number())
                    throw ParseError("relu JSON: non-numeric bias");
                b.push_back(v.get<double>());
            }
            if (b.empty())
                throw ParseError("relu JSON: empty bias");
            layers.push_back({std::move(A), DenseMatrix::column(b)});
        }
        return ReluNetwork(std::move(layers));
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("relu JSON: ") + e.what());
    }
}

std::string transformer_to_json(const TransformerNetwork& net)
{
    std::string out = "{\"layers\":[";
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
        const auto& L = net.layers()[l];
        if (l)
            out += ',';
        out += "{\"heads\":[";
        for (std::size_t h = 0; h < L.heads.size(); ++h) {
            if (h)
                out += ',';
            out += "{\"W_K\":";
            put_matrix(out, L.heads[h].W_K);
            out += ",\"W_Q\":";
            put_matrix(out, L.heads[h].W_Q);
            out += ",\"W_V\":";
            put_matrix(out, L.heads[h].W_V);
            out += '}';
        }
        out += "],\"lambda\":";
        put_double(out, L.lambda);
        out += '}';
    }
    out += "],\"layout\":{\"d\":" + std::to_string(net.layout().d) + ",\"n\":" + std::to_string(net.layout().n) + "}";
    out += std::string(",\"preprocess\":") + (net.preprocess() ? "true" : "false");
    out += std::string(",\"truncate\":") + (net.truncate() ? "true" : "false") + "}";
    return out;
}

TransformerNetwork transformer_from_json(const std::string& text)
{
    const Json j = parse(text);
    try {
        for (const char* key : {"layout", "preprocess", "truncate", "layers"})
            if (!j.is_object() || !j.contains(key))
                throw ParseError(std::string("transformer JSON: missing \"") + key + "\"");
        const Json& lay = j["layout"];
        if (!lay.contains("d") || !lay.contains("n") || !lay["d"].is_number_unsigned() || !lay["n"].is_number_unsigned())
            throw ParseError("transformer JSON: layout needs non-negative integers d and n");
        Layout layout{lay["d"].get<std::size_t>(), lay["n"].get<std::size_t>()};
        if (!j["preprocess"].is_boolean() || !j["truncate"].is_boolean() || !j["layers"].is_array())
            throw ParseError("transformer JSON: bad flag or layers type");
        std::vector<AttnLayer> layers;
        for (const auto& L : j["layers"]) {
            if (!L.contains("heads") || !L.contains("lambda") || !L["lambda"].is_number())
                throw ParseError("transformer JSON: layer needs heads and lambda");
            std::vector<AttnHead> heads;
            for (const auto& h : L["heads"])
                heads.emplace_back(matrix_from(h.at("W_K"), "W_K"), matrix_from(h.at("W_Q"), "W_Q"),
                                   matrix_from(h.at("W_V"), "W_V"));
            layers.emplace_back(std::move(heads), L["lambda"].get<double>());
        }
        return TransformerNetwork(layout, j["preprocess"].get<bool>(), std::move(layers), j["truncate"].get<bool>());
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("transformer JSON: ") + e.what());
    }
}

Json report_to_json(const ResourceReport& r)
{
    return Json{{"H", r.H},
                {"W", r.W},
                {"K", r.K},
                {"C_V", r.C_V},
                {"C_KQ", r.C_KQ},
                {"lambda_max", r.lambda_max},
                {"lambda_per_layer", r.lambda_per_layer},
                {"total_heads", r.total_heads}};
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp);
        throw std::runtime_error("cannot rename onto " + path + ": " + ec.message());
    }
}

} // namespace r2a
