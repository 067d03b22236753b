#include "r2a/relu.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace r2a {

ReluNetwork::ReluNetwork(std::vector<ReluLayer> layers) : layers_(std::move(layers))
{
    if (layers_.empty())
        throw ShapeError("relu network needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& L = layers_[i];
        if (L.b.rows() != L.A.rows() || L.b.cols() != 1)
            throw ShapeError("layer " + std::to_string(i) + ": bias " + L.b.shape_str() + " does not match A " +
                             L.A.shape_str());
        if (i > 0 && L.A.cols() != layers_[i - 1].A.rows())
            throw ShapeError("layer " + std::to_string(i) + ": A " + L.A.shape_str() + " does not chain with " +
                             layers_[i - 1].A.shape_str());
    }
}

DenseMatrix relu_forward(const ReluNetwork& net, const DenseMatrix& x)
{
    if (x.rows() != net.input_dim())
        throw ShapeError("relu_forward: input has " + std::to_string(x.rows()) + " rows, network expects " +
                         std::to_string(net.input_dim()));
    DenseMatrix h = x;
    bool first = true;
    for (const auto& L : net.layers()) {
        if (!first) {
            double* p = h.raw();
            for (std::size_t i = 0; i < h.size(); ++i)
                p[i] = std::max(0.0, p[i]);
        }
        first = false;
        DenseMatrix y(L.A.rows(), h.cols());
        for (std::size_t i = 0; i < y.rows(); ++i)
            for (std::size_t j = 0; j < y.cols(); ++j)
                y.raw()[i * y.cols() + j] = L.b(i, 0);
        matmul_accumulate(L.A, h, y);
        h = std::move(y);
    }
    return h;
}

std::vector<double> relu_forward(const ReluNetwork& net, const std::vector<double>& x)
{
    return relu_forward(net, DenseMatrix::column(x)).data();
}

ReluStats relu_stats(const ReluNetwork& net)
{
    ReluStats s;
    s.depth_Kf = net.depth();
    s.width_Wf = net.input_dim();
    for (const auto& L : net.layers()) {
        s.width_Wf = std::max(s.width_Wf, L.A.rows());
        for (const DenseMatrix* M : {&L.A, &L.b})
            for (double v : M->data()) {
                if (v != 0.0)
                    ++s.sparsity_S;
                s.weight_bound_B = std::max(s.weight_bound_B, std::abs(v));
            }
    }
    return s;
}

// ---- combinators ---------------------------------------------------------

ReluNetwork affine_net(const DenseMatrix& A, const DenseMatrix& b)
{
    return ReluNetwork({ReluLayer{A, b}});
}

ReluNetwork affine_net(const DenseMatrix& A)
{
    return affine_net(A, DenseMatrix(A.rows(), 1));
}

ReluNetwork compose(const ReluNetwork& outer, const ReluNetwork& inner)
{
    if (outer.input_dim() != inner.output_dim())
        throw ShapeError("compose: inner output " + std::to_string(inner.output_dim()) + " vs outer input " +
                         std::to_string(outer.input_dim()));
    std::vector<ReluLayer> layers(inner.layers().begin(), inner.layers().end() - 1);
    const auto& last = inner.layers().back();
    const auto& first = outer.layers().front();
    DenseMatrix A = matmul(first.A, last.A);
    DenseMatrix b = add(matmul(first.A, last.b), first.b);
    layers.push_back(ReluLayer{std::move(A), std::move(b)});
    layers.insert(layers.end(), outer.layers().begin() + 1, outer.layers().end());
    return ReluNetwork(std::move(layers));
}

ReluNetwork identity_net(std::size_t dim, std::size_t depth)
{
    if (depth == 0)
        throw DomainError("identity_net: depth must be >= 1");
    const DenseMatrix I = DenseMatrix::identity(dim);
    if (depth == 1)
        return affine_net(I);
    std::vector<ReluLayer> layers;
    DenseMatrix split(2 * dim, dim);
    for (std::size_t i = 0; i < dim; ++i) {
        split.set(i, i, 1.0);
        split.set(dim + i, i, -1.0);
    }
    layers.push_back({split, DenseMatrix(2 * dim, 1)});
    DenseMatrix mid(2 * dim, 2 * dim);
    for (std::size_t i = 0; i < dim; ++i) {
        mid.set(i, i, 1.0);
        mid.set(i, dim + i, -1.0);
        mid.set(dim + i, i, -1.0);
        mid.set(dim + i, dim + i, 1.0);
    }
    for (std::size_t k = 2; k < depth; ++k)
        layers.push_back({mid, DenseMatrix(2 * dim, 1)});
    DenseMatrix merge(dim, 2 * dim);
    for (std::size_t i = 0; i < dim; ++i) {
        merge.set(i, i, 1.0);
        merge.set(i, dim + i, -1.0);
    }
    layers.push_back({merge, DenseMatrix(dim, 1)});
    return ReluNetwork(std::move(layers));
}

ReluNetwork pad_to_depth(const ReluNetwork& net, std::size_t depth)
{
    if (depth < net.depth())
        throw DomainError("pad_to_depth: target depth below current depth");
    if (depth == net.depth())
        return net;
    return compose(identity_net(net.output_dim(), depth - net.depth() + 1), net);
}

namespace {

DenseMatrix vstack(const std::vector<const DenseMatrix*>& parts)
{
    std::size_t rows = 0;
    const std::size_t cols = parts.front()->cols();
    for (auto* p : parts)
        rows += p->rows();
    DenseMatrix out(rows, cols);
    std::size_t r0 = 0;
    for (auto* p : parts) {
        std::copy(p->raw(), p->raw() + p->size(), out.raw() + r0 * cols);
        r0 += p->rows();
    }
    return out;
}

DenseMatrix block_diag(const std::vector<const DenseMatrix*>& parts)
{
    std::size_t rows = 0, cols = 0;
    for (auto* p : parts) {
        rows += p->rows();
        cols += p->cols();
    }
    DenseMatrix out(rows, cols);
    std::size_t r0 = 0, c0 = 0;
    for (auto* p : parts) {
        for (std::size_t i = 0; i < p->rows(); ++i)
            for (std::size_t j = 0; j < p->cols(); ++j)
                out.raw()[(r0 + i) * cols + c0 + j] = (*p)(i, j);
        r0 += p->rows();
        c0 += p->cols();
    }
    return out;
}

} // namespace

ReluNetwork stack_shared(const std::vector<ReluNetwork>& nets)
{
    if (nets.empty())
        throw DomainError("stack_shared: no networks");
    std::size_t depth = 0;
    for (const auto& n : nets) {
        if (n.input_dim() != nets.front().input_dim())
            throw ShapeError("stack_shared: input dimensions differ");
        depth = std::max(depth, n.depth());
    }
    std::vector<ReluNetwork> padded;
    padded.reserve(nets.size());
    for (const auto& n : nets)
        padded.push_back(pad_to_depth(n, depth));

    std::vector<ReluLayer> layers;
    for (std::size_t l = 0; l < depth; ++l) {
        std::vector<const DenseMatrix*> As, bs;
        for (const auto& n : padded) {
            As.push_back(&n.layers()[l].A);
            bs.push_back(&n.layers()[l].b);
        }
        layers.push_back({l == 0 ? vstack(As) : block_diag(As), vstack(bs)});
    }
    return ReluNetwork(std::move(layers));
}

ReluNetwork parallel(const std::vector<Branch>& branches, std::size_t in_dim)
{
    std::vector<ReluNetwork> nets;
    for (const auto& br : branches) {
        if (br.inputs.size() != br.net.input_dim())
            throw ShapeError("parallel: branch reads " + std::to_string(br.inputs.size()) + " inputs but expects " +
                             std::to_string(br.net.input_dim()));
        DenseMatrix sel(br.inputs.size(), in_dim);
        for (std::size_t i = 0; i < br.inputs.size(); ++i)
            sel.set(i, br.inputs[i], 1.0);
        nets.push_back(compose(br.net, affine_net(sel)));
    }
    return stack_shared(nets);
}

} // namespace r2a
