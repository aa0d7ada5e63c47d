#include "feop/autodiff.hpp"

#include <cmath>

#include "feop/errors.hpp"
#include "feop/kernels.hpp"
#include "feop/linalg.hpp"

namespace feop::ad {

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b))
        throw DimensionError(std::string(who) + ": shape mismatch " + shape_str(a) +
                             " vs " + shape_str(b));
}
}  // namespace

NodeId Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    grads_.emplace_back();
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::Leaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0))
        throw DimensionError("matmul: incompatible shapes " + shape_str(av) + " x " +
                             shape_str(bv));
    Node n;
    n.op = Op::Matmul;
    n.a = a;
    n.b = b;
    n.value = Tensor({av.dim(0), bv.dim(1)});
    kern::active().gemm_nn(av.dim(0), bv.dim(1), av.dim(1), av.data(), bv.data(),
                           n.value.data(), false);
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Tape::add_bias(NodeId m, NodeId bias) {
    const Tensor& mv = nodes_[m].value;
    const Tensor& bv = nodes_[bias].value;
    if (mv.rank() != 2 || bv.rank() != 1 || bv.dim(0) != mv.dim(1))
        throw DimensionError("add_bias: incompatible shapes");
    Node n;
    n.op = Op::AddBias;
    n.a = m;
    n.b = bias;
    n.value = mv;
    const std::size_t rows = mv.dim(0), cols = mv.dim(1);
    for (std::size_t i = 0; i < rows; ++i)
        kern::active().axpy(1.0, bv.data(), n.value.data() + i * cols, cols);
    n.requires_grad = nodes_[m].requires_grad || nodes_[bias].requires_grad;
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape(nodes_[a].value, nodes_[b].value, "add");
    Node n;
    n.op = Op::Add;
    n.a = a;
    n.b = b;
    n.value = Tensor(nodes_[a].value.shape());
    kern::active().add(nodes_[a].value.data(), nodes_[b].value.data(), n.value.data(),
                       n.value.size());
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
    require_same_shape(nodes_[a].value, nodes_[b].value, "sub");
    Node n;
    n.op = Op::Sub;
    n.a = a;
    n.b = b;
    n.value = Tensor(nodes_[a].value.shape());
    kern::active().sub(nodes_[a].value.data(), nodes_[b].value.data(), n.value.data(),
                       n.value.size());
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
    require_same_shape(nodes_[a].value, nodes_[b].value, "mul");
    Node n;
    n.op = Op::Mul;
    n.a = a;
    n.b = b;
    n.value = Tensor(nodes_[a].value.shape());
    kern::active().mul(nodes_[a].value.data(), nodes_[b].value.data(), n.value.data(),
                       n.value.size());
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
    Node n;
    n.op = Op::Scale;
    n.a = a;
    n.scalar = c;
    n.value = Tensor(nodes_[a].value.shape());
    kern::active().scale(nodes_[a].value.data(), c, n.value.data(), n.value.size());
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.a = a;
    n.value = Tensor(nodes_[a].value.shape());
    kern::active().relu(nodes_[a].value.data(), n.value.data(), n.value.size());
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) {
    Node n;
    n.op = Op::Tanh;
    n.a = a;
    n.value = Tensor(nodes_[a].value.shape());
    const Tensor& av = nodes_[a].value;
    for (std::size_t i = 0; i < av.size(); ++i) n.value[i] = std::tanh(av[i]);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::square(NodeId a) {
    Node n;
    n.op = Op::Square;
    n.a = a;
    n.value = Tensor(nodes_[a].value.shape());
    kern::active().square(nodes_[a].value.data(), n.value.data(), n.value.size());
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.a = a;
    n.value = Tensor({1});
    n.value[0] = kern::active().sum(nodes_[a].value.data(), nodes_[a].value.size());
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::mean(NodeId a) {
    if (nodes_[a].value.size() == 0) throw DimensionError("mean of empty tensor");
    Node n;
    n.op = Op::Mean;
    n.a = a;
    n.value = Tensor({1});
    n.value[0] = kern::active().sum(nodes_[a].value.data(), nodes_[a].value.size()) /
                 static_cast<double>(nodes_[a].value.size());
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<std::size_t> shape) {
    Node n;
    n.op = Op::Reshape;
    n.a = a;
    n.value = nodes_[a].value.reshaped(std::move(shape));
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::transpose(NodeId a) {
    Node n;
    n.op = Op::Transpose;
    n.a = a;
    n.value = linalg::transpose(nodes_[a].value);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::col_stride(NodeId a, std::size_t stride, std::size_t offset) {
    const Tensor& av = nodes_[a].value;
    if (av.rank() != 2 || stride == 0 || av.dim(1) % stride != 0 || offset >= stride)
        throw DimensionError("col_stride: bad stride/offset");
    const std::size_t rows = av.dim(0), out_cols = av.dim(1) / stride;
    Node n;
    n.op = Op::ColStride;
    n.a = a;
    n.aux0 = stride;
    n.aux1 = offset;
    n.value = Tensor({rows, out_cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < out_cols; ++j)
            n.value.at(i, j) = av.at(i, j * stride + offset);
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::row_range(NodeId a, std::size_t begin, std::size_t count) {
    const Tensor& av = nodes_[a].value;
    if (av.rank() != 2 || begin + count > av.dim(0))
        throw DimensionError("row_range: rows out of bounds");
    const std::size_t cols = av.dim(1);
    Node n;
    n.op = Op::RowRange;
    n.a = a;
    n.aux0 = begin;
    n.aux1 = count;
    n.value = Tensor({count, cols});
    for (std::size_t i = 0; i < count * cols; ++i)
        n.value[i] = av[begin * cols + i];
    n.requires_grad = nodes_[a].requires_grad;
    return push(std::move(n));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
    const Tensor& av = nodes_[a].value;
    const Tensor& bv = nodes_[b].value;
    if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
        throw DimensionError("concat_cols: row counts differ");
    Node n;
    n.op = Op::ConcatCols;
    n.a = a;
    n.b = b;
    n.aux0 = av.dim(1);
    n.value = Tensor({av.dim(0), av.dim(1) + bv.dim(1)});
    for (std::size_t i = 0; i < av.dim(0); ++i) {
        for (std::size_t j = 0; j < av.dim(1); ++j) n.value.at(i, j) = av.at(i, j);
        for (std::size_t j = 0; j < bv.dim(1); ++j)
            n.value.at(i, av.dim(1) + j) = bv.at(i, j);
    }
    n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
    return push(std::move(n));
}

NodeId Tape::lstsq(NodeId g, NodeId f, double ridge, bool detach) {
    Node n;
    n.op = Op::Lstsq;
    n.a = g;
    n.b = f;
    n.scalar = ridge;
    Tensor factor;
    n.value = linalg::least_squares(nodes_[g].value, nodes_[f].value, ridge, &factor);
    n.requires_grad =
        !detach && (nodes_[g].requires_grad || nodes_[f].requires_grad);
    if (n.requires_grad) n.saved = std::move(factor);
    return push(std::move(n));
}

Tensor& Tape::grad_buf(NodeId id) {
    if (grads_[id].empty()) grads_[id] = Tensor(nodes_[id].value.shape());
    return grads_[id];
}

const Tensor& Tape::grad(NodeId id) const {
    if (grads_[id].empty()) throw DimensionError("grad: node has no gradient");
    return grads_[id];
}

Tensor Tape::grad_or_zero(NodeId id) const {
    if (!grads_[id].empty()) return grads_[id];
    return Tensor(nodes_[id].value.shape());
}

void Tape::backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1)
        throw DimensionError("backward: loss must be scalar");
    if (!nodes_[loss].requires_grad) return;  // nothing trainable upstream

    grad_buf(loss)[0] = 1.0;
    const auto& k = kern::active();

    for (NodeId id = loss; id >= 0; --id) {
        const Node& n = nodes_[id];
        if (!n.requires_grad || grads_[id].empty()) continue;
        const Tensor& g = grads_[id];

        auto want = [&](NodeId in) { return in >= 0 && nodes_[in].requires_grad; };

        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Matmul: {
                const Tensor& av = nodes_[n.a].value;
                const Tensor& bv = nodes_[n.b].value;
                if (want(n.a))
                    k.gemm_nt(av.dim(0), av.dim(1), bv.dim(1), g.data(), bv.data(),
                              grad_buf(n.a).data(), true);
                if (want(n.b))
                    k.gemm_tn(av.dim(1), bv.dim(1), av.dim(0), av.data(), g.data(),
                              grad_buf(n.b).data(), true);
                break;
            }
            case Op::AddBias: {
                const std::size_t rows = g.dim(0), cols = g.dim(1);
                if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
                if (want(n.b)) {
                    Tensor& bg = grad_buf(n.b);
                    for (std::size_t i = 0; i < rows; ++i)
                        k.axpy(1.0, g.data() + i * cols, bg.data(), cols);
                }
                break;
            }
            case Op::Add:
                if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
                if (want(n.b)) k.axpy(1.0, g.data(), grad_buf(n.b).data(), g.size());
                break;
            case Op::Sub:
                if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
                if (want(n.b)) k.axpy(-1.0, g.data(), grad_buf(n.b).data(), g.size());
                break;
            case Op::Mul:
                if (want(n.a))
                    k.mul_acc(g.data(), nodes_[n.b].value.data(), grad_buf(n.a).data(),
                              g.size());
                if (want(n.b))
                    k.mul_acc(g.data(), nodes_[n.a].value.data(), grad_buf(n.b).data(),
                              g.size());
                break;
            case Op::Scale:
                if (want(n.a)) k.axpy(n.scalar, g.data(), grad_buf(n.a).data(), g.size());
                break;
            case Op::Relu:
                if (want(n.a))
                    k.relu_grad_acc(g.data(), nodes_[n.a].value.data(),
                                    grad_buf(n.a).data(), g.size());
                break;
            case Op::Tanh:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        ag[i] += g[i] * (1.0 - n.value[i] * n.value[i]);
                }
                break;
            case Op::Square:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    k.mul_acc(g.data(), nodes_[n.a].value.data(), ag.data(), g.size());
                    k.mul_acc(g.data(), nodes_[n.a].value.data(), ag.data(), g.size());
                }
                break;
            case Op::Sum:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    const double gv = g[0];
                    for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += gv;
                }
                break;
            case Op::Mean:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    const double gv = g[0] / static_cast<double>(ag.size());
                    for (std::size_t i = 0; i < ag.size(); ++i) ag[i] += gv;
                }
                break;
            case Op::Reshape:
                if (want(n.a)) k.axpy(1.0, g.data(), grad_buf(n.a).data(), g.size());
                break;
            case Op::Transpose:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    const std::size_t rows = n.value.dim(0), cols = n.value.dim(1);
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < cols; ++j) ag.at(j, i) += g.at(i, j);
                }
                break;
            case Op::ColStride:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    const std::size_t rows = g.dim(0), out_cols = g.dim(1);
                    for (std::size_t i = 0; i < rows; ++i)
                        for (std::size_t j = 0; j < out_cols; ++j)
                            ag.at(i, j * n.aux0 + n.aux1) += g.at(i, j);
                }
                break;
            case Op::RowRange:
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    const std::size_t cols = g.dim(1);
                    k.axpy(1.0, g.data(), ag.data() + n.aux0 * cols, g.size());
                }
                break;
            case Op::ConcatCols: {
                const std::size_t rows = g.dim(0), na = n.aux0,
                                  nb = g.dim(1) - n.aux0;
                if (want(n.a)) {
                    Tensor& ag = grad_buf(n.a);
                    for (std::size_t i = 0; i < rows; ++i)
                        k.axpy(1.0, g.data() + i * g.dim(1), ag.data() + i * na, na);
                }
                if (want(n.b)) {
                    Tensor& bg = grad_buf(n.b);
                    for (std::size_t i = 0; i < rows; ++i)
                        k.axpy(1.0, g.data() + i * g.dim(1) + na, bg.data() + i * nb, nb);
                }
                break;
            }
            case Op::Lstsq: {
                // alpha = M^{-1} G^T F with M = G^T G + r I (factor saved).
                // With W = M^{-1} gbar:
                //   Fbar += G W
                //   Gbar += F W^T - G (alpha W^T + W alpha^T)
                const Tensor& gv = nodes_[n.a].value;   // [m,k]
                const Tensor& fv0 = nodes_[n.b].value;  // [m,d] or [m]
                const Tensor fv =
                    fv0.rank() == 1 ? fv0.reshaped({fv0.dim(0), 1}) : fv0;
                const std::size_t kk = gv.dim(1);
                const std::size_t d = fv.dim(1);
                Tensor w = g.rank() == 1 ? g.reshaped({kk, d}) : g;
                linalg::cholesky_solve(n.saved, w);
                const Tensor alpha =
                    n.value.rank() == 1 ? n.value.reshaped({kk, d}) : n.value;
                if (want(n.b)) {
                    Tensor& fg = grads_[n.b].empty()
                                     ? (grads_[n.b] = Tensor(fv0.shape()))
                                     : grads_[n.b];
                    k.gemm_nn(gv.dim(0), d, kk, gv.data(), w.data(), fg.data(), true);
                }
                if (want(n.a)) {
                    Tensor& gg = grad_buf(n.a);
                    k.gemm_nt(gv.dim(0), kk, d, fv.data(), w.data(), gg.data(), true);
                    Tensor awt({kk, kk});
                    k.gemm_nt(kk, kk, d, alpha.data(), w.data(), awt.data(), false);
                    k.gemm_nt(kk, kk, d, w.data(), alpha.data(), awt.data(), true);
                    Tensor corr({gv.dim(0), kk});
                    k.gemm_nn(gv.dim(0), kk, kk, gv.data(), awt.data(), corr.data(),
                              false);
                    k.axpy(-1.0, corr.data(), gg.data(), gg.size());
                }
                break;
            }
        }
    }
}

void Tape::reset() {
    nodes_.clear();
    grads_.clear();
}

}  // namespace feop::ad
