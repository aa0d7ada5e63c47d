#pragma once

#include <cstdint>
#include <vector>

#include "feop/tensor.hpp"

namespace feop::ad {

using NodeId = std::int32_t;

enum class Op : std::uint8_t {
    Leaf,
    Matmul,    // [m,k]*[k,n]
    AddBias,   // [m,n] + [n] broadcast over rows
    Add,
    Sub,
    Mul,       // elementwise, same shape
    Scale,     // x * constant
    Relu,
    Tanh,
    Square,
    Sum,       // -> [1]
    Mean,      // -> [1]
    Reshape,
    Transpose,
    ColStride,   // [m,C] -> [m,C/stride], out[i,j] = in[i, j*stride+offset]
    RowRange,    // [m,n] -> [count,n], rows [begin, begin+count)
    ConcatCols,  // [m,n1] ++ [m,n2] -> [m,n1+n2]
    Lstsq,       // ridge least squares G\F; optionally gradient-stopped
};

// Recorded operation tape. Nodes reference earlier nodes only, so the tape is
// acyclic by construction and a single reverse pass computes all gradients.
class Tape {
public:
    NodeId leaf(Tensor value, bool requires_grad = false);
    NodeId constant(Tensor value) { return leaf(std::move(value), false); }

    NodeId matmul(NodeId a, NodeId b);
    NodeId add_bias(NodeId m, NodeId bias);
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId scale(NodeId a, double c);
    NodeId relu(NodeId a);
    NodeId tanh(NodeId a);
    NodeId square(NodeId a);
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);
    NodeId reshape(NodeId a, std::vector<std::size_t> shape);
    NodeId transpose(NodeId a);
    NodeId col_stride(NodeId a, std::size_t stride, std::size_t offset);
    NodeId row_range(NodeId a, std::size_t begin, std::size_t count);
    NodeId concat_cols(NodeId a, NodeId b);

    // alpha = argmin |G x - F|^2 + ridge |x|^2. With detach=true the result is
    // treated as a constant: no gradient flows into G or F.
    NodeId lstsq(NodeId g, NodeId f, double ridge, bool detach);

    const Tensor& value(NodeId id) const { return nodes_[id].value; }
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
    std::size_t size() const { return nodes_.size(); }

    // Reverse pass from a scalar loss node. Gradients accumulate; call once
    // per tape (or reset() in between).
    void backward(NodeId loss);

    bool has_grad(NodeId id) const { return !grads_[id].empty(); }
    const Tensor& grad(NodeId id) const;        // throws if absent
    Tensor grad_or_zero(NodeId id) const;       // zeros shaped like the value

    void reset();

private:
    struct Node {
        Op op = Op::Leaf;
        NodeId a = -1;
        NodeId b = -1;
        double scalar = 0.0;        // Scale factor / Lstsq ridge
        std::size_t aux0 = 0;       // ColStride stride / ConcatCols split
        std::size_t aux1 = 0;       // ColStride offset
        Tensor value;
        Tensor saved;               // Lstsq: Cholesky factor of the Gram
        bool requires_grad = false;
    };

    NodeId push(Node n);
    Tensor& grad_buf(NodeId id);

    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

}  // namespace feop::ad
