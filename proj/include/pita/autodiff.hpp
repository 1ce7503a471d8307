#pragma once

#include <cstdint>
#include <vector>

#include "pita/tensor.hpp"

namespace pita {

using NodeId = std::int32_t;

enum class OpKind {
    Constant,
    Add,
    Sub,
    Mul,
    Tanh,
    Relu,
    Sin,
    Cos,
    Square,
    MatMul,
    AddRow,
    Sum,
    Scale,
    SliceCols,
};

/// Per-node gradient tensors produced by Tape::backward. Nodes the root does
/// not depend on hold all-zero adjoints.
class Gradients {
public:
    explicit Gradients(std::vector<Tensor> adjoints) : adjoints_(std::move(adjoints)) {}

    const Tensor& at(NodeId id) const { return adjoints_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return adjoints_.size(); }

private:
    std::vector<Tensor> adjoints_;
};

/// Define-by-run reverse-mode tape. Recording an op evaluates it eagerly and
/// appends a node; operand ids are always smaller than the node's own id, so
/// one reverse sweep over the node list is a valid backward pass.
///
/// Single-threaded by contract: a tape must not be shared between threads.
class Tape {
public:
    NodeId constant(Tensor value);

    /// out = a * b for rank-2 operands with matching inner dimension.
    NodeId matmul(NodeId a, NodeId b);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId sin(NodeId a);
    NodeId cos(NodeId a);
    NodeId square(NodeId a);

    /// Adds a rank-1 row vector to every row of a rank-2 matrix (the one
    /// broadcast the engine supports; used for layer biases).
    NodeId add_row(NodeId matrix, NodeId row);

    /// Sum of all entries, as a rank-0 scalar.
    NodeId sum(NodeId a);

    /// out = factor * a, factor a plain (non-differentiated) constant.
    NodeId scale(NodeId a, double factor);

    /// Column gather on a rank-2 matrix: out[:, j] = in[:, start + j*stride].
    NodeId slice_cols(NodeId a, std::size_t start, std::size_t stride, std::size_t count);

    const Tensor& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    std::size_t size() const { return nodes_.size(); }

    /// Adjoints of every node with respect to a single-element root.
    Gradients backward(NodeId root) const;

private:
    struct Node {
        OpKind kind;
        NodeId a = -1;
        NodeId b = -1;
        Tensor value;
        double factor = 0.0;          // Scale
        std::size_t start = 0;        // SliceCols
        std::size_t stride = 0;
        std::size_t count = 0;
    };

    NodeId push(Node node);
    const Node& node(NodeId id) const;
    NodeId unary(OpKind kind, NodeId a);
    NodeId binary(OpKind kind, NodeId a, NodeId b);

    std::vector<Node> nodes_;
};

}  // namespace pita
