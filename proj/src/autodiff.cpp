#include "pita/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pita {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": operand shapes " + a.shape_str() + " and " +
                                b.shape_str() + " do not match");
}

void matmul_into(const Tensor& a, const Tensor& b, Tensor& out, bool transpose_a, bool transpose_b) {
    // out += op(a) * op(b), accumulating into whatever out already holds.
    std::size_t m = transpose_a ? a.cols() : a.rows();
    std::size_t k = transpose_a ? a.rows() : a.cols();
    std::size_t n = transpose_b ? b.rows() : b.cols();
    const double* ad = a.data().data();
    const double* bd = b.data().data();
    double* od = out.data().data();
    std::size_t a_cols = a.cols();
    std::size_t b_cols = b.cols();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = transpose_a ? ad[p * a_cols + i] : ad[i * a_cols + p];
            if (av == 0.0) continue;
            if (transpose_b) {
                const double* brow = bd;
                for (std::size_t j = 0; j < n; ++j) od[i * n + j] += av * brow[j * b_cols + p];
            } else {
                const double* brow = bd + p * b_cols;
                for (std::size_t j = 0; j < n; ++j) od[i * n + j] += av * brow[j];
            }
        }
    }
}

}  // namespace

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size() - 1);
}

const Tape::Node& Tape::node(NodeId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw std::invalid_argument("node id " + std::to_string(id) + " not on tape");
    }
    return nodes_[static_cast<std::size_t>(id)];
}

NodeId Tape::constant(Tensor value) {
    Node n;
    n.kind = OpKind::Constant;
    n.value = std::move(value);
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
        throw std::invalid_argument("matmul: inner dimensions of " + av.shape_str() + " and " +
                                    bv.shape_str() + " do not agree");
    }
    Node n;
    n.kind = OpKind::MatMul;
    n.a = a;
    n.b = b;
    n.value = Tensor::zeros({av.rows(), bv.cols()});
    matmul_into(av, bv, n.value, false, false);
    return push(std::move(n));
}

NodeId Tape::binary(OpKind kind, NodeId a, NodeId b) {
    const Tensor& av = node(a).value;
    const Tensor& bv = node(b).value;
    if (!av.same_shape(bv)) {
        shape_mismatch(kind == OpKind::Add ? "add" : kind == OpKind::Sub ? "sub" : "mul", av, bv);
    }
    Node n;
    n.kind = kind;
    n.a = a;
    n.b = b;
    n.value = Tensor(av.shape());
    const auto& x = av.data();
    const auto& y = bv.data();
    auto& out = n.value.data();
    switch (kind) {
        case OpKind::Add:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
            break;
        case OpKind::Sub:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
            break;
        case OpKind::Mul:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
            break;
        default:
            throw std::logic_error("not a binary op");
    }
    return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) { return binary(OpKind::Add, a, b); }
NodeId Tape::sub(NodeId a, NodeId b) { return binary(OpKind::Sub, a, b); }
NodeId Tape::mul(NodeId a, NodeId b) { return binary(OpKind::Mul, a, b); }

NodeId Tape::unary(OpKind kind, NodeId a) {
    const Tensor& av = node(a).value;
    Node n;
    n.kind = kind;
    n.a = a;
    n.value = Tensor(av.shape());
    const auto& x = av.data();
    auto& out = n.value.data();
    switch (kind) {
        case OpKind::Tanh:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
            break;
        case OpKind::Relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
            break;
        case OpKind::Sin:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sin(x[i]);
            break;
        case OpKind::Cos:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::cos(x[i]);
            break;
        case OpKind::Square:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * x[i];
            break;
        default:
            throw std::logic_error("not a unary op");
    }
    return push(std::move(n));
}

NodeId Tape::tanh(NodeId a) { return unary(OpKind::Tanh, a); }
NodeId Tape::relu(NodeId a) { return unary(OpKind::Relu, a); }
NodeId Tape::sin(NodeId a) { return unary(OpKind::Sin, a); }
NodeId Tape::cos(NodeId a) { return unary(OpKind::Cos, a); }
NodeId Tape::square(NodeId a) { return unary(OpKind::Square, a); }

NodeId Tape::add_row(NodeId matrix, NodeId row) {
    const Tensor& mv = node(matrix).value;
    const Tensor& rv = node(row).value;
    if (mv.rank() != 2 || rv.rank() != 1 || mv.cols() != rv.numel()) {
        shape_mismatch("add_row", mv, rv);
    }
    Node n;
    n.kind = OpKind::AddRow;
    n.a = matrix;
    n.b = row;
    n.value = Tensor(mv.shape());
    for (std::size_t r = 0; r < mv.rows(); ++r) {
        for (std::size_t c = 0; c < mv.cols(); ++c) n.value.at(r, c) = mv.at(r, c) + rv[c];
    }
    return push(std::move(n));
}

NodeId Tape::sum(NodeId a) {
    const Tensor& av = node(a).value;
    double total = 0.0;
    for (double v : av.data()) total += v;
    Node n;
    n.kind = OpKind::Sum;
    n.a = a;
    n.value = Tensor::scalar(total);
    return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double factor) {
    const Tensor& av = node(a).value;
    Node n;
    n.kind = OpKind::Scale;
    n.a = a;
    n.factor = factor;
    n.value = Tensor(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) n.value[i] = factor * av[i];
    return push(std::move(n));
}

NodeId Tape::slice_cols(NodeId a, std::size_t start, std::size_t stride, std::size_t count) {
    const Tensor& av = node(a).value;
    if (av.rank() != 2) throw std::invalid_argument("slice_cols: operand shape " + av.shape_str());
    if (count == 0 || stride == 0 || start + (count - 1) * stride >= av.cols()) {
        throw std::invalid_argument("slice_cols: columns (start " + std::to_string(start) +
                                    ", stride " + std::to_string(stride) + ", count " +
                                    std::to_string(count) + ") out of range for " + av.shape_str());
    }
    Node n;
    n.kind = OpKind::SliceCols;
    n.a = a;
    n.start = start;
    n.stride = stride;
    n.count = count;
    n.value = Tensor::zeros({av.rows(), count});
    for (std::size_t r = 0; r < av.rows(); ++r) {
        for (std::size_t j = 0; j < count; ++j) n.value.at(r, j) = av.at(r, start + j * stride);
    }
    return push(std::move(n));
}

Gradients Tape::backward(NodeId root) const {
    const Node& root_node = node(root);
    if (root_node.value.numel() != 1) {
        throw std::invalid_argument("backward: root must be scalar, got shape " +
                                    root_node.value.shape_str());
    }

    std::vector<Tensor> adj(nodes_.size());
    std::vector<char> touched(nodes_.size(), 0);
    for (std::size_t i = 0; i < nodes_.size(); ++i) adj[i] = Tensor::zeros(nodes_[i].value.shape());
    adj[static_cast<std::size_t>(root)][0] = 1.0;
    touched[static_cast<std::size_t>(root)] = 1;

    // Reverse id order is a reverse topological order by construction.
    for (NodeId id = root; id >= 0; --id) {
        std::size_t i = static_cast<std::size_t>(id);
        if (!touched[i]) continue;
        const Node& n = nodes_[i];
        const Tensor& g = adj[i];
        auto spread = [&](NodeId target) -> Tensor& {
            touched[static_cast<std::size_t>(target)] = 1;
            return adj[static_cast<std::size_t>(target)];
        };
        switch (n.kind) {
            case OpKind::Constant:
                break;
            case OpKind::Add: {
                Tensor& ga = spread(n.a);
                Tensor& gb = spread(n.b);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    ga[k] += g[k];
                    gb[k] += g[k];
                }
                break;
            }
            case OpKind::Sub: {
                Tensor& ga = spread(n.a);
                Tensor& gb = spread(n.b);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    ga[k] += g[k];
                    gb[k] -= g[k];
                }
                break;
            }
            case OpKind::Mul: {
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& y = nodes_[static_cast<std::size_t>(n.b)].value;
                Tensor& ga = spread(n.a);
                Tensor& gb = spread(n.b);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    ga[k] += g[k] * y[k];
                    gb[k] += g[k] * x[k];
                }
                break;
            }
            case OpKind::Tanh: {
                Tensor& ga = spread(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    double y = n.value[k];
                    ga[k] += g[k] * (1.0 - y * y);
                }
                break;
            }
            case OpKind::Relu: {
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = spread(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) {
                    if (x[k] > 0.0) ga[k] += g[k];
                }
                break;
            }
            case OpKind::Sin: {
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = spread(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga[k] += g[k] * std::cos(x[k]);
                break;
            }
            case OpKind::Cos: {
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = spread(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga[k] -= g[k] * std::sin(x[k]);
                break;
            }
            case OpKind::Square: {
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                Tensor& ga = spread(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga[k] += 2.0 * x[k] * g[k];
                break;
            }
            case OpKind::MatMul: {
                const Tensor& x = nodes_[static_cast<std::size_t>(n.a)].value;
                const Tensor& y = nodes_[static_cast<std::size_t>(n.b)].value;
                matmul_into(g, y, spread(n.a), false, true);   // ga += g * y^T
                matmul_into(x, g, spread(n.b), true, false);   // gb += x^T * g
                break;
            }
            case OpKind::AddRow: {
                Tensor& gm = spread(n.a);
                Tensor& gr = spread(n.b);
                std::size_t cols = n.value.cols();
                for (std::size_t r = 0; r < n.value.rows(); ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                        gm.at(r, c) += g.at(r, c);
                        gr[c] += g.at(r, c);
                    }
                }
                break;
            }
            case OpKind::Sum: {
                Tensor& ga = spread(n.a);
                double gs = g[0];
                for (std::size_t k = 0; k < ga.numel(); ++k) ga[k] += gs;
                break;
            }
            case OpKind::Scale: {
                Tensor& ga = spread(n.a);
                for (std::size_t k = 0; k < g.numel(); ++k) ga[k] += n.factor * g[k];
                break;
            }
            case OpKind::SliceCols: {
                Tensor& ga = spread(n.a);
                for (std::size_t r = 0; r < n.value.rows(); ++r) {
                    for (std::size_t j = 0; j < n.count; ++j) {
                        ga.at(r, n.start + j * n.stride) += g.at(r, j);
                    }
                }
                break;
            }
        }
    }
    return Gradients(std::move(adj));
}

}  // namespace pita
