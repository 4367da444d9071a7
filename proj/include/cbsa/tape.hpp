#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cbsa/tensor.hpp"

namespace cbsa {

// Reverse-mode gradient tape. Nodes are appended in topological order during
// the forward pass; backward() walks them in reverse and accumulates exact
// partial derivatives. Gradients are tracked for the requires-grad closure:
// leaves opt in, derived nodes inherit from any parent, everything else is
// pruned. A tape is single-owner and single-threaded; forward-only evaluation
// uses the same ops with recording off, so train and eval share one numeric
// path.
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    Var leaf(Tensor value, bool requires_grad);

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var add_rowvec(Var a, Var v);
    Var affine(Var a, double scale, double shift);
    Var negate(Var a) { return affine(a, -1.0, 0.0); }
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var log(Var a);
    Var pow(Var a, double exponent);
    Var clamp(Var a, double lo, double hi);
    Var softmax_rows(Var a, double temperature);
    Var l2_normalize_rows(Var a);
    Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-6);
    Var gather_rows(Var a, std::vector<int> idx);
    Var slice_rows(Var a, int r0, int r1);
    Var slice_cols(Var a, int c0, int c1);
    Var concat_rows(Var a, Var b);
    Var concat_cols(Var a, Var b);
    Var row_sums(Var a);
    Var sum(Var a);
    Var mean(Var a);
    Var pick_per_row(Var a, std::vector<int> idx);

    // Propagates d(root)/d(node) into every requires-grad node reachable from
    // root. root must hold exactly one element.
    void backward(Var root);

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    // Gradient buffer for a node; empty tensor if backward never reached it.
    const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
    bool requires_grad(Var v) const { return nodes_[v.id].needs_grad; }

    std::size_t node_count() const { return nodes_.size(); }
    void reset();

private:
    enum class Op : std::uint8_t {
        Leaf, MatMul, Transpose, Add, Sub, Mul, AddRowVec, Affine, Sigmoid,
        Tanh, Log, PowConst, Clamp, SoftmaxRows, L2NormRows, LayerNorm,
        GatherRows, SliceCols, ConcatRows, ConcatCols, RowSums, Sum, Mean,
        PickPerRow,
    };

    struct Node {
        Tensor value;
        Tensor grad;
        Op op = Op::Leaf;
        int p0 = -1, p1 = -1, p2 = -1;
        double d0 = 0.0, d1 = 0.0;
        std::vector<int> aux;
        bool needs_grad = false;
    };

    Var push(Tensor value, Op op, int p0 = -1, int p1 = -1, int p2 = -1);
    Tensor& grad_buf(int id);
    void accumulate(const Node& node);

    std::vector<Node> nodes_;
    bool recording_;
};

using Var = Tape::Var;

// A named trainable (or frozen) tensor living outside any tape. The optimizer
// owns the update rule; tapes bind a param per step and scatter gradients back
// after backward.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    Param() = default;
    Param(std::string n, Tensor v, bool train = true)
        : name(std::move(n)), value(std::move(v)), trainable(train) {
        grad = Tensor(value.shape());
    }

    void zero_grad() { std::fill(grad.raw().begin(), grad.raw().end(), 0.0); }
};

// Per-step view over a tape: binds each Param/constant once, and routes
// gradients back into Param::grad after backward.
class Graph {
public:
    explicit Graph(bool recording = true) : tape_(recording) {}

    Tape& tape() { return tape_; }
    bool recording() const { return tape_.recording(); }

    Var use(Param& p);
    Var constant(Tensor t) { return tape_.leaf(std::move(t), false); }
    // Cached constant keyed by address; for model-owned tensors reused within
    // one graph (class dictionary rows, masks).
    Var shared_constant(const Tensor& t);

    void backward(Var root);

    const Tensor& value(Var v) const { return tape_.value(v); }

private:
    Tape tape_;
    std::unordered_map<const void*, Var> bound_;
    std::vector<std::pair<Param*, Var>> grad_targets_;
};

}  // namespace cbsa
