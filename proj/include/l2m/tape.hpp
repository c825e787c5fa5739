#pragma once

#include <vector>

#include "l2m/tensor.hpp"

namespace l2m {

enum class Act { kRelu, kTanh, kSigmoid };

Act parse_act(const std::string& name);

// Handle to a node on a Tape. Only valid for the tape that created it.
struct Var {
    int id = -1;
};

// Reverse-mode tape. Append-only; operand values are snapshotted at
// record time and never mutated, so one backward traversal in reverse
// node order applies the chain rule exactly once per node. Gradients
// accumulate additively across fan-out.
class Tape {
public:
    // Leaves. requires_grad marks trainable inputs; detach snapshots a
    // value into a fresh gradient-free leaf.
    Var leaf(Tensor value, bool requires_grad = false);
    Var detach(Var v);

    Var linear(Var x, Var w, Var b);
    Var activation(Var x, Act kind);
    Var softmax_rows(Var logits);
    Var softmax_cross_entropy(Var logits, const std::vector<int>& labels);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double factor);
    Var mean(Var a);
    Var sum(Var a);
    Var sqnorm(Var a);
    Var exp(Var a);
    Var concat_rows(Var a, Var b);
    Var concat_cols(Var a, Var b);
    Var select_rows(Var a, std::vector<int> idx);
    Var row_scale(Var m, Var s);
    Var broadcast_scalar(Var s, int n);

    // Multi-bandwidth RBF MMD^2 (biased V-statistic) as a single node
    // with an analytic backward; checked against finite differences.
    Var rbf_mmd2(Var x, Var y, std::vector<double> sigmas);

    // Mean binary cross-entropy over per-sample logits z and 0/1
    // targets, computed in the numerically stable softplus form.
    Var bce_with_logits(Var z, std::vector<double> targets);

    void backward(Var loss);

    const Tensor& value(Var v) const;
    const Tensor& grad(Var v) const;
    bool requires_grad(Var v) const;
    std::size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        kLeaf,
        kLinear,
        kAct,
        kSoftmaxRows,
        kSoftmaxXent,
        kAdd,
        kSub,
        kMul,
        kScale,
        kMean,
        kSum,
        kSqnorm,
        kExp,
        kConcatRows,
        kConcatCols,
        kSelectRows,
        kRowScale,
        kBroadcast,
        kMmd2,
        kBce,
    };

    struct Node {
        Op op = Op::kLeaf;
        std::vector<int> inputs;
        Tensor value;
        Tensor grad;
        Tensor saved;  // op-specific forward state reused in backward
        bool requires_grad = false;
        std::vector<int> iattr;
        std::vector<double> dattr;
        double scalar_attr = 0.0;
        Act act = Act::kRelu;
    };

    int push(Node node);
    const Node& node(Var v) const;
    void check(Var v) const;
    void backward_node(int id);
    Tensor& grad_buf(int id);

    std::vector<Node> nodes_;
};

}  // namespace l2m
