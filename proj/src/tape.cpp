#include "l2m/tape.hpp"

#include <algorithm>
#include <cmath>

#include "l2m/kernels.hpp"

namespace l2m {

Act parse_act(const std::string& name) {
    if (name == "relu") return Act::kRelu;
    if (name == "tanh") return Act::kTanh;
    if (name == "sigmoid") return Act::kSigmoid;
    throw ConfigError("unsupported activation kind: " + name);
}

int Tape::push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check(Var v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size())) {
        throw UsageError("variable is not on this tape");
    }
}

const Tape::Node& Tape::node(Var v) const {
    check(v);
    return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.data.empty()) throw UsageError("gradient not computed; run backward first");
    return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Var Tape::leaf(Tensor value, bool requires_grad) {
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return Var{push(std::move(n))};
}

Var Tape::detach(Var v) { return leaf(node(v).value, false); }

Var Tape::linear(Var x, Var w, Var b) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (xv.shape.size() != 2 || wv.shape.size() != 2 || xv.cols() != wv.rows()) {
        throw ShapeError("linear: cannot multiply " + xv.shape_str() + " by " + wv.shape_str());
    }
    if (static_cast<int>(bv.numel()) != wv.cols()) {
        throw ShapeError("linear: bias " + bv.shape_str() + " does not match output dim " +
                         std::to_string(wv.cols()));
    }
    const int batch = xv.rows(), in = xv.cols(), out = wv.cols();
    Tensor res = Tensor::zeros({batch, out});
    kernels::matmul(xv.data.data(), wv.data.data(), res.data.data(), batch, in, out);
    for (int r = 0; r < batch; ++r)
        for (int c = 0; c < out; ++c) res.at(r, c) += bv.data[c];

    Node n;
    n.op = Op::kLinear;
    n.inputs = {x.id, w.id, b.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(x) || requires_grad(w) || requires_grad(b);
    return Var{push(std::move(n))};
}

Var Tape::activation(Var x, Act kind) {
    const Tensor& xv = value(x);
    Tensor res = xv;
    for (double& v : res.data) {
        switch (kind) {
            case Act::kRelu: v = v > 0.0 ? v : 0.0; break;
            case Act::kTanh: v = std::tanh(v); break;
            case Act::kSigmoid: v = 1.0 / (1.0 + std::exp(-v)); break;
        }
    }
    Node n;
    n.op = Op::kAct;
    n.inputs = {x.id};
    n.value = std::move(res);
    n.act = kind;
    n.requires_grad = requires_grad(x);
    return Var{push(std::move(n))};
}

namespace {

// Row-wise softmax with max subtraction.
Tensor softmax_of(const Tensor& logits) {
    Tensor out = logits;
    const int rows = logits.rows(), cols = logits.cols();
    for (int r = 0; r < rows; ++r) {
        double mx = out.at(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, out.at(r, c));
        double denom = 0.0;
        for (int c = 0; c < cols; ++c) {
            out.at(r, c) = std::exp(out.at(r, c) - mx);
            denom += out.at(r, c);
        }
        for (int c = 0; c < cols; ++c) out.at(r, c) /= denom;
    }
    return out;
}

}  // namespace

Var Tape::softmax_rows(Var logits) {
    const Tensor& lv = value(logits);
    if (lv.shape.size() != 2) throw ShapeError("softmax_rows expects a matrix, got " + lv.shape_str());
    Node n;
    n.op = Op::kSoftmaxRows;
    n.inputs = {logits.id};
    n.value = softmax_of(lv);
    n.requires_grad = requires_grad(logits);
    return Var{push(std::move(n))};
}

Var Tape::softmax_cross_entropy(Var logits, const std::vector<int>& labels) {
    const Tensor& lv = value(logits);
    if (lv.shape.size() != 2) {
        throw ShapeError("softmax_cross_entropy expects a matrix, got " + lv.shape_str());
    }
    const int rows = lv.rows(), cols = lv.cols();
    if (static_cast<int>(labels.size()) != rows) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(rows) + " rows");
    }
    Tensor sm = softmax_of(lv);
    double loss = 0.0;
    for (int r = 0; r < rows; ++r) {
        const int y = labels[r];
        if (y < 0 || y >= cols) {
            throw DataError("label " + std::to_string(y) + " out of range at row " +
                            std::to_string(r));
        }
        // -log softmax via the stable log-sum-exp route
        double mx = lv.at(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, lv.at(r, c));
        double lse = 0.0;
        for (int c = 0; c < cols; ++c) lse += std::exp(lv.at(r, c) - mx);
        loss += (mx + std::log(lse)) - lv.at(r, y);
    }
    Node n;
    n.op = Op::kSoftmaxXent;
    n.inputs = {logits.id};
    n.value = Tensor::scalar(loss / rows);
    n.saved = std::move(sm);
    n.iattr = labels;
    n.requires_grad = requires_grad(logits);
    return Var{push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("add: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor res = av;
    for (std::size_t i = 0; i < res.data.size(); ++i) res.data[i] += bv.data[i];
    Node n;
    n.op = Op::kAdd;
    n.inputs = {a.id, b.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return Var{push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("sub: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor res = av;
    for (std::size_t i = 0; i < res.data.size(); ++i) res.data[i] -= bv.data[i];
    Node n;
    n.op = Op::kSub;
    n.inputs = {a.id, b.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return Var{push(std::move(n))};
}

Var Tape::mul(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (!av.same_shape(bv)) {
        throw ShapeError("mul: shape mismatch " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor res = av;
    for (std::size_t i = 0; i < res.data.size(); ++i) res.data[i] *= bv.data[i];
    Node n;
    n.op = Op::kMul;
    n.inputs = {a.id, b.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return Var{push(std::move(n))};
}

Var Tape::scale(Var a, double factor) {
    Tensor res = value(a);
    for (double& v : res.data) v *= factor;
    Node n;
    n.op = Op::kScale;
    n.inputs = {a.id};
    n.value = std::move(res);
    n.scalar_attr = factor;
    n.requires_grad = requires_grad(a);
    return Var{push(std::move(n))};
}

Var Tape::mean(Var a) {
    const Tensor& av = value(a);
    double acc = 0.0;
    for (double v : av.data) acc += v;
    Node n;
    n.op = Op::kMean;
    n.inputs = {a.id};
    n.value = Tensor::scalar(acc / static_cast<double>(av.numel()));
    n.requires_grad = requires_grad(a);
    return Var{push(std::move(n))};
}

Var Tape::sum(Var a) {
    const Tensor& av = value(a);
    double acc = 0.0;
    for (double v : av.data) acc += v;
    Node n;
    n.op = Op::kSum;
    n.inputs = {a.id};
    n.value = Tensor::scalar(acc);
    n.requires_grad = requires_grad(a);
    return Var{push(std::move(n))};
}

Var Tape::sqnorm(Var a) {
    const Tensor& av = value(a);
    double acc = 0.0;
    for (double v : av.data) acc += v * v;
    Node n;
    n.op = Op::kSqnorm;
    n.inputs = {a.id};
    n.value = Tensor::scalar(acc);
    n.requires_grad = requires_grad(a);
    return Var{push(std::move(n))};
}

Var Tape::exp(Var a) {
    Tensor res = value(a);
    for (double& v : res.data) v = std::exp(v);
    Node n;
    n.op = Op::kExp;
    n.inputs = {a.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(a);
    return Var{push(std::move(n))};
}

Var Tape::concat_rows(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.shape.size() != 2 || bv.shape.size() != 2 || av.cols() != bv.cols()) {
        throw ShapeError("concat_rows: " + av.shape_str() + " vs " + bv.shape_str());
    }
    Tensor res = Tensor::zeros({av.rows() + bv.rows(), av.cols()});
    std::copy(av.data.begin(), av.data.end(), res.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), res.data.begin() + av.data.size());
    Node n;
    n.op = Op::kConcatRows;
    n.inputs = {a.id, b.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return Var{push(std::move(n))};
}

Var Tape::concat_cols(Var a, Var b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.shape.size() != 2 || bv.shape.size() != 2 || av.rows() != bv.rows()) {
        throw ShapeError("concat_cols: " + av.shape_str() + " vs " + bv.shape_str());
    }
    const int rows = av.rows(), ca = av.cols(), cb = bv.cols();
    Tensor res = Tensor::zeros({rows, ca + cb});
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < ca; ++c) res.at(r, c) = av.at(r, c);
        for (int c = 0; c < cb; ++c) res.at(r, ca + c) = bv.at(r, c);
    }
    Node n;
    n.op = Op::kConcatCols;
    n.inputs = {a.id, b.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(a) || requires_grad(b);
    return Var{push(std::move(n))};
}

Var Tape::select_rows(Var a, std::vector<int> idx) {
    const Tensor& av = value(a);
    if (av.shape.size() != 2) throw ShapeError("select_rows expects a matrix, got " + av.shape_str());
    const int cols = av.cols();
    Tensor res = Tensor::zeros({static_cast<int>(idx.size()), cols});
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= av.rows()) {
            throw UsageError("select_rows: index " + std::to_string(idx[i]) + " out of range");
        }
        for (int c = 0; c < cols; ++c) res.at(static_cast<int>(i), c) = av.at(idx[i], c);
    }
    Node n;
    n.op = Op::kSelectRows;
    n.inputs = {a.id};
    n.value = std::move(res);
    n.iattr = std::move(idx);
    n.requires_grad = requires_grad(a);
    return Var{push(std::move(n))};
}

Var Tape::row_scale(Var m, Var s) {
    const Tensor& mv = value(m);
    const Tensor& sv = value(s);
    if (mv.shape.size() != 2 || static_cast<int>(sv.numel()) != mv.rows()) {
        throw ShapeError("row_scale: " + mv.shape_str() + " with scales " + sv.shape_str());
    }
    Tensor res = mv;
    const int cols = mv.cols();
    for (int r = 0; r < mv.rows(); ++r)
        for (int c = 0; c < cols; ++c) res.at(r, c) *= sv.data[r];
    Node n;
    n.op = Op::kRowScale;
    n.inputs = {m.id, s.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(m) || requires_grad(s);
    return Var{push(std::move(n))};
}

Var Tape::broadcast_scalar(Var s, int rows) {
    const Tensor& sv = value(s);
    if (!sv.is_scalar()) throw ShapeError("broadcast_scalar expects a scalar, got " + sv.shape_str());
    if (rows < 1) throw UsageError("broadcast_scalar: rows must be >= 1");
    Tensor res = Tensor::zeros({rows, 1});
    for (double& v : res.data) v = sv.data[0];
    Node n;
    n.op = Op::kBroadcast;
    n.inputs = {s.id};
    n.value = std::move(res);
    n.requires_grad = requires_grad(s);
    return Var{push(std::move(n))};
}

Var Tape::rbf_mmd2(Var x, Var y, std::vector<double> sigmas) {
    const Tensor& xv = value(x);
    const Tensor& yv = value(y);
    if (xv.shape.size() != 2 || yv.shape.size() != 2 || xv.cols() != yv.cols()) {
        throw ShapeError("rbf_mmd2: " + xv.shape_str() + " vs " + yv.shape_str());
    }
    if (sigmas.empty()) throw UsageError("rbf_mmd2: empty bandwidth list");
    const std::size_t nx = xv.rows(), ny = yv.rows(), dim = xv.cols();

    auto mean_kernel = [&](const Tensor& a, const Tensor& b, std::size_t na, std::size_t nb) {
        std::vector<double> sq(na * nb);
        kernels::pairwise_sqdist(a.data.data(), b.data.data(), sq.data(), na, nb, dim);
        std::vector<double> k(na * nb);
        kernels::rbf_mix(sq.data(), k.data(), sq.size(), sigmas);
        double acc = 0.0;
        for (double v : k) acc += v;
        return acc / static_cast<double>(na * nb);
    };
    const double v = mean_kernel(xv, xv, nx, nx) + mean_kernel(yv, yv, ny, ny) -
                     2.0 * mean_kernel(xv, yv, nx, ny);

    Node n;
    n.op = Op::kMmd2;
    n.inputs = {x.id, y.id};
    n.value = Tensor::scalar(v);
    n.dattr = std::move(sigmas);
    n.requires_grad = requires_grad(x) || requires_grad(y);
    return Var{push(std::move(n))};
}

Var Tape::bce_with_logits(Var z, std::vector<double> targets) {
    const Tensor& zv = value(z);
    if (zv.numel() != targets.size()) {
        throw ShapeError("bce_with_logits: " + std::to_string(targets.size()) +
                         " targets for " + std::to_string(zv.numel()) + " logits");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double zi = zv.data[i];
        // softplus(z) - t*z, rearranged to avoid overflow
        acc += std::max(zi, 0.0) - targets[i] * zi + std::log1p(std::exp(-std::abs(zi)));
    }
    Node n;
    n.op = Op::kBce;
    n.inputs = {z.id};
    n.value = Tensor::scalar(acc / static_cast<double>(targets.size()));
    n.dattr = std::move(targets);
    n.requires_grad = requires_grad(z);
    return Var{push(std::move(n))};
}

Tensor& Tape::grad_buf(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    return n.grad;
}

void Tape::backward(Var loss) {
    check(loss);
    if (!nodes_[loss.id].value.is_scalar()) {
        throw ShapeError("backward requires a scalar loss, got " +
                         nodes_[loss.id].value.shape_str());
    }
    for (Node& n : nodes_) n.grad = Tensor();
    grad_buf(loss.id).data[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        if (nodes_[id].grad.data.empty()) continue;  // not reachable from loss
        backward_node(id);
    }
    // Trainable leaves the loss never touched get an explicit zero grad.
    for (Node& n : nodes_) {
        if (n.requires_grad && n.grad.data.empty()) n.grad = Tensor::zeros(n.value.shape);
    }
}

void Tape::backward_node(int id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    switch (n.op) {
        case Op::kLeaf:
            break;
        case Op::kLinear: {
            const Tensor& xv = nodes_[n.inputs[0]].value;
            const Tensor& wv = nodes_[n.inputs[1]].value;
            const int batch = xv.rows(), in = xv.cols(), out = wv.cols();
            Tensor gx = Tensor::zeros(xv.shape);
            kernels::matmul_a_bt(g.data.data(), wv.data.data(), gx.data.data(), batch, out, in);
            Tensor gw = Tensor::zeros(wv.shape);
            kernels::matmul_at_b(xv.data.data(), g.data.data(), gw.data.data(), in, batch, out);
            Tensor& xg = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < xg.data.size(); ++i) xg.data[i] += gx.data[i];
            Tensor& wg = grad_buf(n.inputs[1]);
            for (std::size_t i = 0; i < wg.data.size(); ++i) wg.data[i] += gw.data[i];
            Tensor& bg = grad_buf(n.inputs[2]);
            for (int r = 0; r < batch; ++r)
                for (int c = 0; c < out; ++c) bg.data[c] += g.at(r, c);
            break;
        }
        case Op::kAct: {
            Tensor& xg = grad_buf(n.inputs[0]);
            const Tensor& xv = nodes_[n.inputs[0]].value;
            for (std::size_t i = 0; i < xg.data.size(); ++i) {
                double d = 0.0;
                const double y = n.value.data[i];
                switch (n.act) {
                    case Act::kRelu: d = xv.data[i] > 0.0 ? 1.0 : 0.0; break;
                    case Act::kTanh: d = 1.0 - y * y; break;
                    case Act::kSigmoid: d = y * (1.0 - y); break;
                }
                xg.data[i] += g.data[i] * d;
            }
            break;
        }
        case Op::kSoftmaxRows: {
            Tensor& xg = grad_buf(n.inputs[0]);
            const int rows = n.value.rows(), cols = n.value.cols();
            for (int r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int c = 0; c < cols; ++c) dot += g.at(r, c) * n.value.at(r, c);
                for (int c = 0; c < cols; ++c) {
                    xg.at(r, c) += n.value.at(r, c) * (g.at(r, c) - dot);
                }
            }
            break;
        }
        case Op::kSoftmaxXent: {
            Tensor& xg = grad_buf(n.inputs[0]);
            const Tensor& sm = n.saved;
            const int rows = sm.rows(), cols = sm.cols();
            const double go = g.data[0] / rows;
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) {
                    const double onehot = (c == n.iattr[r]) ? 1.0 : 0.0;
                    xg.at(r, c) += go * (sm.at(r, c) - onehot);
                }
            }
            break;
        }
        case Op::kAdd: {
            for (int side = 0; side < 2; ++side) {
                Tensor& ig = grad_buf(n.inputs[side]);
                for (std::size_t i = 0; i < ig.data.size(); ++i) ig.data[i] += g.data[i];
            }
            break;
        }
        case Op::kSub: {
            Tensor& ag = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += g.data[i];
            Tensor& bg = grad_buf(n.inputs[1]);
            for (std::size_t i = 0; i < bg.data.size(); ++i) bg.data[i] -= g.data[i];
            break;
        }
        case Op::kMul: {
            const Tensor& av = nodes_[n.inputs[0]].value;
            const Tensor& bv = nodes_[n.inputs[1]].value;
            Tensor& ag = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += g.data[i] * bv.data[i];
            Tensor& bg = grad_buf(n.inputs[1]);
            for (std::size_t i = 0; i < bg.data.size(); ++i) bg.data[i] += g.data[i] * av.data[i];
            break;
        }
        case Op::kScale: {
            Tensor& ag = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < ag.data.size(); ++i) {
                ag.data[i] += g.data[i] * n.scalar_attr;
            }
            break;
        }
        case Op::kMean: {
            Tensor& ag = grad_buf(n.inputs[0]);
            const double go = g.data[0] / static_cast<double>(ag.data.size());
            for (double& v : ag.data) v += go;
            break;
        }
        case Op::kSum: {
            Tensor& ag = grad_buf(n.inputs[0]);
            for (double& v : ag.data) v += g.data[0];
            break;
        }
        case Op::kSqnorm: {
            const Tensor& av = nodes_[n.inputs[0]].value;
            Tensor& ag = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < ag.data.size(); ++i) {
                ag.data[i] += 2.0 * av.data[i] * g.data[0];
            }
            break;
        }
        case Op::kExp: {
            Tensor& ag = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < ag.data.size(); ++i) {
                ag.data[i] += g.data[i] * n.value.data[i];
            }
            break;
        }
        case Op::kConcatRows: {
            const std::size_t na = nodes_[n.inputs[0]].value.numel();
            Tensor& ag = grad_buf(n.inputs[0]);
            for (std::size_t i = 0; i < na; ++i) ag.data[i] += g.data[i];
            Tensor& bg = grad_buf(n.inputs[1]);
            for (std::size_t i = 0; i < bg.data.size(); ++i) bg.data[i] += g.data[na + i];
            break;
        }
        case Op::kConcatCols: {
            Tensor& ag = grad_buf(n.inputs[0]);
            Tensor& bg = grad_buf(n.inputs[1]);
            const int rows = n.value.rows(), ca = ag.cols(), cb = bg.cols();
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < ca; ++c) ag.at(r, c) += g.at(r, c);
                for (int c = 0; c < cb; ++c) bg.at(r, c) += g.at(r, ca + c);
            }
            break;
        }
        case Op::kSelectRows: {
            Tensor& ag = grad_buf(n.inputs[0]);
            const int cols = ag.cols();
            for (std::size_t i = 0; i < n.iattr.size(); ++i) {
                for (int c = 0; c < cols; ++c) {
                    ag.at(n.iattr[i], c) += g.at(static_cast<int>(i), c);
                }
            }
            break;
        }
        case Op::kRowScale: {
            const Tensor& mv = nodes_[n.inputs[0]].value;
            const Tensor& sv = nodes_[n.inputs[1]].value;
            Tensor& mg = grad_buf(n.inputs[0]);
            Tensor& sg = grad_buf(n.inputs[1]);
            const int cols = mv.cols();
            for (int r = 0; r < mv.rows(); ++r) {
                for (int c = 0; c < cols; ++c) {
                    mg.at(r, c) += g.at(r, c) * sv.data[r];
                    sg.data[r] += g.at(r, c) * mv.at(r, c);
                }
            }
            break;
        }
        case Op::kBroadcast: {
            Tensor& sg = grad_buf(n.inputs[0]);
            for (double v : g.data) sg.data[0] += v;
            break;
        }
        case Op::kMmd2: {
            const Tensor& xv = nodes_[n.inputs[0]].value;
            const Tensor& yv = nodes_[n.inputs[1]].value;
            Tensor& xg = grad_buf(n.inputs[0]);
            Tensor& yg = grad_buf(n.inputs[1]);
            const double go = g.data[0];
            const std::size_t nx = xv.rows(), ny = yv.rows(), dim = xv.cols();
            const double invs = 1.0 / static_cast<double>(n.dattr.size());

            // d/da k_sigma(a,b) = k_sigma(a,b) * (b-a) / sigma^2
            auto accumulate = [&](const Tensor& a, const Tensor& b, Tensor& agrad,
                                  double coeff, bool both_sides, Tensor* bgrad) {
                const std::size_t na = a.rows(), nb = b.rows();
                std::vector<double> sq(na * nb);
                kernels::pairwise_sqdist(a.data.data(), b.data.data(), sq.data(), na, nb, dim);
                std::vector<double> inv_s2(n.dattr.size());
                for (std::size_t s = 0; s < n.dattr.size(); ++s) {
                    inv_s2[s] = 1.0 / (n.dattr[s] * n.dattr[s]);
                }
                for (std::size_t i = 0; i < na; ++i) {
                    for (std::size_t j = 0; j < nb; ++j) {
                        const double sqv = sq[i * nb + j];
                        double w = 0.0;
                        for (const double is2 : inv_s2) w += std::exp(-sqv * 0.5 * is2) * is2;
                        w *= coeff * invs;
                        for (std::size_t p = 0; p < dim; ++p) {
                            const double diff = b.data[j * dim + p] - a.data[i * dim + p];
                            agrad.data[i * dim + p] += w * diff;
                            if (both_sides) {
                                agrad.data[j * dim + p] -= w * diff;
                            } else if (bgrad) {
                                bgrad->data[j * dim + p] -= w * diff;
                            }
                        }
                    }
                }
            };
            accumulate(xv, xv, xg, go / static_cast<double>(nx * nx), true, nullptr);
            accumulate(yv, yv, yg, go / static_cast<double>(ny * ny), true, nullptr);
            accumulate(xv, yv, xg, -2.0 * go / static_cast<double>(nx * ny), false, &yg);
            break;
        }
        case Op::kBce: {
            const Tensor& zv = nodes_[n.inputs[0]].value;
            Tensor& zg = grad_buf(n.inputs[0]);
            const double go = g.data[0] / static_cast<double>(zv.numel());
            for (std::size_t i = 0; i < zv.numel(); ++i) {
                const double p = 1.0 / (1.0 + std::exp(-zv.data[i]));
                zg.data[i] += go * (p - n.dattr[i]);
            }
            break;
        }
    }
}

}  // namespace l2m
