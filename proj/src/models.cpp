#include "l2m/models.hpp"

#include <cmath>
#include <random>

namespace l2m {

Mlp build_mlp(const MlpSpec& spec) {
    if (spec.layer_dims.size() < 2) throw ConfigError("MlpSpec needs at least 2 layer dims");
    for (int d : spec.layer_dims) {
        if (d < 1) throw ConfigError("MlpSpec: all layer dims must be >= 1");
    }
    std::mt19937_64 rng(spec.init_seed * 0x9E3779B97F4A7C15ULL + 0x1F83D9ABFB41BD6BULL);
    Mlp mlp;
    mlp.spec = spec;
    for (std::size_t l = 0; l + 1 < spec.layer_dims.size(); ++l) {
        const int fan_in = spec.layer_dims[l];
        const int fan_out = spec.layer_dims[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (double& v : w.data) v = dist(rng);
        mlp.params.add("w" + std::to_string(l), std::move(w));
        mlp.params.add("b" + std::to_string(l), Tensor::zeros({fan_out}));
    }
    return mlp;
}

StagedMlp stage_mlp(Tape& tape, const Mlp& mlp, bool trainable) {
    return StagedMlp{&mlp, mlp.params.stage(tape, trainable)};
}

Var mlp_forward_logits(Tape& tape, const StagedMlp& staged, Var x) {
    const Mlp& mlp = *staged.mlp;
    const Tensor& xv = tape.value(x);
    if (xv.cols() != mlp.in_dim()) {
        throw ShapeError("mlp forward: input dim " + std::to_string(xv.cols()) +
                         " does not match expected " + std::to_string(mlp.in_dim()));
    }
    const std::size_t layers = mlp.spec.layer_dims.size() - 1;
    Var h = x;
    for (std::size_t l = 0; l < layers; ++l) {
        h = tape.linear(h, staged.vars[2 * l], staged.vars[2 * l + 1]);
        if (l + 1 < layers) h = tape.activation(h, mlp.spec.hidden_activation);
    }
    return h;
}

Var mlp_forward(Tape& tape, const StagedMlp& staged, Var x) {
    Var h = mlp_forward_logits(tape, staged, x);
    if (staged.mlp->spec.sigmoid_output) h = tape.activation(h, Act::kSigmoid);
    return h;
}

Var meta_forward(Tape& tape, const StagedMlp& meta, Var features) {
    return tape.mean(mlp_forward(tape, meta, features));
}

ModelBundle build_bundle(const BundleDims& d, std::uint64_t seed) {
    ModelBundle b;
    b.feature_extractor = build_mlp(
        {{d.input_dim, d.hidden, d.emb_dim}, Act::kRelu, false, seed});
    b.classifier = build_mlp({{d.emb_dim, d.num_classes}, Act::kRelu, false, seed + 1});
    b.meta_net = build_mlp(
        {{d.feature_dim, d.meta_hidden, d.meta_hidden, 1}, Act::kRelu, false, seed + 2});
    b.disc_marginal = build_mlp({{d.emb_dim, d.disc_hidden, 1}, Act::kRelu, true, seed + 3});
    for (int c = 0; c < d.num_classes; ++c) {
        b.disc_conditional.push_back(
            build_mlp({{d.emb_dim, d.disc_hidden, 1}, Act::kRelu, true, seed + 4 + c}));
    }
    return b;
}

ModelBundle clone_assist(const ModelBundle& bundle) { return bundle; }

Tensor compute_embeddings(const ModelBundle& bundle, const Tensor& x) {
    Tape tape;
    StagedMlp fe = stage_mlp(tape, bundle.feature_extractor, false);
    return tape.value(mlp_forward(tape, fe, tape.leaf(x)));
}

Tensor compute_logits(const ModelBundle& bundle, const Tensor& x) {
    Tape tape;
    StagedMlp fe = stage_mlp(tape, bundle.feature_extractor, false);
    StagedMlp cls = stage_mlp(tape, bundle.classifier, false);
    Var emb = mlp_forward(tape, fe, tape.leaf(x));
    return tape.value(mlp_forward(tape, cls, emb));
}

std::vector<int> predict_labels(const ModelBundle& bundle, const Tensor& x) {
    const Tensor logits = compute_logits(bundle, x);
    std::vector<int> out(logits.rows());
    for (int r = 0; r < logits.rows(); ++r) {
        int best = 0;
        for (int c = 1; c < logits.cols(); ++c) {
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        }
        out[r] = best;
    }
    return out;
}

}  // namespace l2m
