#pragma once

#include <cstdint>
#include <vector>

#include "l2m/param.hpp"
#include "l2m/tape.hpp"

namespace l2m {

struct MlpSpec {
    std::vector<int> layer_dims;  // at least input and output
    Act hidden_activation = Act::kRelu;
    bool sigmoid_output = false;
    std::uint64_t init_seed = 0;
};

struct Mlp {
    MlpSpec spec;
    ParamSet params;

    int in_dim() const { return spec.layer_dims.front(); }
    int out_dim() const { return spec.layer_dims.back(); }
};

// Glorot-uniform weights, zero biases, deterministic per seed.
Mlp build_mlp(const MlpSpec& spec);

// A network staged onto a tape for one forward/backward pass.
struct StagedMlp {
    const Mlp* mlp = nullptr;
    std::vector<Var> vars;
};

StagedMlp stage_mlp(Tape& tape, const Mlp& mlp, bool trainable = true);

// Full forward including the output sigmoid when configured.
Var mlp_forward(Tape& tape, const StagedMlp& staged, Var x);
// Forward stopping before the output activation (pre-sigmoid logits).
Var mlp_forward_logits(Tape& tape, const StagedMlp& staged, Var x);

// Per-row scalar from the meta-network averaged over rows; the learned
// matching loss.
Var meta_forward(Tape& tape, const StagedMlp& meta, Var features);

// The four networks of the framework plus one conditional domain
// discriminator per class.
struct ModelBundle {
    Mlp feature_extractor;  // f_phi
    Mlp classifier;         // G_y
    Mlp meta_net;           // g_theta
    Mlp disc_marginal;      // G_d
    std::vector<Mlp> disc_conditional;  // G_d^(c)

    int emb_dim() const { return feature_extractor.out_dim(); }
    int num_classes() const { return classifier.out_dim(); }
};

struct BundleDims {
    int input_dim = 2;
    int emb_dim = 64;
    int hidden = 64;
    int num_classes = 2;
    int feature_dim = 2;  // meta-network input (matching-feature dim)
    int meta_hidden = 64;
    int disc_hidden = 32;
};

ModelBundle build_bundle(const BundleDims& dims, std::uint64_t seed);

// Deep copy; subsequent updates to either bundle leave the other unchanged.
ModelBundle clone_assist(const ModelBundle& bundle);

// Inference on a frozen bundle (no gradients recorded).
Tensor compute_embeddings(const ModelBundle& bundle, const Tensor& x);
Tensor compute_logits(const ModelBundle& bundle, const Tensor& x);
std::vector<int> predict_labels(const ModelBundle& bundle, const Tensor& x);

}  // namespace l2m
