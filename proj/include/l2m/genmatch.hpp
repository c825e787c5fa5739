#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2m/models.hpp"
#include "l2m/tensor.hpp"

namespace l2m {

// Generator trained to match a 2D Gaussian ring, with either a plain MMD
// loss or the learned matching loss driving it.
struct GenSpec {
    int prior_dim = 4;
    std::vector<int> hidden_dims = {64, 64};
    int modes = 8;
    double radius = 2.0;
    double mode_sd = 0.2;
    std::string loss_mode = "mmd";  // mmd | l2m
    std::string match_mode = "emb+mmd";  // emb | emb+mmd (l2m mode only)
    int steps = 2000;
    int batch_size = 128;
    double lr = 0.02;
    double meta_lr = 0.01;
    int meta_hidden = 64;
    int meta_loss_sign = -1;
    double meta_weight_decay = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

// i.i.d. uniform entries in [-1, 1].
Tensor sample_prior(int n, int prior_dim, std::uint64_t seed);

struct RingData {
    Tensor points;            // n x 2
    std::vector<int> modes;   // mode assignment per row
    Tensor centers;           // modes x 2
};

// Modes equally spaced on a circle; per-mode isotropic Gaussian samples,
// counts balanced within one.
RingData ring_dataset(int n, int modes, double radius, double sd, std::uint64_t seed);

struct GenLogRow {
    int step = 0;
    double loss = 0.0;
    double mmd2_to_data = 0.0;
};

struct GenResult {
    Mlp generator;
    Mlp meta_net;  // only trained in l2m mode
    std::vector<GenLogRow> log;
    double final_mmd2 = 0.0;
};

GenResult train_generator(const GenSpec& spec);

// Push a fresh prior batch through the generator.
Tensor generate_samples(const Mlp& generator, int n, std::uint64_t seed);

// A mode is covered when at least 2% of the samples lie within 3*sd of
// its center.
int mode_coverage(const Tensor& samples, const Tensor& centers, double sd);

}  // namespace l2m
