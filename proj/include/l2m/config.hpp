#pragma once

#include <cstdint>
#include <string>

#include "l2m/matching.hpp"

namespace l2m {

// Full run configuration. Defaults are the tuned desk-scale settings the
// acceptance suite trains with.
struct ExperimentConfig {
    // [dataset]
    std::string dataset_kind = "two_moons";  // two_moons | blobs | csv
    int moons_n = 500;                       // per domain
    double moons_noise_sd = 0.1;
    double rotation_deg = 30.0;
    int blob_classes = 3;
    int blob_n_per_class = 100;
    double blob_shift_x = 1.0;
    double blob_shift_y = 1.0;
    double blob_scale = 1.0;
    std::string source_csv;
    std::string target_csv;
    std::string label_column = "label";

    // [model]
    int emb_dim = 64;
    int hidden = 64;
    int meta_hidden = 64;
    int disc_hidden = 32;

    // [train]
    std::string method = "l2m";  // l2m | source_only | mmd_align | adv_align
    std::string match_mode = "emb+mmd";
    bool pair_concat = false;
    double eta0 = 0.1;
    double beta0 = 0.01;
    double gamma = 0.001;
    double upsilon = 0.75;
    double lambda_max = 2.0;
    std::string lambda_mode = "ramp";  // ramp | constant
    int meta_loss_sign = 1;            // +1 | -1
    double tau = 0.8;
    int meta_per_class = 5;
    int max_steps = 1200;
    int batch_size = 32;
    double clip_norm = 5.0;  // 0 disables clipping
    double meta_weight_decay = 1e-4;
    double disc_lr = 0.05;
    std::string main_progress = "restep";  // restep | adopt
    bool meta_updates = true;

    // top level
    std::uint64_t seed = 0;
    std::string out_dir = "out";

    MatchMode mode() const { return parse_match_mode(match_mode); }
    void validate() const;
};

ExperimentConfig load_config_toml(const std::string& path);
void save_config_toml(const ExperimentConfig& cfg, const std::string& path);

// Field reflection shared by the TOML reader/writer and the checkpoint
// serializer. Keys are "section.key"; top-level keys use ".key".
struct ConfigFieldRef {
    enum Kind { kString, kInt, kDouble, kBool, kU64 } kind;
    void* ptr;
};
std::vector<std::pair<std::string, ConfigFieldRef>> config_fields(ExperimentConfig& cfg);

}  // namespace l2m
