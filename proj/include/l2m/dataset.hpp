#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "l2m/tensor.hpp"

namespace l2m {

enum class DomainTag { kSource, kTarget };

struct Dataset {
    Tensor features;  // n x d
    std::vector<int> labels;
    int num_classes = 0;
    DomainTag domain_tag = DomainTag::kSource;
    // Original label values for CSV loads, indexed by remapped label.
    std::vector<std::string> label_names;

    int size() const { return features.rows(); }
    int dim() const { return features.cols(); }
};

struct BatchPlan {
    int batch_size = 32;
    std::uint64_t seed = 0;
    bool drop_last = false;
    int epoch = 0;
};

// Two interleaved unit half-circles plus isotropic Gaussian noise.
Dataset make_two_moons(int n, double noise_sd, std::uint64_t seed);

// 2-D rotation of every point; labels unchanged, tag set to target.
Dataset rotate_domain(const Dataset& ds, double angle_deg);

// Class-conditional Gaussians at fixed centers; target classes are the
// same Gaussians translated by shift and scaled by scale. Both domains
// are standardized with source statistics.
std::pair<Dataset, Dataset> make_shifted_blobs(int num_classes, int n_per_class,
                                               const std::vector<double>& shift,
                                               double scale, std::uint64_t seed);

// Deterministic shuffled partition of [0, n) for one epoch.
std::vector<std::vector<int>> batch_iterator(const Dataset& ds, const BatchPlan& plan);

// CSV with optional header (auto-detected by a non-numeric first line).
// label_column is a column name or a 0-based index.
Dataset load_csv_dataset(const std::string& path, const std::string& label_column);

void write_csv_dataset(const Dataset& ds, const std::string& path);

}  // namespace l2m
