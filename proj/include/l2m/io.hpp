#pragma once

#include <fstream>
#include <optional>
#include <string>

#include "l2m/config.hpp"
#include "l2m/dataset.hpp"
#include "l2m/models.hpp"

namespace l2m {

struct MetricsRow {
    int epoch = 0;
    int step = 0;
    double loss_cls = 0.0;
    double loss_match = 0.0;
    double loss_meta = 0.0;
    double target_accuracy = 0.0;
    std::optional<double> a_distance;
    std::uint64_t seed = 0;
};

// Append-only CSV log, one row per epoch. Header emitted on first write;
// floats carry 9 significant digits.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);
    void write(const MetricsRow& row);
    int rows_written() const { return rows_; }

private:
    std::ofstream out_;
    std::string path_;
    int rows_ = 0;
};

// Single JSON document: {"version":1, "config":{...}, "tensors":{...}}.
// Doubles round-trip bit-exactly.
void save_checkpoint(const ModelBundle& bundle, const ExperimentConfig& config,
                     const std::string& path);

struct Checkpoint {
    ModelBundle bundle;
    ExperimentConfig config;
};

Checkpoint load_checkpoint(const std::string& path);

// CSV of per-sample embedding + label + domain tag (1 source, 0 target).
void export_embeddings(const ModelBundle& bundle, const Dataset& ds,
                       const std::string& path);

}  // namespace l2m
