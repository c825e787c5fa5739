#pragma once

#include <optional>

#include "l2m/config.hpp"
#include "l2m/dataset.hpp"
#include "l2m/io.hpp"
#include "l2m/matching.hpp"
#include "l2m/models.hpp"

namespace l2m {

// High-confidence pseudo-labeled target samples, at most per_class per class.
struct MetaData {
    Tensor samples;  // k x in
    std::vector<int> pseudo_labels;
    std::vector<double> confidences;
    std::vector<int> per_class_counts;

    bool empty() const { return pseudo_labels.empty(); }
};

// eta_k = eta0 * (1 + gamma k)^(-upsilon), monotone non-increasing.
double lr_schedule(int step, double eta0, double gamma, double upsilon);

// lambda(p) = lambda_max * (2 / (1 + e^{-10p}) - 1) for progress p in [0,1].
double lambda_schedule(double progress, double lambda_max);

// Per class: target samples predicted as that class with confidence >= tau,
// highest confidence first (ties by ascending index), truncated to per_class.
MetaData select_meta_data(const ModelBundle& bundle, const Dataset& target,
                          int per_class, double tau);

enum class MatchLoss {
    kNone,     // source_only: classification loss alone
    kLearned,  // l2m: the meta-network output
    kMmd,      // mmd_align: d_m + d_c
    kAdv,      // adv_align: domain confusion, -(D_m + D_c)
};

struct StepLosses {
    double loss_cls = 0.0;
    double loss_match = 0.0;
};

// One SGD step on feature extractor + classifier with loss
// L_cls + lambda * L_match; the meta-network is frozen here. Matching is
// skipped entirely when lambda == 0 or kind == kNone.
StepLosses main_update(ModelBundle& bundle, const Tensor& xs, const std::vector<int>& ys,
                       const Tensor& xt, MatchLoss kind, MatchMode mode,
                       const ExperimentConfig& cfg, double lambda, double eta);

// One SGD step on the meta-network from the two parameter snapshots:
// minimizes mean tanh(sign * (g(F@phi_t) - g(F@phi_t1))) over meta rows.
// Returns the loss value. Both snapshots are detached; only theta trains.
double meta_update(ModelBundle& bundle, const ModelBundle& phi_t,
                   const ModelBundle& phi_t1, const Tensor& xs_fresh,
                   const std::vector<int>& ys_fresh, const MetaData& meta,
                   MatchMode mode, const ExperimentConfig& cfg, double beta);

struct TrainResult {
    ModelBundle bundle;
    std::vector<MetricsRow> log;
};

// Source/target pair described by the config's [dataset] section.
std::pair<Dataset, Dataset> make_datasets(const ExperimentConfig& cfg);

TrainResult train_l2m(const ExperimentConfig& cfg, const Dataset& source,
                      const Dataset& target, MetricsWriter* writer = nullptr);

TrainResult train_baseline(const std::string& kind, const ExperimentConfig& cfg,
                           const Dataset& source, const Dataset& target,
                           MetricsWriter* writer = nullptr);

// Dispatch on cfg.method.
TrainResult run_training(const ExperimentConfig& cfg, const Dataset& source,
                         const Dataset& target, MetricsWriter* writer = nullptr);

}  // namespace l2m
