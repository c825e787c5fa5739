#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2m/tape.hpp"
#include "l2m/tensor.hpp"

namespace l2m {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool grad_set = false;
};

// Ordered, named collection of trainable tensors (one network).
class ParamSet {
public:
    void add(std::string name, Tensor value);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    Param& operator[](std::size_t i) { return params_[i]; }
    const Param& operator[](std::size_t i) const { return params_[i]; }
    std::size_t size() const { return params_.size(); }
    std::size_t total_coords() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();
    // Copy tape gradients (one Var per param, in order) into this set,
    // accumulating over repeated calls until the next sgd_step.
    void accumulate_grads(const Tape& tape, const std::vector<Var>& vars);
    // Register every param value as a tape leaf, in order.
    std::vector<Var> stage(Tape& tape, bool trainable = true) const;

private:
    std::vector<Param> params_;
};

// p <- p - lr * grad, with optional global-norm clipping applied first.
// Gradients are zeroed afterwards.
void sgd_step(ParamSet& params, double learning_rate,
              std::optional<double> clip_norm = std::nullopt,
              double weight_decay = 0.0);

double global_grad_norm(const ParamSet& params);

struct GradcheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_coord = 0;
};

// Central finite differences against the gradients currently stored in
// params (populated by a prior backward). loss_fn must be deterministic
// in the parameter values. h is scaled per coordinate by max(1, |p|).
GradcheckReport finite_difference_gradcheck(
    ParamSet& params, const std::function<double(const ParamSet&)>& loss_fn, double h);

}  // namespace l2m
