#include "l2m/param.hpp"

#include <cmath>

namespace l2m {

void ParamSet::add(std::string name, Tensor value) {
    for (const Param& p : params_) {
        if (p.name == name) throw UsageError("duplicate parameter name: " + name);
    }
    Param p;
    p.name = std::move(name);
    p.grad = Tensor::zeros(value.shape);
    p.value = std::move(value);
    params_.push_back(std::move(p));
}

Param& ParamSet::at(const std::string& name) {
    for (Param& p : params_) {
        if (p.name == name) return p;
    }
    throw UsageError("no parameter named " + name);
}

const Param& ParamSet::at(const std::string& name) const {
    return const_cast<ParamSet*>(this)->at(name);
}

std::size_t ParamSet::total_coords() const {
    std::size_t n = 0;
    for (const Param& p : params_) n += p.value.numel();
    return n;
}

void ParamSet::zero_grad() {
    for (Param& p : params_) {
        std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
        p.grad_set = false;
    }
}

std::vector<Var> ParamSet::stage(Tape& tape, bool trainable) const {
    std::vector<Var> vars;
    vars.reserve(params_.size());
    for (const Param& p : params_) vars.push_back(tape.leaf(p.value, trainable));
    return vars;
}

void ParamSet::accumulate_grads(const Tape& tape, const std::vector<Var>& vars) {
    if (vars.size() != params_.size()) {
        throw UsageError("accumulate_grads: var count does not match parameter count");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Tensor& g = tape.grad(vars[i]);
        if (!g.same_shape(params_[i].value)) {
            throw ShapeError("gradient shape mismatch for " + params_[i].name);
        }
        for (std::size_t j = 0; j < g.data.size(); ++j) params_[i].grad.data[j] += g.data[j];
        params_[i].grad_set = true;
    }
}

double global_grad_norm(const ParamSet& params) {
    double acc = 0.0;
    for (const Param& p : params) {
        for (double v : p.grad.data) acc += v * v;
    }
    return std::sqrt(acc);
}

void sgd_step(ParamSet& params, double learning_rate, std::optional<double> clip_norm,
              double weight_decay) {
    for (const Param& p : params) {
        if (!p.grad_set) throw UsageError("sgd_step: missing gradient for parameter " + p.name);
    }
    if (weight_decay != 0.0) {
        for (Param& p : params) {
            for (std::size_t i = 0; i < p.grad.data.size(); ++i) {
                p.grad.data[i] += weight_decay * p.value.data[i];
            }
        }
    }
    if (clip_norm) {
        const double norm = global_grad_norm(params);
        if (norm > *clip_norm) {
            const double s = *clip_norm / norm;
            for (Param& p : params) {
                for (double& v : p.grad.data) v *= s;
            }
        }
    }
    for (Param& p : params) {
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            p.value.data[i] -= learning_rate * p.grad.data[i];
        }
    }
    params.zero_grad();
}

GradcheckReport finite_difference_gradcheck(
    ParamSet& params, const std::function<double(const ParamSet&)>& loss_fn, double h) {
    GradcheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param& p = params[pi];
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double orig = p.value.data[i];
            const double step = h * std::max(1.0, std::abs(orig));
            p.value.data[i] = orig + step;
            const double lp = loss_fn(params);
            p.value.data[i] = orig - step;
            const double lm = loss_fn(params);
            p.value.data[i] = orig;
            if (std::isnan(lp) || std::isnan(lm)) {
                throw NumericError("gradcheck: NaN loss at parameter " + p.name);
            }
            const double fd = (lp - lm) / (2.0 * step);
            const double an = p.grad.data[i];
            // Floor above the central-difference noise scale (~eps/h), so a
            // dead unit's zero gradient is not compared against FD round-off.
            const double denom = std::max({std::abs(fd), std::abs(an), 1e-6});
            const double rel = std::abs(fd - an) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = p.name;
                report.worst_coord = i;
            }
        }
    }
    return report;
}

}  // namespace l2m
