#include "l2m/matching.hpp"

#include <algorithm>
#include <cmath>

#include "l2m/kernels.hpp"

namespace l2m {

double median_bandwidth(const Tensor& points) {
    const int n = points.rows();
    if (n < 2) throw UsageError("median_bandwidth needs at least 2 points");
    const std::size_t d = points.cols();
    const std::size_t un = n;
    std::vector<double> sq(un * un);
    kernels::pairwise_sqdist(points.data.data(), points.data.data(), sq.data(), un, un, d);
    std::vector<double> dists;
    dists.reserve(un * (un - 1) / 2);
    for (std::size_t i = 0; i < un; ++i) {
        for (std::size_t j = i + 1; j < un; ++j) dists.push_back(sq[i * un + j]);
    }
    // Median of distances == monotone map of the squared-distance order
    // statistics, so select before taking square roots.
    const std::size_t m = dists.size();
    std::nth_element(dists.begin(), dists.begin() + m / 2, dists.end());
    double med = std::sqrt(dists[m / 2]);
    if (m % 2 == 0) {
        const double lower = *std::max_element(dists.begin(), dists.begin() + m / 2);
        med = 0.5 * (std::sqrt(lower) + med);
    }
    return med > 0.0 ? med : 1.0;
}

std::vector<double> resolve_bandwidths(const KernelSpec& spec, const Tensor& x,
                                       const Tensor& y) {
    for (double m : spec.multipliers) {
        if (m <= 0.0) throw ConfigError("kernel multipliers must be > 0");
    }
    double base;
    if (spec.base_bandwidth) {
        if (*spec.base_bandwidth <= 0.0) throw ConfigError("base_bandwidth must be > 0");
        base = *spec.base_bandwidth;
    } else {
        Tensor joined = Tensor::zeros({x.rows() + y.rows(), x.cols()});
        std::copy(x.data.begin(), x.data.end(), joined.data.begin());
        std::copy(y.data.begin(), y.data.end(), joined.data.begin() + x.data.size());
        base = median_bandwidth(joined);
    }
    std::vector<double> sigmas;
    sigmas.reserve(spec.multipliers.size());
    for (double m : spec.multipliers) sigmas.push_back(base * m);
    return sigmas;
}

Tensor rbf_kernel_matrix(const Tensor& x, const Tensor& y, const KernelSpec& spec) {
    if (x.cols() != y.cols()) {
        throw ShapeError("rbf_kernel_matrix: " + x.shape_str() + " vs " + y.shape_str());
    }
    const std::vector<double> sigmas = resolve_bandwidths(spec, x, y);
    const std::size_t n = x.rows(), m = y.rows(), d = x.cols();
    std::vector<double> sq(n * m);
    kernels::pairwise_sqdist(x.data.data(), y.data.data(), sq.data(), n, m, d);
    Tensor k = Tensor::zeros({static_cast<int>(n), static_cast<int>(m)});
    kernels::rbf_mix(sq.data(), k.data.data(), sq.size(), sigmas);
    return k;
}

namespace {
std::uint64_t mmd2_calls = 0;
}

std::uint64_t mmd2_call_count() { return mmd2_calls; }

Var mmd2_biased(Tape& tape, Var x, Var y, const KernelSpec& spec) {
    ++mmd2_calls;
    return tape.rbf_mmd2(x, y, resolve_bandwidths(spec, tape.value(x), tape.value(y)));
}

ConditionalMmd conditional_mmd(Tape& tape, Var emb_s, const std::vector<int>& ys,
                               Var emb_t, const std::vector<int>& pseudo_labels,
                               const std::vector<double>& confidences, int num_classes,
                               const KernelSpec& spec, double tau) {
    if (tau < 0.0 || tau > 1.0) throw UsageError("conditional_mmd: tau must be in [0,1]");
    ConditionalMmd out;
    std::optional<Var> acc;
    int qualified = 0;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<int> src_idx, tgt_idx;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (ys[i] == c) src_idx.push_back(static_cast<int>(i));
        }
        for (std::size_t j = 0; j < pseudo_labels.size(); ++j) {
            if (pseudo_labels[j] == c && confidences[j] >= tau) {
                tgt_idx.push_back(static_cast<int>(j));
            }
        }
        if (src_idx.empty() || tgt_idx.empty()) continue;
        Var mc = mmd2_biased(tape, tape.select_rows(emb_s, std::move(src_idx)),
                             tape.select_rows(emb_t, std::move(tgt_idx)), spec);
        acc = acc ? tape.add(*acc, mc) : mc;
        ++qualified;
    }
    if (!acc) {
        out.value = tape.leaf(Tensor::scalar(0.0));
        out.degenerate = true;
        return out;
    }
    out.value = tape.scale(*acc, 1.0 / qualified);
    return out;
}

namespace {

// One discriminator SGD step on detached embedding values.
double discriminator_step(Mlp& disc, const Tensor& inputs,
                          const std::vector<double>& targets, double disc_lr) {
    Tape scratch;
    StagedMlp staged = stage_mlp(scratch, disc, true);
    Var z = mlp_forward_logits(scratch, staged, scratch.leaf(inputs));
    Var loss = scratch.bce_with_logits(z, targets);
    scratch.backward(loss);
    disc.params.accumulate_grads(scratch, staged.vars);
    const double v = scratch.value(loss).data[0];
    sgd_step(disc.params, disc_lr);
    return v;
}

}  // namespace

AdversarialResult adversarial_marginal(Tape& tape, Mlp& disc, Var emb_s, Var emb_t,
                                       double disc_lr) {
    const Tensor& es = tape.value(emb_s);
    const Tensor& et = tape.value(emb_t);
    if (es.rows() == 0 || et.rows() == 0) {
        throw UsageError("adversarial_marginal: both domains must be non-empty");
    }
    std::vector<double> targets(es.rows() + et.rows(), 0.0);
    for (int i = 0; i < es.rows(); ++i) targets[i] = 1.0;  // 1 == source

    AdversarialResult out;
    {
        Tensor joined = Tensor::zeros({es.rows() + et.rows(), es.cols()});
        std::copy(es.data.begin(), es.data.end(), joined.data.begin());
        std::copy(et.data.begin(), et.data.end(), joined.data.begin() + es.data.size());
        out.disc_loss = discriminator_step(disc, joined, targets, disc_lr);
    }
    // Recompute with the updated discriminator frozen, embeddings live.
    StagedMlp staged = stage_mlp(tape, disc, false);
    Var z = mlp_forward_logits(tape, staged, tape.concat_rows(emb_s, emb_t));
    out.value = tape.bce_with_logits(z, std::move(targets));
    return out;
}

AdversarialResult adversarial_conditional(Tape& tape, std::vector<Mlp>& discs,
                                          Var emb_s, const Tensor& soft_s, Var emb_t,
                                          const Tensor& soft_t, double disc_lr) {
    // Copies: recording nodes below may reallocate the tape's storage.
    const Tensor es = tape.value(emb_s);
    const Tensor et = tape.value(emb_t);
    if (es.rows() == 0 || et.rows() == 0) {
        throw UsageError("adversarial_conditional: both domains must be non-empty");
    }
    const int num_classes = static_cast<int>(discs.size());
    if (soft_s.rows() != es.rows() || soft_t.rows() != et.rows() ||
        soft_s.cols() != num_classes || soft_t.cols() != num_classes) {
        throw ShapeError("adversarial_conditional: soft predictions " + soft_s.shape_str() +
                         "/" + soft_t.shape_str() + " do not match embeddings and " +
                         std::to_string(num_classes) + " classes");
    }
    std::vector<double> targets(es.rows() + et.rows(), 0.0);
    for (int i = 0; i < es.rows(); ++i) targets[i] = 1.0;

    AdversarialResult out;
    std::optional<Var> acc;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> scales(targets.size());
        for (int i = 0; i < es.rows(); ++i) scales[i] = soft_s.at(i, c);
        for (int j = 0; j < et.rows(); ++j) scales[es.rows() + j] = soft_t.at(j, c);

        {
            Tensor joined = Tensor::zeros({es.rows() + et.rows(), es.cols()});
            for (int i = 0; i < es.rows(); ++i)
                for (int p = 0; p < es.cols(); ++p) joined.at(i, p) = es.at(i, p) * scales[i];
            for (int j = 0; j < et.rows(); ++j)
                for (int p = 0; p < es.cols(); ++p)
                    joined.at(es.rows() + j, p) = et.at(j, p) * scales[es.rows() + j];
            out.disc_loss += discriminator_step(discs[c], joined, targets, disc_lr);
        }

        StagedMlp staged = stage_mlp(tape, discs[c], false);
        Var joined = tape.concat_rows(emb_s, emb_t);
        Var scaled = tape.row_scale(joined, tape.leaf(Tensor::vector(scales)));
        Var z = mlp_forward_logits(tape, staged, scaled);
        Var loss_c = tape.bce_with_logits(z, targets);
        acc = acc ? tape.add(*acc, loss_c) : loss_c;
    }
    out.disc_loss /= num_classes;
    out.value = tape.scale(*acc, 1.0 / num_classes);
    return out;
}

MatchMode parse_match_mode(const std::string& name) {
    if (name == "emb") return MatchMode::kEmb;
    if (name == "logit") return MatchMode::kLogit;
    if (name == "mmd") return MatchMode::kMmd;
    if (name == "adv") return MatchMode::kAdv;
    if (name == "emb+mmd") return MatchMode::kEmbMmd;
    if (name == "emb+adv") return MatchMode::kEmbAdv;
    if (name == "logit+mmd") return MatchMode::kLogitMmd;
    if (name == "logit+adv") return MatchMode::kLogitAdv;
    throw ConfigError("unknown matching mode: " + name);
}

std::string match_mode_name(MatchMode mode) {
    switch (mode) {
        case MatchMode::kEmb: return "emb";
        case MatchMode::kLogit: return "logit";
        case MatchMode::kMmd: return "mmd";
        case MatchMode::kAdv: return "adv";
        case MatchMode::kEmbMmd: return "emb+mmd";
        case MatchMode::kEmbAdv: return "emb+adv";
        case MatchMode::kLogitMmd: return "logit+mmd";
        case MatchMode::kLogitAdv: return "logit+adv";
    }
    throw ConfigError("bad matching mode");
}

bool mode_uses_mmd(MatchMode m) {
    return m == MatchMode::kMmd || m == MatchMode::kEmbMmd || m == MatchMode::kLogitMmd;
}

bool mode_uses_adv(MatchMode m) {
    return m == MatchMode::kAdv || m == MatchMode::kEmbAdv || m == MatchMode::kLogitAdv;
}

bool mode_uses_emb(MatchMode m) {
    return m == MatchMode::kEmb || m == MatchMode::kEmbMmd || m == MatchMode::kEmbAdv;
}

bool mode_uses_logit(MatchMode m) {
    return m == MatchMode::kLogit || m == MatchMode::kLogitMmd || m == MatchMode::kLogitAdv;
}

int feature_dim(MatchMode mode, int emb_dim, int num_classes, bool pair_concat) {
    const int e = pair_concat ? 2 * emb_dim : emb_dim;
    const int c = pair_concat ? 2 * num_classes : num_classes;
    switch (mode) {
        case MatchMode::kEmb: return e;
        case MatchMode::kLogit: return c;
        case MatchMode::kMmd: return 2;
        case MatchMode::kAdv: return 2;
        case MatchMode::kEmbMmd: return e + 2;
        case MatchMode::kEmbAdv: return e + 2;
        case MatchMode::kLogitMmd: return c + 2;
        case MatchMode::kLogitAdv: return c + 2;
    }
    throw ConfigError("bad matching mode");
}

namespace {

std::vector<int> first_indices(int count) {
    std::vector<int> idx(count);
    for (int i = 0; i < count; ++i) idx[i] = i;
    return idx;
}

}  // namespace

MatchingFeature build_matching_features(Tape& tape, MatchMode mode,
                                        const MatchingInputs& in) {
    int rows = 0;
    if (in.emb_s && in.emb_t) {
        rows = std::min(tape.value(*in.emb_s).rows(), tape.value(*in.emb_t).rows());
    } else if (in.logits_s && in.logits_t) {
        rows = std::min(tape.value(*in.logits_s).rows(), tape.value(*in.logits_t).rows());
    } else {
        rows = 1;
    }
    if (rows < 1) throw UsageError("build_matching_features: empty batch");

    std::optional<Var> task_rows;
    if (mode_uses_emb(mode)) {
        if (!in.emb_s || !in.emb_t) throw ConfigError("matching mode needs embeddings");
        Var a = tape.select_rows(*in.emb_s, first_indices(rows));
        Var b = tape.select_rows(*in.emb_t, first_indices(rows));
        task_rows = in.pair_concat ? tape.concat_cols(a, b) : tape.sub(a, b);
    } else if (mode_uses_logit(mode)) {
        if (!in.logits_s || !in.logits_t) throw ConfigError("matching mode needs logits");
        Var a = tape.softmax_rows(tape.select_rows(*in.logits_s, first_indices(rows)));
        Var b = tape.softmax_rows(tape.select_rows(*in.logits_t, first_indices(rows)));
        task_rows = in.pair_concat ? tape.concat_cols(a, b) : tape.sub(a, b);
    }

    std::optional<Var> dist_rows;
    if (mode_uses_mmd(mode)) {
        if (!in.d_m || !in.d_c) throw ConfigError("matching mode needs MMD distances");
        dist_rows = tape.concat_cols(tape.broadcast_scalar(*in.d_m, rows),
                                     tape.broadcast_scalar(*in.d_c, rows));
    } else if (mode_uses_adv(mode)) {
        if (!in.adv_m || !in.adv_c) throw ConfigError("matching mode needs adversarial distances");
        dist_rows = tape.concat_cols(tape.broadcast_scalar(*in.adv_m, rows),
                                     tape.broadcast_scalar(*in.adv_c, rows));
    }

    Var rows_var;
    if (task_rows && dist_rows) {
        rows_var = tape.concat_cols(*task_rows, *dist_rows);
    } else if (task_rows) {
        rows_var = *task_rows;
    } else if (dist_rows) {
        rows_var = *dist_rows;
    } else {
        throw ConfigError("matching mode produced no features");
    }
    return MatchingFeature{rows_var, mode, tape.value(rows_var).cols()};
}

PseudoLabels pseudo_labels_from_logits(const Tensor& logits) {
    PseudoLabels out;
    const int rows = logits.rows(), cols = logits.cols();
    out.soft = Tensor::zeros({rows, cols});
    out.labels.resize(rows);
    out.confidences.resize(rows);
    for (int r = 0; r < rows; ++r) {
        double mx = logits.at(r, 0);
        for (int c = 1; c < cols; ++c) mx = std::max(mx, logits.at(r, c));
        double denom = 0.0;
        for (int c = 0; c < cols; ++c) {
            out.soft.at(r, c) = std::exp(logits.at(r, c) - mx);
            denom += out.soft.at(r, c);
        }
        int best = 0;
        for (int c = 0; c < cols; ++c) {
            out.soft.at(r, c) /= denom;
            if (out.soft.at(r, c) > out.soft.at(r, best)) best = c;
        }
        out.labels[r] = best;
        out.confidences[r] = out.soft.at(r, best);
    }
    return out;
}

Tensor one_hot(const std::vector<int>& labels, int num_classes) {
    Tensor out = Tensor::zeros({static_cast<int>(labels.size()), num_classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw DataError("one_hot: label out of range at row " + std::to_string(i));
        }
        out.at(static_cast<int>(i), labels[i]) = 1.0;
    }
    return out;
}

}  // namespace l2m
