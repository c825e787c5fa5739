#include "l2m/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "l2m/metrics.hpp"

namespace l2m {

double lr_schedule(int step, double eta0, double gamma, double upsilon) {
    if (step < 0) throw UsageError("lr_schedule: negative step");
    return eta0 * std::pow(1.0 + gamma * step, -upsilon);
}

double lambda_schedule(double progress, double lambda_max) {
    if (progress < 0.0 || progress > 1.0) {
        throw UsageError("lambda_schedule: progress outside [0,1]");
    }
    return lambda_max * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
}

namespace {

Tensor gather_rows(const Tensor& m, const std::vector<int>& idx) {
    Tensor out = Tensor::zeros({static_cast<int>(idx.size()), m.cols()});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        for (int c = 0; c < m.cols(); ++c) out.at(static_cast<int>(r), c) = m.at(idx[r], c);
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) out[r] = labels[idx[r]];
    return out;
}

// Cycling mini-batch source: reshuffles per pass with a pass-dependent seed.
class BatchStream {
public:
    BatchStream(const Dataset& ds, int batch_size, std::uint64_t seed)
        : ds_(&ds), batch_size_(batch_size), seed_(seed) {}

    const std::vector<int>& next() {
        if (next_i_ >= batches_.size()) {
            batches_ = batch_iterator(*ds_, {batch_size_, seed_, false, passes_});
            next_i_ = 0;
            ++passes_;
        }
        return batches_[next_i_++];
    }

    int passes_done() const { return passes_; }

private:
    const Dataset* ds_;
    int batch_size_;
    std::uint64_t seed_;
    int passes_ = 0;
    std::vector<std::vector<int>> batches_;
    std::size_t next_i_ = 0;
};

struct MatchTerms {
    std::optional<Var> d_m, d_c, adv_m, adv_c;
};

// The scalar distribution distances feeding a matching mode. Discriminator
// parameters in `bundle` are advanced by the adversarial two-phase step.
MatchTerms compute_match_terms(Tape& tape, ModelBundle& bundle, Var emb_s,
                               const std::vector<int>& ys, Var emb_t,
                               const Tensor& logits_t_value, bool want_mmd,
                               bool want_adv, const ExperimentConfig& cfg) {
    MatchTerms t;
    if (!want_mmd && !want_adv) return t;
    const int num_classes = bundle.num_classes();
    const PseudoLabels pl = pseudo_labels_from_logits(logits_t_value);
    if (want_mmd) {
        KernelSpec kspec;
        t.d_m = mmd2_biased(tape, emb_s, emb_t, kspec);
        t.d_c = conditional_mmd(tape, emb_s, ys, emb_t, pl.labels, pl.confidences,
                                num_classes, kspec, cfg.tau)
                    .value;
    }
    if (want_adv) {
        t.adv_m = adversarial_marginal(tape, bundle.disc_marginal, emb_s, emb_t,
                                       cfg.disc_lr)
                      .value;
        t.adv_c = adversarial_conditional(tape, bundle.disc_conditional, emb_s,
                                          one_hot(ys, num_classes), emb_t, pl.soft,
                                          cfg.disc_lr)
                      .value;
    }
    return t;
}

std::optional<double> clip_of(const ExperimentConfig& cfg) {
    if (cfg.clip_norm > 0.0) return cfg.clip_norm;
    return std::nullopt;
}

// Start the meta-network as a damped random MLP plus a pass-through of the
// two scalar distance features (the last two feature columns), signed like
// the corresponding fixed baseline. A fully random start gives the main
// model arbitrary early matching directions, which on ambiguous geometry
// locks pseudo-labels into flipped classes; this way the learned loss
// begins as a surrogate of the distance it generalizes and the comparison
// updates adapt it from there.
void tilt_meta_init(Mlp& meta, int feature_dim, int meta_hidden, double direction) {
    if (meta_hidden < 2) return;
    for (Param& p : meta.params) {
        for (double& v : p.value.data) v *= 0.1;
    }
    Tensor& w0 = meta.params.at("w0").value;
    for (int i = 0; i < feature_dim; ++i) {
        w0.at(i, 0) = i == feature_dim - 2 ? 1.0 : 0.0;
        w0.at(i, 1) = i == feature_dim - 1 ? 1.0 : 0.0;
    }
    Tensor& w1 = meta.params.at("w1").value;
    for (int i = 0; i < meta_hidden; ++i) {
        w1.at(i, 0) = i == 0 ? 1.0 : 0.0;
        w1.at(i, 1) = i == 1 ? 1.0 : 0.0;
    }
    Tensor& w2 = meta.params.at("w2").value;
    w2.at(0, 0) = direction;
    w2.at(1, 0) = direction;
}

}  // namespace

MetaData select_meta_data(const ModelBundle& bundle, const Dataset& target,
                          int per_class, double tau) {
    if (per_class < 1) throw UsageError("select_meta_data: per_class must be >= 1");
    const Tensor logits = compute_logits(bundle, target.features);
    const PseudoLabels pl = pseudo_labels_from_logits(logits);
    const int num_classes = bundle.num_classes();

    MetaData md;
    md.per_class_counts.assign(num_classes, 0);
    std::vector<int> chosen;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<int> cand;
        for (int i = 0; i < target.size(); ++i) {
            if (pl.labels[i] == c && pl.confidences[i] >= tau) cand.push_back(i);
        }
        std::sort(cand.begin(), cand.end(), [&](int a, int b) {
            if (pl.confidences[a] != pl.confidences[b]) {
                return pl.confidences[a] > pl.confidences[b];
            }
            return a < b;
        });
        if (static_cast<int>(cand.size()) > per_class) cand.resize(per_class);
        md.per_class_counts[c] = static_cast<int>(cand.size());
        chosen.insert(chosen.end(), cand.begin(), cand.end());
    }
    md.samples = gather_rows(target.features, chosen);
    md.pseudo_labels = gather_labels(pl.labels, chosen);
    for (int i : chosen) md.confidences.push_back(pl.confidences[i]);
    return md;
}

StepLosses main_update(ModelBundle& bundle, const Tensor& xs, const std::vector<int>& ys,
                       const Tensor& xt, MatchLoss kind, MatchMode mode,
                       const ExperimentConfig& cfg, double lambda, double eta) {
    if (xs.rows() == 0 || xt.rows() == 0) throw UsageError("main_update: empty batch");
    Tape tape;
    StagedMlp fe = stage_mlp(tape, bundle.feature_extractor, true);
    StagedMlp cls = stage_mlp(tape, bundle.classifier, true);
    Var emb_s = mlp_forward(tape, fe, tape.leaf(xs));
    Var logits_s = mlp_forward(tape, cls, emb_s);
    Var loss = tape.softmax_cross_entropy(logits_s, ys);

    StepLosses out;
    out.loss_cls = tape.value(loss).data[0];

    if (kind != MatchLoss::kNone && lambda != 0.0) {
        Var emb_t = mlp_forward(tape, fe, tape.leaf(xt));
        Var logits_t = mlp_forward(tape, cls, emb_t);
        Var match;
        if (kind == MatchLoss::kLearned) {
            MatchTerms t = compute_match_terms(tape, bundle, emb_s, ys, emb_t,
                                               tape.value(logits_t), mode_uses_mmd(mode),
                                               mode_uses_adv(mode), cfg);
            MatchingInputs in;
            in.pair_concat = cfg.pair_concat;
            if (mode_uses_emb(mode)) {
                in.emb_s = emb_s;
                in.emb_t = emb_t;
            }
            if (mode_uses_logit(mode)) {
                in.logits_s = logits_s;
                in.logits_t = logits_t;
            }
            in.d_m = t.d_m;
            in.d_c = t.d_c;
            in.adv_m = t.adv_m;
            in.adv_c = t.adv_c;
            MatchingFeature feat = build_matching_features(tape, mode, in);
            StagedMlp meta = stage_mlp(tape, bundle.meta_net, false);
            match = meta_forward(tape, meta, feat.rows);
        } else if (kind == MatchLoss::kMmd) {
            MatchTerms t = compute_match_terms(tape, bundle, emb_s, ys, emb_t,
                                               tape.value(logits_t), true, false, cfg);
            match = tape.add(*t.d_m, *t.d_c);
        } else {
            // Domain confusion: the feature extractor maximizes the
            // discriminators' cross-entropy.
            MatchTerms t = compute_match_terms(tape, bundle, emb_s, ys, emb_t,
                                               tape.value(logits_t), false, true, cfg);
            match = tape.scale(tape.add(*t.adv_m, *t.adv_c), -1.0);
        }
        out.loss_match = tape.value(match).data[0];
        loss = tape.add(loss, tape.scale(match, lambda));
    }

    if (!std::isfinite(tape.value(loss).data[0])) {
        throw NumericError("non-finite training loss");
    }
    tape.backward(loss);
    bundle.feature_extractor.params.accumulate_grads(tape, fe.vars);
    bundle.classifier.params.accumulate_grads(tape, cls.vars);
    sgd_step(bundle.feature_extractor.params, eta, clip_of(cfg));
    sgd_step(bundle.classifier.params, eta, clip_of(cfg));
    return out;
}

double meta_update(ModelBundle& bundle, const ModelBundle& phi_t,
                   const ModelBundle& phi_t1, const Tensor& xs_fresh,
                   const std::vector<int>& ys_fresh, const MetaData& meta,
                   MatchMode mode, const ExperimentConfig& cfg, double beta) {
    if (meta.empty()) throw UsageError("meta_update: empty meta-data");
    Tape tape;
    StagedMlp g = stage_mlp(tape, bundle.meta_net, true);

    // Features from one parameter snapshot, detached so only theta trains.
    auto features_for = [&](const ModelBundle& snap) -> Var {
        Var emb_s = tape.leaf(compute_embeddings(snap, xs_fresh));
        Var emb_m = tape.leaf(compute_embeddings(snap, meta.samples));
        const Tensor logits_m = compute_logits(snap, meta.samples);
        // Scratch copy keeps the snapshot's discriminators untouched.
        ModelBundle scratch = snap;
        MatchTerms t = compute_match_terms(tape, scratch, emb_s, ys_fresh, emb_m,
                                           logits_m, mode_uses_mmd(mode),
                                           mode_uses_adv(mode), cfg);
        MatchingInputs in;
        in.pair_concat = cfg.pair_concat;
        if (mode_uses_emb(mode)) {
            in.emb_s = emb_s;
            in.emb_t = emb_m;
        }
        if (mode_uses_logit(mode)) {
            in.logits_s = tape.leaf(compute_logits(snap, xs_fresh));
            in.logits_t = tape.leaf(logits_m);
        }
        in.d_m = t.d_m;
        in.d_c = t.d_c;
        in.adv_m = t.adv_m;
        in.adv_c = t.adv_c;
        return build_matching_features(tape, mode, in).rows;
    };

    Var r_t = mlp_forward(tape, g, features_for(phi_t));
    Var r_t1 = mlp_forward(tape, g, features_for(phi_t1));
    Var diff = tape.scale(tape.sub(r_t, r_t1), static_cast<double>(cfg.meta_loss_sign));
    Var loss = tape.mean(tape.activation(diff, Act::kTanh));

    const double value = tape.value(loss).data[0];
    if (!std::isfinite(value)) throw NumericError("non-finite meta loss");
    tape.backward(loss);
    bundle.meta_net.params.accumulate_grads(tape, g.vars);
    sgd_step(bundle.meta_net.params, beta, std::nullopt, cfg.meta_weight_decay);
    return value;
}

std::pair<Dataset, Dataset> make_datasets(const ExperimentConfig& cfg) {
    if (cfg.dataset_kind == "two_moons") {
        Dataset source = make_two_moons(cfg.moons_n, cfg.moons_noise_sd, cfg.seed);
        Dataset target = rotate_domain(
            make_two_moons(cfg.moons_n, cfg.moons_noise_sd, cfg.seed + 1),
            cfg.rotation_deg);
        return {std::move(source), std::move(target)};
    }
    if (cfg.dataset_kind == "blobs") {
        return make_shifted_blobs(cfg.blob_classes, cfg.blob_n_per_class,
                                  {cfg.blob_shift_x, cfg.blob_shift_y}, cfg.blob_scale,
                                  cfg.seed);
    }
    if (cfg.dataset_kind == "csv") {
        Dataset source = load_csv_dataset(cfg.source_csv, cfg.label_column);
        Dataset target = load_csv_dataset(cfg.target_csv, cfg.label_column);
        target.domain_tag = DomainTag::kTarget;
        if (source.dim() != target.dim()) {
            throw DataError("source and target CSV datasets have different widths");
        }
        const int classes = std::max(source.num_classes, target.num_classes);
        source.num_classes = classes;
        target.num_classes = classes;
        return {std::move(source), std::move(target)};
    }
    throw ConfigError("unknown dataset kind " + cfg.dataset_kind);
}

namespace {

void save_abort_checkpoint(const ModelBundle& bundle, const ExperimentConfig& cfg) {
    try {
        std::filesystem::create_directories(cfg.out_dir);
        save_checkpoint(bundle, cfg, cfg.out_dir + "/abort_checkpoint.json");
    } catch (const Error&) {
        // Best effort; the numeric error below is the one to surface.
    }
}

TrainResult train_loop(const ExperimentConfig& cfg, MatchLoss kind, bool learned_loop,
                       const Dataset& source, const Dataset& target,
                       MetricsWriter* writer) {
    cfg.validate();
    if (source.size() == 0 || target.size() == 0) {
        throw DataError("training needs non-empty source and target datasets");
    }
    if (source.dim() != target.dim()) {
        throw DataError("source and target feature dims differ");
    }
    const MatchMode mode = cfg.mode();

    BundleDims dims;
    dims.input_dim = source.dim();
    dims.emb_dim = cfg.emb_dim;
    dims.hidden = cfg.hidden;
    dims.num_classes = source.num_classes;
    dims.feature_dim = feature_dim(mode, cfg.emb_dim, source.num_classes, cfg.pair_concat);
    dims.meta_hidden = cfg.meta_hidden;
    dims.disc_hidden = cfg.disc_hidden;

    TrainResult res{build_bundle(dims, cfg.seed), {}};
    if (learned_loop && cfg.lambda_max != 0.0 &&
        (mode_uses_mmd(mode) || mode_uses_adv(mode))) {
        tilt_meta_init(res.bundle.meta_net, dims.feature_dim, dims.meta_hidden,
                       mode_uses_adv(mode) ? -1.0 : 1.0);
    }
    BatchStream bs(source, cfg.batch_size, cfg.seed);
    BatchStream bt(target, cfg.batch_size, cfg.seed + 1);

    for (int t = 0; t < cfg.max_steps; ++t) {
        const std::vector<int> is = bs.next();
        const int pass = bs.passes_done() - 1;
        const std::vector<int> it = bt.next();
        const Tensor xs = gather_rows(source.features, is);
        const std::vector<int> ys = gather_labels(source.labels, is);
        const Tensor xt = gather_rows(target.features, it);

        const double eta = lr_schedule(t, cfg.eta0, cfg.gamma, cfg.upsilon);
        double lambda = 0.0;
        if (kind != MatchLoss::kNone) {
            if (cfg.lambda_mode == "ramp") {
                const double p =
                    cfg.max_steps > 1 ? static_cast<double>(t) / (cfg.max_steps - 1) : 1.0;
                lambda = lambda_schedule(p, cfg.lambda_max);
            } else {
                lambda = cfg.lambda_max;
            }
        }

        StepLosses losses;
        double loss_meta = 0.0;
        try {
            if (learned_loop) {
                ModelBundle assist = clone_assist(res.bundle);
                losses = main_update(assist, xs, ys, xt, kind, mode, cfg, lambda, eta);
                if (cfg.meta_updates) {
                    const MetaData md =
                        select_meta_data(res.bundle, target, cfg.meta_per_class, cfg.tau);
                    for (int c = 0; c < res.bundle.num_classes(); ++c) {
                        if (md.per_class_counts[c] > cfg.meta_per_class) {
                            throw NumericError("meta-data invariant violated");
                        }
                    }
                    for (double conf : md.confidences) {
                        if (conf < cfg.tau) throw NumericError("meta-data invariant violated");
                    }
                    if (!md.empty()) {
                        const std::vector<int> ifr = bs.next();
                        const Tensor xf = gather_rows(source.features, ifr);
                        const std::vector<int> yf = gather_labels(source.labels, ifr);
                        const double beta = lr_schedule(t, cfg.beta0, cfg.gamma, cfg.upsilon);
                        loss_meta = meta_update(res.bundle, res.bundle, assist, xf, yf, md,
                                                mode, cfg, beta);
                    }
                }
                if (cfg.main_progress == "restep") {
                    losses = main_update(res.bundle, xs, ys, xt, kind, mode, cfg, lambda, eta);
                } else {
                    assist.meta_net = res.bundle.meta_net;
                    res.bundle = std::move(assist);
                }
            } else {
                losses = main_update(res.bundle, xs, ys, xt, kind, mode, cfg, lambda, eta);
            }
        } catch (const NumericError& e) {
            save_abort_checkpoint(res.bundle, cfg);
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(t));
        }

        MetricsRow row;
        row.epoch = pass;
        row.step = t;
        row.loss_cls = losses.loss_cls;
        row.loss_match = losses.loss_match;
        row.loss_meta = loss_meta;
        row.target_accuracy = accuracy(predict_labels(res.bundle, target.features),
                                       target.labels);
        row.seed = cfg.seed;
        res.log.push_back(row);
        if (writer) writer->write(row);
    }
    return res;
}

}  // namespace

TrainResult train_l2m(const ExperimentConfig& cfg, const Dataset& source,
                      const Dataset& target, MetricsWriter* writer) {
    return train_loop(cfg, MatchLoss::kLearned, true, source, target, writer);
}

TrainResult train_baseline(const std::string& kind, const ExperimentConfig& cfg,
                           const Dataset& source, const Dataset& target,
                           MetricsWriter* writer) {
    MatchLoss loss;
    if (kind == "source_only") {
        loss = MatchLoss::kNone;
    } else if (kind == "mmd_align") {
        loss = MatchLoss::kMmd;
    } else if (kind == "adv_align") {
        loss = MatchLoss::kAdv;
    } else {
        throw ConfigError("unknown baseline " + kind);
    }
    return train_loop(cfg, loss, false, source, target, writer);
}

TrainResult run_training(const ExperimentConfig& cfg, const Dataset& source,
                         const Dataset& target, MetricsWriter* writer) {
    if (cfg.method == "l2m") return train_l2m(cfg, source, target, writer);
    return train_baseline(cfg.method, cfg, source, target, writer);
}

}  // namespace l2m
