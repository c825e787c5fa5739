// Acceptance suite: one pass/fail line per criterion. Exit status is the
// number of failed criteria. With arguments, runs only the listed
// criterion numbers (e.g. "acceptance 3 5").
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "l2m/config.hpp"
#include "l2m/dataset.hpp"
#include "l2m/genmatch.hpp"
#include "l2m/io.hpp"
#include "l2m/matching.hpp"
#include "l2m/metrics.hpp"
#include "l2m/models.hpp"
#include "l2m/param.hpp"
#include "l2m/train.hpp"

namespace {

using namespace l2m;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Criterion 1: gradient fidelity against central finite differences.
//
// The checked losses are the ones the training steps differentiate: the
// classification + weighted matching loss over the feature extractor and
// classifier, and the tanh comparison loss over the meta-network. All
// quantities the implementation treats as constants (kernel bandwidths,
// pseudo-labels, the post-step discriminator) are frozen so the finite
// difference probes the same function the tape differentiates.
// ---------------------------------------------------------------------------

struct FdSetup {
    MatchMode mode;
    Tensor xs, xt;
    std::vector<int> ys;
    PseudoLabels pl;
    Tensor soft_s;
    KernelSpec kfix;
    double tau = 0.3;
    double lambda = 0.7;
    double disc_lr = 0.0;
    Mlp* disc_m = nullptr;
    std::vector<Mlp>* disc_c = nullptr;
    const Mlp* meta = nullptr;
};

Var matching_term(Tape& tape, FdSetup& s, Var emb_s, Var logits_s, Var emb_t,
                  Var logits_t) {
    MatchingInputs in;
    if (mode_uses_emb(s.mode)) {
        in.emb_s = emb_s;
        in.emb_t = emb_t;
    }
    if (mode_uses_logit(s.mode)) {
        in.logits_s = logits_s;
        in.logits_t = logits_t;
    }
    if (mode_uses_mmd(s.mode)) {
        in.d_m = mmd2_biased(tape, emb_s, emb_t, s.kfix);
        in.d_c = conditional_mmd(tape, emb_s, s.ys, emb_t, s.pl.labels, s.pl.confidences,
                                 2, s.kfix, s.tau)
                     .value;
    }
    if (mode_uses_adv(s.mode)) {
        in.adv_m = adversarial_marginal(tape, *s.disc_m, emb_s, emb_t, s.disc_lr).value;
        in.adv_c = adversarial_conditional(tape, *s.disc_c, emb_s, s.soft_s, emb_t,
                                           s.pl.soft, s.disc_lr)
                       .value;
    }
    Var feat = build_matching_features(tape, s.mode, in).rows;
    StagedMlp meta = stage_mlp(tape, *s.meta, false);
    return meta_forward(tape, meta, feat);
}

double main_loss_eval(const Mlp& fe_mlp, const Mlp& cls_mlp, FdSetup& s,
                      ParamSet* fe_grads, ParamSet* cls_grads) {
    Tape tape;
    StagedMlp fe = stage_mlp(tape, fe_mlp, true);
    StagedMlp cls = stage_mlp(tape, cls_mlp, true);
    Var emb_s = mlp_forward(tape, fe, tape.leaf(s.xs));
    Var logits_s = mlp_forward(tape, cls, emb_s);
    Var emb_t = mlp_forward(tape, fe, tape.leaf(s.xt));
    Var logits_t = mlp_forward(tape, cls, emb_t);
    Var loss = tape.softmax_cross_entropy(logits_s, s.ys);
    loss = tape.add(loss,
                    tape.scale(matching_term(tape, s, emb_s, logits_s, emb_t, logits_t),
                               s.lambda));
    const double value = tape.value(loss).data[0];
    if (fe_grads) {
        tape.backward(loss);
        fe_grads->accumulate_grads(tape, fe.vars);
        cls_grads->accumulate_grads(tape, cls.vars);
    }
    return value;
}

Tensor snapshot_features(const ModelBundle& snap, FdSetup& s) {
    Tape tape;
    Var emb_s = tape.leaf(compute_embeddings(snap, s.xs));
    Var emb_t = tape.leaf(compute_embeddings(snap, s.xt));
    Var logits_s = tape.leaf(compute_logits(snap, s.xs));
    Var logits_t = tape.leaf(compute_logits(snap, s.xt));
    MatchingInputs in;
    if (mode_uses_emb(s.mode)) {
        in.emb_s = emb_s;
        in.emb_t = emb_t;
    }
    if (mode_uses_logit(s.mode)) {
        in.logits_s = logits_s;
        in.logits_t = logits_t;
    }
    if (mode_uses_mmd(s.mode)) {
        in.d_m = mmd2_biased(tape, emb_s, emb_t, s.kfix);
        in.d_c = conditional_mmd(tape, emb_s, s.ys, emb_t, s.pl.labels, s.pl.confidences,
                                 2, s.kfix, s.tau)
                     .value;
    }
    if (mode_uses_adv(s.mode)) {
        in.adv_m = adversarial_marginal(tape, *s.disc_m, emb_s, emb_t, s.disc_lr).value;
        in.adv_c = adversarial_conditional(tape, *s.disc_c, emb_s, s.soft_s, emb_t,
                                           s.pl.soft, s.disc_lr)
                       .value;
    }
    return tape.value(build_matching_features(tape, s.mode, in).rows);
}

double meta_loss_eval(const Mlp& meta_mlp, const Tensor& f_t, const Tensor& f_t1,
                      int sign, ParamSet* grads) {
    Tape tape;
    StagedMlp g = stage_mlp(tape, meta_mlp, true);
    Var diff = tape.scale(tape.sub(mlp_forward(tape, g, tape.leaf(f_t)),
                                   mlp_forward(tape, g, tape.leaf(f_t1))),
                          static_cast<double>(sign));
    Var loss = tape.mean(tape.activation(diff, Act::kTanh));
    const double value = tape.value(loss).data[0];
    if (grads) {
        tape.backward(loss);
        grads->accumulate_grads(tape, g.vars);
    }
    return value;
}

Outcome criterion1() {
    const auto start = Clock::now();
    const std::vector<MatchMode> modes = {
        MatchMode::kEmb,    MatchMode::kLogit,  MatchMode::kMmd,      MatchMode::kAdv,
        MatchMode::kEmbMmd, MatchMode::kEmbAdv, MatchMode::kLogitMmd, MatchMode::kLogitAdv};
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_where;

    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        const MatchMode mode = modes[mi];
        // Tanh hidden units keep the loss smooth, so a finite difference
        // straddling a ReLU kink cannot masquerade as a gradient error.
        const std::uint64_t seed = 100 + mi;
        const int fdim = feature_dim(mode, 6, 2, false);
        ModelBundle bundle;
        bundle.feature_extractor = build_mlp({{2, 8, 6}, Act::kTanh, false, seed});
        bundle.classifier = build_mlp({{6, 2}, Act::kTanh, false, seed + 1});
        bundle.meta_net = build_mlp({{fdim, 8, 8, 1}, Act::kTanh, false, seed + 2});
        bundle.disc_marginal = build_mlp({{6, 4, 1}, Act::kTanh, true, seed + 3});
        for (int c = 0; c < 2; ++c) {
            bundle.disc_conditional.push_back(
                build_mlp({{6, 4, 1}, Act::kTanh, true, seed + 4 + c}));
        }

        std::mt19937_64 rng(7 + mi);
        std::normal_distribution<double> gauss(0.0, 1.0);
        FdSetup s;
        s.mode = mode;
        s.xs = Tensor::zeros({6, 2});
        s.xt = Tensor::zeros({6, 2});
        for (double& v : s.xs.data) v = gauss(rng);
        for (double& v : s.xt.data) v = gauss(rng);
        s.ys = {0, 1, 0, 1, 1, 0};
        s.soft_s = one_hot(s.ys, 2);
        s.pl = pseudo_labels_from_logits(compute_logits(bundle, s.xt));
        s.kfix.base_bandwidth = 1.0;
        s.meta = &bundle.meta_net;

        // The analytic pass runs the two-phase adversarial step with a live
        // learning rate; the finite-difference probes then reuse the stepped
        // discriminators frozen (lr 0), matching what the tape treats as
        // constant.
        Mlp disc_m = bundle.disc_marginal;
        std::vector<Mlp> disc_c = bundle.disc_conditional;
        s.disc_m = &disc_m;
        s.disc_c = &disc_c;
        s.disc_lr = 0.05;
        bundle.feature_extractor.params.zero_grad();
        bundle.classifier.params.zero_grad();
        main_loss_eval(bundle.feature_extractor, bundle.classifier, s,
                       &bundle.feature_extractor.params, &bundle.classifier.params);
        s.disc_lr = 0.0;

        auto fe_fn = [&](const ParamSet& p) {
            Mlp probe = bundle.feature_extractor;
            probe.params = p;
            return main_loss_eval(probe, bundle.classifier, s, nullptr, nullptr);
        };
        auto cls_fn = [&](const ParamSet& p) {
            Mlp probe = bundle.classifier;
            probe.params = p;
            return main_loss_eval(bundle.feature_extractor, probe, s, nullptr, nullptr);
        };
        GradcheckReport r1 =
            finite_difference_gradcheck(bundle.feature_extractor.params, fe_fn, h);
        GradcheckReport r2 =
            finite_difference_gradcheck(bundle.classifier.params, cls_fn, h);

        // Comparison loss over the meta-network: features from the current
        // parameters and from a one-step-updated copy, both detached.
        ModelBundle stepped = clone_assist(bundle);
        ExperimentConfig step_cfg;
        step_cfg.tau = s.tau;
        step_cfg.disc_lr = 0.05;
        main_update(stepped, s.xs, s.ys, s.xt, MatchLoss::kNone, mode, step_cfg, 0.0,
                    0.05);
        const Tensor f_t = snapshot_features(bundle, s);
        const Tensor f_t1 = snapshot_features(stepped, s);
        bundle.meta_net.params.zero_grad();
        meta_loss_eval(bundle.meta_net, f_t, f_t1, 1, &bundle.meta_net.params);
        auto meta_fn = [&](const ParamSet& p) {
            Mlp probe = bundle.meta_net;
            probe.params = p;
            return meta_loss_eval(probe, f_t, f_t1, 1, nullptr);
        };
        GradcheckReport r3 =
            finite_difference_gradcheck(bundle.meta_net.params, meta_fn, h);

        for (const auto& [rep, tag] :
             {std::pair{r1, "train/"}, {r2, "cls/"}, {r3, "meta/"}}) {
            if (rep.max_rel_error > worst) {
                worst = rep.max_rel_error;
                worst_where = match_mode_name(mode) + " " + tag + rep.worst_param;
            }
        }
    }

    const double elapsed = seconds_since(start);
    Outcome o;
    o.pass = worst <= 1e-4 && elapsed <= 60.0;
    o.detail = "max rel err " + fmt(worst) + " (" + worst_where + "), " + fmt(elapsed) +
               " s";
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 2: randomized MMD property suite.
// ---------------------------------------------------------------------------

double mmd2_value(const Tensor& x, const Tensor& y, const KernelSpec& spec) {
    Tape tape;
    return tape.value(mmd2_biased(tape, tape.leaf(x), tape.leaf(y), spec)).data[0];
}

Outcome criterion2() {
    const auto start = Clock::now();
    const int trials = 1000;
    std::mt19937_64 rng(42);
    std::normal_distribution<double> gauss(0.0, 1.0);

    int separation_ok = 0;
    double worst_neg = 0.0, worst_sym = 0.0, worst_zero = 0.0, worst_cond = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = 4 + static_cast<int>(rng() % 9);
        const int m = 4 + static_cast<int>(rng() % 9);
        const int d = 1 + static_cast<int>(rng() % 4);
        Tensor x = Tensor::zeros({n, d});
        Tensor y = Tensor::zeros({m, d});
        for (double& v : x.data) v = gauss(rng);
        for (double& v : y.data) v = gauss(rng);

        KernelSpec spec;  // median heuristic, default multipliers
        const double mxy = mmd2_value(x, y, spec);
        const double myx = mmd2_value(y, x, spec);
        worst_neg = std::min(worst_neg, mxy);
        worst_sym = std::max(worst_sym, std::abs(mxy - myx));
        worst_zero = std::max(worst_zero, std::abs(mmd2_value(x, x, spec)));

        // Same-distribution pair vs a pair separated by 3 standard deviations.
        Tensor y_far = y;
        for (int i = 0; i < m; ++i) y_far.at(i, 0) += 3.0;
        if (mxy < mmd2_value(x, y_far, spec)) ++separation_ok;

        // Conditional MMD against the per-class brute-force mean.
        std::vector<int> ys(n), pl(m);
        std::vector<double> conf(m);
        for (int i = 0; i < n; ++i) ys[i] = static_cast<int>(rng() % 2);
        for (int j = 0; j < m; ++j) {
            pl[j] = static_cast<int>(rng() % 2);
            conf[j] = 0.5 + 0.5 * (static_cast<double>(rng() % 1000) / 999.0);
        }
        const double tau = 0.7;
        KernelSpec fixed;
        fixed.base_bandwidth = 1.2;
        Tape tape;
        ConditionalMmd cm = conditional_mmd(tape, tape.leaf(x), ys, tape.leaf(y), pl,
                                            conf, 2, fixed, tau);
        double oracle = 0.0;
        int qualified = 0;
        for (int c = 0; c < 2; ++c) {
            std::vector<int> si, ti;
            for (int i = 0; i < n; ++i)
                if (ys[i] == c) si.push_back(i);
            for (int j = 0; j < m; ++j)
                if (pl[j] == c && conf[j] >= tau) ti.push_back(j);
            if (si.empty() || ti.empty()) continue;
            Tensor xc = Tensor::zeros({static_cast<int>(si.size()), d});
            Tensor yc = Tensor::zeros({static_cast<int>(ti.size()), d});
            for (std::size_t r = 0; r < si.size(); ++r)
                for (int cidx = 0; cidx < d; ++cidx)
                    xc.at(static_cast<int>(r), cidx) = x.at(si[r], cidx);
            for (std::size_t r = 0; r < ti.size(); ++r)
                for (int cidx = 0; cidx < d; ++cidx)
                    yc.at(static_cast<int>(r), cidx) = y.at(ti[r], cidx);
            oracle += mmd2_value(xc, yc, fixed);
            ++qualified;
        }
        const double cond = tape.value(cm.value).data[0];
        if (qualified > 0) {
            worst_cond = std::max(worst_cond, std::abs(cond - oracle / qualified));
        } else if (!cm.degenerate || cond != 0.0) {
            worst_cond = std::max(worst_cond, 1.0);
        }
    }

    const double elapsed = seconds_since(start);
    const double sep_rate = static_cast<double>(separation_ok) / trials;
    Outcome o;
    o.pass = worst_neg >= -1e-12 && worst_sym <= 1e-12 && worst_zero <= 1e-12 &&
             sep_rate >= 0.99 && worst_cond <= 1e-12 && elapsed <= 30.0;
    o.detail = "min " + fmt(worst_neg) + ", sym " + fmt(worst_sym) + ", zero " +
               fmt(worst_zero) + ", sep " + fmt(100.0 * sep_rate) + "%, cond " +
               fmt(worst_cond) + ", " + fmt(elapsed) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// Criteria 3-6 share one batch of two-moons training runs.
// ---------------------------------------------------------------------------

struct UdaRun {
    double target_acc = 0.0;
    double a_distance = 0.0;
    double seconds = 0.0;
    std::vector<MetricsRow> log;
};

struct UdaRuns {
    std::map<std::string, std::vector<UdaRun>> by_method;  // key: method/mode label
    double max_seconds = 0.0;
};

UdaRun run_uda(const std::string& method, const std::string& match_mode,
               std::uint64_t seed, bool want_a_distance, bool keep_log) {
    ExperimentConfig cfg;
    cfg.method = method;
    cfg.match_mode = match_mode;
    cfg.seed = seed;
    auto [source, target] = make_datasets(cfg);
    const auto start = Clock::now();
    TrainResult res = run_training(cfg, source, target);
    UdaRun out;
    out.seconds = seconds_since(start);
    out.target_acc = accuracy(predict_labels(res.bundle, target.features), target.labels);
    if (want_a_distance) {
        out.a_distance = proxy_a_distance(compute_embeddings(res.bundle, source.features),
                                          compute_embeddings(res.bundle, target.features),
                                          seed);
    }
    if (keep_log) out.log = std::move(res.log);
    return out;
}

const UdaRuns& uda_runs() {
    static UdaRuns runs = [] {
        UdaRuns r;
        const std::vector<std::pair<std::string, std::string>> variants = {
            {"l2m", "emb+mmd"}, {"source_only", "emb+mmd"}, {"l2m", "emb"},
            {"l2m", "mmd"},     {"l2m", "adv"},             {"l2m", "emb+adv"},
        };
        for (const auto& [method, mode] : variants) {
            const std::string key = method == "l2m" ? mode : method;
            const bool want_da = key == "emb+mmd" || key == "source_only";
            for (std::uint64_t seed = 0; seed < 5; ++seed) {
                UdaRun run = run_uda(method, mode, seed, want_da,
                                     key == "emb+mmd" && seed == 0);
                r.max_seconds = std::max(r.max_seconds, run.seconds);
                r.by_method[key].push_back(std::move(run));
            }
        }
        return r;
    }();
    return runs;
}

double mean_acc(const std::vector<UdaRun>& runs) {
    double s = 0.0;
    for (const UdaRun& r : runs) s += r.target_acc;
    return s / runs.size();
}

Outcome criterion3() {
    const UdaRuns& r = uda_runs();
    const double l2m = mean_acc(r.by_method.at("emb+mmd"));
    const double src = mean_acc(r.by_method.at("source_only"));
    Outcome o;
    o.pass = l2m >= 0.85 && l2m >= src + 0.05 && r.max_seconds <= 180.0;
    o.detail = "l2m " + fmt(100 * l2m) + "%, source_only " + fmt(100 * src) +
               "%, slowest run " + fmt(r.max_seconds) + " s";
    return o;
}

Outcome criterion4() {
    const UdaRuns& r = uda_runs();
    const double emb = mean_acc(r.by_method.at("emb"));
    const double mmd = mean_acc(r.by_method.at("mmd"));
    const double adv = mean_acc(r.by_method.at("adv"));
    const double emb_mmd = mean_acc(r.by_method.at("emb+mmd"));
    const double emb_adv = mean_acc(r.by_method.at("emb+adv"));
    Outcome o;
    o.pass = emb_mmd >= std::max(emb, mmd) - 0.02 && emb_adv >= std::max(emb, adv) - 0.02;
    o.detail = "emb " + fmt(100 * emb) + "%, mmd " + fmt(100 * mmd) + "%, adv " +
               fmt(100 * adv) + "%, emb+mmd " + fmt(100 * emb_mmd) + "%, emb+adv " +
               fmt(100 * emb_adv) + "%";
    return o;
}

Outcome criterion5() {
    const UdaRuns& r = uda_runs();
    double da_l2m = 0.0, da_src = 0.0;
    for (const UdaRun& run : r.by_method.at("emb+mmd")) da_l2m += run.a_distance;
    for (const UdaRun& run : r.by_method.at("source_only")) da_src += run.a_distance;
    da_l2m /= 5.0;
    da_src /= 5.0;
    Outcome o;
    o.pass = da_l2m <= da_src;
    o.detail = "d_A l2m " + fmt(da_l2m) + ", source_only " + fmt(da_src);
    return o;
}

Outcome criterion6() {
    const UdaRuns& r = uda_runs();
    const std::vector<MetricsRow>& log = r.by_method.at("emb+mmd").front().log;

    for (const MetricsRow& row : log) {
        if (!std::isfinite(row.loss_cls) || !std::isfinite(row.loss_match) ||
            !std::isfinite(row.loss_meta)) {
            return {false, "non-finite loss at step " + std::to_string(row.step)};
        }
    }

    // Per-epoch means, then a 10-epoch moving average.
    std::map<int, std::pair<double, int>> cls_acc, match_acc;
    for (const MetricsRow& row : log) {
        cls_acc[row.epoch].first += row.loss_cls;
        cls_acc[row.epoch].second += 1;
        match_acc[row.epoch].first += row.loss_match;
        match_acc[row.epoch].second += 1;
    }
    auto moving = [](const std::map<int, std::pair<double, int>>& acc) {
        std::vector<double> epoch_mean, ma;
        for (const auto& [e, sc] : acc) epoch_mean.push_back(sc.first / sc.second);
        for (std::size_t i = 0; i + 1 <= epoch_mean.size(); ++i) {
            const std::size_t lo = i >= 9 ? i - 9 : 0;
            double s = 0.0;
            for (std::size_t j = lo; j <= i; ++j) s += epoch_mean[j];
            ma.push_back(s / (i - lo + 1));
        }
        return ma;
    };
    // "Non-increasing" for a stochastic average is read at the trend level:
    // over the final 50%, the moving average never exceeds its starting
    // value, its least-squares slope is <= 0, and it ends below where it
    // started. Pointwise monotonicity is batch noise, not convergence.
    struct Tail {
        double excursion;  // max value minus starting value
        double slope;      // least-squares, per epoch
        double net;        // last value minus starting value
    };
    auto tail_trend = [](const std::vector<double>& ma) {
        const std::size_t lo = ma.size() / 2;
        Tail t{0.0, 0.0, ma.back() - ma[lo]};
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        const double n = static_cast<double>(ma.size() - lo);
        for (std::size_t i = lo; i < ma.size(); ++i) {
            t.excursion = std::max(t.excursion, ma[i] - ma[lo]);
            const double x = static_cast<double>(i - lo);
            sx += x;
            sy += ma[i];
            sxx += x * x;
            sxy += x * ma[i];
        }
        t.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        return t;
    };
    const Tail cls = tail_trend(moving(cls_acc));
    const Tail match = tail_trend(moving(match_acc));
    Outcome o;
    o.pass = cls.excursion <= 0.0 && cls.slope <= 0.0 && cls.net < 0.0 &&
             match.excursion <= 0.0 && match.slope <= 0.0 && match.net < 0.0;
    o.detail = "tail slope/net: loss_cls " + fmt(cls.slope) + "/" + fmt(cls.net) +
               ", loss_match " + fmt(match.slope) + "/" + fmt(match.net);
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 7: algorithmic invariants.
// ---------------------------------------------------------------------------

bool bundles_bitwise_equal(const ModelBundle& a, const ModelBundle& b) {
    auto eq = [](const Mlp& x, const Mlp& y) {
        if (x.params.size() != y.params.size()) return false;
        for (std::size_t i = 0; i < x.params.size(); ++i) {
            if (x.params[i].value.data != y.params[i].value.data) return false;
        }
        return true;
    };
    if (!eq(a.feature_extractor, b.feature_extractor) || !eq(a.classifier, b.classifier) ||
        !eq(a.meta_net, b.meta_net) || !eq(a.disc_marginal, b.disc_marginal)) {
        return false;
    }
    if (a.disc_conditional.size() != b.disc_conditional.size()) return false;
    for (std::size_t i = 0; i < a.disc_conditional.size(); ++i) {
        if (!eq(a.disc_conditional[i], b.disc_conditional[i])) return false;
    }
    return true;
}

Outcome criterion7() {
    std::vector<std::string> failures;

    ExperimentConfig cfg;
    cfg.moons_n = 120;
    cfg.max_steps = 30;
    cfg.batch_size = 16;
    auto [source, target] = make_datasets(cfg);

    // Meta-data bounds and the comparison-loss range along a live run.
    {
        BundleDims dims;
        dims.input_dim = source.dim();
        dims.emb_dim = cfg.emb_dim;
        dims.hidden = cfg.hidden;
        dims.num_classes = source.num_classes;
        dims.feature_dim =
            feature_dim(cfg.mode(), cfg.emb_dim, source.num_classes, cfg.pair_concat);
        dims.meta_hidden = cfg.meta_hidden;
        dims.disc_hidden = cfg.disc_hidden;
        ModelBundle bundle = build_bundle(dims, cfg.seed);

        bool bounds_ok = true, range_ok = true;
        for (int t = 0; t < cfg.max_steps; ++t) {
            const auto batches = batch_iterator(source, {cfg.batch_size, cfg.seed, false, t});
            const auto tbatches =
                batch_iterator(target, {cfg.batch_size, cfg.seed + 1, false, t});
            Tensor xs = Tensor::zeros({cfg.batch_size, source.dim()});
            Tensor xt = Tensor::zeros({cfg.batch_size, source.dim()});
            std::vector<int> ys(cfg.batch_size);
            for (int i = 0; i < cfg.batch_size; ++i) {
                for (int c = 0; c < source.dim(); ++c) {
                    xs.at(i, c) = source.features.at(batches[0][i], c);
                    xt.at(i, c) = target.features.at(tbatches[0][i], c);
                }
                ys[i] = source.labels[batches[0][i]];
            }
            ModelBundle assist = clone_assist(bundle);
            main_update(assist, xs, ys, xt, MatchLoss::kLearned, cfg.mode(), cfg, 0.5,
                        0.05);
            const MetaData md = select_meta_data(bundle, target, cfg.meta_per_class, cfg.tau);
            for (int c : md.per_class_counts) {
                if (c > cfg.meta_per_class) bounds_ok = false;
            }
            for (double conf : md.confidences) {
                if (conf < cfg.tau) bounds_ok = false;
            }
            if (!md.empty()) {
                const double lv = meta_update(bundle, bundle, assist, xs, ys, md,
                                              cfg.mode(), cfg, 0.01);
                if (!(lv > -1.0 && lv < 1.0)) range_ok = false;
            }
            main_update(bundle, xs, ys, xt, MatchLoss::kLearned, cfg.mode(), cfg, 0.5,
                        0.05);
        }
        if (!bounds_ok) failures.push_back("meta-data bounds");
        if (!range_ok) failures.push_back("comparison-loss range");

        // Identical snapshots: the comparison loss is exactly zero.
        MetaData md = select_meta_data(bundle, target, cfg.meta_per_class, 0.4);
        Tensor xs = source.features;
        if (!md.empty()) {
            ModelBundle probe = clone_assist(bundle);
            const double lv = meta_update(probe, bundle, bundle, source.features,
                                          source.labels, md, cfg.mode(), cfg, 0.0);
            if (lv != 0.0) failures.push_back("identical snapshots give " + fmt(lv));
        } else {
            failures.push_back("no meta-data for the identical-snapshot check");
        }
    }

    // lambda = 0 with meta updates off reduces bitwise to source_only.
    {
        ExperimentConfig reduced = cfg;
        reduced.lambda_max = 0.0;
        reduced.meta_updates = false;
        TrainResult a = train_l2m(reduced, source, target);
        TrainResult b = train_baseline("source_only", reduced, source, target);
        bool same = bundles_bitwise_equal(a.bundle, b.bundle) && a.log.size() == b.log.size();
        if (same) {
            for (std::size_t i = 0; i < a.log.size(); ++i) {
                if (a.log[i].loss_cls != b.log[i].loss_cls ||
                    a.log[i].target_accuracy != b.log[i].target_accuracy) {
                    same = false;
                }
            }
        }
        if (!same) failures.push_back("lambda=0 reduction not bitwise");
    }

    // Checkpoint round trip is bitwise exact.
    {
        TrainResult res = train_l2m(cfg, source, target);
        const auto dir = std::filesystem::temp_directory_path() / "l2m_acceptance";
        std::filesystem::create_directories(dir);
        const std::string path = (dir / "roundtrip.json").string();
        save_checkpoint(res.bundle, cfg, path);
        Checkpoint loaded = load_checkpoint(path);
        if (!bundles_bitwise_equal(res.bundle, loaded.bundle)) {
            failures.push_back("checkpoint round trip");
        }
    }

    Outcome o;
    o.pass = failures.empty();
    if (failures.empty()) {
        o.detail = "meta-data bounds, loss range, exact zero, bitwise reduction, round trip";
    } else {
        for (const std::string& f : failures) {
            if (!o.detail.empty()) o.detail += "; ";
            o.detail += f;
        }
    }
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 8: the ring generator with the learned loss.
// ---------------------------------------------------------------------------

Outcome criterion8() {
    std::vector<double> l2m_final, mmd_final;
    std::vector<int> l2m_cover;
    double max_seconds = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        GenSpec spec;
        spec.seed = seed;

        GenSpec mmd_spec = spec;
        mmd_spec.loss_mode = "mmd";
        auto t0 = Clock::now();
        mmd_final.push_back(train_generator(mmd_spec).final_mmd2);
        max_seconds = std::max(max_seconds, seconds_since(t0));

        GenSpec l2m_spec = spec;
        l2m_spec.loss_mode = "l2m";
        t0 = Clock::now();
        GenResult res = train_generator(l2m_spec);
        max_seconds = std::max(max_seconds, seconds_since(t0));
        l2m_final.push_back(res.final_mmd2);

        const RingData ring =
            ring_dataset(2000, spec.modes, spec.radius, spec.mode_sd, 555 + seed);
        l2m_cover.push_back(
            mode_coverage(generate_samples(res.generator, 2000, 333 + seed), ring.centers,
                          spec.mode_sd));
    }
    auto median3 = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[1];
    };
    std::sort(l2m_cover.begin(), l2m_cover.end());
    const int cover_med = l2m_cover[1];
    const double l2m_med = median3(l2m_final);
    const double mmd_med = median3(mmd_final);
    Outcome o;
    o.pass = cover_med >= 7 && l2m_med <= 1.5 * mmd_med && max_seconds <= 120.0;
    o.detail = "coverage median " + std::to_string(cover_med) + "/8, final MMD2 l2m " +
               fmt(l2m_med) + " vs mmd " + fmt(mmd_med) + ", slowest run " +
               fmt(max_seconds) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// Criterion 9: bitwise determinism of metrics.csv and the checkpoint.
// ---------------------------------------------------------------------------

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome criterion9() {
    ExperimentConfig cfg;
    cfg.max_steps = 80;
    const auto out = std::filesystem::temp_directory_path() / "l2m_acceptance" / "det";
    std::filesystem::create_directories(out);
    cfg.out_dir = out.string();
    // The identical invocation, repeated; bytes captured between runs.
    auto run_once = [&] {
        auto [source, target] = make_datasets(cfg);
        MetricsWriter writer((out / "metrics.csv").string());
        TrainResult res = run_training(cfg, source, target, &writer);
        save_checkpoint(res.bundle, cfg, (out / "checkpoint.json").string());
        return std::pair{file_bytes(out / "metrics.csv"),
                         file_bytes(out / "checkpoint.json")};
    };
    const auto a = run_once();
    const auto b = run_once();
    const bool metrics_same = a.first == b.first;
    const bool ckpt_same = a.second == b.second;
    Outcome o;
    o.pass = metrics_same && ckpt_same;
    o.detail = std::string("metrics.csv ") + (metrics_same ? "identical" : "differs") +
               ", checkpoint " + (ckpt_same ? "identical" : "differs");
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

    const std::vector<std::pair<int, Outcome (*)()>> criteria = {
        {1, criterion1}, {2, criterion2}, {3, criterion3},
        {4, criterion4}, {5, criterion5}, {6, criterion6},
        {7, criterion7}, {8, criterion8}, {9, criterion9},
    };
    static const char* names[] = {
        "gradient fidelity",      "mmd properties",   "adaptation gain",
        "feature ablation",       "proxy a-distance", "convergence",
        "algorithmic invariants", "ring generator",   "determinism",
    };

    int failed = 0;
    for (const auto& [num, fn] : criteria) {
        if (!wanted.empty() && !wanted.count(num)) continue;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        std::printf("criterion %d (%s): %s — %s\n", num, names[num - 1],
                    o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failed;
    }
    return failed;
}
