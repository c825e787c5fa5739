#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "l2m/config.hpp"
#include "l2m/genmatch.hpp"
#include "l2m/io.hpp"
#include "l2m/metrics.hpp"
#include "l2m/train.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

l2m::ExperimentConfig resolve_config(const CommonOpts& opts) {
    l2m::ExperimentConfig cfg;
    if (!opts.config_path.empty()) cfg = l2m::load_config_toml(opts.config_path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.out_dir) cfg.out_dir = *opts.out_dir;
    cfg.validate();
    return cfg;
}

int cmd_train(const CommonOpts& opts) {
    l2m::ExperimentConfig cfg = resolve_config(opts);
    auto [source, target] = l2m::make_datasets(cfg);
    fs::create_directories(cfg.out_dir);
    l2m::MetricsWriter writer(cfg.out_dir + "/metrics.csv");
    l2m::TrainResult res = l2m::run_training(cfg, source, target, &writer);
    l2m::save_checkpoint(res.bundle, cfg, cfg.out_dir + "/checkpoint.json");
    l2m::save_config_toml(cfg, cfg.out_dir + "/config.toml");

    const double src_acc =
        l2m::accuracy(l2m::predict_labels(res.bundle, source.features), source.labels);
    const double tgt_acc = res.log.empty() ? 0.0 : res.log.back().target_accuracy;
    const double da = l2m::proxy_a_distance(
        l2m::compute_embeddings(res.bundle, source.features),
        l2m::compute_embeddings(res.bundle, target.features), cfg.seed);
    std::printf("method=%s steps=%d source_acc=%.4f target_acc=%.4f a_distance=%.4f\n",
                cfg.method.c_str(), cfg.max_steps, src_acc, tgt_acc, da);
    std::printf("wrote %s/metrics.csv and %s/checkpoint.json\n", cfg.out_dir.c_str(),
                cfg.out_dir.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_path) {
    l2m::Checkpoint ckpt = l2m::load_checkpoint(checkpoint_path);
    auto [source, target] = l2m::make_datasets(ckpt.config);
    const double src_acc =
        l2m::accuracy(l2m::predict_labels(ckpt.bundle, source.features), source.labels);
    const double tgt_acc =
        l2m::accuracy(l2m::predict_labels(ckpt.bundle, target.features), target.labels);
    const double da = l2m::proxy_a_distance(
        l2m::compute_embeddings(ckpt.bundle, source.features),
        l2m::compute_embeddings(ckpt.bundle, target.features), ckpt.config.seed);
    std::printf("source_acc=%.4f target_acc=%.4f a_distance=%.4f\n", src_acc, tgt_acc, da);
    return 0;
}

// Finite-difference sweep over the main objective and the meta loss on a
// small fixed problem; fails loudly if the tape's gradients drift.
int cmd_gradcheck() {
    using namespace l2m;
    ExperimentConfig cfg;
    cfg.emb_dim = 8;
    cfg.hidden = 8;
    cfg.meta_hidden = 8;
    cfg.moons_n = 24;
    cfg.seed = 7;
    const MatchMode mode = MatchMode::kEmbMmd;

    Dataset source = make_two_moons(24, 0.1, 7);
    Dataset target = rotate_domain(make_two_moons(24, 0.1, 8), 30.0);
    BundleDims dims;
    dims.input_dim = 2;
    dims.emb_dim = cfg.emb_dim;
    dims.hidden = cfg.hidden;
    dims.num_classes = 2;
    dims.feature_dim = feature_dim(mode, cfg.emb_dim, 2, false);
    dims.meta_hidden = cfg.meta_hidden;
    ModelBundle bundle = build_bundle(dims, 7);
    KernelSpec kspec;
    kspec.base_bandwidth = 1.0;  // frozen so the loss is smooth in phi

    auto objective = [&]() {
        Tape tape;
        StagedMlp fe = stage_mlp(tape, bundle.feature_extractor, true);
        StagedMlp cls = stage_mlp(tape, bundle.classifier, true);
        Var emb_s = mlp_forward(tape, fe, tape.leaf(source.features));
        Var logits_s = mlp_forward(tape, cls, emb_s);
        Var emb_t = mlp_forward(tape, fe, tape.leaf(target.features));
        Var logits_t = mlp_forward(tape, cls, emb_t);
        Var loss = tape.softmax_cross_entropy(logits_s, source.labels);
        PseudoLabels pl = pseudo_labels_from_logits(tape.value(logits_t));
        MatchingInputs in;
        in.emb_s = emb_s;
        in.emb_t = emb_t;
        in.d_m = mmd2_biased(tape, emb_s, emb_t, kspec);
        in.d_c = conditional_mmd(tape, emb_s, source.labels, emb_t, pl.labels,
                                 pl.confidences, 2, kspec, 0.0)
                     .value;
        MatchingFeature feat = build_matching_features(tape, mode, in);
        StagedMlp meta = stage_mlp(tape, bundle.meta_net, false);
        loss = tape.add(loss, tape.scale(meta_forward(tape, meta, feat.rows), 0.5));
        return std::pair<Tape, std::tuple<Var, StagedMlp, StagedMlp>>{
            std::move(tape), {loss, fe, cls}};
    };

    {
        auto [tape, parts] = objective();
        auto [loss, fe, cls] = parts;
        tape.backward(loss);
        bundle.feature_extractor.params.accumulate_grads(tape, fe.vars);
        bundle.classifier.params.accumulate_grads(tape, cls.vars);
    }
    auto loss_value = [&](const ParamSet&) {
        auto [tape, parts] = objective();
        return tape.value(std::get<0>(parts)).data[0];
    };
    bool ok = true;
    for (Mlp* net : {&bundle.feature_extractor, &bundle.classifier}) {
        GradcheckReport rep = finite_difference_gradcheck(net->params, loss_value, 1e-5);
        std::printf("main objective, %s: max rel error %.3e (%s[%zu])\n",
                    net == &bundle.feature_extractor ? "feature extractor" : "classifier",
                    rep.max_rel_error, rep.worst_param.c_str(), rep.worst_coord);
        ok = ok && rep.max_rel_error <= 1e-4;
        net->params.zero_grad();
    }

    // Meta loss: snapshots fixed, theta is the only moving part.
    ModelBundle assist = clone_assist(bundle);
    main_update(assist, source.features, source.labels, target.features,
                MatchLoss::kLearned, mode, cfg, 0.5, 0.05);
    MetaData md = select_meta_data(bundle, target, 5, 0.0);
    auto build_meta_loss = [&](Tape& tape, const StagedMlp& g) {
        auto feats = [&](const ModelBundle& snap) {
            Var es = tape.leaf(compute_embeddings(snap, source.features));
            Var em = tape.leaf(compute_embeddings(snap, md.samples));
            MatchingInputs in;
            in.emb_s = es;
            in.emb_t = em;
            in.d_m = mmd2_biased(tape, es, em, kspec);
            in.d_c = conditional_mmd(tape, es, source.labels, em, md.pseudo_labels,
                                     md.confidences, 2, kspec, 0.0)
                         .value;
            return build_matching_features(tape, mode, in).rows;
        };
        Var diff = tape.sub(mlp_forward(tape, g, feats(bundle)),
                            mlp_forward(tape, g, feats(assist)));
        return tape.mean(tape.activation(diff, Act::kTanh));
    };
    {
        Tape tape;
        StagedMlp g = stage_mlp(tape, bundle.meta_net, true);
        Var loss = build_meta_loss(tape, g);
        tape.backward(loss);
        bundle.meta_net.params.accumulate_grads(tape, g.vars);
    }
    auto meta_value = [&](const ParamSet&) {
        Tape tape;
        StagedMlp g = stage_mlp(tape, bundle.meta_net, false);
        return tape.value(build_meta_loss(tape, g)).data[0];
    };
    GradcheckReport rep =
        finite_difference_gradcheck(bundle.meta_net.params, meta_value, 1e-5);
    std::printf("meta loss, meta net: max rel error %.3e (%s[%zu])\n", rep.max_rel_error,
                rep.worst_param.c_str(), rep.worst_coord);
    ok = ok && rep.max_rel_error <= 1e-4;
    bundle.meta_net.params.zero_grad();

    std::printf("gradcheck %s\n", ok ? "PASS" : "FAIL");
    return ok ? 0 : 1;
}

int cmd_gen(const l2m::GenSpec& spec, const std::string& out_dir) {
    l2m::GenResult res = l2m::train_generator(spec);
    fs::create_directories(out_dir);

    const l2m::Tensor samples = l2m::generate_samples(res.generator, 2000, spec.seed ^ 0x5E);
    {
        std::ofstream out(out_dir + "/gen_samples.csv");
        if (!out) throw l2m::IoError("cannot write " + out_dir + "/gen_samples.csv");
        out.precision(17);
        for (int i = 0; i < samples.rows(); ++i) {
            out << samples.at(i, 0) << "," << samples.at(i, 1) << "\n";
        }
    }
    {
        std::ofstream out(out_dir + "/gen_metrics.csv");
        if (!out) throw l2m::IoError("cannot write " + out_dir + "/gen_metrics.csv");
        out << "step,loss,mmd2_to_data\n";
        out.precision(10);
        for (const auto& row : res.log) {
            out << row.step << "," << row.loss << "," << row.mmd2_to_data << "\n";
        }
    }
    const l2m::RingData ring =
        l2m::ring_dataset(8, spec.modes, spec.radius, spec.mode_sd, spec.seed);
    const int covered = l2m::mode_coverage(samples, ring.centers, spec.mode_sd);
    std::printf("loss_mode=%s steps=%d final_mmd2=%.6g coverage=%d/%d\n",
                spec.loss_mode.c_str(), spec.steps, res.final_mmd2, covered, spec.modes);
    return 0;
}

int cmd_export_emb(const std::string& checkpoint_path, const std::string& out_dir) {
    l2m::Checkpoint ckpt = l2m::load_checkpoint(checkpoint_path);
    auto [source, target] = l2m::make_datasets(ckpt.config);
    fs::create_directories(out_dir);
    l2m::export_embeddings(ckpt.bundle, source, out_dir + "/embeddings_source.csv");
    l2m::export_embeddings(ckpt.bundle, target, out_dir + "/embeddings_target.csv");
    std::printf("wrote %s/embeddings_source.csv and %s/embeddings_target.csv\n",
                out_dir.c_str(), out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-domain distribution matching with a learned matching loss"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string checkpoint_path;
    std::string gen_out = "out";
    l2m::GenSpec gen_spec;

    CLI::App* train = app.add_subcommand("train", "train a model per config");
    train->add_option("--config", opts.config_path, "TOML config path");
    train->add_option("--seed", opts.seed, "seed override");
    train->add_option("--out", opts.out_dir, "output directory override");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint JSON path")->required();

    app.add_subcommand("gradcheck", "finite-difference gradient check");

    CLI::App* gen = app.add_subcommand("gen", "generative ring toy");
    gen->add_option("--loss-mode", gen_spec.loss_mode, "mmd | l2m");
    gen->add_option("--steps", gen_spec.steps, "training steps");
    gen->add_option("--modes", gen_spec.modes, "ring modes");
    gen->add_option("--batch", gen_spec.batch_size, "batch size");
    gen->add_option("--seed", gen_spec.seed, "seed");
    gen->add_option("--out", gen_out, "output directory");

    CLI::App* exp = app.add_subcommand("export-emb", "export embeddings for a checkpoint");
    exp->add_option("--checkpoint", checkpoint_path, "checkpoint JSON path")->required();
    exp->add_option("--out", gen_out, "output directory");

    if (argc <= 1) {
        std::cerr << app.help() << std::endl;
        return 2;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(opts);
        if (eval->parsed()) return cmd_eval(checkpoint_path);
        if (app.get_subcommand("gradcheck")->parsed()) return cmd_gradcheck();
        if (gen->parsed()) return cmd_gen(gen_spec, gen_out);
        if (exp->parsed()) return cmd_export_emb(checkpoint_path, gen_out);
    } catch (const l2m::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const l2m::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
