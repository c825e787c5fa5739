#include "l2m/io.hpp"

#include <cstdio>

#include "json.hpp"

namespace l2m {

using json = nlohmann::ordered_json;

MetricsWriter::MetricsWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw IoError("cannot open metrics log " + path);
}

namespace {

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

void MetricsWriter::write(const MetricsRow& row) {
    if (rows_ == 0) {
        out_ << "epoch,step,loss_cls,loss_match,loss_meta,target_accuracy,a_distance,seed\n";
    }
    out_ << row.epoch << "," << row.step << "," << fmt9(row.loss_cls) << ","
         << fmt9(row.loss_match) << "," << fmt9(row.loss_meta) << ","
         << fmt9(row.target_accuracy) << ","
         << (row.a_distance ? fmt9(*row.a_distance) : "") << "," << row.seed << "\n";
    out_.flush();
    if (!out_) throw IoError("write failed for metrics log " + path_);
    ++rows_;
}

namespace {

void dump_params(json& tensors, const std::string& prefix, const ParamSet& params) {
    for (const Param& p : params) {
        json t;
        t["shape"] = p.value.shape;
        t["data"] = p.value.data;
        tensors[prefix + "." + p.name] = std::move(t);
    }
}

json config_to_json(const ExperimentConfig& config) {
    json out;
    auto fields = config_fields(const_cast<ExperimentConfig&>(config));
    for (auto& [name, f] : fields) {
        switch (f.kind) {
            case ConfigFieldRef::kString: out[name] = *static_cast<std::string*>(f.ptr); break;
            case ConfigFieldRef::kBool: out[name] = *static_cast<bool*>(f.ptr); break;
            case ConfigFieldRef::kInt: out[name] = *static_cast<int*>(f.ptr); break;
            case ConfigFieldRef::kU64: out[name] = *static_cast<std::uint64_t*>(f.ptr); break;
            case ConfigFieldRef::kDouble: out[name] = *static_cast<double*>(f.ptr); break;
        }
    }
    return out;
}

ExperimentConfig config_from_json(const json& in) {
    ExperimentConfig config;
    auto fields = config_fields(config);
    for (auto& [name, f] : fields) {
        if (!in.contains(name)) throw DataError("checkpoint config missing field " + name);
        const json& v = in.at(name);
        switch (f.kind) {
            case ConfigFieldRef::kString: *static_cast<std::string*>(f.ptr) = v.get<std::string>(); break;
            case ConfigFieldRef::kBool: *static_cast<bool*>(f.ptr) = v.get<bool>(); break;
            case ConfigFieldRef::kInt: *static_cast<int*>(f.ptr) = v.get<int>(); break;
            case ConfigFieldRef::kU64: *static_cast<std::uint64_t*>(f.ptr) = v.get<std::uint64_t>(); break;
            case ConfigFieldRef::kDouble: *static_cast<double*>(f.ptr) = v.get<double>(); break;
        }
    }
    for (auto it = in.begin(); it != in.end(); ++it) {
        bool known = false;
        for (auto& [name, f] : fields) {
            if (name == it.key()) known = true;
        }
        if (!known) throw DataError("checkpoint config has unknown field " + it.key());
    }
    return config;
}

Tensor tensor_from_json(const json& t, const std::string& name) {
    if (!t.contains("shape") || !t.contains("data")) {
        throw DataError("checkpoint tensor " + name + " missing shape or data");
    }
    try {
        return Tensor(t.at("shape").get<std::vector<int>>(),
                      t.at("data").get<std::vector<double>>());
    } catch (const ShapeError&) {
        throw ShapeError("checkpoint tensor " + name + " has inconsistent shape");
    } catch (const json::exception&) {
        throw DataError("checkpoint tensor " + name + " is malformed");
    }
}

// Rebuild an MLP from its serialized layer tensors; layer dims come from
// the weight shapes, activations from the network's role.
Mlp mlp_from_tensors(const json& tensors, const std::string& prefix, Act hidden_act,
                     bool sigmoid_output) {
    MlpSpec spec;
    spec.hidden_activation = hidden_act;
    spec.sigmoid_output = sigmoid_output;
    std::vector<Tensor> weights, biases;
    for (int l = 0;; ++l) {
        const std::string wname = prefix + ".w" + std::to_string(l);
        const std::string bname = prefix + ".b" + std::to_string(l);
        if (!tensors.contains(wname)) break;
        if (!tensors.contains(bname)) throw DataError("checkpoint missing tensor " + bname);
        weights.push_back(tensor_from_json(tensors.at(wname), wname));
        biases.push_back(tensor_from_json(tensors.at(bname), bname));
    }
    if (weights.empty()) throw DataError("checkpoint missing tensors for " + prefix);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].shape.size() != 2) {
            throw ShapeError("checkpoint tensor " + prefix + ".w" + std::to_string(l) +
                             " is not a matrix");
        }
        if (static_cast<int>(biases[l].numel()) != weights[l].cols()) {
            throw ShapeError("checkpoint tensor " + prefix + ".b" + std::to_string(l) +
                             " does not match " + prefix + ".w" + std::to_string(l));
        }
        if (l > 0 && weights[l].rows() != weights[l - 1].cols()) {
            throw ShapeError("checkpoint tensor " + prefix + ".w" + std::to_string(l) +
                             " does not chain with the previous layer");
        }
        spec.layer_dims.push_back(weights[l].rows());
    }
    spec.layer_dims.push_back(weights.back().cols());

    Mlp mlp;
    mlp.spec = spec;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        mlp.params.add("w" + std::to_string(l), std::move(weights[l]));
        mlp.params.add("b" + std::to_string(l), std::move(biases[l]));
    }
    return mlp;
}

}  // namespace

void save_checkpoint(const ModelBundle& bundle, const ExperimentConfig& config,
                     const std::string& path) {
    json doc;
    doc["version"] = 1;
    doc["config"] = config_to_json(config);
    json tensors;
    dump_params(tensors, "feature_extractor", bundle.feature_extractor.params);
    dump_params(tensors, "classifier", bundle.classifier.params);
    dump_params(tensors, "meta_net", bundle.meta_net.params);
    dump_params(tensors, "disc_marginal", bundle.disc_marginal.params);
    for (std::size_t c = 0; c < bundle.disc_conditional.size(); ++c) {
        dump_params(tensors, "disc_conditional." + std::to_string(c),
                    bundle.disc_conditional[c].params);
    }
    doc["tensors"] = std::move(tensors);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << doc.dump();
    out << "\n";
    if (!out) throw IoError("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw DataError("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    if (!doc.contains("version") || !doc["version"].is_number_integer()) {
        throw DataError("checkpoint " + path + " missing version");
    }
    if (doc["version"].get<int>() != 1) {
        throw DataError("checkpoint " + path + " has unsupported version " +
                        std::to_string(doc["version"].get<int>()));
    }
    if (!doc.contains("config") || !doc.contains("tensors")) {
        throw DataError("checkpoint " + path + " missing config or tensors");
    }

    Checkpoint ckpt;
    ckpt.config = config_from_json(doc["config"]);
    const json& tensors = doc["tensors"];
    ckpt.bundle.feature_extractor =
        mlp_from_tensors(tensors, "feature_extractor", Act::kRelu, false);
    ckpt.bundle.classifier = mlp_from_tensors(tensors, "classifier", Act::kRelu, false);
    ckpt.bundle.meta_net = mlp_from_tensors(tensors, "meta_net", Act::kRelu, false);
    ckpt.bundle.disc_marginal = mlp_from_tensors(tensors, "disc_marginal", Act::kRelu, true);
    for (int c = 0;; ++c) {
        const std::string prefix = "disc_conditional." + std::to_string(c);
        if (!tensors.contains(prefix + ".w0")) break;
        ckpt.bundle.disc_conditional.push_back(
            mlp_from_tensors(tensors, prefix, Act::kRelu, true));
    }
    return ckpt;
}

void export_embeddings(const ModelBundle& bundle, const Dataset& ds,
                       const std::string& path) {
    const Tensor emb = compute_embeddings(bundle, ds.features);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    const int domain = ds.domain_tag == DomainTag::kSource ? 1 : 0;
    for (int i = 0; i < emb.rows(); ++i) {
        for (int j = 0; j < emb.cols(); ++j) out << emb.at(i, j) << ",";
        out << ds.labels[i] << "," << domain << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace l2m
