#include "l2m/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "l2m/errors.hpp"

namespace l2m {

void ExperimentConfig::validate() const {
    if (dataset_kind != "two_moons" && dataset_kind != "blobs" && dataset_kind != "csv") {
        throw ConfigError("unknown dataset kind: " + dataset_kind);
    }
    if (dataset_kind == "csv" && (source_csv.empty() || target_csv.empty())) {
        throw ConfigError("csv dataset requires source_csv and target_csv");
    }
    if (method != "l2m" && method != "source_only" && method != "mmd_align" &&
        method != "adv_align") {
        throw ConfigError("unknown training method: " + method);
    }
    parse_match_mode(match_mode);
    if (lambda_mode != "ramp" && lambda_mode != "constant") {
        throw ConfigError("lambda_mode must be ramp or constant");
    }
    if (main_progress != "restep" && main_progress != "adopt") {
        throw ConfigError("main_progress must be restep or adopt");
    }
    if (meta_loss_sign != 1 && meta_loss_sign != -1) {
        throw ConfigError("meta_loss_sign must be +1 or -1");
    }
    if (eta0 <= 0.0 || beta0 <= 0.0) throw ConfigError("learning rates must be > 0");
    if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must be in [0,1]");
    if (meta_per_class < 1) throw ConfigError("meta_per_class must be >= 1");
    if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (moons_n % 2 != 0) throw ConfigError("moons_n must be even");
}

// section.key -> field binding; the single source of truth for the
// parser, the writer, and the checkpoint serializer.
std::vector<std::pair<std::string, ConfigFieldRef>> config_fields(ExperimentConfig& c) {
    return {
        {".seed", {ConfigFieldRef::kU64, &c.seed}},
        {".out_dir", {ConfigFieldRef::kString, &c.out_dir}},
        {"dataset.kind", {ConfigFieldRef::kString, &c.dataset_kind}},
        {"dataset.moons_n", {ConfigFieldRef::kInt, &c.moons_n}},
        {"dataset.moons_noise_sd", {ConfigFieldRef::kDouble, &c.moons_noise_sd}},
        {"dataset.rotation_deg", {ConfigFieldRef::kDouble, &c.rotation_deg}},
        {"dataset.blob_classes", {ConfigFieldRef::kInt, &c.blob_classes}},
        {"dataset.blob_n_per_class", {ConfigFieldRef::kInt, &c.blob_n_per_class}},
        {"dataset.blob_shift_x", {ConfigFieldRef::kDouble, &c.blob_shift_x}},
        {"dataset.blob_shift_y", {ConfigFieldRef::kDouble, &c.blob_shift_y}},
        {"dataset.blob_scale", {ConfigFieldRef::kDouble, &c.blob_scale}},
        {"dataset.source_csv", {ConfigFieldRef::kString, &c.source_csv}},
        {"dataset.target_csv", {ConfigFieldRef::kString, &c.target_csv}},
        {"dataset.label_column", {ConfigFieldRef::kString, &c.label_column}},
        {"model.emb_dim", {ConfigFieldRef::kInt, &c.emb_dim}},
        {"model.hidden", {ConfigFieldRef::kInt, &c.hidden}},
        {"model.meta_hidden", {ConfigFieldRef::kInt, &c.meta_hidden}},
        {"model.disc_hidden", {ConfigFieldRef::kInt, &c.disc_hidden}},
        {"train.method", {ConfigFieldRef::kString, &c.method}},
        {"train.match_mode", {ConfigFieldRef::kString, &c.match_mode}},
        {"train.pair_concat", {ConfigFieldRef::kBool, &c.pair_concat}},
        {"train.eta0", {ConfigFieldRef::kDouble, &c.eta0}},
        {"train.beta0", {ConfigFieldRef::kDouble, &c.beta0}},
        {"train.gamma", {ConfigFieldRef::kDouble, &c.gamma}},
        {"train.upsilon", {ConfigFieldRef::kDouble, &c.upsilon}},
        {"train.lambda_max", {ConfigFieldRef::kDouble, &c.lambda_max}},
        {"train.lambda_mode", {ConfigFieldRef::kString, &c.lambda_mode}},
        {"train.meta_loss_sign", {ConfigFieldRef::kInt, &c.meta_loss_sign}},
        {"train.tau", {ConfigFieldRef::kDouble, &c.tau}},
        {"train.meta_per_class", {ConfigFieldRef::kInt, &c.meta_per_class}},
        {"train.max_steps", {ConfigFieldRef::kInt, &c.max_steps}},
        {"train.batch_size", {ConfigFieldRef::kInt, &c.batch_size}},
        {"train.clip_norm", {ConfigFieldRef::kDouble, &c.clip_norm}},
        {"train.meta_weight_decay", {ConfigFieldRef::kDouble, &c.meta_weight_decay}},
        {"train.disc_lr", {ConfigFieldRef::kDouble, &c.disc_lr}},
        {"train.main_progress", {ConfigFieldRef::kString, &c.main_progress}},
        {"train.meta_updates", {ConfigFieldRef::kBool, &c.meta_updates}},
    };
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

void assign(const ConfigFieldRef& f, const std::string& raw, const std::string& where) {
    const std::string v = trim(raw);
    auto bad = [&](const std::string& what) {
        return ConfigError(where + ": expected " + what + ", got '" + v + "'");
    };
    switch (f.kind) {
        case ConfigFieldRef::kString: {
            if (v.size() < 2 || v.front() != '"' || v.back() != '"') throw bad("a quoted string");
            *static_cast<std::string*>(f.ptr) = v.substr(1, v.size() - 2);
            break;
        }
        case ConfigFieldRef::kBool: {
            if (v == "true") *static_cast<bool*>(f.ptr) = true;
            else if (v == "false") *static_cast<bool*>(f.ptr) = false;
            else throw bad("true or false");
            break;
        }
        case ConfigFieldRef::kInt: {
            int out;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || p != v.data() + v.size()) throw bad("an integer");
            *static_cast<int*>(f.ptr) = out;
            break;
        }
        case ConfigFieldRef::kU64: {
            std::uint64_t out;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || p != v.data() + v.size()) throw bad("an unsigned integer");
            *static_cast<std::uint64_t*>(f.ptr) = out;
            break;
        }
        case ConfigFieldRef::kDouble: {
            double out;
            auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
            if (ec != std::errc() || p != v.data() + v.size()) throw bad("a number");
            *static_cast<double*>(f.ptr) = out;
            break;
        }
    }
}

}  // namespace

ExperimentConfig load_config_toml(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    ExperimentConfig cfg;
    auto fields = config_fields(cfg);

    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(line_no);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "dataset" && section != "model" && section != "train") {
                throw ConfigError(where + ": unknown section [" + section + "]");
            }
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        const std::string key = section + "." + trim(line.substr(0, eq));
        bool found = false;
        for (auto& [name, field] : fields) {
            if (name == key) {
                assign(field, line.substr(eq + 1), where);
                found = true;
                break;
            }
        }
        if (!found) throw ConfigError(where + ": unknown key '" + trim(line.substr(0, eq)) + "'");
    }
    cfg.validate();
    return cfg;
}

void save_config_toml(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file " + path);
    auto fields = config_fields(const_cast<ExperimentConfig&>(cfg));
    std::string section;
    std::ostringstream body;
    body.precision(17);
    for (auto& [name, field] : fields) {
        const std::size_t dot = name.find('.');
        const std::string sec = name.substr(0, dot);
        const std::string key = name.substr(dot + 1);
        if (sec != section && !sec.empty()) {
            body << "[" << sec << "]\n";
            section = sec;
        }
        body << key << " = ";
        switch (field.kind) {
            case ConfigFieldRef::kString: body << '"' << *static_cast<std::string*>(field.ptr) << '"'; break;
            case ConfigFieldRef::kBool: body << (*static_cast<bool*>(field.ptr) ? "true" : "false"); break;
            case ConfigFieldRef::kInt: body << *static_cast<int*>(field.ptr); break;
            case ConfigFieldRef::kU64: body << *static_cast<std::uint64_t*>(field.ptr); break;
            case ConfigFieldRef::kDouble: body << *static_cast<double*>(field.ptr); break;
        }
        body << "\n";
    }
    out << body.str();
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace l2m
