#include "l2m/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace l2m {

namespace {

std::mt19937_64 seeded_rng(std::uint64_t seed) {
    return std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + 0x2545F4914F6CDD1DULL);
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_csv_line(std::string line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

Dataset make_two_moons(int n, double noise_sd, std::uint64_t seed) {
    if (n % 2 != 0) throw UsageError("make_two_moons: n must be even, got " + std::to_string(n));
    if (noise_sd < 0.0) throw UsageError("make_two_moons: noise_sd must be >= 0");
    const int half = n / 2;
    auto rng = seeded_rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    Tensor features = Tensor::zeros({n, 2});
    std::vector<int> labels(n);
    for (int i = 0; i < half; ++i) {
        const double t = std::numbers::pi * (i + 0.5) / half;
        features.at(i, 0) = std::cos(t) + noise_sd * noise(rng);
        features.at(i, 1) = std::sin(t) + noise_sd * noise(rng);
        labels[i] = 0;
        features.at(half + i, 0) = 1.0 - std::cos(t) + noise_sd * noise(rng);
        features.at(half + i, 1) = 0.5 - std::sin(t) + noise_sd * noise(rng);
        labels[half + i] = 1;
    }
    Dataset ds;
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.num_classes = 2;
    ds.domain_tag = DomainTag::kSource;
    return ds;
}

Dataset rotate_domain(const Dataset& ds, double angle_deg) {
    if (ds.dim() != 2) {
        throw ShapeError("rotate_domain requires 2-D features, got dim " +
                         std::to_string(ds.dim()));
    }
    const double a = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    Dataset out = ds;
    for (int i = 0; i < ds.size(); ++i) {
        const double x = ds.features.at(i, 0);
        const double y = ds.features.at(i, 1);
        out.features.at(i, 0) = c * x - s * y;
        out.features.at(i, 1) = s * x + c * y;
    }
    out.domain_tag = DomainTag::kTarget;
    return out;
}

std::pair<Dataset, Dataset> make_shifted_blobs(int num_classes, int n_per_class,
                                               const std::vector<double>& shift,
                                               double scale, std::uint64_t seed) {
    if (num_classes < 2) throw UsageError("make_shifted_blobs: need at least 2 classes");
    if (scale <= 0.0) throw UsageError("make_shifted_blobs: scale must be > 0");
    if (shift.empty()) throw UsageError("make_shifted_blobs: shift defines the dimension");
    const int d = static_cast<int>(shift.size());
    const int n = num_classes * n_per_class;
    auto rng = seeded_rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    // Fixed centers on a circle of radius 4 in the first two coordinates.
    auto center = [&](int c, int j) {
        const double phi = 2.0 * std::numbers::pi * c / num_classes;
        if (j == 0) return 4.0 * std::cos(phi);
        if (j == 1 && d > 1) return 4.0 * std::sin(phi);
        return 0.0;
    };

    Dataset src, tgt;
    src.features = Tensor::zeros({n, d});
    tgt.features = Tensor::zeros({n, d});
    src.labels.resize(n);
    tgt.labels.resize(n);
    src.num_classes = tgt.num_classes = num_classes;
    src.domain_tag = DomainTag::kSource;
    tgt.domain_tag = DomainTag::kTarget;

    for (int c = 0; c < num_classes; ++c) {
        for (int k = 0; k < n_per_class; ++k) {
            const int i = c * n_per_class + k;
            src.labels[i] = c;
            tgt.labels[i] = c;
            for (int j = 0; j < d; ++j) {
                src.features.at(i, j) = center(c, j) + noise(rng);
                tgt.features.at(i, j) = center(c, j) + shift[j] + scale * noise(rng);
            }
        }
    }

    // Standardize with source statistics only (target stats are unknown in UDA).
    for (int j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int i = 0; i < n; ++i) mean += src.features.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double diff = src.features.at(i, j) - mean;
            var += diff * diff;
        }
        const double sd = std::sqrt(var / n);
        const double inv = sd > 0.0 ? 1.0 / sd : 1.0;
        for (int i = 0; i < n; ++i) {
            src.features.at(i, j) = (src.features.at(i, j) - mean) * inv;
            tgt.features.at(i, j) = (tgt.features.at(i, j) - mean) * inv;
        }
    }
    return {std::move(src), std::move(tgt)};
}

std::vector<std::vector<int>> batch_iterator(const Dataset& ds, const BatchPlan& plan) {
    if (plan.batch_size < 1) throw UsageError("batch_iterator: batch_size must be >= 1");
    const int n = ds.size();
    if (plan.drop_last && plan.batch_size > n) {
        throw UsageError("batch_iterator: batch_size " + std::to_string(plan.batch_size) +
                         " with drop_last leaves an empty epoch (n=" + std::to_string(n) + ")");
    }
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    auto rng = seeded_rng(plan.seed ^ (0x6A09E667F3BCC909ULL * (plan.epoch + 1)));
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<std::vector<int>> batches;
    for (int start = 0; start < n; start += plan.batch_size) {
        const int end = std::min(n, start + plan.batch_size);
        if (plan.drop_last && end - start < plan.batch_size) break;
        batches.emplace_back(idx.begin() + start, idx.begin() + end);
    }
    return batches;
}

Dataset load_csv_dataset(const std::string& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        rows.push_back(split_csv_line(line));
    }
    if (rows.empty()) throw DataError(path + ": empty file");

    // Header if any field of the first line is non-numeric.
    bool has_header = false;
    for (const std::string& f : rows[0]) {
        double tmp;
        if (!parse_double(f, tmp)) {
            has_header = true;
            break;
        }
    }
    std::vector<std::string> header;
    std::size_t first_data = 0;
    if (has_header) {
        header = rows[0];
        first_data = 1;
        if (rows.size() == 1) throw DataError(path + ": header but no data rows");
    }
    const std::size_t ncols = rows[first_data].size();

    int label_idx = -1;
    {
        int parsed;
        auto [ptr, ec] = std::from_chars(label_column.data(),
                                         label_column.data() + label_column.size(), parsed);
        if (ec == std::errc() && ptr == label_column.data() + label_column.size()) {
            label_idx = parsed;
        } else {
            for (std::size_t c = 0; c < header.size(); ++c) {
                if (header[c] == label_column) label_idx = static_cast<int>(c);
            }
            if (label_idx < 0) throw ConfigError("label column '" + label_column + "' not found");
        }
    }
    if (label_idx < 0 || label_idx >= static_cast<int>(ncols)) {
        throw ConfigError("label column index " + std::to_string(label_idx) + " out of range");
    }

    const int n = static_cast<int>(rows.size() - first_data);
    const int d = static_cast<int>(ncols) - 1;
    Tensor features = Tensor::zeros({n, d});
    std::vector<long long> raw_labels(n);
    for (int r = 0; r < n; ++r) {
        const auto& fields = rows[first_data + r];
        const std::size_t line_no = first_data + r + 1;
        if (fields.size() != ncols) {
            throw DataError(path + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(ncols));
        }
        int fc = 0;
        for (std::size_t c = 0; c < ncols; ++c) {
            if (static_cast<int>(c) == label_idx) {
                double v;
                if (!parse_double(fields[c], v) || v != std::floor(v)) {
                    throw DataError(path + ": line " + std::to_string(line_no) +
                                    ": non-integer label '" + fields[c] + "'");
                }
                raw_labels[r] = static_cast<long long>(v);
            } else {
                double v;
                if (!parse_double(fields[c], v)) {
                    throw DataError(path + ": line " + std::to_string(line_no) +
                                    ": non-numeric value '" + fields[c] + "'");
                }
                features.at(r, fc++) = v;
            }
        }
    }

    std::map<long long, int> remap;
    for (long long v : raw_labels) remap.emplace(v, 0);
    int next = 0;
    std::vector<std::string> names;
    for (auto& [orig, mapped] : remap) {
        mapped = next++;
        names.push_back(std::to_string(orig));
    }

    Dataset ds;
    ds.features = std::move(features);
    ds.labels.resize(n);
    for (int r = 0; r < n; ++r) ds.labels[r] = remap[raw_labels[r]];
    ds.num_classes = next;
    ds.label_names = std::move(names);
    return ds;
}

void write_csv_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    for (int j = 0; j < ds.dim(); ++j) out << "f" << j << ",";
    out << "label\n";
    for (int i = 0; i < ds.size(); ++i) {
        for (int j = 0; j < ds.dim(); ++j) out << ds.features.at(i, j) << ",";
        out << ds.labels[i] << "\n";
    }
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace l2m
