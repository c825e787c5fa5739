#include "l2m/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "l2m/errors.hpp"

namespace l2m {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw UsageError("accuracy: need equal non-empty prediction and label vectors");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (predictions[i] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / predictions.size();
}

Prf1 precision_recall_f1(const std::vector<int>& predictions,
                         const std::vector<int>& labels, int positive_class) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw UsageError("precision_recall_f1: need equal non-empty vectors");
    }
    int tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool pred_pos = predictions[i] == positive_class;
        const bool is_pos = labels[i] == positive_class;
        if (pred_pos && is_pos) ++tp;
        if (pred_pos && !is_pos) ++fp;
        if (!pred_pos && is_pos) ++fn;
    }
    Prf1 out;
    out.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    out.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    out.f1 = (out.precision + out.recall) > 0.0
                 ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                 : 0.0;
    return out;
}

double proxy_a_distance(const Tensor& emb_s, const Tensor& emb_t, std::uint64_t seed) {
    if (emb_s.rows() < 20 || emb_t.rows() < 20) {
        throw UsageError("proxy_a_distance needs at least 20 samples per domain");
    }
    if (emb_s.cols() != emb_t.cols()) {
        throw ShapeError("proxy_a_distance: " + emb_s.shape_str() + " vs " + emb_t.shape_str());
    }
    const int d = emb_s.cols();

    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 0xBB67AE8584CAA73BULL);
    auto split = [&](int n) {
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        return idx;
    };
    const std::vector<int> idx_s = split(emb_s.rows());
    const std::vector<int> idx_t = split(emb_t.rows());
    const int ns_train = emb_s.rows() / 2, nt_train = emb_t.rows() / 2;

    std::vector<const double*> train_x, test_x;
    std::vector<double> train_y, test_y;
    for (int i = 0; i < emb_s.rows(); ++i) {
        const double* row = emb_s.data.data() + static_cast<std::size_t>(idx_s[i]) * d;
        (i < ns_train ? train_x : test_x).push_back(row);
        (i < ns_train ? train_y : test_y).push_back(1.0);
    }
    for (int i = 0; i < emb_t.rows(); ++i) {
        const double* row = emb_t.data.data() + static_cast<std::size_t>(idx_t[i]) * d;
        (i < nt_train ? train_x : test_x).push_back(row);
        (i < nt_train ? train_y : test_y).push_back(0.0);
    }

    // Standardize with training statistics.
    std::vector<double> mean(d, 0.0), sd(d, 0.0);
    for (const double* row : train_x) {
        for (int j = 0; j < d; ++j) mean[j] += row[j];
    }
    for (int j = 0; j < d; ++j) mean[j] /= train_x.size();
    for (const double* row : train_x) {
        for (int j = 0; j < d; ++j) {
            const double diff = row[j] - mean[j];
            sd[j] += diff * diff;
        }
    }
    for (int j = 0; j < d; ++j) {
        sd[j] = std::sqrt(sd[j] / train_x.size());
        if (sd[j] <= 0.0) sd[j] = 1.0;
    }
    auto feat = [&](const double* row, int j) { return (row[j] - mean[j]) / sd[j]; };

    // Linear logistic classifier, full-batch gradient descent.
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    const double lr = 0.5;
    const int n_train = static_cast<int>(train_x.size());
    for (int epoch = 0; epoch < 200; ++epoch) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (int i = 0; i < n_train; ++i) {
            double z = b;
            for (int j = 0; j < d; ++j) z += w[j] * feat(train_x[i], j);
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double g = (p - train_y[i]) / n_train;
            for (int j = 0; j < d; ++j) gw[j] += g * feat(train_x[i], j);
            gb += g;
        }
        for (int j = 0; j < d; ++j) w[j] -= lr * gw[j];
        b -= lr * gb;
    }

    int wrong = 0;
    for (std::size_t i = 0; i < test_x.size(); ++i) {
        double z = b;
        for (int j = 0; j < d; ++j) z += w[j] * feat(test_x[i], j);
        const bool pred_source = z > 0.0;
        if (pred_source != (test_y[i] > 0.5)) ++wrong;
    }
    double eps = static_cast<double>(wrong) / test_x.size();
    eps = std::clamp(eps, 0.0, 0.5);
    return 2.0 * (1.0 - 2.0 * eps);
}

}  // namespace l2m
