#pragma once

#include <cstdint>
#include <vector>

#include "l2m/tensor.hpp"

namespace l2m {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct Prf1 {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// P = 0 when nothing is predicted positive; F1 = 0 when P + R = 0.
Prf1 precision_recall_f1(const std::vector<int>& predictions,
                         const std::vector<int>& labels, int positive_class);

// d_A = 2(1 - 2 eps) where eps is the held-out error of a linear logistic
// domain classifier (200 full-batch epochs, 50/50 split per domain),
// clamped to [0, 0.5].
double proxy_a_distance(const Tensor& emb_s, const Tensor& emb_t, std::uint64_t seed);

}  // namespace l2m
