#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "l2m/errors.hpp"

namespace l2m {

// Dense row-major tensor of doubles. Rank 1 or 2 is all the networks
// here need; a scalar is represented as shape {1}.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d);

    static Tensor zeros(std::vector<int> shape);
    static Tensor scalar(double v);
    static Tensor vector(std::vector<double> v);
    static Tensor matrix(int rows, int cols, std::vector<double> v);

    std::size_t numel() const { return data.size(); }
    int rows() const;
    int cols() const;
    bool is_scalar() const { return data.size() == 1; }

    double& at(int r, int c);
    double at(int r, int c) const;

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace l2m
