#include "l2m/tensor.hpp"

#include <numeric>
#include <sstream>

namespace l2m {

Tensor::Tensor(std::vector<int> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    std::size_t n = 1;
    for (int dim : shape) {
        if (dim < 0) throw ShapeError("negative dimension in shape " + shape_str());
        n *= static_cast<std::size_t>(dim);
    }
    if (n != data.size()) {
        throw ShapeError("shape " + shape_str() + " does not match data length " +
                         std::to_string(data.size()));
    }
}

Tensor Tensor::zeros(std::vector<int> shape) {
    std::size_t n = 1;
    for (int dim : shape) n *= static_cast<std::size_t>(dim);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::vector(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

int Tensor::rows() const {
    if (shape.empty()) return 0;
    return shape[0];
}

int Tensor::cols() const {
    if (shape.size() < 2) return 1;
    return shape[1];
}

double& Tensor::at(int r, int c) { return data[static_cast<std::size_t>(r) * cols() + c]; }

double Tensor::at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols() + c];
}

std::string Tensor::shape_str() const { return l2m::shape_str(shape); }

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace l2m
