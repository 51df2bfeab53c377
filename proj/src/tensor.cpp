#include "wganc/tensor.hpp"

#include <cmath>
#include <sstream>

#include "wganc/error.hpp"

namespace wganc::ad {

size_t shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t e : shape) n *= e;
    return n;
}

std::string shape_str(const std::vector<size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(std::vector<size_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor: shape " + shape_str(shape) + " does not match buffer of " +
                         std::to_string(data.size()) + " elements");
    }
    for (size_t e : shape) {
        if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
    }
}

Tensor Tensor::zeros(std::vector<size_t> shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(std::vector<size_t> shape, double v) {
    size_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::row_major(std::vector<size_t> shape, std::vector<double> values) {
    return Tensor(std::move(shape), std::move(values));
}

size_t Tensor::numel() const { return data.size(); }

size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
    return shape[0];
}

size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape[1];
}

double& Tensor::at(size_t i, size_t j) { return data[i * cols() + j]; }

double Tensor::at(size_t i, size_t j) const { return data[i * cols() + j]; }

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace wganc::ad
