#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace wganc::ad {

// Dense multi-dimensional array of doubles, row-major.
struct Tensor {
    std::vector<size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<size_t> s, std::vector<double> d);

    static Tensor zeros(std::vector<size_t> shape);
    static Tensor full(std::vector<size_t> shape, double v);
    static Tensor scalar(double v);               // shape {1}
    static Tensor row_major(std::vector<size_t> shape, std::vector<double> values);

    size_t numel() const;
    size_t rank() const { return shape.size(); }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    // rank-2 accessors
    size_t rows() const;
    size_t cols() const;
    double& at(size_t i, size_t j);
    double at(size_t i, size_t j) const;

    bool all_finite() const;
};

size_t shape_numel(const std::vector<size_t>& shape);
std::string shape_str(const std::vector<size_t>& shape);

}  // namespace wganc::ad
