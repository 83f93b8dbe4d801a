#pragma once

#include <cstddef>
#include <vector>

#include "qwthn/rng.hpp"

namespace qwthn {

enum class ElemOp { Mul, Add };

// Dense row-major tensor of 64-bit reals: rank-1 vectors, rank-2 matrices
// and the rank-4 MPO site tensors all live here.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape); // zero-filled
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor from_vector(std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_[axis]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    const std::vector<double>& flat() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // rank-2 access
    double& at(std::size_t row, std::size_t col);
    double at(std::size_t row, std::size_t col) const;

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& dims);

// Relabels indices without touching the flat data; product(dims) must match.
Tensor reshape_hierarchical(const Tensor& x, const std::vector<std::size_t>& dims);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor elementwise(const Tensor& a, const Tensor& b, ElemOp op);

// Uniform on [-b, b] with b = sqrt(6 / fan_in), sampled i.i.d. per element.
Tensor kaiming_uniform_init(const std::vector<std::size_t>& shape,
                            std::size_t fan_in, RngState& rng);

} // namespace qwthn
