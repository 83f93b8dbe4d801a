#include "qwthn/tensor.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

void check_shape_valid(const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw ShapeError("tensor shape must be non-empty");
    }
    for (std::size_t d : shape) {
        if (d == 0) {
            throw ShapeError("tensor dimensions must be positive");
        }
    }
}

} // namespace

std::size_t shape_product(const std::vector<std::size_t>& dims) {
    std::size_t p = 1;
    for (std::size_t d : dims) {
        p *= d;
    }
    return p;
}

Tensor::Tensor(std::vector<std::size_t> shape) : shape_(std::move(shape)) {
    check_shape_valid(shape_);
    data_.assign(shape_product(shape_), 0.0);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape_valid(shape_);
    if (shape_product(shape_) != data_.size()) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape product " +
                         std::to_string(shape_product(shape_)));
    }
}

Tensor Tensor::from_vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

double& Tensor::at(std::size_t row, std::size_t col) {
    return data_[row * shape_[1] + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
    return data_[row * shape_[1] + col];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

Tensor reshape_hierarchical(const Tensor& x, const std::vector<std::size_t>& dims) {
    check_shape_valid(dims);
    if (shape_product(dims) != x.size()) {
        throw ShapeError("reshape: product of new dims " +
                         std::to_string(shape_product(dims)) +
                         " does not match element count " + std::to_string(x.size()));
    }
    return Tensor(dims, x.flat());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul requires rank-2 tensors");
    }
    const std::size_t m = a.dim(0);
    const std::size_t k = a.dim(1);
    const std::size_t n = b.dim(1);
    if (b.dim(0) != k) {
        throw ShapeError("matmul: inner dimensions disagree (" + std::to_string(k) +
                         " vs " + std::to_string(b.dim(0)) + ")");
    }
    Tensor out({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t l = 0; l < k; ++l) {
            const double av = pa[i * k + l];
            if (av == 0.0) {
                continue;
            }
            const double* brow = pb + l * n;
            double* orow = po + i * n;
            for (std::size_t j = 0; j < n; ++j) {
                orow[j] += av * brow[j];
            }
        }
    }
    return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, ElemOp op) {
    if (!a.same_shape(b)) {
        throw ShapeError("elementwise: shapes differ");
    }
    Tensor out(a.shape());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    if (op == ElemOp::Mul) {
        for (std::size_t i = 0; i < n; ++i) {
            po[i] = pa[i] * pb[i];
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            po[i] = pa[i] + pb[i];
        }
    }
    return out;
}

Tensor kaiming_uniform_init(const std::vector<std::size_t>& shape,
                            std::size_t fan_in, RngState& rng) {
    check_shape_valid(shape);
    if (fan_in == 0) {
        throw ShapeError("kaiming init: fan_in must be positive");
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Tensor out(shape);
    double* p = out.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        p[i] = rng.uniform(-bound, bound);
    }
    return out;
}

} // namespace qwthn
