#include "qwthn/loss.hpp"

#include <algorithm>
#include <cmath>

#include "qwthn/errors.hpp"

namespace qwthn {

Tensor softmax_rows(const Tensor& logits) {
    if (logits.rank() != 2) {
        throw ShapeError("softmax: rank-2 tensor required");
    }
    const std::size_t rows = logits.dim(0);
    const std::size_t cols = logits.dim(1);
    Tensor probs({rows, cols});
    for (std::size_t r = 0; r < rows; ++r) {
        const double* in = logits.data() + r * cols;
        double* out = probs.data() + r * cols;
        double peak = in[0];
        for (std::size_t c = 1; c < cols; ++c) {
            peak = std::max(peak, in[c]);
        }
        double total = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] = std::exp(in[c] - peak);
            total += out[c];
        }
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] /= total;
        }
    }
    return probs;
}

double cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels) {
    if (logits.rank() != 2) {
        throw ShapeError("cross_entropy: rank-2 logits required");
    }
    if (labels.empty()) {
        throw ShapeError("cross_entropy: empty batch");
    }
    if (labels.size() != logits.dim(0)) {
        throw ShapeError("cross_entropy: one label per row required");
    }
    const std::size_t cols = logits.dim(1);
    const Tensor probs = softmax_rows(logits);
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] >= cols) {
            throw ShapeError("cross_entropy: label out of range");
        }
        total -= std::log(std::max(probs.at(r, labels[r]), 1e-12));
    }
    return total / static_cast<double>(labels.size());
}

} // namespace qwthn
