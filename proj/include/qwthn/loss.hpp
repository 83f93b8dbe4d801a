#pragma once

#include <vector>

#include "qwthn/tensor.hpp"

namespace qwthn {

// Mean negative log-likelihood over rows of (N, C) logits; probabilities are
// clamped at 1e-12 before the log so the value stays finite.
double cross_entropy(const Tensor& logits, const std::vector<std::size_t>& labels);

// Row softmax of a (N, C) tensor.
Tensor softmax_rows(const Tensor& logits);

} // namespace qwthn
