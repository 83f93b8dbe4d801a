#pragma once

#include <cstdint>
#include <vector>

#include "qwthn/tensor.hpp"

namespace qwthn {

struct FourierSample {
    double x = 0.0;
    double y = 0.0;
};

// Truncated Fourier series y = sum_k a_k cos(kx) + b_k sin(kx) with seeded
// coefficients, sampled at x uniform on [-pi, pi].
struct FourierTask {
    std::vector<double> cos_coeffs;
    std::vector<double> sin_coeffs;
    std::vector<FourierSample> samples;
};

FourierTask gen_fourier_task(std::uint64_t seed, std::size_t harmonics,
                             std::size_t num_samples);
double fourier_eval(const FourierTask& task, double x);

// Harmonic feature map for scalar regression inputs: entries alternate
// cos((m+1)x), sin((m+1)x).
Tensor fourier_features(double x, std::size_t dim);

// Seeded token stream: a cyclic pattern over the vocabulary (stride depends
// on the variant) with a 10% substitution rate, so next-token prediction is
// learnable but not trivial.
std::vector<std::size_t> gen_synthetic_text(std::uint64_t seed, std::size_t vocab,
                                            std::size_t length, std::size_t variant);

} // namespace qwthn
