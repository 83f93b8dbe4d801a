#include "qwthn/tasks.hpp"

#include <cmath>

#include "qwthn/errors.hpp"
#include "qwthn/rng.hpp"

namespace qwthn {

namespace {

constexpr double kPi = 3.141592653589793;

} // namespace

FourierTask gen_fourier_task(std::uint64_t seed, std::size_t harmonics,
                             std::size_t num_samples) {
    if (harmonics == 0) {
        throw ConfigError("fourier task: at least one harmonic required");
    }
    RngState rng(seed);
    FourierTask task;
    task.cos_coeffs.resize(harmonics);
    task.sin_coeffs.resize(harmonics);
    for (std::size_t k = 0; k < harmonics; ++k) {
        task.cos_coeffs[k] = rng.uniform(-1.0, 1.0);
        task.sin_coeffs[k] = rng.uniform(-1.0, 1.0);
    }
    task.samples.resize(num_samples);
    for (FourierSample& sample : task.samples) {
        sample.x = rng.uniform(-kPi, kPi);
        sample.y = fourier_eval(task, sample.x);
    }
    return task;
}

double fourier_eval(const FourierTask& task, double x) {
    double y = 0.0;
    for (std::size_t k = 0; k < task.cos_coeffs.size(); ++k) {
        const double freq = static_cast<double>(k + 1);
        y += task.cos_coeffs[k] * std::cos(freq * x) +
             task.sin_coeffs[k] * std::sin(freq * x);
    }
    return y;
}

Tensor fourier_features(double x, std::size_t dim) {
    Tensor features({dim});
    for (std::size_t i = 0; i < dim; ++i) {
        const double freq = static_cast<double>(i / 2 + 1);
        features[i] = (i % 2 == 0) ? std::cos(freq * x) : std::sin(freq * x);
    }
    return features;
}

std::vector<std::size_t> gen_synthetic_text(std::uint64_t seed, std::size_t vocab,
                                            std::size_t length, std::size_t variant) {
    if (vocab < 2) {
        throw ConfigError("synthetic text: vocab must be at least 2");
    }
    RngState rng(seed);
    const std::size_t stride = 1 + variant % (vocab - 1);
    const std::size_t phase = rng.next_below(vocab);
    std::vector<std::size_t> tokens(length);
    for (std::size_t i = 0; i < length; ++i) {
        if (rng.next_below(10) == 0) {
            tokens[i] = rng.next_below(vocab);
        } else {
            tokens[i] = (i * stride + phase) % vocab;
        }
    }
    return tokens;
}

} // namespace qwthn
