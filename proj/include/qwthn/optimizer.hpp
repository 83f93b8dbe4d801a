#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qwthn {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Standard Adam with bias correction, deterministic given the update order.
class Adam {
public:
    Adam(const AdamConfig& config, std::size_t param_count);

    void step(std::span<double* const> params, std::span<const double> grads);

    std::size_t steps_taken() const { return steps_; }
    // total scalars updated so far; instruments parameter accounting
    std::uint64_t scalars_touched() const { return touched_; }

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::size_t steps_ = 0;
    std::uint64_t touched_ = 0;
};

} // namespace qwthn
