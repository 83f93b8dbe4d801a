#include "qwthn/optimizer.hpp"

#include <cmath>

#include "qwthn/errors.hpp"

namespace qwthn {

Adam::Adam(const AdamConfig& config, std::size_t param_count)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {
    if (config.learning_rate < 0.0 || config.beta1 < 0.0 || config.beta1 >= 1.0 ||
        config.beta2 < 0.0 || config.beta2 >= 1.0 || config.epsilon <= 0.0) {
        throw ConfigError("adam: hyperparameters out of range");
    }
}

void Adam::step(std::span<double* const> params, std::span<const double> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        throw ShapeError("adam: parameter/gradient count mismatch");
    }
    ++steps_;
    const double t = static_cast<double>(steps_);
    const double bias1 = 1.0 - std::pow(config_.beta1, t);
    const double bias2 = 1.0 - std::pow(config_.beta2, t);
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const double g = grads[i];
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
        const double m_hat = m_[i] / bias1;
        const double v_hat = v_[i] / bias2;
        *params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    touched_ += m_.size();
}

} // namespace qwthn
