#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qwthn/adapter.hpp"
#include "qwthn/host_model.hpp"
#include "qwthn/loss.hpp"
#include "qwthn/optimizer.hpp"
#include "qwthn/tasks.hpp"

namespace qwthn {

enum class TaskKind { FourierRegression, CharLm };
enum class AdapterKind { Qwthn, Lora };

struct FourierOptions {
    std::size_t harmonics = 3;
    std::size_t samples = 512;
};

struct TrainConfig {
    std::uint64_t seed = 7;
    TaskKind task = TaskKind::FourierRegression;
    AdapterKind adapter = AdapterKind::Qwthn;
    QwthnConfig qwthn;
    LoraConfig lora;
    AdamConfig adam;
    std::size_t steps = 500;
    std::size_t batch_size = 16;
    double validation_fraction = 0.1;
    std::size_t eval_every = 50;
    FourierOptions fourier;
    CharLmConfig host;
    std::size_t finetune_corpus_length = 2048;
    std::size_t finetune_variant = 1;

    void validate() const;
};

struct RunHistory {
    std::vector<double> train_loss;          // one entry per step
    std::vector<std::size_t> val_steps;
    std::vector<double> val_loss;
    std::vector<double> ms_per_step;         // wall clock; excluded from
                                             // determinism comparisons
    ParamReport params;
    std::uint64_t optimizer_scalars_touched = 0;

    double initial_loss() const { return train_loss.front(); }
    double final_loss() const { return train_loss.back(); }
};

// true when the deterministic fields (losses, steps, params) are identical
bool histories_equal(const RunHistory& a, const RunHistory& b);

struct TrainResult {
    RunHistory history;
    // fourier: the single wrapped adapter; char-lm: the q then v adapters
    std::vector<std::unique_ptr<AdapterBase>> adapters;
};

// Runs forward/backward/Adam for config.steps steps. Gradients flow through
// the MPO chains analytically, the dense stages analytically, and the QNN by
// the parameter-shift rule (exact expectations). Aborts with NumericError if
// the loss leaves the finite range.
TrainResult train_with_artifacts(const TrainConfig& config);
RunHistory train(const TrainConfig& config);

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

// Central finite differences of `loss` against `analytic`, perturbing each
// parameter in place. Relative error carries a 1e-6 absolute floor.
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<double>& analytic,
                           const std::vector<double*>& params, double epsilon);

// Exhaustive check of a freshly built adapter on a directional loss.
GradCheckReport grad_check_adapter(AdapterBase& adapter, std::uint64_t seed,
                                   double epsilon);

} // namespace qwthn
