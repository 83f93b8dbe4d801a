#include "qwthn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>

#include "qwthn/errors.hpp"
#include "qwthn/rng.hpp"

namespace qwthn {

namespace {

using Clock = std::chrono::steady_clock;

std::unique_ptr<AdapterBase> build_adapter(const TrainConfig& config,
                                           std::size_t input_dim,
                                           std::size_t output_dim, RngState& rng) {
    if (config.adapter == AdapterKind::Qwthn) {
        QwthnConfig qc = config.qwthn;
        qc.input_dim = input_dim;
        qc.output_dim = output_dim;
        return std::make_unique<QwthnAdapter>(QwthnAdapter::init(qc, rng));
    }
    LoraConfig lc = config.lora;
    lc.input_dim = input_dim;
    lc.output_dim = output_dim;
    return std::make_unique<LoraAdapter>(LoraAdapter::init(lc, rng));
}

double record_step_ms(const Clock::time_point& started) {
    return std::chrono::duration<double, std::milli>(Clock::now() - started).count();
}

void check_finite_loss(double loss, std::size_t step) {
    if (!std::isfinite(loss)) {
        throw NumericError("training diverged: non-finite loss at step " +
                           std::to_string(step));
    }
}

TrainResult train_fourier(const TrainConfig& config) {
    RngState root(config.seed);
    RngState data_rng = root.split(1);
    RngState init_rng = root.split(2);
    RngState host_rng = root.split(3);
    RngState batch_rng = root.split(4);

    const FourierTask task = gen_fourier_task(data_rng.next_u64(), config.fourier.harmonics,
                                              config.fourier.samples);

    // frozen random linear host wrapping the adapter
    const std::size_t in_dim = config.adapter == AdapterKind::Qwthn
                                   ? config.qwthn.input_dim
                                   : config.lora.input_dim;
    const std::size_t out_dim = config.adapter == AdapterKind::Qwthn
                                    ? config.qwthn.output_dim
                                    : config.lora.output_dim;
    InjectedLayer layer;
    layer.frozen_weight = kaiming_uniform_init({out_dim, in_dim}, in_dim, host_rng);
    layer.adapter = build_adapter(config, in_dim, out_dim, init_rng);

    // seeded shuffle, validation split from the tail
    std::vector<std::size_t> order(task.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[data_rng.next_below(i)]);
    }
    const std::size_t val_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(
               config.validation_fraction * static_cast<double>(order.size()))));
    const std::size_t train_count = order.size() - val_count;
    if (train_count == 0) {
        throw ConfigError("train: validation split leaves no training data");
    }

    const double inv_out = 1.0 / static_cast<double>(out_dim);
    auto predict = [&](double x) {
        const Tensor features = fourier_features(x, in_dim);
        const Tensor outputs = layer.forward(features);
        double mean = 0.0;
        for (std::size_t o = 0; o < out_dim; ++o) {
            mean += outputs[o];
        }
        return mean * inv_out;
    };
    auto split_loss = [&](std::size_t first, std::size_t count) {
        double total = 0.0;
        for (std::size_t i = first; i < first + count; ++i) {
            const FourierSample& sample = task.samples[order[i]];
            const double err = predict(sample.x) - sample.y;
            total += err * err;
        }
        return total / static_cast<double>(count);
    };

    const std::size_t param_count = layer.adapter->param_count();
    const std::vector<double*> refs = layer.adapter->param_refs();
    Adam adam(config.adam, param_count);
    std::vector<double> grads(param_count);

    RunHistory history;
    history.params = layer.adapter->param_report();
    for (std::size_t step = 0; step < config.steps; ++step) {
        const Clock::time_point started = Clock::now();
        std::fill(grads.begin(), grads.end(), 0.0);
        double loss = 0.0;
        const double inv_batch = 1.0 / static_cast<double>(config.batch_size);
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            const FourierSample& sample =
                task.samples[order[batch_rng.next_below(train_count)]];
            const Tensor features = fourier_features(sample.x, in_dim);
            const Tensor outputs = layer.forward(features);
            double pred = 0.0;
            for (std::size_t o = 0; o < out_dim; ++o) {
                pred += outputs[o];
            }
            pred *= inv_out;
            const double err = pred - sample.y;
            loss += err * err * inv_batch;
            // d loss / d outputs: 2 err / (batch * out_dim) on every output
            Tensor grad_out({out_dim});
            const double g = 2.0 * err * inv_batch * inv_out;
            for (std::size_t o = 0; o < out_dim; ++o) {
                grad_out[o] = g;
            }
            layer.backward(features, grad_out, grads);
        }
        check_finite_loss(loss, step);
        adam.step(refs, grads);
        history.train_loss.push_back(loss);
        history.ms_per_step.push_back(record_step_ms(started));
        if (config.eval_every != 0 &&
            (step % config.eval_every == 0 || step + 1 == config.steps)) {
            history.val_steps.push_back(step);
            history.val_loss.push_back(split_loss(train_count, val_count));
        }
    }
    history.optimizer_scalars_touched = adam.scalars_touched();
    TrainResult result;
    result.history = std::move(history);
    result.adapters.push_back(std::move(layer.adapter));
    return result;
}

TrainResult train_char_lm(const TrainConfig& config) {
    RngState root(config.seed);
    RngState corpus_rng = root.split(11);
    RngState adapter_rng = root.split(12);
    RngState batch_rng = root.split(13);

    CharLmHost host = CharLmHost::pretrained(config.host);
    const std::size_t d = config.host.d_model;

    host.q_proj().adapter = build_adapter(config, d, d, adapter_rng);
    host.v_proj().adapter = build_adapter(config, d, d, adapter_rng);
    AdapterBase& q_adapter = *host.q_proj().adapter;
    AdapterBase& v_adapter = *host.v_proj().adapter;

    const std::vector<std::size_t> corpus =
        gen_synthetic_text(corpus_rng.next_u64(), config.host.vocab,
                           config.finetune_corpus_length, config.finetune_variant);
    const std::size_t window = config.host.context + 1;
    const std::size_t num_starts = corpus.size() - window + 1;
    std::vector<std::size_t> starts(num_starts);
    for (std::size_t i = 0; i < num_starts; ++i) {
        starts[i] = i;
    }
    for (std::size_t i = starts.size(); i > 1; --i) {
        std::swap(starts[i - 1], starts[corpus_rng.next_below(i)]);
    }
    std::size_t val_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(
               config.validation_fraction * static_cast<double>(starts.size()))));
    val_count = std::min<std::size_t>(val_count, 32); // keep evaluation cheap
    const std::size_t train_count = starts.size() - val_count;

    auto window_at = [&](std::size_t start) {
        return std::vector<std::size_t>(corpus.begin() + start,
                                        corpus.begin() + start + window);
    };

    const std::size_t q_count = q_adapter.param_count();
    const std::size_t v_count = v_adapter.param_count();
    std::vector<double*> refs = q_adapter.param_refs();
    const std::vector<double*> v_refs = v_adapter.param_refs();
    refs.insert(refs.end(), v_refs.begin(), v_refs.end());
    Adam adam(config.adam, q_count + v_count);
    std::vector<double> grads(q_count + v_count);

    RunHistory history;
    history.params = q_adapter.param_report();
    {
        // both adapters train; report the combined budget
        ParamReport& report = history.params;
        const ParamReport v_report = v_adapter.param_report();
        for (const ParamReport::Stage& stage : v_report.stages) {
            report.stages.push_back(stage);
        }
        report.total += v_report.total;
        report.lora_reference += v_report.lora_reference;
        report.ratio = static_cast<double>(report.total) /
                       static_cast<double>(report.lora_reference);
    }

    for (std::size_t step = 0; step < config.steps; ++step) {
        const Clock::time_point started = Clock::now();
        std::vector<std::vector<std::size_t>> batch;
        for (std::size_t b = 0; b < config.batch_size; ++b) {
            batch.push_back(window_at(starts[batch_rng.next_below(train_count)]));
        }
        std::fill(grads.begin(), grads.end(), 0.0);
        std::span<double> all(grads);
        const double loss = host.adapter_loss_and_grads(batch, all.subspan(0, q_count),
                                                        all.subspan(q_count, v_count));
        check_finite_loss(loss, step);
        adam.step(refs, grads);
        history.train_loss.push_back(loss);
        history.ms_per_step.push_back(record_step_ms(started));
        if (config.eval_every != 0 &&
            (step % config.eval_every == 0 || step + 1 == config.steps)) {
            double val = 0.0;
            for (std::size_t i = 0; i < val_count; ++i) {
                val += host.sequence_loss(window_at(starts[train_count + i]));
            }
            history.val_steps.push_back(step);
            history.val_loss.push_back(val / static_cast<double>(val_count));
        }
    }
    history.optimizer_scalars_touched = adam.scalars_touched();
    TrainResult result;
    result.history = std::move(history);
    result.adapters.push_back(std::move(host.q_proj().adapter));
    result.adapters.push_back(std::move(host.v_proj().adapter));
    return result;
}

} // namespace

void TrainConfig::validate() const {
    if (steps == 0) {
        throw ConfigError("train: steps must be at least 1");
    }
    if (batch_size == 0) {
        throw ConfigError("train: batch_size must be at least 1");
    }
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("train: validation_fraction must lie in (0, 1)");
    }
    if (task == TaskKind::CharLm) {
        host.validate();
    }
}

bool histories_equal(const RunHistory& a, const RunHistory& b) {
    return a.train_loss == b.train_loss && a.val_steps == b.val_steps &&
           a.val_loss == b.val_loss && a.params.total == b.params.total &&
           a.optimizer_scalars_touched == b.optimizer_scalars_touched;
}

TrainResult train_with_artifacts(const TrainConfig& config) {
    config.validate();
    switch (config.task) {
    case TaskKind::FourierRegression:
        return train_fourier(config);
    case TaskKind::CharLm:
        return train_char_lm(config);
    }
    throw ConfigError("train: unknown task");
}

RunHistory train(const TrainConfig& config) {
    return train_with_artifacts(config).history;
}

GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<double>& analytic,
                           const std::vector<double*>& params, double epsilon) {
    if (params.size() != analytic.size()) {
        throw ShapeError("grad_check: analytic gradient length mismatch");
    }
    if (params.size() > 5000) {
        throw ParamError("grad_check: exhaustive check capped at 5000 parameters");
    }
    GradCheckReport report;
    report.checked = params.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = *params[i];
        *params[i] = saved + epsilon;
        const double up = loss();
        *params[i] = saved - epsilon;
        const double down = loss();
        *params[i] = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double diff = std::abs(fd - analytic[i]);
        const double rel =
            diff <= 1e-6 ? 0.0 : diff / std::max(std::abs(fd), std::abs(analytic[i]));
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    return report;
}

GradCheckReport grad_check_adapter(AdapterBase& adapter, std::uint64_t seed,
                                   double epsilon) {
    RngState rng(seed);
    const Tensor x = kaiming_uniform_init({adapter.input_dim()}, adapter.input_dim(), rng);
    const Tensor direction =
        kaiming_uniform_init({adapter.output_dim()}, adapter.output_dim(), rng);

    std::vector<double> analytic(adapter.param_count(), 0.0);
    adapter.backward(x, direction, analytic);
    const std::vector<double*> refs = adapter.param_refs();
    auto loss = [&]() {
        const Tensor y = adapter.forward(x);
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            total += direction[i] * y[i];
        }
        return total;
    };
    return grad_check(loss, analytic, refs, epsilon);
}

} // namespace qwthn
