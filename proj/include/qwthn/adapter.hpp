#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qwthn/mpo.hpp"
#include "qwthn/tensor.hpp"

namespace qwthn {

// Affine stage y = x W + b with W stored (in, out).
struct DenseLayer {
    Tensor weight;
    Tensor bias;

    static DenseLayer kaiming_init(std::size_t in, std::size_t out, RngState& rng);

    std::size_t input_dim() const { return weight.dim(0); }
    std::size_t output_dim() const { return weight.dim(1); }
    std::size_t param_count() const { return weight.size() + bias.size(); }

    Tensor forward(const Tensor& x) const;
    // Accumulates dW and db into the spans, returns grad wrt x.
    Tensor backward(const Tensor& x, const Tensor& grad_out,
                    std::span<double> grad_weight, std::span<double> grad_bias) const;
};

struct ParamReport {
    struct Stage {
        std::string name;
        std::size_t count = 0;
    };
    std::vector<Stage> stages;
    std::size_t total = 0;
    std::size_t lora_reference = 0; // rank-4 LoRA at the same layer dims
    double ratio = 0.0;             // total / lora_reference
};

inline std::size_t lora_param_count(std::size_t input_dim, std::size_t output_dim,
                                    std::size_t rank) {
    return rank * (input_dim + output_dim);
}

// Common surface the training harness drives. backward() accumulates
// parameter gradients into `grad_accum` (same order as param_refs) and
// returns the gradient with respect to the input.
class AdapterBase {
public:
    virtual ~AdapterBase() = default;
    virtual std::size_t input_dim() const = 0;
    virtual std::size_t output_dim() const = 0;
    virtual std::size_t param_count() const = 0;
    virtual Tensor forward(const Tensor& x) const = 0;
    virtual Tensor backward(const Tensor& x, const Tensor& grad_out,
                            std::span<double> grad_accum) const = 0;
    virtual std::vector<double*> param_refs() = 0;
    virtual ParamReport param_report() const = 0;
    virtual std::unique_ptr<AdapterBase> clone() const = 0;
    virtual void save(std::ostream& out) const = 0;
};

// Element-wise quantum weighting with the residual skip: w_q ⊙ a + a.
Tensor fuse(const Tensor& w_q, const Tensor& a);

struct QwthnConfig {
    std::size_t input_dim = 3584;
    std::size_t output_dim = 3584;
    std::size_t hidden_a = 128; // MPO_A output width
    std::size_t hidden_b = 128; // MPO_B input width
    std::size_t qubits = 4;
    std::size_t blocks = 2;
    std::size_t sites = 3;
    std::size_t bond = 2;
    // Optional explicit factorizations; balanced defaults otherwise.
    std::optional<std::vector<std::size_t>> mpo_a_in_factors;
    std::optional<std::vector<std::size_t>> mpo_a_out_factors;
    std::optional<std::vector<std::size_t>> mpo_b_in_factors;
    std::optional<std::vector<std::size_t>> mpo_b_out_factors;

    void validate() const; // names the offending stage in errors
    MpoSpec mpo_a_spec() const;
    MpoSpec mpo_b_spec() const;
};

// The pipeline of Fig-2 shape: MPO_A -> MLP_A (tanh, scaled to angles)
// -> QNN -> fusion -> MLP_B -> MPO_B. With zero_start the final MPO_B site
// begins at zero, so the adapter output starts exactly at the zero vector.
class QwthnAdapter : public AdapterBase {
public:
    static QwthnAdapter init(const QwthnConfig& config, RngState& rng,
                             bool zero_start = true);

    std::size_t input_dim() const override { return config_.input_dim; }
    std::size_t output_dim() const override { return config_.output_dim; }
    std::size_t param_count() const override;
    Tensor forward(const Tensor& x) const override;
    Tensor backward(const Tensor& x, const Tensor& grad_out,
                    std::span<double> grad_accum) const override;
    std::vector<double*> param_refs() override;
    ParamReport param_report() const override;
    std::unique_ptr<AdapterBase> clone() const override;

    const QwthnConfig& config() const { return config_; }
    MpoLayer& mpo_a() { return mpo_a_; }
    MpoLayer& mpo_b() { return mpo_b_; }
    DenseLayer& mlp_a() { return mlp_a_; }
    DenseLayer& mlp_b() { return mlp_b_; }
    std::vector<double>& theta() { return theta_; }

    void save(std::ostream& out) const;
    static QwthnAdapter load(std::istream& in);

private:
    QwthnAdapter(QwthnConfig config, MpoLayer mpo_a, DenseLayer mlp_a,
                 std::vector<double> theta, DenseLayer mlp_b, MpoLayer mpo_b);

    QwthnConfig config_;
    MpoLayer mpo_a_;
    DenseLayer mlp_a_;
    std::vector<double> theta_;
    DenseLayer mlp_b_;
    MpoLayer mpo_b_;
};

struct LoraConfig {
    std::size_t input_dim = 3584;
    std::size_t output_dim = 3584;
    std::size_t rank = 4;
    double scale = 1.0;
};

// Classical baseline: y = scale * B (A x), B zero-initialized.
class LoraAdapter : public AdapterBase {
public:
    static LoraAdapter init(const LoraConfig& config, RngState& rng);
    LoraAdapter(LoraConfig config, Tensor a, Tensor b);

    std::size_t input_dim() const override { return config_.input_dim; }
    std::size_t output_dim() const override { return config_.output_dim; }
    std::size_t param_count() const override { return a_.size() + b_.size(); }
    Tensor forward(const Tensor& x) const override;
    Tensor backward(const Tensor& x, const Tensor& grad_out,
                    std::span<double> grad_accum) const override;
    std::vector<double*> param_refs() override;
    ParamReport param_report() const override;
    std::unique_ptr<AdapterBase> clone() const override;

    const LoraConfig& config() const { return config_; }
    Tensor& down() { return a_; } // (rank, in)
    Tensor& up() { return b_; }   // (out, rank)

    void save(std::ostream& out) const;
    static LoraAdapter load(std::istream& in);

private:
    LoraConfig config_;
    Tensor a_;
    Tensor b_;
};

// PEFT injection point: y = frozen_weight * x + scale * adapter(x). The
// frozen weight never receives gradients; only the adapter trains.
struct InjectedLayer {
    Tensor frozen_weight; // (out, in)
    std::unique_ptr<AdapterBase> adapter; // null = plain frozen layer
    double scale = 1.0;

    std::size_t input_dim() const { return frozen_weight.dim(1); }
    std::size_t output_dim() const { return frozen_weight.dim(0); }

    Tensor forward(const Tensor& x) const;
    // Adapter gradients accumulate into `adapter_grads`; returns grad wrt x
    // through both the frozen and adapter paths.
    Tensor backward(const Tensor& x, const Tensor& grad_out,
                    std::span<double> adapter_grads) const;
};

} // namespace qwthn
