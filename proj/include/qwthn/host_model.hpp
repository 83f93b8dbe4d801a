#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qwthn/adapter.hpp"
#include "qwthn/tensor.hpp"

namespace qwthn {

struct CharLmConfig {
    std::size_t vocab = 16;
    std::size_t d_model = 32;
    std::size_t context = 16;
    std::size_t d_ff = 64;
    std::size_t pretrain_steps = 300;
    std::size_t pretrain_batch = 8;
    double pretrain_lr = 3e-3;
    std::size_t corpus_length = 4096;
    std::uint64_t seed = 1;

    void validate() const;
};

// Desk-scale frozen base model: token + position embeddings, one causal
// single-head attention block, a two-layer MLP, both with residual skips.
// The q and v projections are InjectedLayers, so PEFT adapters drop in while
// the host weights stay fixed.
class CharLmHost {
public:
    // seeded init, brief pre-training on the synthetic corpus, then frozen
    static CharLmHost pretrained(const CharLmConfig& config);
    static CharLmHost untrained(const CharLmConfig& config); // tests only

    const CharLmConfig& config() const { return config_; }

    InjectedLayer& q_proj() { return q_proj_; }
    InjectedLayer& v_proj() { return v_proj_; }
    const InjectedLayer& q_proj() const { return q_proj_; }
    const InjectedLayer& v_proj() const { return v_proj_; }

    // next-token logits, one row per input position
    Tensor logits(const std::vector<std::size_t>& tokens) const;

    // mean next-token cross entropy over a window of length T+1
    double sequence_loss(const std::vector<std::size_t>& window) const;

    // fine-tuning path: mean loss over the batch with gradients accumulated
    // for the injected adapters only (host weights untouched)
    double adapter_loss_and_grads(const std::vector<std::vector<std::size_t>>& windows,
                                  std::span<double> q_grads,
                                  std::span<double> v_grads) const;

    // pre-training path: gradients for every host parameter
    double host_loss_and_grads(const std::vector<std::vector<std::size_t>>& windows,
                               std::span<double> grads);
    std::vector<double*> host_param_refs();
    std::size_t host_param_count() const;
    std::vector<double> host_params_snapshot() const;

private:
    explicit CharLmHost(const CharLmConfig& config);

    struct Cache;
    Tensor embed(const std::vector<std::size_t>& tokens) const;
    Cache run_forward(const std::vector<std::size_t>& tokens) const;
    double window_backward(const std::vector<std::size_t>& window, double weight,
                           std::span<double> host_grads, std::span<double> q_grads,
                           std::span<double> v_grads) const;

    CharLmConfig config_;
    Tensor tok_emb_; // (vocab, d)
    Tensor pos_emb_; // (context, d)
    InjectedLayer q_proj_;
    Tensor w_key_; // (d, d)
    InjectedLayer v_proj_;
    Tensor w_out_proj_; // (d, d)
    Tensor w_ff1_;      // (ff, d)
    Tensor b_ff1_;      // (ff)
    Tensor w_ff2_;      // (d, ff)
    Tensor b_ff2_;      // (d)
    Tensor w_logits_;   // (vocab, d)
    Tensor b_logits_;   // (vocab)
};

} // namespace qwthn
