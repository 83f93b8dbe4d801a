#include "qwthn/host_model.hpp"

#include <cmath>

#include "qwthn/errors.hpp"
#include "qwthn/loss.hpp"
#include "qwthn/optimizer.hpp"
#include "qwthn/rng.hpp"
#include "qwthn/tasks.hpp"

namespace qwthn {

namespace {

Tensor row_of(const Tensor& matrix, std::size_t row) {
    const std::size_t cols = matrix.dim(1);
    std::vector<double> values(matrix.data() + row * cols,
                               matrix.data() + (row + 1) * cols);
    return Tensor::from_vector(std::move(values));
}

// y = M x for column-convention (out, in) matrices
void apply_into(const Tensor& matrix, const double* x, double* y) {
    const std::size_t out = matrix.dim(0);
    const std::size_t in = matrix.dim(1);
    for (std::size_t o = 0; o < out; ++o) {
        const double* row = matrix.data() + o * in;
        double acc = 0.0;
        for (std::size_t i = 0; i < in; ++i) {
            acc += row[i] * x[i];
        }
        y[o] = acc;
    }
}

} // namespace

void CharLmConfig::validate() const {
    if (vocab < 2 || vocab > 64) {
        throw ConfigError("char-lm host: vocab must be in [2, 64]");
    }
    if (d_model != 32 && d_model != 64) {
        throw ConfigError("char-lm host: d_model must be 32 or 64");
    }
    if (context < 2 || context > 64) {
        throw ConfigError("char-lm host: context must be in [2, 64]");
    }
    if (d_ff == 0 || pretrain_batch == 0) {
        throw ConfigError("char-lm host: d_ff and pretrain_batch must be positive");
    }
    if (corpus_length < context + 2) {
        throw ConfigError("char-lm host: corpus shorter than one window");
    }
}

struct CharLmHost::Cache {
    std::vector<std::size_t> tokens;
    Tensor x;         // (T, d)
    Tensor qm;        // (T, d)
    Tensor km;        // (T, d)
    Tensor vm;        // (T, d)
    Tensor attn;      // (T, T) row-softmax over the causal prefix
    Tensor ctx;       // (T, d)
    Tensor h;         // (T, d)
    Tensor z1;        // (T, ff) pre-activation
    Tensor m;         // (T, ff) relu
    Tensor z;         // (T, d)
    Tensor out;       // (T, vocab)
};

CharLmHost::CharLmHost(const CharLmConfig& config) : config_(config) {
    config.validate();
    const std::size_t d = config.d_model;
    RngState rng = RngState(config.seed).split(100);
    tok_emb_ = kaiming_uniform_init({config.vocab, d}, d, rng);
    pos_emb_ = kaiming_uniform_init({config.context, d}, d, rng);
    q_proj_.frozen_weight = kaiming_uniform_init({d, d}, d, rng);
    w_key_ = kaiming_uniform_init({d, d}, d, rng);
    v_proj_.frozen_weight = kaiming_uniform_init({d, d}, d, rng);
    w_out_proj_ = kaiming_uniform_init({d, d}, d, rng);
    w_ff1_ = kaiming_uniform_init({config.d_ff, d}, d, rng);
    b_ff1_ = Tensor({config.d_ff});
    w_ff2_ = kaiming_uniform_init({d, config.d_ff}, config.d_ff, rng);
    b_ff2_ = Tensor({d});
    w_logits_ = kaiming_uniform_init({config.vocab, d}, d, rng);
    b_logits_ = Tensor({config.vocab});
}

CharLmHost CharLmHost::untrained(const CharLmConfig& config) {
    return CharLmHost(config);
}

CharLmHost CharLmHost::pretrained(const CharLmConfig& config) {
    CharLmHost host(config);
    const std::vector<std::size_t> corpus =
        gen_synthetic_text(RngState(config.seed).split(101).seed(), config.vocab,
                           config.corpus_length, 0);
    RngState batch_rng = RngState(config.seed).split(102);

    AdamConfig adam_config;
    adam_config.learning_rate = config.pretrain_lr;
    Adam adam(adam_config, host.host_param_count());
    const std::vector<double*> refs = host.host_param_refs();
    std::vector<double> grads(refs.size());

    const std::size_t window = config.context + 1;
    const std::size_t max_start = corpus.size() - window;
    for (std::size_t step = 0; step < config.pretrain_steps; ++step) {
        std::vector<std::vector<std::size_t>> batch;
        for (std::size_t b = 0; b < config.pretrain_batch; ++b) {
            const std::size_t start = batch_rng.next_below(max_start + 1);
            batch.emplace_back(corpus.begin() + start, corpus.begin() + start + window);
        }
        std::fill(grads.begin(), grads.end(), 0.0);
        const double loss = host.host_loss_and_grads(batch, grads);
        if (!std::isfinite(loss)) {
            throw NumericError("char-lm pre-training diverged at step " +
                               std::to_string(step));
        }
        adam.step(refs, grads);
    }
    return host;
}

Tensor CharLmHost::embed(const std::vector<std::size_t>& tokens) const {
    const std::size_t d = config_.d_model;
    if (tokens.empty() || tokens.size() > config_.context) {
        throw ShapeError("char-lm host: sequence length out of range");
    }
    Tensor x({tokens.size(), d});
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] >= config_.vocab) {
            throw ShapeError("char-lm host: token id out of range");
        }
        const double* tok = tok_emb_.data() + tokens[i] * d;
        const double* pos = pos_emb_.data() + i * d;
        double* row = x.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) {
            row[c] = tok[c] + pos[c];
        }
    }
    return x;
}

CharLmHost::Cache CharLmHost::run_forward(const std::vector<std::size_t>& tokens) const {
    const std::size_t d = config_.d_model;
    const std::size_t ff = config_.d_ff;
    const std::size_t t_len = tokens.size();
    Cache cache;
    cache.tokens = tokens;
    cache.x = embed(tokens);

    cache.qm = Tensor({t_len, d});
    cache.km = Tensor({t_len, d});
    cache.vm = Tensor({t_len, d});
    for (std::size_t i = 0; i < t_len; ++i) {
        const Tensor xi = row_of(cache.x, i);
        const Tensor qi = q_proj_.forward(xi);
        const Tensor vi = v_proj_.forward(xi);
        std::copy(qi.data(), qi.data() + d, cache.qm.data() + i * d);
        std::copy(vi.data(), vi.data() + d, cache.vm.data() + i * d);
        apply_into(w_key_, xi.data(), cache.km.data() + i * d);
    }

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    cache.attn = Tensor({t_len, t_len});
    for (std::size_t i = 0; i < t_len; ++i) {
        double* arow = cache.attn.data() + i * t_len;
        double peak = -1e300;
        for (std::size_t j = 0; j <= i; ++j) {
            const double* qrow = cache.qm.data() + i * d;
            const double* krow = cache.km.data() + j * d;
            double score = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                score += qrow[c] * krow[c];
            }
            arow[j] = score * inv_sqrt_d;
            peak = std::max(peak, arow[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
            arow[j] = std::exp(arow[j] - peak);
            total += arow[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
            arow[j] /= total;
        }
    }

    cache.ctx = Tensor({t_len, d});
    for (std::size_t i = 0; i < t_len; ++i) {
        const double* arow = cache.attn.data() + i * t_len;
        double* crow = cache.ctx.data() + i * d;
        for (std::size_t j = 0; j <= i; ++j) {
            const double* vrow = cache.vm.data() + j * d;
            for (std::size_t c = 0; c < d; ++c) {
                crow[c] += arow[j] * vrow[c];
            }
        }
    }

    cache.h = Tensor({t_len, d});
    std::vector<double> attn_out(d);
    for (std::size_t i = 0; i < t_len; ++i) {
        apply_into(w_out_proj_, cache.ctx.data() + i * d, attn_out.data());
        const double* xrow = cache.x.data() + i * d;
        double* hrow = cache.h.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) {
            hrow[c] = xrow[c] + attn_out[c];
        }
    }

    cache.z1 = Tensor({t_len, ff});
    cache.m = Tensor({t_len, ff});
    cache.z = Tensor({t_len, d});
    std::vector<double> mlp_out(d);
    for (std::size_t i = 0; i < t_len; ++i) {
        double* z1row = cache.z1.data() + i * ff;
        apply_into(w_ff1_, cache.h.data() + i * d, z1row);
        double* mrow = cache.m.data() + i * ff;
        for (std::size_t c = 0; c < ff; ++c) {
            z1row[c] += b_ff1_[c];
            mrow[c] = z1row[c] > 0.0 ? z1row[c] : 0.0;
        }
        apply_into(w_ff2_, mrow, mlp_out.data());
        const double* hrow = cache.h.data() + i * d;
        double* zrow = cache.z.data() + i * d;
        for (std::size_t c = 0; c < d; ++c) {
            zrow[c] = hrow[c] + mlp_out[c] + b_ff2_[c];
        }
    }

    cache.out = Tensor({t_len, config_.vocab});
    for (std::size_t i = 0; i < t_len; ++i) {
        double* lrow = cache.out.data() + i * config_.vocab;
        apply_into(w_logits_, cache.z.data() + i * d, lrow);
        for (std::size_t c = 0; c < config_.vocab; ++c) {
            lrow[c] += b_logits_[c];
        }
    }
    return cache;
}

Tensor CharLmHost::logits(const std::vector<std::size_t>& tokens) const {
    return run_forward(tokens).out;
}

double CharLmHost::sequence_loss(const std::vector<std::size_t>& window) const {
    if (window.size() < 2) {
        throw ShapeError("char-lm host: window needs at least two tokens");
    }
    const std::vector<std::size_t> inputs(window.begin(), window.end() - 1);
    const std::vector<std::size_t> targets(window.begin() + 1, window.end());
    return cross_entropy(run_forward(inputs).out, targets);
}

// Shared reverse pass. Host gradients land in `host_grads` when non-empty
// (pre-training); adapter gradients land in the q/v spans when the layers
// carry adapters (fine-tuning). `weight` scales the window's contribution.
double CharLmHost::window_backward(const std::vector<std::size_t>& window, double weight,
                                   std::span<double> host_grads,
                                   std::span<double> q_grads,
                                   std::span<double> v_grads) const {
    const std::size_t d = config_.d_model;
    const std::size_t ff = config_.d_ff;
    const std::size_t vocab = config_.vocab;

    const std::vector<std::size_t> inputs(window.begin(), window.end() - 1);
    const std::vector<std::size_t> targets(window.begin() + 1, window.end());
    const Cache cache = run_forward(inputs);
    const std::size_t t_len = inputs.size();
    const double loss = cross_entropy(cache.out, targets);

    const bool host_mode = !host_grads.empty();
    std::span<double> g_tok, g_pos, g_wq, g_wk, g_wv, g_wo, g_w1, g_b1, g_w2, g_b2,
        g_wlog, g_blog;
    if (host_mode) {
        std::size_t offset = 0;
        auto take = [&](std::size_t count) {
            std::span<double> part = host_grads.subspan(offset, count);
            offset += count;
            return part;
        };
        g_tok = take(tok_emb_.size());
        g_pos = take(pos_emb_.size());
        g_wq = take(q_proj_.frozen_weight.size());
        g_wk = take(w_key_.size());
        g_wv = take(v_proj_.frozen_weight.size());
        g_wo = take(w_out_proj_.size());
        g_w1 = take(w_ff1_.size());
        g_b1 = take(b_ff1_.size());
        g_w2 = take(w_ff2_.size());
        g_b2 = take(b_ff2_.size());
        g_wlog = take(w_logits_.size());
        g_blog = take(b_logits_.size());
    }

    // d loss / d logits
    Tensor g_out = softmax_rows(cache.out);
    const double row_weight = weight / static_cast<double>(t_len);
    for (std::size_t i = 0; i < t_len; ++i) {
        double* grow = g_out.data() + i * vocab;
        grow[targets[i]] -= 1.0;
        for (std::size_t c = 0; c < vocab; ++c) {
            grow[c] *= row_weight;
        }
    }

    // logits = W_log z + b_log
    Tensor g_z({t_len, d});
    for (std::size_t i = 0; i < t_len; ++i) {
        const double* grow = g_out.data() + i * vocab;
        const double* zrow = cache.z.data() + i * d;
        double* gzrow = g_z.data() + i * d;
        for (std::size_t c = 0; c < vocab; ++c) {
            const double g = grow[c];
            if (g == 0.0) {
                continue;
            }
            const double* wrow = w_logits_.data() + c * d;
            for (std::size_t k = 0; k < d; ++k) {
                gzrow[k] += wrow[k] * g;
            }
            if (host_mode) {
                double* gw = g_wlog.data() + c * d;
                for (std::size_t k = 0; k < d; ++k) {
                    gw[k] += g * zrow[k];
                }
                g_blog[c] += g;
            }
        }
    }

    // z = h + W2 relu(W1 h + b1) + b2
    Tensor g_h = g_z; // residual path
    for (std::size_t i = 0; i < t_len; ++i) {
        const double* gzrow = g_z.data() + i * d;
        const double* mrow = cache.m.data() + i * ff;
        const double* z1row = cache.z1.data() + i * ff;
        std::vector<double> g_m(ff, 0.0);
        for (std::size_t c = 0; c < d; ++c) {
            const double g = gzrow[c];
            if (g == 0.0) {
                continue;
            }
            const double* w2row = w_ff2_.data() + c * ff;
            for (std::size_t f = 0; f < ff; ++f) {
                g_m[f] += w2row[f] * g;
            }
            if (host_mode) {
                double* gw = g_w2.data() + c * ff;
                for (std::size_t f = 0; f < ff; ++f) {
                    gw[f] += g * mrow[f];
                }
                g_b2[c] += g;
            }
        }
        const double* hrow = cache.h.data() + i * d;
        double* ghrow = g_h.data() + i * d;
        for (std::size_t f = 0; f < ff; ++f) {
            if (z1row[f] <= 0.0) {
                continue;
            }
            const double g = g_m[f];
            if (g == 0.0) {
                continue;
            }
            const double* w1row = w_ff1_.data() + f * d;
            for (std::size_t c = 0; c < d; ++c) {
                ghrow[c] += w1row[c] * g;
            }
            if (host_mode) {
                double* gw = g_w1.data() + f * d;
                for (std::size_t c = 0; c < d; ++c) {
                    gw[c] += g * hrow[c];
                }
                g_b1[f] += g;
            }
        }
    }

    // h = x + W_o ctx
    Tensor g_x = g_h; // residual path
    Tensor g_ctx({t_len, d});
    for (std::size_t i = 0; i < t_len; ++i) {
        const double* ghrow = g_h.data() + i * d;
        const double* crow = cache.ctx.data() + i * d;
        double* gcrow = g_ctx.data() + i * d;
        for (std::size_t o = 0; o < d; ++o) {
            const double g = ghrow[o];
            if (g == 0.0) {
                continue;
            }
            const double* wrow = w_out_proj_.data() + o * d;
            for (std::size_t c = 0; c < d; ++c) {
                gcrow[c] += wrow[c] * g;
            }
            if (host_mode) {
                double* gw = g_wo.data() + o * d;
                for (std::size_t c = 0; c < d; ++c) {
                    gw[c] += g * crow[c];
                }
            }
        }
    }

    // ctx = attn vm; attn = softmax(q k / sqrt(d)) over the causal prefix
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
    Tensor g_qm({t_len, d});
    Tensor g_km({t_len, d});
    Tensor g_vm({t_len, d});
    for (std::size_t i = 0; i < t_len; ++i) {
        const double* arow = cache.attn.data() + i * t_len;
        const double* gcrow = g_ctx.data() + i * d;

        std::vector<double> g_attn(i + 1, 0.0);
        for (std::size_t j = 0; j <= i; ++j) {
            const double* vrow = cache.vm.data() + j * d;
            double* gvrow = g_vm.data() + j * d;
            double acc = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                acc += gcrow[c] * vrow[c];
                gvrow[c] += arow[j] * gcrow[c];
            }
            g_attn[j] = acc;
        }
        double dot = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
            dot += arow[j] * g_attn[j];
        }
        for (std::size_t j = 0; j <= i; ++j) {
            const double g_score = arow[j] * (g_attn[j] - dot) * inv_sqrt_d;
            if (g_score == 0.0) {
                continue;
            }
            const double* krow = cache.km.data() + j * d;
            const double* qrow = cache.qm.data() + i * d;
            double* gqrow = g_qm.data() + i * d;
            double* gkrow = g_km.data() + j * d;
            for (std::size_t c = 0; c < d; ++c) {
                gqrow[c] += g_score * krow[c];
                gkrow[c] += g_score * qrow[c];
            }
        }
    }

    // projections back to the embeddings
    for (std::size_t i = 0; i < t_len; ++i) {
        const Tensor xi = row_of(cache.x, i);
        const Tensor gq_i = row_of(g_qm, i);
        const Tensor gv_i = row_of(g_vm, i);
        double* gxrow = g_x.data() + i * d;

        if (host_mode) {
            // plain dense gradients for the host matrices
            for (std::size_t o = 0; o < d; ++o) {
                const double gq = gq_i[o];
                const double gv = gv_i[o];
                const double* wq_row = q_proj_.frozen_weight.data() + o * d;
                const double* wv_row = v_proj_.frozen_weight.data() + o * d;
                double* gwq_row = g_wq.data() + o * d;
                double* gwv_row = g_wv.data() + o * d;
                for (std::size_t c = 0; c < d; ++c) {
                    gwq_row[c] += gq * xi[c];
                    gwv_row[c] += gv * xi[c];
                    gxrow[c] += wq_row[c] * gq + wv_row[c] * gv;
                }
            }
        } else {
            const Tensor gx_q = q_proj_.backward(xi, gq_i, q_grads);
            const Tensor gx_v = v_proj_.backward(xi, gv_i, v_grads);
            for (std::size_t c = 0; c < d; ++c) {
                gxrow[c] += gx_q[c] + gx_v[c];
            }
        }

        const double* gk_row = g_km.data() + i * d;
        for (std::size_t o = 0; o < d; ++o) {
            const double gk = gk_row[o];
            if (gk == 0.0) {
                continue;
            }
            const double* wk_row = w_key_.data() + o * d;
            for (std::size_t c = 0; c < d; ++c) {
                gxrow[c] += wk_row[c] * gk;
            }
            if (host_mode) {
                double* gwk_row = g_wk.data() + o * d;
                for (std::size_t c = 0; c < d; ++c) {
                    gwk_row[c] += gk * xi[c];
                }
            }
        }
    }

    if (host_mode) {
        for (std::size_t i = 0; i < t_len; ++i) {
            const double* gxrow = g_x.data() + i * d;
            double* gtok = g_tok.data() + inputs[i] * d;
            double* gpos = g_pos.data() + i * d;
            for (std::size_t c = 0; c < d; ++c) {
                gtok[c] += gxrow[c];
                gpos[c] += gxrow[c];
            }
        }
    }
    return loss;
}

double CharLmHost::adapter_loss_and_grads(
    const std::vector<std::vector<std::size_t>>& windows, std::span<double> q_grads,
    std::span<double> v_grads) const {
    if (windows.empty()) {
        throw ShapeError("char-lm host: empty batch");
    }
    const double weight = 1.0 / static_cast<double>(windows.size());
    double total = 0.0;
    for (const std::vector<std::size_t>& window : windows) {
        total += weight * window_backward(window, weight, {}, q_grads, v_grads);
    }
    return total;
}

double CharLmHost::host_loss_and_grads(
    const std::vector<std::vector<std::size_t>>& windows, std::span<double> grads) {
    if (windows.empty()) {
        throw ShapeError("char-lm host: empty batch");
    }
    if (grads.size() != host_param_count()) {
        throw ShapeError("char-lm host: gradient span mismatch");
    }
    const double weight = 1.0 / static_cast<double>(windows.size());
    double total = 0.0;
    for (const std::vector<std::size_t>& window : windows) {
        total += weight * window_backward(window, weight, grads, {}, {});
    }
    return total;
}

std::vector<double*> CharLmHost::host_param_refs() {
    std::vector<double*> refs;
    refs.reserve(host_param_count());
    auto add = [&](Tensor& t) {
        double* p = t.data();
        for (std::size_t i = 0; i < t.size(); ++i) {
            refs.push_back(p + i);
        }
    };
    add(tok_emb_);
    add(pos_emb_);
    add(q_proj_.frozen_weight);
    add(w_key_);
    add(v_proj_.frozen_weight);
    add(w_out_proj_);
    add(w_ff1_);
    add(b_ff1_);
    add(w_ff2_);
    add(b_ff2_);
    add(w_logits_);
    add(b_logits_);
    return refs;
}

std::size_t CharLmHost::host_param_count() const {
    return tok_emb_.size() + pos_emb_.size() + q_proj_.frozen_weight.size() +
           w_key_.size() + v_proj_.frozen_weight.size() + w_out_proj_.size() +
           w_ff1_.size() + b_ff1_.size() + w_ff2_.size() + b_ff2_.size() +
           w_logits_.size() + b_logits_.size();
}

std::vector<double> CharLmHost::host_params_snapshot() const {
    std::vector<double> snapshot;
    CharLmHost& self = const_cast<CharLmHost&>(*this);
    for (double* p : self.host_param_refs()) {
        snapshot.push_back(*p);
    }
    return snapshot;
}

} // namespace qwthn
