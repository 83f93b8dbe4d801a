#include "qwthn/adapter.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <utility>

#include <json.hpp>

#include "qwthn/circuit.hpp"
#include "qwthn/errors.hpp"
#include "qwthn/statevector.hpp"

namespace qwthn {

namespace {

constexpr double kPi = 3.141592653589793;

std::vector<std::size_t> resolve_factors(
    const std::optional<std::vector<std::size_t>>& explicit_factors,
    std::size_t total, std::size_t sites, const std::string& stage) {
    if (!explicit_factors) {
        return factorize_dims(total, sites);
    }
    if (explicit_factors->size() != sites) {
        throw ConfigError(stage + ": expected " + std::to_string(sites) +
                          " factors, got " + std::to_string(explicit_factors->size()));
    }
    if (shape_product(*explicit_factors) != total) {
        throw ConfigError(stage + ": factor product " +
                          std::to_string(shape_product(*explicit_factors)) +
                          " does not equal the stage width " + std::to_string(total));
    }
    return *explicit_factors;
}

void append_tensor_refs(Tensor& t, std::vector<double*>& refs) {
    double* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
        refs.push_back(p + i);
    }
}

} // namespace

DenseLayer DenseLayer::kaiming_init(std::size_t in, std::size_t out, RngState& rng) {
    DenseLayer layer;
    layer.weight = kaiming_uniform_init({in, out}, in, rng);
    layer.bias = Tensor({out});
    return layer;
}

Tensor DenseLayer::forward(const Tensor& x) const {
    const std::size_t in = input_dim();
    const std::size_t out = output_dim();
    if (x.size() != in) {
        throw ShapeError("dense forward: input length mismatch");
    }
    Tensor y({out});
    for (std::size_t j = 0; j < out; ++j) {
        y[j] = bias[j];
    }
    for (std::size_t i = 0; i < in; ++i) {
        const double xv = x[i];
        if (xv == 0.0) {
            continue;
        }
        const double* wrow = weight.data() + i * out;
        for (std::size_t j = 0; j < out; ++j) {
            y[j] += xv * wrow[j];
        }
    }
    return y;
}

Tensor DenseLayer::backward(const Tensor& x, const Tensor& grad_out,
                            std::span<double> grad_weight,
                            std::span<double> grad_bias) const {
    const std::size_t in = input_dim();
    const std::size_t out = output_dim();
    if (x.size() != in || grad_out.size() != out) {
        throw ShapeError("dense backward: shape mismatch");
    }
    if (grad_weight.size() != weight.size() || grad_bias.size() != bias.size()) {
        throw ShapeError("dense backward: gradient span mismatch");
    }
    for (std::size_t j = 0; j < out; ++j) {
        grad_bias[j] += grad_out[j];
    }
    Tensor grad_x({in});
    for (std::size_t i = 0; i < in; ++i) {
        const double* wrow = weight.data() + i * out;
        double* gw_row = grad_weight.data() + i * out;
        double acc = 0.0;
        for (std::size_t j = 0; j < out; ++j) {
            gw_row[j] += x[i] * grad_out[j];
            acc += wrow[j] * grad_out[j];
        }
        grad_x[i] = acc;
    }
    return grad_x;
}

Tensor fuse(const Tensor& w_q, const Tensor& a) {
    return elementwise(elementwise(w_q, a, ElemOp::Mul), a, ElemOp::Add);
}

void QwthnConfig::validate() const {
    if (input_dim == 0 || output_dim == 0) {
        throw ConfigError("adapter: layer dims must be positive");
    }
    if (hidden_a == 0 || hidden_b == 0) {
        throw ConfigError("adapter: hidden widths must be positive");
    }
    if (qubits < 2) {
        throw ConfigError("qnn: at least 2 qubits required");
    }
    if (blocks == 0) {
        throw ConfigError("qnn: at least one block required");
    }
    if (sites == 0 || bond == 0) {
        throw ConfigError("mpo: sites and bond must be positive");
    }
    mpo_a_spec();
    mpo_b_spec();
}

MpoSpec QwthnConfig::mpo_a_spec() const {
    MpoSpec spec;
    spec.in_dims = resolve_factors(mpo_a_in_factors, input_dim, sites, "mpo_a");
    spec.out_dims = resolve_factors(mpo_a_out_factors, hidden_a, sites, "mpo_a");
    spec.bond_dims.assign(sites + 1, bond);
    spec.bond_dims.front() = 1;
    spec.bond_dims.back() = 1;
    return spec;
}

MpoSpec QwthnConfig::mpo_b_spec() const {
    MpoSpec spec;
    spec.in_dims = resolve_factors(mpo_b_in_factors, hidden_b, sites, "mpo_b");
    spec.out_dims = resolve_factors(mpo_b_out_factors, output_dim, sites, "mpo_b");
    spec.bond_dims.assign(sites + 1, bond);
    spec.bond_dims.front() = 1;
    spec.bond_dims.back() = 1;
    return spec;
}

QwthnAdapter::QwthnAdapter(QwthnConfig config, MpoLayer mpo_a, DenseLayer mlp_a,
                           std::vector<double> theta, DenseLayer mlp_b, MpoLayer mpo_b)
    : config_(std::move(config)), mpo_a_(std::move(mpo_a)), mlp_a_(std::move(mlp_a)),
      theta_(std::move(theta)), mlp_b_(std::move(mlp_b)), mpo_b_(std::move(mpo_b)) {}

QwthnAdapter QwthnAdapter::init(const QwthnConfig& config, RngState& rng,
                                bool zero_start) {
    config.validate();
    MpoLayer mpo_a = MpoLayer::kaiming_init(config.mpo_a_spec(), rng);
    DenseLayer mlp_a = DenseLayer::kaiming_init(config.hidden_a, config.qubits, rng);
    std::vector<double> theta(qwthn_theta_size(config.qubits, config.blocks));
    for (double& t : theta) {
        t = rng.uniform(-kPi / 4, kPi / 4);
    }
    DenseLayer mlp_b = DenseLayer::kaiming_init(config.qubits, config.hidden_b, rng);
    MpoLayer mpo_b = zero_start ? MpoLayer::zero_output_init(config.mpo_b_spec(), rng)
                                : MpoLayer::kaiming_init(config.mpo_b_spec(), rng);
    return QwthnAdapter(config, std::move(mpo_a), std::move(mlp_a), std::move(theta),
                        std::move(mlp_b), std::move(mpo_b));
}

std::size_t QwthnAdapter::param_count() const {
    return mpo_a_.param_count() + mlp_a_.param_count() + theta_.size() +
           mlp_b_.param_count() + mpo_b_.param_count();
}

Tensor QwthnAdapter::forward(const Tensor& x) const {
    if (x.size() != config_.input_dim) {
        throw ShapeError("qwthn forward: input length mismatch");
    }
    const Tensor y1 = mpo_a_.forward(x);
    const Tensor z = mlp_a_.forward(y1);
    Tensor angles({config_.qubits});
    for (std::size_t q = 0; q < config_.qubits; ++q) {
        angles[q] = kPi * std::tanh(z[q]);
    }
    const Circuit circuit = build_qwthn_circuit(
        std::span<const double>(angles.data(), angles.size()), theta_, config_.qubits,
        config_.blocks);
    const std::vector<double> w_q = run_circuit(circuit);
    const Tensor fused = fuse(Tensor::from_vector(w_q), angles);
    const Tensor y2 = mlp_b_.forward(fused);
    return mpo_b_.forward(y2);
}

Tensor QwthnAdapter::backward(const Tensor& x, const Tensor& grad_out,
                              std::span<double> grad_accum) const {
    if (grad_accum.size() != param_count()) {
        throw ShapeError("qwthn backward: gradient span mismatch");
    }
    // recompute the stage activations
    const Tensor y1 = mpo_a_.forward(x);
    const Tensor z = mlp_a_.forward(y1);
    const std::size_t q_count = config_.qubits;
    Tensor angles({q_count});
    for (std::size_t q = 0; q < q_count; ++q) {
        angles[q] = kPi * std::tanh(z[q]);
    }
    const Circuit circuit = build_qwthn_circuit(
        std::span<const double>(angles.data(), angles.size()), theta_, q_count,
        config_.blocks);
    const std::vector<double> w_q = run_circuit(circuit);
    const Tensor fused = fuse(Tensor::from_vector(w_q), angles);
    const Tensor y2 = mlp_b_.forward(fused);

    // span layout mirrors param_refs(): mpo_a | mlp_a.W | mlp_a.b | theta
    //                                  | mlp_b.W | mlp_b.b | mpo_b
    std::size_t offset = 0;
    auto take = [&](std::size_t count) {
        std::span<double> part = grad_accum.subspan(offset, count);
        offset += count;
        return part;
    };
    std::vector<std::span<double>> mpo_a_spans;
    for (const Tensor& site : mpo_a_.sites()) {
        mpo_a_spans.push_back(take(site.size()));
    }
    std::span<double> g_mlp_a_w = take(mlp_a_.weight.size());
    std::span<double> g_mlp_a_b = take(mlp_a_.bias.size());
    std::span<double> g_theta = take(theta_.size());
    std::span<double> g_mlp_b_w = take(mlp_b_.weight.size());
    std::span<double> g_mlp_b_b = take(mlp_b_.bias.size());
    std::vector<std::span<double>> mpo_b_spans;
    for (const Tensor& site : mpo_b_.sites()) {
        mpo_b_spans.push_back(take(site.size()));
    }

    // MPO_B
    MpoLayer::Gradients gb = mpo_b_.backward(y2, grad_out);
    for (std::size_t k = 0; k < gb.sites.size(); ++k) {
        for (std::size_t i = 0; i < gb.sites[k].size(); ++i) {
            mpo_b_spans[k][i] += gb.sites[k][i];
        }
    }
    // MLP_B
    const Tensor g_fused = mlp_b_.backward(fused, gb.input, g_mlp_b_w, g_mlp_b_b);
    // fusion: f = w_q ⊙ a + a
    Tensor g_wq({q_count});
    Tensor g_angles({q_count});
    for (std::size_t q = 0; q < q_count; ++q) {
        g_wq[q] = g_fused[q] * angles[q];
        g_angles[q] = g_fused[q] * (w_q[q] + 1.0);
    }
    // QNN: chain rule through parameter-shift Jacobians. Encoding slots are
    // [0, Q); trainable slots follow.
    for (std::size_t t = 0; t < theta_.size(); ++t) {
        const std::vector<double> d_wq = param_shift_grad(circuit, q_count + t);
        double acc = 0.0;
        for (std::size_t q = 0; q < q_count; ++q) {
            acc += d_wq[q] * g_wq[q];
        }
        g_theta[t] += acc;
    }
    for (std::size_t s = 0; s < q_count; ++s) {
        const std::vector<double> d_wq = param_shift_grad(circuit, s);
        double acc = 0.0;
        for (std::size_t q = 0; q < q_count; ++q) {
            acc += d_wq[q] * g_wq[q];
        }
        g_angles[s] += acc;
    }
    // angle squashing a = pi * tanh(z)
    Tensor g_z({q_count});
    for (std::size_t q = 0; q < q_count; ++q) {
        const double th = std::tanh(z[q]);
        g_z[q] = g_angles[q] * kPi * (1.0 - th * th);
    }
    // MLP_A
    const Tensor g_y1 = mlp_a_.backward(y1, g_z, g_mlp_a_w, g_mlp_a_b);
    // MPO_A
    MpoLayer::Gradients ga = mpo_a_.backward(x, g_y1);
    for (std::size_t k = 0; k < ga.sites.size(); ++k) {
        for (std::size_t i = 0; i < ga.sites[k].size(); ++i) {
            mpo_a_spans[k][i] += ga.sites[k][i];
        }
    }
    return std::move(ga.input);
}

std::vector<double*> QwthnAdapter::param_refs() {
    std::vector<double*> refs;
    refs.reserve(param_count());
    for (Tensor& site : mpo_a_.sites()) {
        append_tensor_refs(site, refs);
    }
    append_tensor_refs(mlp_a_.weight, refs);
    append_tensor_refs(mlp_a_.bias, refs);
    for (double& t : theta_) {
        refs.push_back(&t);
    }
    append_tensor_refs(mlp_b_.weight, refs);
    append_tensor_refs(mlp_b_.bias, refs);
    for (Tensor& site : mpo_b_.sites()) {
        append_tensor_refs(site, refs);
    }
    return refs;
}

ParamReport QwthnAdapter::param_report() const {
    ParamReport report;
    report.stages = {
        {"mpo_a", mpo_a_.param_count()},
        {"mlp_a", mlp_a_.param_count()},
        {"qnn", theta_.size()},
        {"mlp_b", mlp_b_.param_count()},
        {"mpo_b", mpo_b_.param_count()},
    };
    for (const ParamReport::Stage& s : report.stages) {
        report.total += s.count;
    }
    report.lora_reference = lora_param_count(config_.input_dim, config_.output_dim, 4);
    report.ratio = static_cast<double>(report.total) /
                   static_cast<double>(report.lora_reference);
    return report;
}

std::unique_ptr<AdapterBase> QwthnAdapter::clone() const {
    return std::make_unique<QwthnAdapter>(*this);
}

void QwthnAdapter::save(std::ostream& out) const {
    nlohmann::json j;
    j["kind"] = "qwthn";
    j["input_dim"] = config_.input_dim;
    j["output_dim"] = config_.output_dim;
    j["hidden_a"] = config_.hidden_a;
    j["hidden_b"] = config_.hidden_b;
    j["qubits"] = config_.qubits;
    j["blocks"] = config_.blocks;
    j["sites"] = config_.sites;
    j["bond"] = config_.bond;
    j["mpo_a_in"] = mpo_a_.spec().in_dims;
    j["mpo_a_out"] = mpo_a_.spec().out_dims;
    j["mpo_b_in"] = mpo_b_.spec().in_dims;
    j["mpo_b_out"] = mpo_b_.spec().out_dims;
    std::vector<double> params;
    params.reserve(param_count());
    QwthnAdapter& self = const_cast<QwthnAdapter&>(*this);
    for (double* p : self.param_refs()) {
        params.push_back(*p);
    }
    j["params"] = params;
    out << j.dump();
    if (!out) {
        throw IoError("adapter save: stream write failed");
    }
}

QwthnAdapter QwthnAdapter::load(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("adapter load: ") + e.what());
    }
    if (j.value("kind", "") != "qwthn") {
        throw IoError("adapter load: checkpoint kind is not qwthn");
    }
    QwthnConfig config;
    config.input_dim = j.at("input_dim").get<std::size_t>();
    config.output_dim = j.at("output_dim").get<std::size_t>();
    config.hidden_a = j.at("hidden_a").get<std::size_t>();
    config.hidden_b = j.at("hidden_b").get<std::size_t>();
    config.qubits = j.at("qubits").get<std::size_t>();
    config.blocks = j.at("blocks").get<std::size_t>();
    config.sites = j.at("sites").get<std::size_t>();
    config.bond = j.at("bond").get<std::size_t>();
    config.mpo_a_in_factors = j.at("mpo_a_in").get<std::vector<std::size_t>>();
    config.mpo_a_out_factors = j.at("mpo_a_out").get<std::vector<std::size_t>>();
    config.mpo_b_in_factors = j.at("mpo_b_in").get<std::vector<std::size_t>>();
    config.mpo_b_out_factors = j.at("mpo_b_out").get<std::vector<std::size_t>>();

    RngState rng(0);
    QwthnAdapter adapter = QwthnAdapter::init(config, rng);
    const std::vector<double> params = j.at("params").get<std::vector<double>>();
    const std::vector<double*> refs = adapter.param_refs();
    if (params.size() != refs.size()) {
        throw IoError("adapter load: parameter count mismatch");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) {
        *refs[i] = params[i];
    }
    return adapter;
}

LoraAdapter::LoraAdapter(LoraConfig config, Tensor a, Tensor b)
    : config_(config), a_(std::move(a)), b_(std::move(b)) {
    if (a_.shape() != std::vector<std::size_t>({config_.rank, config_.input_dim})) {
        throw ShapeError("lora: A must be (rank, in)");
    }
    if (b_.shape() != std::vector<std::size_t>({config_.output_dim, config_.rank})) {
        throw ShapeError("lora: B must be (out, rank)");
    }
}

LoraAdapter LoraAdapter::init(const LoraConfig& config, RngState& rng) {
    if (config.rank == 0 || config.input_dim == 0 || config.output_dim == 0) {
        throw ConfigError("lora: dims and rank must be positive");
    }
    Tensor a = kaiming_uniform_init({config.rank, config.input_dim},
                                    config.input_dim, rng);
    Tensor b({config.output_dim, config.rank}); // zero start
    return LoraAdapter(config, std::move(a), std::move(b));
}

Tensor LoraAdapter::forward(const Tensor& x) const {
    if (x.size() != config_.input_dim) {
        throw ShapeError("lora forward: input length mismatch");
    }
    std::vector<double> mid(config_.rank, 0.0);
    for (std::size_t r = 0; r < config_.rank; ++r) {
        const double* arow = a_.data() + r * config_.input_dim;
        double acc = 0.0;
        for (std::size_t i = 0; i < config_.input_dim; ++i) {
            acc += arow[i] * x[i];
        }
        mid[r] = acc;
    }
    Tensor y({config_.output_dim});
    for (std::size_t o = 0; o < config_.output_dim; ++o) {
        const double* brow = b_.data() + o * config_.rank;
        double acc = 0.0;
        for (std::size_t r = 0; r < config_.rank; ++r) {
            acc += brow[r] * mid[r];
        }
        y[o] = config_.scale * acc;
    }
    return y;
}

Tensor LoraAdapter::backward(const Tensor& x, const Tensor& grad_out,
                             std::span<double> grad_accum) const {
    if (grad_accum.size() != param_count()) {
        throw ShapeError("lora backward: gradient span mismatch");
    }
    if (x.size() != config_.input_dim || grad_out.size() != config_.output_dim) {
        throw ShapeError("lora backward: shape mismatch");
    }
    std::span<double> g_a = grad_accum.subspan(0, a_.size());
    std::span<double> g_b = grad_accum.subspan(a_.size(), b_.size());

    std::vector<double> mid(config_.rank, 0.0);
    for (std::size_t r = 0; r < config_.rank; ++r) {
        const double* arow = a_.data() + r * config_.input_dim;
        for (std::size_t i = 0; i < config_.input_dim; ++i) {
            mid[r] += arow[i] * x[i];
        }
    }
    // grad through y = s * B (A x)
    std::vector<double> g_mid(config_.rank, 0.0);
    for (std::size_t o = 0; o < config_.output_dim; ++o) {
        const double g = config_.scale * grad_out[o];
        const double* brow = b_.data() + o * config_.rank;
        double* gb_row = g_b.data() + o * config_.rank;
        for (std::size_t r = 0; r < config_.rank; ++r) {
            gb_row[r] += g * mid[r];
            g_mid[r] += g * brow[r];
        }
    }
    Tensor grad_x({config_.input_dim});
    for (std::size_t r = 0; r < config_.rank; ++r) {
        const double* arow = a_.data() + r * config_.input_dim;
        double* ga_row = g_a.data() + r * config_.input_dim;
        for (std::size_t i = 0; i < config_.input_dim; ++i) {
            ga_row[i] += g_mid[r] * x[i];
            grad_x[i] += g_mid[r] * arow[i];
        }
    }
    return grad_x;
}

std::vector<double*> LoraAdapter::param_refs() {
    std::vector<double*> refs;
    refs.reserve(param_count());
    append_tensor_refs(a_, refs);
    append_tensor_refs(b_, refs);
    return refs;
}

ParamReport LoraAdapter::param_report() const {
    ParamReport report;
    report.stages = {
        {"lora_a", a_.size()},
        {"lora_b", b_.size()},
    };
    report.total = a_.size() + b_.size();
    report.lora_reference = lora_param_count(config_.input_dim, config_.output_dim, 4);
    report.ratio = static_cast<double>(report.total) /
                   static_cast<double>(report.lora_reference);
    return report;
}

std::unique_ptr<AdapterBase> LoraAdapter::clone() const {
    return std::make_unique<LoraAdapter>(*this);
}

void LoraAdapter::save(std::ostream& out) const {
    nlohmann::json j;
    j["kind"] = "lora";
    j["input_dim"] = config_.input_dim;
    j["output_dim"] = config_.output_dim;
    j["rank"] = config_.rank;
    j["scale"] = config_.scale;
    j["a"] = a_.flat();
    j["b"] = b_.flat();
    out << j.dump();
    if (!out) {
        throw IoError("adapter save: stream write failed");
    }
}

LoraAdapter LoraAdapter::load(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("adapter load: ") + e.what());
    }
    if (j.value("kind", "") != "lora") {
        throw IoError("adapter load: checkpoint kind is not lora");
    }
    LoraConfig config;
    config.input_dim = j.at("input_dim").get<std::size_t>();
    config.output_dim = j.at("output_dim").get<std::size_t>();
    config.rank = j.at("rank").get<std::size_t>();
    config.scale = j.at("scale").get<double>();
    Tensor a({config.rank, config.input_dim}, j.at("a").get<std::vector<double>>());
    Tensor b({config.output_dim, config.rank}, j.at("b").get<std::vector<double>>());
    return LoraAdapter(config, std::move(a), std::move(b));
}

Tensor InjectedLayer::forward(const Tensor& x) const {
    if (x.size() != input_dim()) {
        throw ShapeError("injected forward: input length mismatch");
    }
    const std::size_t out = output_dim();
    const std::size_t in = input_dim();
    Tensor y({out});
    for (std::size_t o = 0; o < out; ++o) {
        const double* wrow = frozen_weight.data() + o * in;
        double acc = 0.0;
        for (std::size_t i = 0; i < in; ++i) {
            acc += wrow[i] * x[i];
        }
        y[o] = acc;
    }
    if (adapter) {
        const Tensor delta = adapter->forward(x);
        for (std::size_t o = 0; o < out; ++o) {
            y[o] += scale * delta[o];
        }
    }
    return y;
}

Tensor InjectedLayer::backward(const Tensor& x, const Tensor& grad_out,
                               std::span<double> adapter_grads) const {
    const std::size_t out = output_dim();
    const std::size_t in = input_dim();
    if (x.size() != in || grad_out.size() != out) {
        throw ShapeError("injected backward: shape mismatch");
    }
    Tensor grad_x({in});
    for (std::size_t o = 0; o < out; ++o) {
        const double g = grad_out[o];
        if (g == 0.0) {
            continue;
        }
        const double* wrow = frozen_weight.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) {
            grad_x[i] += wrow[i] * g;
        }
    }
    if (adapter) {
        Tensor scaled({out});
        for (std::size_t o = 0; o < out; ++o) {
            scaled[o] = scale * grad_out[o];
        }
        const Tensor adapter_gx = adapter->backward(x, scaled, adapter_grads);
        for (std::size_t i = 0; i < in; ++i) {
            grad_x[i] += adapter_gx[i];
        }
    }
    return grad_x;
}

} // namespace qwthn
