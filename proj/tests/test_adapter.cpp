#include "qwthn/adapter.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "qwthn/errors.hpp"
#include "helpers.hpp"

using namespace qwthn;
using test::check;
using test::check_close;
using test::check_eq;
using test::check_throws;

namespace {

QwthnConfig small_config() {
    QwthnConfig config;
    config.input_dim = 16;
    config.output_dim = 16;
    config.hidden_a = 8;
    config.hidden_b = 8;
    config.qubits = 2;
    config.blocks = 1;
    config.sites = 3;
    config.bond = 2;
    return config;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.size() == b.size() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

double directional_loss(const AdapterBase& adapter, const Tensor& x,
                        const Tensor& direction) {
    const Tensor y = adapter.forward(x);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        total += direction[i] * y[i];
    }
    return total;
}

// relative error with a 1e-6 absolute floor: tiny absolute disagreements
// (finite-difference noise around a true zero) count as exact
double grad_rel_error(double analytic, double fd) {
    const double diff = std::abs(analytic - fd);
    if (diff <= 1e-6) {
        return 0.0;
    }
    return diff / std::max(std::abs(analytic), std::abs(fd));
}

void test_fuse_cases() {
    Tensor a = Tensor::from_vector({2, 2, 2, 2});
    Tensor zero = Tensor::from_vector({0, 0, 0, 0});
    check(fuse(zero, a).flat() == a.flat(), "w_q = 0 passes a through");

    Tensor ones = Tensor::from_vector({1, 1, 1, 1});
    check(fuse(ones, a).flat() == std::vector<double>({4, 4, 4, 4}),
          "w_q = 1 doubles a");

    Tensor wq = Tensor::from_vector({0.5, -1, 0, 2});
    check(fuse(wq, a).flat() == std::vector<double>({3, 0, 2, 6}), "hand fusion");

    check_throws<ShapeError>([&] { fuse(wq, Tensor::from_vector({1, 2})); },
                             "length mismatch must throw");
}

void test_fusion_bound_property() {
    // every |w_q| <= 1, so |f_i| <= 2|a_i|
    RngState rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng.next_below(6);
        Tensor wq({n}), a({n});
        for (std::size_t i = 0; i < n; ++i) {
            wq[i] = rng.uniform(-1, 1);
            a[i] = rng.uniform(-3, 3);
        }
        Tensor f = fuse(wq, a);
        for (std::size_t i = 0; i < n; ++i) {
            check(std::abs(f[i]) <= 2 * std::abs(a[i]) + 1e-15, "fusion bound");
        }
    }
}

void test_zero_start_output() {
    RngState rng(11);
    QwthnAdapter adapter = QwthnAdapter::init(small_config(), rng);
    Tensor x = kaiming_uniform_init({16}, 16, rng);
    Tensor y = adapter.forward(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        check(y[i] == 0.0, "zero-start adapter output is exactly zero");
    }
}

void test_identity_circuit_path() {
    RngState rng(13);
    QwthnAdapter adapter = QwthnAdapter::init(small_config(), rng, false);
    // force encoding angles and trainable angles to zero: w_q = (1, 1)
    adapter.mlp_a().weight = Tensor(adapter.mlp_a().weight.shape());
    adapter.mlp_a().bias = Tensor(adapter.mlp_a().bias.shape());
    for (double& t : adapter.theta()) {
        t = 0.0;
    }
    // with a = 0 and w_q = 1 the fused vector is 2a = 0, so MLP_B sees zero
    // input and the output reduces to MPO_B applied to the bias
    Tensor x = kaiming_uniform_init({16}, 16, rng);
    Tensor expected = adapter.mpo_b().forward(adapter.mlp_b().bias);
    Tensor got = adapter.forward(x);
    for (std::size_t i = 0; i < got.size(); ++i) {
        check_close(got[i], expected[i], 1e-12, "identity circuit reduces to bias path");
    }
}

void test_qwthn_gradients_match_finite_differences() {
    RngState rng(17);
    QwthnAdapter adapter = QwthnAdapter::init(small_config(), rng, false);
    Tensor x = kaiming_uniform_init({16}, 16, rng);
    Tensor direction = kaiming_uniform_init({16}, 16, rng);

    std::vector<double> analytic(adapter.param_count(), 0.0);
    const Tensor grad_x = adapter.backward(x, direction, analytic);

    const std::vector<double*> refs = adapter.param_refs();
    check_eq(static_cast<long long>(refs.size()),
             static_cast<long long>(analytic.size()), "refs match grad length");

    const double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t p = 0; p < refs.size(); ++p) {
        const double saved = *refs[p];
        *refs[p] = saved + eps;
        const double up = directional_loss(adapter, x, direction);
        *refs[p] = saved - eps;
        const double down = directional_loss(adapter, x, direction);
        *refs[p] = saved;
        const double fd = (up - down) / (2 * eps);
        worst = std::max(worst, grad_rel_error(analytic[p], fd));
    }
    check(worst <= 1e-4, "parameter gradients within 1e-4 of finite differences");

    double worst_x = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor bumped = x;
        bumped[i] += eps;
        const double up = directional_loss(adapter, bumped, direction);
        bumped[i] -= 2 * eps;
        const double down = directional_loss(adapter, bumped, direction);
        const double fd = (up - down) / (2 * eps);
        worst_x = std::max(worst_x, grad_rel_error(grad_x[i], fd));
    }
    check(worst_x <= 1e-4, "input gradient within 1e-4 of finite differences");
}

void test_lora_cases() {
    LoraConfig config;
    config.input_dim = 6;
    config.output_dim = 5;
    config.rank = 2;
    RngState rng(23);
    LoraAdapter fresh = LoraAdapter::init(config, rng);
    Tensor x = kaiming_uniform_init({6}, 6, rng);
    Tensor y = fresh.forward(x);
    for (std::size_t i = 0; i < y.size(); ++i) {
        check(y[i] == 0.0, "B = 0 gives exact zero output");
    }

    // identity configuration: r = in = out, A = B = I, scale = 1
    LoraConfig id_config;
    id_config.input_dim = 4;
    id_config.output_dim = 4;
    id_config.rank = 4;
    Tensor eye_a({4, 4}), eye_b({4, 4});
    for (std::size_t i = 0; i < 4; ++i) {
        eye_a.at(i, i) = 1.0;
        eye_b.at(i, i) = 1.0;
    }
    LoraAdapter identity(id_config, eye_a, eye_b);
    Tensor x4 = Tensor::from_vector({1, -2, 3, -4});
    check(identity.forward(x4).flat() == x4.flat(), "identity LoRA passes through");

    // random instance against the dense s*B*A product
    LoraConfig rnd_config;
    rnd_config.input_dim = 7;
    rnd_config.output_dim = 5;
    rnd_config.rank = 2;
    rnd_config.scale = 1.75;
    LoraAdapter random = LoraAdapter::init(rnd_config, rng);
    for (std::size_t i = 0; i < random.up().size(); ++i) {
        random.up()[i] = rng.uniform(-1, 1);
    }
    Tensor x7 = kaiming_uniform_init({7}, 7, rng);
    Tensor got = random.forward(x7);
    for (std::size_t o = 0; o < 5; ++o) {
        double expected = 0.0;
        for (std::size_t i = 0; i < 7; ++i) {
            double dense = 0.0;
            for (std::size_t r = 0; r < 2; ++r) {
                dense += random.up().at(o, r) * random.down().at(r, i);
            }
            expected += rnd_config.scale * dense * x7[i];
        }
        check_close(got[o], expected, 1e-10, "LoRA equals dense product");
    }
}

void test_lora_gradients() {
    LoraConfig config;
    config.input_dim = 5;
    config.output_dim = 4;
    config.rank = 2;
    config.scale = 0.5;
    RngState rng(29);
    LoraAdapter adapter = LoraAdapter::init(config, rng);
    for (std::size_t i = 0; i < adapter.up().size(); ++i) {
        adapter.up()[i] = rng.uniform(-1, 1);
    }
    Tensor x = kaiming_uniform_init({5}, 5, rng);
    Tensor direction = kaiming_uniform_init({4}, 4, rng);

    std::vector<double> analytic(adapter.param_count(), 0.0);
    const Tensor grad_x = adapter.backward(x, direction, analytic);
    const std::vector<double*> refs = adapter.param_refs();

    const double eps = 1e-6;
    for (std::size_t p = 0; p < refs.size(); ++p) {
        const double saved = *refs[p];
        *refs[p] = saved + eps;
        const double up = directional_loss(adapter, x, direction);
        *refs[p] = saved - eps;
        const double down = directional_loss(adapter, x, direction);
        *refs[p] = saved;
        const double fd = (up - down) / (2 * eps);
        check_close(analytic[p], fd, 1e-6, "LoRA param gradient");
    }
    for (std::size_t i = 0; i < 5; ++i) {
        Tensor bumped = x;
        bumped[i] += eps;
        const double up = directional_loss(adapter, bumped, direction);
        bumped[i] -= 2 * eps;
        const double down = directional_loss(adapter, bumped, direction);
        check_close(grad_x[i], (up - down) / (2 * eps), 1e-6, "LoRA input gradient");
    }
}

void test_injected_layer() {
    RngState rng(31);
    InjectedLayer layer;
    layer.frozen_weight = kaiming_uniform_init({16, 16}, 16, rng);
    layer.adapter = std::make_unique<QwthnAdapter>(
        QwthnAdapter::init(small_config(), rng));
    Tensor x = kaiming_uniform_init({16}, 16, rng);

    // fresh adapter: output equals the frozen path bitwise
    InjectedLayer frozen_only;
    frozen_only.frozen_weight = layer.frozen_weight;
    check(bitwise_equal(layer.forward(x), frozen_only.forward(x)),
          "zero-start injection is bitwise identical to the frozen layer");

    // perturb the adapter, then verify the two paths just add
    QwthnAdapter trained = QwthnAdapter::init(small_config(), rng, false);
    layer.adapter = std::make_unique<QwthnAdapter>(trained);
    layer.scale = 0.0;
    check(bitwise_equal(layer.forward(x), frozen_only.forward(x)),
          "scale 0 removes the adapter contribution");

    layer.scale = 0.8;
    Tensor combined = layer.forward(x);
    Tensor frozen_part = frozen_only.forward(x);
    Tensor adapter_part = trained.forward(x);
    for (std::size_t i = 0; i < combined.size(); ++i) {
        check_close(combined[i], frozen_part[i] + 0.8 * adapter_part[i], 1e-12,
                    "injection is the sum of both paths");
    }
}

void test_injected_backward() {
    RngState rng(37);
    InjectedLayer layer;
    layer.frozen_weight = kaiming_uniform_init({16, 16}, 16, rng);
    layer.adapter = std::make_unique<QwthnAdapter>(
        QwthnAdapter::init(small_config(), rng, false));
    layer.scale = 0.7;

    Tensor x = kaiming_uniform_init({16}, 16, rng);
    Tensor direction = kaiming_uniform_init({16}, 16, rng);
    std::vector<double> adapter_grads(layer.adapter->param_count(), 0.0);
    const Tensor grad_x = layer.backward(x, direction, adapter_grads);

    auto loss = [&](const Tensor& input) {
        const Tensor y = layer.forward(input);
        double total = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            total += direction[i] * y[i];
        }
        return total;
    };
    const double eps = 1e-5;
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor bumped = x;
        bumped[i] += eps;
        const double up = loss(bumped);
        bumped[i] -= 2 * eps;
        const double down = loss(bumped);
        const double fd = (up - down) / (2 * eps);
        check(grad_rel_error(grad_x[i], fd) <= 1e-4,
              "injected grad_x covers both paths");
    }

    const std::vector<double*> refs = layer.adapter->param_refs();
    double worst = 0.0;
    for (std::size_t p = 0; p < refs.size(); p += 7) { // sampled subset
        const double saved = *refs[p];
        *refs[p] = saved + eps;
        const double up = loss(x);
        *refs[p] = saved - eps;
        const double down = loss(x);
        *refs[p] = saved;
        const double fd = (up - down) / (2 * eps);
        worst = std::max(worst, grad_rel_error(adapter_grads[p], fd));
    }
    check(worst <= 1e-4, "adapter grads include the injection scale");
}

void test_param_report_defaults() {
    RngState rng(41);
    QwthnConfig defaults; // 3584 -> 3584 paper-shaped layer
    QwthnAdapter adapter = QwthnAdapter::init(defaults, rng);
    const ParamReport report = adapter.param_report();

    check_eq(static_cast<long long>(report.lora_reference), 28672,
             "rank-4 LoRA on 3584x3584 has 28672 params");
    check_eq(static_cast<long long>(report.total), 2420,
             "golden QWTHN total at paper defaults");
    check(report.ratio <= 0.25, "QWTHN stays below a quarter of LoRA");

    std::size_t qnn = 0;
    std::size_t stage_sum = 0;
    for (const ParamReport::Stage& s : report.stages) {
        stage_sum += s.count;
        if (s.name == "qnn") {
            qnn = s.count;
        }
    }
    check_eq(static_cast<long long>(qnn), 16, "q=4, L=2 gives 16 trainable angles");
    check_eq(static_cast<long long>(stage_sum), static_cast<long long>(report.total),
             "stage counts sum to the total");
    check_eq(static_cast<long long>(adapter.param_count()),
             static_cast<long long>(report.total), "param_count matches the report");

    QwthnAdapter counted = QwthnAdapter::init(defaults, rng);
    check_eq(static_cast<long long>(counted.param_refs().size()),
             static_cast<long long>(report.total),
             "every reported scalar is reachable by the optimizer");
}

void test_checkpoint_round_trip() {
    RngState rng(43);
    QwthnAdapter adapter = QwthnAdapter::init(small_config(), rng, false);
    std::stringstream buffer;
    adapter.save(buffer);
    QwthnAdapter restored = QwthnAdapter::load(buffer);
    const std::vector<double*> a = adapter.param_refs();
    const std::vector<double*> b = restored.param_refs();
    check_eq(static_cast<long long>(b.size()), static_cast<long long>(a.size()),
             "restored param count");
    for (std::size_t i = 0; i < a.size(); ++i) {
        check(*a[i] == *b[i], "qwthn checkpoint round trips exactly");
    }

    LoraConfig lconfig;
    lconfig.input_dim = 6;
    lconfig.output_dim = 4;
    lconfig.rank = 2;
    LoraAdapter lora = LoraAdapter::init(lconfig, rng);
    std::stringstream lbuffer;
    lora.save(lbuffer);
    LoraAdapter lrestored = LoraAdapter::load(lbuffer);
    check(lrestored.down().flat() == lora.down().flat(), "lora A round trips");
    check(lrestored.up().flat() == lora.up().flat(), "lora B round trips");
}

void test_config_validation() {
    QwthnConfig config = small_config();
    config.mpo_a_in_factors = std::vector<std::size_t>({2, 2, 2}); // product 8 != 16
    bool named_stage = false;
    try {
        config.validate();
    } catch (const ConfigError& e) {
        named_stage = std::string(e.what()).find("mpo_a") != std::string::npos;
    }
    check(named_stage, "dimension-chain violation names the stage");

    QwthnConfig bad_q = small_config();
    bad_q.qubits = 1;
    check_throws<ConfigError>([&] { bad_q.validate(); }, "q < 2 rejected");

    RngState rng(47);
    QwthnAdapter adapter = QwthnAdapter::init(small_config(), rng);
    check_throws<ShapeError>([&] { adapter.forward(Tensor({3})); },
                             "wrong input length rejected");
}

} // namespace

int main() {
    test::run_test("fuse cases", test_fuse_cases);
    test::run_test("fusion bound property", test_fusion_bound_property);
    test::run_test("zero-start output", test_zero_start_output);
    test::run_test("identity circuit path", test_identity_circuit_path);
    test::run_test("qwthn gradients vs finite differences",
                   test_qwthn_gradients_match_finite_differences);
    test::run_test("lora cases", test_lora_cases);
    test::run_test("lora gradients", test_lora_gradients);
    test::run_test("injected layer", test_injected_layer);
    test::run_test("injected backward", test_injected_backward);
    test::run_test("param report defaults", test_param_report_defaults);
    test::run_test("checkpoint round trip", test_checkpoint_round_trip);
    test::run_test("config validation", test_config_validation);
    return test::finish();
}
