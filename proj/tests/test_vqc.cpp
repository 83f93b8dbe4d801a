#include "qwthn/circuit.hpp"
#include "qwthn/statevector.hpp"

#include <cmath>

#include "qwthn/errors.hpp"
#include "qwthn/rng.hpp"
#include "helpers.hpp"

using namespace qwthn;
using test::check;
using test::check_close;
using test::check_eq;
using test::check_throws;

namespace {

constexpr double kPi = 3.141592653589793;

Circuit random_parameterized_circuit(RngState& rng, std::size_t qubits,
                                     std::size_t depth) {
    Circuit c;
    c.num_qubits = qubits;
    std::size_t slot = 0;
    for (std::size_t d = 0; d < depth; ++d) {
        const std::size_t pick = rng.next_below(4);
        const std::size_t target = rng.next_below(qubits);
        if (pick == 0) {
            c.gates.push_back(ry(target, rng.uniform(-kPi, kPi), slot++));
        } else if (pick == 1 && qubits >= 2) {
            std::size_t control = rng.next_below(qubits);
            while (control == target) {
                control = rng.next_below(qubits);
            }
            c.gates.push_back(crz(control, target, rng.uniform(-kPi, kPi), slot++));
        } else if (pick == 2) {
            c.gates.push_back(hadamard(target));
        } else {
            c.gates.push_back(s_dagger(target));
        }
    }
    for (std::size_t q = 0; q < qubits; ++q) {
        c.measure_z.push_back(q);
    }
    return c;
}

std::size_t slot_count(const Circuit& c) {
    std::size_t n = 0;
    for (const Gate& g : c.gates) {
        if (g.param_slot) {
            n = std::max(n, *g.param_slot + 1);
        }
    }
    return n;
}

std::vector<double> finite_difference_grad(const Circuit& circuit, std::size_t slot,
                                           double eps) {
    Circuit up = circuit;
    Circuit down = circuit;
    for (std::size_t i = 0; i < circuit.gates.size(); ++i) {
        if (circuit.gates[i].param_slot && *circuit.gates[i].param_slot == slot) {
            up.gates[i].angle += eps;
            down.gates[i].angle -= eps;
        }
    }
    const std::vector<double> e_up = run_circuit(up);
    const std::vector<double> e_down = run_circuit(down);
    std::vector<double> grad(e_up.size());
    for (std::size_t q = 0; q < grad.size(); ++q) {
        grad[q] = (e_up[q] - e_down[q]) / (2 * eps);
    }
    return grad;
}

void test_ry_gate_basics() {
    StateVector zero_state(1);
    StateVector untouched(1);
    zero_state.apply_gate(ry(0, 0.0));
    check_close(zero_state.real_part(0), untouched.real_part(0), 0.0, "RY(0) is identity");
    check_close(zero_state.real_part(1), 0.0, 0.0, "RY(0) leaves |1> empty");

    StateVector s(1);
    s.apply_gate(ry(0, kPi));
    check_close(s.real_part(0), 0.0, 1e-12, "RY(pi)|0> has no |0> amplitude");
    check_close(s.real_part(1), 1.0, 1e-12, "RY(pi)|0> lands on |1>");
    check_close(s.imag_part(1), 0.0, 1e-12, "RY stays real");
}

void test_crz_inactive_control() {
    StateVector s(2);
    s.apply_gate(ry(1, 0.9)); // control qubit 0 stays |0>
    const StateVector before = s;
    s.apply_gate(crz(0, 1, 1.3));
    for (std::size_t b = 0; b < 4; ++b) {
        check_close(s.real_part(b), before.real_part(b), 1e-12, "CRZ inert re");
        check_close(s.imag_part(b), before.imag_part(b), 1e-12, "CRZ inert im");
    }
}

void test_crz_matches_explicit_matrix() {
    // explicit diag(1, 1, e^{-i t/2}, e^{+i t/2}) on the (control, target)
    // ordered basis, applied by hand to a random 2-qubit state
    RngState rng(4);
    const double theta = 0.77;
    const std::size_t control = 1, target = 0;

    StateVector s(2);
    std::vector<double> re(4), im(4);
    double norm = 0.0;
    for (std::size_t b = 0; b < 4; ++b) {
        re[b] = rng.uniform(-1, 1);
        im[b] = rng.uniform(-1, 1);
        norm += re[b] * re[b] + im[b] * im[b];
    }
    norm = std::sqrt(norm);
    for (std::size_t b = 0; b < 4; ++b) {
        re[b] /= norm;
        im[b] /= norm;
        s.set_amplitude(b, re[b], im[b]);
    }

    s.apply_gate(crz(control, target, theta));

    const double c = std::cos(theta / 2), sn = std::sin(theta / 2);
    for (std::size_t b = 0; b < 4; ++b) {
        const std::size_t cbit = (b >> control) & 1;
        const std::size_t tbit = (b >> target) & 1;
        double expect_re = re[b], expect_im = im[b];
        if (cbit == 1) {
            const double sign = (tbit == 1) ? 1.0 : -1.0; // e^{+-i theta/2}
            expect_re = c * re[b] - sign * sn * im[b];
            expect_im = c * im[b] + sign * sn * re[b];
        }
        check_close(s.real_part(b), expect_re, 1e-12, "CRZ re vs explicit matrix");
        check_close(s.imag_part(b), expect_im, 1e-12, "CRZ im vs explicit matrix");
    }
}

void test_expectation_values() {
    StateVector s(3);
    for (std::size_t q = 0; q < 3; ++q) {
        check_close(s.expectation_z(q), 1.0, 0.0, "|000> has <Z> = +1");
    }
    StateVector h(1);
    h.apply_gate(ry(0, kPi / 2));
    check_close(h.expectation_z(0), 0.0, 1e-12, "RY(pi/2) gives <Z> = 0");

    for (double theta : {0.3, 1.1, 2.7}) {
        StateVector t(1);
        t.apply_gate(ry(0, theta));
        check_close(t.expectation_z(0), std::cos(theta), 1e-12, "<Z> = cos(theta)");
    }
}

void test_run_circuit_basics() {
    Circuit empty;
    empty.num_qubits = 3;
    empty.measure_z = {0, 1, 2};
    const std::vector<double> e = run_circuit(empty);
    check(e == std::vector<double>({1.0, 1.0, 1.0}), "empty circuit measures +1");

    Circuit single;
    single.num_qubits = 2;
    single.gates.push_back(ry(0, kPi / 3));
    single.measure_z = {0, 1};
    const std::vector<double> e2 = run_circuit(single);
    check_close(e2[0], 0.5, 1e-12, "cos(pi/3) = 0.5");
    check_close(e2[1], 1.0, 1e-12, "untouched qubit stays +1");
}

void test_expectations_bounded_and_norm_preserved() {
    RngState rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t qubits = 1 + rng.next_below(4);
        Circuit c = random_parameterized_circuit(rng, qubits, 3 + rng.next_below(12));
        StateVector s = run_to_state(c);
        check_close(s.norm_sq(), 1.0, 1e-10, "norm preserved by every circuit");
        for (std::size_t q : c.measure_z) {
            const double z = s.expectation_z(q);
            check(z >= -1.0 - 1e-12 && z <= 1.0 + 1e-12, "<Z> bounded");
        }
    }
}

void test_build_qwthn_circuit_structure() {
    std::vector<double> input = {0.1, 0.2, 0.3, 0.4};
    std::vector<double> theta(qwthn_theta_size(4, 2), 0.05);
    Circuit c = build_qwthn_circuit(input, theta, 4, 2);
    check_eq(static_cast<long long>(c.gates.size()), 20, "4 + 2*(4+3+1) gates");
    check_eq(static_cast<long long>(c.measure_z.size()), 4, "measure all qubits");
    check_eq(static_cast<long long>(slot_count(c)), 4 + 16, "input + theta slots");

    std::vector<double> zeros4(4, 0.0);
    std::vector<double> zero_theta(qwthn_theta_size(4, 2), 0.0);
    const std::vector<double> e = run_circuit(build_qwthn_circuit(zeros4, zero_theta, 4, 2));
    for (double z : e) {
        check_close(z, 1.0, 1e-12, "identity circuit keeps <Z> = +1");
    }
}

void test_build_qwthn_basis_state_example() {
    // RY(pi) flips qubit 0; CRZ gates only add phases on a basis state
    std::vector<double> input = {kPi, 0.0, 0.0, 0.0};
    std::vector<double> theta(qwthn_theta_size(4, 1), 0.0);
    const std::vector<double> e = run_circuit(build_qwthn_circuit(input, theta, 4, 1));
    check_close(e[0], -1.0, 1e-12, "flipped qubit reads -1");
    for (std::size_t q = 1; q < 4; ++q) {
        check_close(e[q], 1.0, 1e-12, "other qubits read +1");
    }
}

void test_build_qwthn_errors() {
    std::vector<double> one = {0.0};
    std::vector<double> theta(qwthn_theta_size(1, 1), 0.0);
    check_throws<CircuitError>([&] { build_qwthn_circuit(one, theta, 1, 1); },
                               "Q < 2 must be rejected");
    std::vector<double> four(4, 0.0);
    std::vector<double> short_theta(3, 0.0);
    check_throws<CircuitError>([&] { build_qwthn_circuit(four, short_theta, 4, 1); },
                               "wrong theta length must be rejected");
}

void test_param_shift_analytic_cases() {
    std::vector<double> input = {kPi / 2};
    Circuit c;
    c.num_qubits = 2;
    c.gates.push_back(ry(0, kPi / 2, 0));
    c.measure_z = {0};
    const std::vector<double> g = param_shift_grad(c, 0);
    check_close(g[0], -1.0, 1e-12, "d cos/d theta at pi/2 is -1");

    c.gates[0].angle = 0.0;
    const std::vector<double> g0 = param_shift_grad(c, 0);
    check_close(g0[0], 0.0, 1e-12, "gradient vanishes at the extremum");

    check_throws<ParamError>([&] { param_shift_grad(c, 5); }, "unbound slot must throw");
}

void test_param_shift_matches_finite_differences() {
    RngState rng(99);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t qubits = 2 + rng.next_below(2);
        Circuit c = random_parameterized_circuit(rng, qubits, 4 + rng.next_below(8));
        const std::size_t slots = slot_count(c);
        for (std::size_t slot = 0; slot < slots; ++slot) {
            const std::vector<double> shift = param_shift_grad(c, slot);
            const std::vector<double> fd = finite_difference_grad(c, slot, 1e-5);
            check(test::max_abs_diff(shift, fd) <= 1e-7,
                  "parameter shift equals finite differences");
        }
    }
}

void test_param_shift_qwthn_ansatz() {
    RngState rng(7);
    std::vector<double> input(3), theta(qwthn_theta_size(3, 1));
    for (double& v : input) {
        v = rng.uniform(-kPi, kPi);
    }
    for (double& v : theta) {
        v = rng.uniform(-kPi, kPi);
    }
    Circuit c = build_qwthn_circuit(input, theta, 3, 1);
    for (std::size_t slot = 0; slot < 3 + theta.size(); ++slot) {
        const std::vector<double> shift = param_shift_grad(c, slot);
        const std::vector<double> fd = finite_difference_grad(c, slot, 1e-5);
        check(test::max_abs_diff(shift, fd) <= 1e-7, "ansatz slot gradient exact");
    }
}

void test_sampling() {
    StateVector zero(2);
    RngState rng(3);
    std::vector<std::uint64_t> counts = zero.sample_shots(1000, rng);
    check_eq(static_cast<long long>(counts[0]), 1000, "all shots land on |00>");

    StateVector plus(1);
    plus.apply_gate(ry(0, kPi / 2));
    RngState srng(17);
    counts = plus.sample_shots(1000000, srng);
    const std::vector<double> est =
        expectations_from_counts(counts, 1, {0}, 1000000);
    check(std::abs(est[0]) < 0.004, "million-shot estimate within 3 sigma");

    RngState r1(5), r2(5);
    check(plus.sample_shots(500, r1) == plus.sample_shots(500, r2),
          "fixed seed reproduces counts");
}

void test_ir_round_trip() {
    Circuit empty;
    empty.num_qubits = 2;
    check(serialize_ir(empty) == "QUBITS 2\n", "empty circuit serialization");

    Circuit c;
    c.num_qubits = 4;
    c.gates.push_back(ry(0, kPi / 2));
    c.gates.push_back(crz(3, 0, 0.25));
    c.gates.push_back(hadamard(2));
    c.gates.push_back(s_dagger(1));
    c.measure_z = {0, 2};
    const std::string text = serialize_ir(c);
    check(text.find("RY 0 1.5707963267948966") != std::string::npos,
          "17-digit angle for pi/2");
    check(text.find("CRZ 3 0 0.25") != std::string::npos, "control target angle order");
    Circuit parsed = parse_ir(text);
    check(same_structure(parsed, c), "round trip preserves structure");

    RngState rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        Circuit r = random_parameterized_circuit(rng, 1 + rng.next_below(4), 10);
        check(same_structure(parse_ir(serialize_ir(r)), r), "random round trip");
    }
}

void test_ir_parse_errors() {
    check_throws<CircuitError>([] { parse_ir("RY 0 1.0\n"); }, "missing QUBITS header");
    check_throws<CircuitError>([] { parse_ir("QUBITS 2\nFOO 1\n"); }, "unknown op");
    check_throws<CircuitError>([] { parse_ir("QUBITS 2\nRY 0\n"); }, "missing angle");
    check_throws<CircuitError>([] { parse_ir("QUBITS 2\nRY 0 abc\n"); }, "bad angle");
    check_throws<CircuitError>([] { parse_ir("QUBITS 2\nRY 5 0.1\n"); },
                               "target out of range");
    check_throws<CircuitError>([] { parse_ir("QUBITS 2\nCRZ 1 1 0.1\n"); },
                               "control equals target");
}

void test_circuit_validation() {
    Circuit c;
    c.num_qubits = 0;
    check_throws<CircuitError>([&] { c.validate(); }, "zero qubits rejected");
    c.num_qubits = 2;
    c.measure_z = {4};
    check_throws<CircuitError>([&] { c.validate(); }, "measure out of range rejected");
}

} // namespace

int main() {
    test::run_test("ry gate basics", test_ry_gate_basics);
    test::run_test("crz inactive control", test_crz_inactive_control);
    test::run_test("crz matches explicit matrix", test_crz_matches_explicit_matrix);
    test::run_test("expectation values", test_expectation_values);
    test::run_test("run_circuit basics", test_run_circuit_basics);
    test::run_test("expectations bounded, norm preserved",
                   test_expectations_bounded_and_norm_preserved);
    test::run_test("qwthn circuit structure", test_build_qwthn_circuit_structure);
    test::run_test("qwthn basis state example", test_build_qwthn_basis_state_example);
    test::run_test("qwthn circuit errors", test_build_qwthn_errors);
    test::run_test("param shift analytic cases", test_param_shift_analytic_cases);
    test::run_test("param shift vs finite differences",
                   test_param_shift_matches_finite_differences);
    test::run_test("param shift on the ansatz", test_param_shift_qwthn_ansatz);
    test::run_test("sampling", test_sampling);
    test::run_test("ir round trip", test_ir_round_trip);
    test::run_test("ir parse errors", test_ir_parse_errors);
    test::run_test("circuit validation", test_circuit_validation);
    return test::finish();
}
