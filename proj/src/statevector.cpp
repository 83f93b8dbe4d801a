#include "qwthn/statevector.hpp"

#include <algorithm>
#include <cmath>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

constexpr double kHalfPi = 1.5707963267948966;
constexpr double kInvSqrt2 = 0.7071067811865476;

} // namespace

StateVector::StateVector(std::size_t num_qubits) : num_qubits_(num_qubits) {
    if (num_qubits == 0) {
        throw CircuitError("statevector: qubit count must be positive");
    }
    if (num_qubits > 24) {
        throw CircuitError("statevector: qubit count above simulator limit");
    }
    re_.assign(std::size_t{1} << num_qubits, 0.0);
    im_.assign(std::size_t{1} << num_qubits, 0.0);
    re_[0] = 1.0;
}

void StateVector::set_amplitude(std::size_t basis, double re, double im) {
    re_[basis] = re;
    im_[basis] = im;
}

void StateVector::apply_gate(const Gate& gate) {
    if (gate.target >= num_qubits_) {
        throw CircuitError("apply_gate: target qubit out of range");
    }
    const std::size_t dim = re_.size();
    const std::size_t step = std::size_t{1} << gate.target;

    switch (gate.kind) {
    case GateKind::RY: {
        const double c = std::cos(gate.angle / 2.0);
        const double s = std::sin(gate.angle / 2.0);
        for (std::size_t group = 0; group < dim; group += 2 * step) {
            for (std::size_t offset = 0; offset < step; ++offset) {
                const std::size_t i0 = group + offset;
                const std::size_t i1 = i0 + step;
                const double r0 = re_[i0], m0 = im_[i0];
                const double r1 = re_[i1], m1 = im_[i1];
                re_[i0] = c * r0 - s * r1;
                im_[i0] = c * m0 - s * m1;
                re_[i1] = s * r0 + c * r1;
                im_[i1] = s * m0 + c * m1;
            }
        }
        break;
    }
    case GateKind::H: {
        for (std::size_t group = 0; group < dim; group += 2 * step) {
            for (std::size_t offset = 0; offset < step; ++offset) {
                const std::size_t i0 = group + offset;
                const std::size_t i1 = i0 + step;
                const double r0 = re_[i0], m0 = im_[i0];
                const double r1 = re_[i1], m1 = im_[i1];
                re_[i0] = kInvSqrt2 * (r0 + r1);
                im_[i0] = kInvSqrt2 * (m0 + m1);
                re_[i1] = kInvSqrt2 * (r0 - r1);
                im_[i1] = kInvSqrt2 * (m0 - m1);
            }
        }
        break;
    }
    case GateKind::SDG: {
        // |1> amplitude picks up -i
        for (std::size_t b = 0; b < dim; ++b) {
            if (b & step) {
                const double r = re_[b];
                re_[b] = im_[b];
                im_[b] = -r;
            }
        }
        break;
    }
    case GateKind::CRZ: {
        if (!gate.control || *gate.control >= num_qubits_ || *gate.control == gate.target) {
            throw CircuitError("apply_gate: invalid CRZ control");
        }
        const std::size_t control_bit = std::size_t{1} << *gate.control;
        const double c = std::cos(gate.angle / 2.0);
        const double s = std::sin(gate.angle / 2.0);
        for (std::size_t b = 0; b < dim; ++b) {
            if (!(b & control_bit)) {
                continue;
            }
            // target |0>: phase e^{-i angle/2}; target |1>: e^{+i angle/2}
            const double sgn = (b & step) ? 1.0 : -1.0;
            const double r = re_[b], m = im_[b];
            re_[b] = c * r - sgn * s * m;
            im_[b] = c * m + sgn * s * r;
        }
        break;
    }
    }
}

double StateVector::norm_sq() const {
    double total = 0.0;
    for (std::size_t b = 0; b < re_.size(); ++b) {
        total += re_[b] * re_[b] + im_[b] * im_[b];
    }
    return total;
}

double StateVector::expectation_z(std::size_t qubit) const {
    if (qubit >= num_qubits_) {
        throw CircuitError("expectation_z: qubit out of range");
    }
    const std::size_t bit = std::size_t{1} << qubit;
    double total = 0.0;
    for (std::size_t b = 0; b < re_.size(); ++b) {
        const double p = re_[b] * re_[b] + im_[b] * im_[b];
        total += (b & bit) ? -p : p;
    }
    return total;
}

std::vector<double> StateVector::probabilities() const {
    std::vector<double> probs(re_.size());
    for (std::size_t b = 0; b < re_.size(); ++b) {
        probs[b] = re_[b] * re_[b] + im_[b] * im_[b];
    }
    return probs;
}

std::vector<std::uint64_t> StateVector::sample_shots(std::size_t shots,
                                                     RngState& rng) const {
    if (shots == 0) {
        throw ParamError("sample_shots: shots must be positive");
    }
    std::vector<double> cdf = probabilities();
    for (std::size_t b = 1; b < cdf.size(); ++b) {
        cdf[b] += cdf[b - 1];
    }
    cdf.back() = 1.0;

    std::vector<std::uint64_t> counts(cdf.size(), 0);
    for (std::size_t s = 0; s < shots; ++s) {
        const double u = rng.next_double();
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        const std::size_t basis = static_cast<std::size_t>(it - cdf.begin());
        ++counts[std::min(basis, cdf.size() - 1)];
    }
    return counts;
}

StateVector run_to_state(const Circuit& circuit) {
    circuit.validate();
    StateVector state(circuit.num_qubits);
    for (const Gate& g : circuit.gates) {
        state.apply_gate(g);
    }
    return state;
}

std::vector<double> run_circuit(const Circuit& circuit) {
    const StateVector state = run_to_state(circuit);
    std::vector<double> out;
    out.reserve(circuit.measure_z.size());
    for (std::size_t q : circuit.measure_z) {
        out.push_back(state.expectation_z(q));
    }
    return out;
}

std::vector<double> expectations_from_counts(const std::vector<std::uint64_t>& counts,
                                             std::size_t num_qubits,
                                             const std::vector<std::size_t>& measure_z,
                                             std::size_t shots) {
    if (counts.size() != (std::size_t{1} << num_qubits)) {
        throw ShapeError("expectations_from_counts: counts length mismatch");
    }
    std::vector<double> out;
    out.reserve(measure_z.size());
    for (std::size_t q : measure_z) {
        const std::size_t bit = std::size_t{1} << q;
        double total = 0.0;
        for (std::size_t b = 0; b < counts.size(); ++b) {
            const double c = static_cast<double>(counts[b]);
            total += (b & bit) ? -c : c;
        }
        out.push_back(total / static_cast<double>(shots));
    }
    return out;
}

std::vector<double> param_shift_grad(const Circuit& circuit, std::size_t slot) {
    circuit.validate();
    std::vector<std::size_t> bound;
    for (std::size_t i = 0; i < circuit.gates.size(); ++i) {
        if (circuit.gates[i].param_slot && *circuit.gates[i].param_slot == slot) {
            bound.push_back(i);
        }
    }
    if (bound.empty()) {
        throw ParamError("param_shift_grad: no gate bound to slot " + std::to_string(slot));
    }

    const std::size_t m = circuit.measure_z.size();
    std::vector<double> grad(m, 0.0);
    Circuit shifted = circuit;
    auto run_shifted = [&](std::size_t gate_idx, double delta) {
        const double saved = shifted.gates[gate_idx].angle;
        shifted.gates[gate_idx].angle = saved + delta;
        std::vector<double> e = run_circuit(shifted);
        shifted.gates[gate_idx].angle = saved;
        return e;
    };

    for (std::size_t gi : bound) {
        const Gate& g = circuit.gates[gi];
        if (g.kind == GateKind::RY) {
            const std::vector<double> plus = run_shifted(gi, kHalfPi);
            const std::vector<double> minus = run_shifted(gi, -kHalfPi);
            for (std::size_t q = 0; q < m; ++q) {
                grad[q] += 0.5 * (plus[q] - minus[q]);
            }
        } else if (g.kind == GateKind::CRZ) {
            // Controlled rotation: expectation has frequencies {1/2, 1} in the
            // angle, so the exact rule takes four evaluations.
            const double root2 = std::sqrt(2.0);
            const double c1 = (root2 + 1.0) / (4.0 * root2);
            const double c2 = (root2 - 1.0) / (4.0 * root2);
            const std::vector<double> p1 = run_shifted(gi, kHalfPi);
            const std::vector<double> m1 = run_shifted(gi, -kHalfPi);
            const std::vector<double> p3 = run_shifted(gi, 3.0 * kHalfPi);
            const std::vector<double> m3 = run_shifted(gi, -3.0 * kHalfPi);
            for (std::size_t q = 0; q < m; ++q) {
                grad[q] += c1 * (p1[q] - m1[q]) - c2 * (p3[q] - m3[q]);
            }
        } else {
            throw ParamError("param_shift_grad: slot bound to a fixed gate");
        }
    }
    return grad;
}

} // namespace qwthn
