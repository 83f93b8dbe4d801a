#pragma once

#include <cstdint>
#include <vector>

#include "qwthn/circuit.hpp"
#include "qwthn/rng.hpp"

namespace qwthn {

// Exact statevector over Q qubits, amplitudes as explicit (re, im) pairs.
// Qubit q corresponds to bit q of the basis index.
class StateVector {
public:
    explicit StateVector(std::size_t num_qubits); // |0...0>

    std::size_t num_qubits() const { return num_qubits_; }
    std::size_t dim() const { return re_.size(); }

    double real_part(std::size_t basis) const { return re_[basis]; }
    double imag_part(std::size_t basis) const { return im_[basis]; }
    void set_amplitude(std::size_t basis, double re, double im);

    void apply_gate(const Gate& gate);
    double norm_sq() const;
    double expectation_z(std::size_t qubit) const;
    std::vector<double> probabilities() const;

    // Multinomial draw over basis outcomes; returned counts sum to shots.
    std::vector<std::uint64_t> sample_shots(std::size_t shots, RngState& rng) const;

private:
    std::size_t num_qubits_;
    std::vector<double> re_;
    std::vector<double> im_;
};

StateVector run_to_state(const Circuit& circuit);

// Exact <Z> for each entry of circuit.measure_z, in order.
std::vector<double> run_circuit(const Circuit& circuit);

std::vector<double> expectations_from_counts(const std::vector<std::uint64_t>& counts,
                                             std::size_t num_qubits,
                                             const std::vector<std::size_t>& measure_z,
                                             std::size_t shots);

// d<Z_q>/dtheta for each measured qubit, for the parameter bound to `slot`.
// RY gates use the two-term shift rule; CRZ gates (generator eigenvalues
// {0, +1/2, -1/2}) need the exact four-term rule. Multiple gates on one slot
// accumulate by the product rule.
std::vector<double> param_shift_grad(const Circuit& circuit, std::size_t slot);

} // namespace qwthn
