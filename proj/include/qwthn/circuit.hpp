#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qwthn {

enum class GateKind { RY, CRZ, H, SDG };

struct Gate {
    GateKind kind = GateKind::RY;
    std::size_t target = 0;
    std::optional<std::size_t> control; // CRZ only
    double angle = 0.0;                 // RY, CRZ
    // Training-time binding of the angle to a named parameter; not part of
    // the wire format.
    std::optional<std::size_t> param_slot;
};

struct Circuit {
    std::size_t num_qubits = 0;
    std::vector<Gate> gates;
    std::vector<std::size_t> measure_z;

    void validate() const;
};

Gate ry(std::size_t target, double angle,
        std::optional<std::size_t> slot = std::nullopt);
Gate crz(std::size_t control, std::size_t target, double angle,
         std::optional<std::size_t> slot = std::nullopt);
Gate hadamard(std::size_t target);
Gate s_dagger(std::size_t target);

// Structural equality over the executable content (kinds, qubits, angles,
// measurement list); param slots are ignored.
bool same_structure(const Circuit& a, const Circuit& b);

// Textual IR, one instruction per line:
//   QUBITS 4
//   RY 0 1.5707963267948966
//   CRZ 3 0 0.25            (control target angle)
//   H 2
//   SDG 1
//   MEASZ 0
// Angles are printed with 17 significant digits so parsing is exact.
std::string serialize_ir(const Circuit& circuit);
Circuit parse_ir(const std::string& text);

// Ansatz: one encoding RY per qubit, then `blocks` repetitions of
// [trainable RY on every qubit, nearest-neighbour CRZ chain, ring-closing
// CRZ from the last qubit to qubit 0]; Z measurement on every qubit.
// Encoding angles bind to slots [0, Q); theta to [Q, Q + blocks*2Q).
Circuit build_qwthn_circuit(std::span<const double> input_angles,
                            std::span<const double> theta,
                            std::size_t num_qubits, std::size_t blocks);

inline std::size_t qwthn_theta_size(std::size_t num_qubits, std::size_t blocks) {
    return blocks * 2 * num_qubits;
}

} // namespace qwthn
