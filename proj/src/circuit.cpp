#include "qwthn/circuit.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

std::string format_angle(double angle) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", angle);
    return buf;
}

double parse_angle(const std::string& token) {
    char* end = nullptr;
    const double value = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0' || !std::isfinite(value)) {
        throw CircuitError("ir parse: bad angle '" + token + "'");
    }
    return value;
}

std::size_t parse_index(const std::string& token) {
    char* end = nullptr;
    const unsigned long long value = std::strtoull(token.c_str(), &end, 10);
    if (end == token.c_str() || *end != '\0') {
        throw CircuitError("ir parse: bad qubit index '" + token + "'");
    }
    return static_cast<std::size_t>(value);
}

} // namespace

void Circuit::validate() const {
    if (num_qubits == 0) {
        throw CircuitError("circuit: qubit count must be positive");
    }
    for (const Gate& g : gates) {
        if (g.target >= num_qubits) {
            throw CircuitError("circuit: target qubit out of range");
        }
        if (g.kind == GateKind::CRZ) {
            if (!g.control) {
                throw CircuitError("circuit: CRZ requires a control qubit");
            }
            if (*g.control >= num_qubits) {
                throw CircuitError("circuit: control qubit out of range");
            }
            if (*g.control == g.target) {
                throw CircuitError("circuit: CRZ control equals target");
            }
        } else if (g.control) {
            throw CircuitError("circuit: control set on a single-qubit gate");
        }
    }
    for (std::size_t q : measure_z) {
        if (q >= num_qubits) {
            throw CircuitError("circuit: measured qubit out of range");
        }
    }
}

Gate ry(std::size_t target, double angle, std::optional<std::size_t> slot) {
    Gate g;
    g.kind = GateKind::RY;
    g.target = target;
    g.angle = angle;
    g.param_slot = slot;
    return g;
}

Gate crz(std::size_t control, std::size_t target, double angle,
         std::optional<std::size_t> slot) {
    Gate g;
    g.kind = GateKind::CRZ;
    g.control = control;
    g.target = target;
    g.angle = angle;
    g.param_slot = slot;
    return g;
}

Gate hadamard(std::size_t target) {
    Gate g;
    g.kind = GateKind::H;
    g.target = target;
    return g;
}

Gate s_dagger(std::size_t target) {
    Gate g;
    g.kind = GateKind::SDG;
    g.target = target;
    return g;
}

bool same_structure(const Circuit& a, const Circuit& b) {
    if (a.num_qubits != b.num_qubits || a.gates.size() != b.gates.size() ||
        a.measure_z != b.measure_z) {
        return false;
    }
    for (std::size_t i = 0; i < a.gates.size(); ++i) {
        const Gate& ga = a.gates[i];
        const Gate& gb = b.gates[i];
        if (ga.kind != gb.kind || ga.target != gb.target || ga.control != gb.control ||
            ga.angle != gb.angle) {
            return false;
        }
    }
    return true;
}

std::string serialize_ir(const Circuit& circuit) {
    circuit.validate();
    std::string out = "QUBITS " + std::to_string(circuit.num_qubits) + "\n";
    for (const Gate& g : circuit.gates) {
        switch (g.kind) {
        case GateKind::RY:
            out += "RY " + std::to_string(g.target) + " " + format_angle(g.angle) + "\n";
            break;
        case GateKind::CRZ:
            out += "CRZ " + std::to_string(*g.control) + " " + std::to_string(g.target) +
                   " " + format_angle(g.angle) + "\n";
            break;
        case GateKind::H:
            out += "H " + std::to_string(g.target) + "\n";
            break;
        case GateKind::SDG:
            out += "SDG " + std::to_string(g.target) + "\n";
            break;
        }
    }
    for (std::size_t q : circuit.measure_z) {
        out += "MEASZ " + std::to_string(q) + "\n";
    }
    return out;
}

Circuit parse_ir(const std::string& text) {
    Circuit circuit;
    bool saw_qubits = false;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream fields(line);
        std::string op;
        fields >> op;
        std::vector<std::string> args;
        std::string tok;
        while (fields >> tok) {
            args.push_back(tok);
        }
        auto need = [&](std::size_t n) {
            if (args.size() != n) {
                throw CircuitError("ir parse: '" + op + "' expects " + std::to_string(n) +
                                   " arguments, got " + std::to_string(args.size()));
            }
        };
        if (op == "QUBITS") {
            need(1);
            circuit.num_qubits = parse_index(args[0]);
            saw_qubits = true;
        } else if (op == "RY") {
            need(2);
            circuit.gates.push_back(ry(parse_index(args[0]), parse_angle(args[1])));
        } else if (op == "CRZ") {
            need(3);
            circuit.gates.push_back(
                crz(parse_index(args[0]), parse_index(args[1]), parse_angle(args[2])));
        } else if (op == "H") {
            need(1);
            circuit.gates.push_back(hadamard(parse_index(args[0])));
        } else if (op == "SDG") {
            need(1);
            circuit.gates.push_back(s_dagger(parse_index(args[0])));
        } else if (op == "MEASZ") {
            need(1);
            circuit.measure_z.push_back(parse_index(args[0]));
        } else {
            throw CircuitError("ir parse: unknown instruction '" + op + "'");
        }
    }
    if (!saw_qubits) {
        throw CircuitError("ir parse: missing QUBITS header");
    }
    circuit.validate();
    return circuit;
}

Circuit build_qwthn_circuit(std::span<const double> input_angles,
                            std::span<const double> theta,
                            std::size_t num_qubits, std::size_t blocks) {
    if (num_qubits < 2) {
        throw CircuitError("qwthn circuit: at least 2 qubits required for CRZ blocks");
    }
    if (input_angles.size() != num_qubits) {
        throw CircuitError("qwthn circuit: one input angle per qubit required");
    }
    if (theta.size() != qwthn_theta_size(num_qubits, blocks)) {
        throw CircuitError("qwthn circuit: theta length must be blocks * 2 * qubits");
    }

    Circuit circuit;
    circuit.num_qubits = num_qubits;
    for (std::size_t q = 0; q < num_qubits; ++q) {
        circuit.gates.push_back(ry(q, input_angles[q], q));
    }
    std::size_t slot = num_qubits;
    std::size_t t = 0;
    for (std::size_t block = 0; block < blocks; ++block) {
        for (std::size_t q = 0; q < num_qubits; ++q) {
            circuit.gates.push_back(ry(q, theta[t++], slot++));
        }
        for (std::size_t q = 0; q + 1 < num_qubits; ++q) {
            circuit.gates.push_back(crz(q, q + 1, theta[t++], slot++));
        }
        // the one non-local interaction per block closes the ring
        circuit.gates.push_back(crz(num_qubits - 1, 0, theta[t++], slot++));
    }
    for (std::size_t q = 0; q < num_qubits; ++q) {
        circuit.measure_z.push_back(q);
    }
    return circuit;
}

} // namespace qwthn
