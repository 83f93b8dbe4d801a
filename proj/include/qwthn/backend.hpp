#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qwthn/circuit.hpp"
#include "qwthn/tensor.hpp"

namespace qwthn {

enum class PauliBasis { Z, X, Y };
using Observable = std::vector<PauliBasis>;

enum class BackendKind { LocalExact, MockCloud };
enum class JobStatus { Queued, Running, Done, Failed };

const char* job_status_name(JobStatus status);

struct BackendConfig {
    BackendKind kind = BackendKind::LocalExact;
    std::size_t shots = 0;      // 0 = exact expectations (mock cloud only)
    std::size_t group_limit = 10;
    double latency_ms = 2.0;    // mock cloud: simulated wall time per group
    std::uint64_t seed = 0;
    std::optional<std::size_t> fail_group; // testing hook: this group fails
    double poll_timeout_s = 30.0;
    double poll_initial_ms = 1.0;
    double poll_max_ms = 100.0;
};

struct JobHandle {
    std::string id;
    std::size_t group = 0;
    std::size_t first_circuit = 0;
    std::size_t circuit_count = 0;
};

struct JobRecord {
    std::string id;
    std::size_t group = 0;
    JobStatus status = JobStatus::Queued;
    double wall_ms = 0.0;
};

// Execution backend. submit_batch partitions circuits into
// ceil(T / group_limit) in-order groups and returns without blocking;
// results become available per group.
class Backend {
public:
    virtual ~Backend() = default;

    virtual const BackendConfig& config() const = 0;
    virtual std::vector<JobHandle> submit_batch(const std::vector<Circuit>& circuits) = 0;
    virtual JobStatus status(const JobHandle& handle) const = 0;
    // Only valid once status() == Done: one expectation row per circuit.
    virtual std::vector<std::vector<double>> fetch(const JobHandle& handle) const = 0;
    virtual std::uint64_t circuits_executed() const = 0;
    virtual std::vector<JobRecord> ledger() const = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

// Rewrites non-Z observables into Z measurements: X appends H, Y appends
// S-dagger then H on the measured qubit. Measurement list is replaced by the
// observable's qubits.
Circuit basis_transform(const Circuit& circuit, const Observable& obs);

// Blocks with exponential-backoff polling until every group is done, then
// reassembles expectations into a (rows, cols) tensor in original circuit
// order regardless of completion order. Throws BackendError naming failed
// job ids, or on timeout.
Tensor poll_collect(Backend& backend, const std::vector<JobHandle>& handles,
                    std::size_t rows, std::size_t cols);

// One circuit per (sample, qubit): copies each input circuit Q times with a
// single-qubit measurement, giving the hardware-protocol T = B x Q count.
std::vector<Circuit> expand_per_observable(const std::vector<Circuit>& per_sample);

enum class MeasureMode { Combined, PerObservable };

// Runs B per-sample circuits (each measuring all Q qubits) through the
// backend in the requested mode and returns the (B, Q) expectation tensor.
Tensor run_expectation_batch(Backend& backend, const std::vector<Circuit>& per_sample,
                             MeasureMode mode);

} // namespace qwthn
