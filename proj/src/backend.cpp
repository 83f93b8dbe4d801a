#include "qwthn/backend.hpp"

#include <algorithm>
#include <chrono>
#include <thread>
#include <unordered_map>

#include "qwthn/errors.hpp"
#include "qwthn/rng.hpp"
#include "qwthn/statevector.hpp"

namespace qwthn {

namespace {

using Clock = std::chrono::steady_clock;

struct Group {
    JobHandle handle;
    std::vector<std::vector<double>> results;
    bool failed = false;
    Clock::time_point submitted_at;
    double ready_after_ms = 0.0; // simulated; 0 = immediately done
};

std::vector<std::pair<std::size_t, std::size_t>> partition(std::size_t total,
                                                           std::size_t limit) {
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t first = 0; first < total; first += limit) {
        groups.emplace_back(first, std::min(limit, total - first));
    }
    return groups;
}

class InProcessBackend : public Backend {
public:
    explicit InProcessBackend(const BackendConfig& config)
        : config_(config), scheduler_rng_(config.seed) {
        if (config_.group_limit == 0) {
            throw ConfigError("backend: group_limit must be at least 1");
        }
    }

    const BackendConfig& config() const override { return config_; }

    std::vector<JobHandle> submit_batch(const std::vector<Circuit>& circuits) override {
        if (circuits.empty()) {
            throw BackendError("submit_batch: no circuits given (retry with work)");
        }
        const bool mock = config_.kind == BackendKind::MockCloud;
        const auto parts = partition(circuits.size(), config_.group_limit);

        // mock cloud completes groups in a seeded shuffled order
        std::vector<std::size_t> rank(parts.size());
        for (std::size_t g = 0; g < parts.size(); ++g) {
            rank[g] = g;
        }
        if (mock) {
            for (std::size_t g = parts.size(); g > 1; --g) {
                std::swap(rank[g - 1], rank[scheduler_rng_.next_below(g)]);
            }
        }

        const Clock::time_point now = Clock::now();
        std::vector<JobHandle> handles;
        for (std::size_t g = 0; g < parts.size(); ++g) {
            Group group;
            group.handle.id = (mock ? "mock-" : "local-") + std::to_string(next_job_id_++);
            group.handle.group = g;
            group.handle.first_circuit = parts[g].first;
            group.handle.circuit_count = parts[g].second;
            group.submitted_at = now;
            group.ready_after_ms =
                mock ? config_.latency_ms * static_cast<double>(rank[g] + 1) : 0.0;
            group.failed = config_.fail_group && *config_.fail_group == g;

            if (!group.failed) {
                for (std::size_t c = 0; c < parts[g].second; ++c) {
                    group.results.push_back(execute(circuits[parts[g].first + c]));
                }
            }
            executed_ += parts[g].second;
            handles.push_back(group.handle);
            jobs_.emplace(group.handle.id, std::move(group));
        }
        return handles;
    }

    JobStatus status(const JobHandle& handle) const override {
        return status_of(find(handle.id));
    }

    std::vector<std::vector<double>> fetch(const JobHandle& handle) const override {
        const Group& group = find(handle.id);
        const JobStatus s = status_of(group);
        if (s == JobStatus::Failed) {
            throw BackendError("fetch: job " + handle.id + " failed");
        }
        if (s != JobStatus::Done) {
            throw BackendError("fetch: job " + handle.id + " is not done yet");
        }
        return group.results;
    }

    std::uint64_t circuits_executed() const override { return executed_; }

    std::vector<JobRecord> ledger() const override {
        std::vector<JobRecord> records;
        records.reserve(jobs_.size());
        for (const auto& [id, group] : jobs_) {
            records.push_back(JobRecord{id, group.handle.group, status_of(group),
                                        group.ready_after_ms});
        }
        std::sort(records.begin(), records.end(),
                  [](const JobRecord& a, const JobRecord& b) { return a.id < b.id; });
        return records;
    }

private:
    const Group& find(const std::string& id) const {
        const auto it = jobs_.find(id);
        if (it == jobs_.end()) {
            throw BackendError("unknown job id " + id);
        }
        return it->second;
    }

    JobStatus status_of(const Group& group) const {
        const double elapsed_ms =
            std::chrono::duration<double, std::milli>(Clock::now() - group.submitted_at)
                .count();
        if (elapsed_ms < group.ready_after_ms) {
            return elapsed_ms < 0.4 * group.ready_after_ms ? JobStatus::Queued
                                                           : JobStatus::Running;
        }
        return group.failed ? JobStatus::Failed : JobStatus::Done;
    }

    std::vector<double> execute(const Circuit& circuit) {
        if (config_.kind == BackendKind::MockCloud && config_.shots > 0) {
            const StateVector state = run_to_state(circuit);
            RngState shot_rng = RngState(config_.seed).split(shot_stream_++);
            const std::vector<std::uint64_t> counts =
                state.sample_shots(config_.shots, shot_rng);
            return expectations_from_counts(counts, circuit.num_qubits,
                                            circuit.measure_z, config_.shots);
        }
        return run_circuit(circuit);
    }

    BackendConfig config_;
    RngState scheduler_rng_;
    std::unordered_map<std::string, Group> jobs_;
    std::uint64_t next_job_id_ = 0;
    std::uint64_t executed_ = 0;
    std::uint64_t shot_stream_ = 0;
};

} // namespace

const char* job_status_name(JobStatus status) {
    switch (status) {
    case JobStatus::Queued:
        return "queued";
    case JobStatus::Running:
        return "running";
    case JobStatus::Done:
        return "done";
    case JobStatus::Failed:
        return "failed";
    }
    return "unknown";
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    return std::make_unique<InProcessBackend>(config);
}

Circuit basis_transform(const Circuit& circuit, const Observable& obs) {
    circuit.validate();
    if (obs.size() != circuit.num_qubits) {
        throw CircuitError("basis_transform: observable length must match qubits");
    }
    Circuit out = circuit;
    out.measure_z.clear();
    for (std::size_t q = 0; q < obs.size(); ++q) {
        switch (obs[q]) {
        case PauliBasis::Z:
            break;
        case PauliBasis::X:
            out.gates.push_back(hadamard(q));
            break;
        case PauliBasis::Y:
            out.gates.push_back(s_dagger(q));
            out.gates.push_back(hadamard(q));
            break;
        }
        out.measure_z.push_back(q);
    }
    return out;
}

Tensor poll_collect(Backend& backend, const std::vector<JobHandle>& handles,
                    std::size_t rows, std::size_t cols) {
    const BackendConfig& cfg = backend.config();
    const Clock::time_point deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(cfg.poll_timeout_s));
    double wait_ms = cfg.poll_initial_ms;

    while (true) {
        bool pending = false;
        std::string failed_ids;
        for (const JobHandle& handle : handles) {
            const JobStatus s = backend.status(handle);
            if (s == JobStatus::Failed) {
                failed_ids += failed_ids.empty() ? handle.id : ", " + handle.id;
            } else if (s != JobStatus::Done) {
                pending = true;
            }
        }
        if (!pending) {
            if (!failed_ids.empty()) {
                throw BackendError("poll_collect: groups failed: " + failed_ids);
            }
            break;
        }
        if (Clock::now() >= deadline) {
            throw BackendError("poll_collect: timed out waiting for results");
        }
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait_ms));
        wait_ms = std::min(wait_ms * 2.0, cfg.poll_max_ms);
    }

    // reassemble in original circuit order, whatever the completion order was
    std::size_t total_circuits = 0;
    for (const JobHandle& handle : handles) {
        total_circuits = std::max(total_circuits, handle.first_circuit + handle.circuit_count);
    }
    std::vector<std::vector<double>> per_circuit(total_circuits);
    for (const JobHandle& handle : handles) {
        std::vector<std::vector<double>> results = backend.fetch(handle);
        if (results.size() != handle.circuit_count) {
            throw BackendError("poll_collect: result count mismatch for " + handle.id);
        }
        for (std::size_t c = 0; c < results.size(); ++c) {
            per_circuit[handle.first_circuit + c] = std::move(results[c]);
        }
    }
    std::vector<double> flat;
    flat.reserve(rows * cols);
    for (const std::vector<double>& row : per_circuit) {
        flat.insert(flat.end(), row.begin(), row.end());
    }
    if (flat.size() != rows * cols) {
        throw ShapeError("poll_collect: expected " + std::to_string(rows * cols) +
                         " expectations, got " + std::to_string(flat.size()));
    }
    return Tensor({rows, cols}, std::move(flat));
}

std::vector<Circuit> expand_per_observable(const std::vector<Circuit>& per_sample) {
    std::vector<Circuit> expanded;
    for (const Circuit& circuit : per_sample) {
        for (std::size_t q : circuit.measure_z) {
            Circuit single = circuit;
            single.measure_z = {q};
            expanded.push_back(std::move(single));
        }
    }
    return expanded;
}

Tensor run_expectation_batch(Backend& backend, const std::vector<Circuit>& per_sample,
                             MeasureMode mode) {
    if (per_sample.empty()) {
        throw BackendError("run_expectation_batch: no circuits");
    }
    const std::size_t rows = per_sample.size();
    const std::size_t cols = per_sample.front().measure_z.size();
    for (const Circuit& c : per_sample) {
        if (c.measure_z.size() != cols) {
            throw ShapeError("run_expectation_batch: uneven measurement counts");
        }
    }
    if (mode == MeasureMode::PerObservable) {
        const std::vector<Circuit> expanded = expand_per_observable(per_sample);
        const std::vector<JobHandle> handles = backend.submit_batch(expanded);
        return poll_collect(backend, handles, rows, cols);
    }
    const std::vector<JobHandle> handles = backend.submit_batch(per_sample);
    return poll_collect(backend, handles, rows, cols);
}

} // namespace qwthn
