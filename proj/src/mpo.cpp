#include "qwthn/mpo.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <utility>

#include <json.hpp>

#include "qwthn/errors.hpp"

namespace qwthn {

namespace {

constexpr std::size_t kDenseGuardEntries = std::size_t{1} << 26;

// Prefers the candidate whose largest factor is smaller, breaking ties on the
// next-largest factor and so on. Both vectors are sorted ascending.
bool better_factorization(const std::vector<std::size_t>& cand,
                          const std::vector<std::size_t>& best) {
    for (std::size_t i = cand.size(); i-- > 0;) {
        if (cand[i] != best[i]) {
            return cand[i] < best[i];
        }
    }
    return false;
}

void enumerate_factorizations(std::size_t total, std::size_t count,
                              std::size_t min_factor,
                              std::vector<std::size_t>& current,
                              std::vector<std::size_t>& best) {
    if (count == 1) {
        if (total >= min_factor) {
            current.push_back(total);
            if (best.empty() || better_factorization(current, best)) {
                best = current;
            }
            current.pop_back();
        }
        return;
    }
    for (std::size_t f = min_factor; f <= total; ++f) {
        if (total % f != 0) {
            continue;
        }
        current.push_back(f);
        enumerate_factorizations(total / f, count - 1, f, current, best);
        current.pop_back();
    }
}

// One chain step: (A, D_prev, I, B) contracted with the site tensor
// (D_prev, J, I, D_next) into (A * J, D_next, B).
std::vector<double> contract_site(const std::vector<double>& state,
                                  std::size_t a_size, std::size_t d_prev,
                                  std::size_t d_next, std::size_t in_k,
                                  std::size_t out_k, std::size_t b_size,
                                  const double* w) {
    std::vector<double> next(a_size * out_k * d_next * b_size, 0.0);
    for (std::size_t a = 0; a < a_size; ++a) {
        for (std::size_t j = 0; j < out_k; ++j) {
            for (std::size_t d1 = 0; d1 < d_next; ++d1) {
                double* out_row = next.data() + ((a * out_k + j) * d_next + d1) * b_size;
                for (std::size_t d0 = 0; d0 < d_prev; ++d0) {
                    for (std::size_t i = 0; i < in_k; ++i) {
                        const double wv = w[((d0 * out_k + j) * in_k + i) * d_next + d1];
                        if (wv == 0.0) {
                            continue;
                        }
                        const double* in_row =
                            state.data() + ((a * d_prev + d0) * in_k + i) * b_size;
                        for (std::size_t b = 0; b < b_size; ++b) {
                            out_row[b] += wv * in_row[b];
                        }
                    }
                }
            }
        }
    }
    return next;
}

} // namespace

std::vector<std::size_t> MpoSpec::site_shape(std::size_t k) const {
    return {bond_dims[k], out_dims[k], in_dims[k], bond_dims[k + 1]};
}

void MpoSpec::validate() const {
    const std::size_t n = in_dims.size();
    if (n == 0) {
        throw ShapeError("mpo spec: at least one site required");
    }
    if (out_dims.size() != n) {
        throw ShapeError("mpo spec: in_dims and out_dims must have equal length");
    }
    if (bond_dims.size() != n + 1) {
        throw ShapeError("mpo spec: bond_dims must have length sites+1");
    }
    for (std::size_t d : in_dims) {
        if (d == 0) throw ShapeError("mpo spec: zero input factor");
    }
    for (std::size_t d : out_dims) {
        if (d == 0) throw ShapeError("mpo spec: zero output factor");
    }
    for (std::size_t d : bond_dims) {
        if (d == 0) throw ShapeError("mpo spec: zero bond dimension");
    }
    if (bond_dims.front() != 1 || bond_dims.back() != 1) {
        throw ShapeError("mpo spec: open boundary requires D_0 = D_n = 1");
    }
}

MpoSpec MpoSpec::balanced(std::size_t input_dim, std::size_t output_dim,
                          std::size_t sites, std::size_t bond) {
    if (bond == 0) {
        throw ShapeError("mpo spec: bond dimension must be positive");
    }
    MpoSpec spec;
    spec.in_dims = factorize_dims(input_dim, sites);
    spec.out_dims = factorize_dims(output_dim, sites);
    spec.bond_dims.assign(sites + 1, bond);
    spec.bond_dims.front() = 1;
    spec.bond_dims.back() = 1;
    spec.validate();
    return spec;
}

std::vector<std::size_t> factorize_dims(std::size_t total, std::size_t count) {
    if (total == 0 || count == 0) {
        throw ShapeError("factorize_dims: total and count must be positive");
    }
    std::vector<std::size_t> current;
    std::vector<std::size_t> best;
    current.reserve(count);
    enumerate_factorizations(total, count, 1, current, best);
    return best;
}

std::size_t mpo_param_count(const MpoSpec& spec) {
    spec.validate();
    std::size_t total = 0;
    for (std::size_t k = 0; k < spec.num_sites(); ++k) {
        total += spec.in_dims[k] * spec.out_dims[k] * spec.bond_dims[k] *
                 spec.bond_dims[k + 1];
    }
    return total;
}

std::size_t mpo_param_count_uniform(const MpoSpec& spec) {
    spec.validate();
    const std::size_t n = spec.num_sites();
    if (n == 1) {
        return spec.in_dims[0] * spec.out_dims[0];
    }
    const std::size_t d = spec.bond_dims[1];
    for (std::size_t k = 1; k < n; ++k) {
        if (spec.bond_dims[k] != d) {
            throw ShapeError("uniform param count requires equal interior bonds");
        }
    }
    std::size_t total = d * (spec.in_dims[0] * spec.out_dims[0] +
                             spec.in_dims[n - 1] * spec.out_dims[n - 1]);
    for (std::size_t k = 1; k + 1 < n; ++k) {
        total += d * d * spec.in_dims[k] * spec.out_dims[k];
    }
    return total;
}

MpoLayer::MpoLayer(MpoSpec spec, std::vector<Tensor> sites)
    : spec_(std::move(spec)), sites_(std::move(sites)) {
    spec_.validate();
    if (sites_.size() != spec_.num_sites()) {
        throw ShapeError("mpo layer: site count does not match spec");
    }
    for (std::size_t k = 0; k < sites_.size(); ++k) {
        if (sites_[k].shape() != spec_.site_shape(k)) {
            throw ShapeError("mpo layer: site " + std::to_string(k) +
                             " shape does not match spec");
        }
    }
}

MpoLayer MpoLayer::kaiming_init(const MpoSpec& spec, RngState& rng) {
    spec.validate();
    std::vector<Tensor> sites;
    sites.reserve(spec.num_sites());
    for (std::size_t k = 0; k < spec.num_sites(); ++k) {
        const std::size_t fan_in = spec.in_dims[k] * spec.bond_dims[k];
        sites.push_back(kaiming_uniform_init(spec.site_shape(k), fan_in, rng));
    }
    return MpoLayer(spec, std::move(sites));
}

MpoLayer MpoLayer::zero_output_init(const MpoSpec& spec, RngState& rng) {
    MpoLayer layer = kaiming_init(spec, rng);
    Tensor& last = layer.sites_.back();
    last = Tensor(last.shape());
    return layer;
}

std::size_t MpoLayer::param_count() const {
    std::size_t total = 0;
    for (const Tensor& t : sites_) {
        total += t.size();
    }
    return total;
}

// Chain state before site k is a flat array with logical layout
// (A, D_{k-1}, I_k, B): A = prod of already-produced output factors,
// B = prod of not-yet-consumed input factors. Site k turns that into
// (A * J_k, D_k, B).
Tensor MpoLayer::forward(const Tensor& x) const {
    if (x.size() != spec_.input_dim()) {
        throw ShapeError("mpo forward: input length " + std::to_string(x.size()) +
                         " does not match " + std::to_string(spec_.input_dim()));
    }
    const std::size_t n = spec_.num_sites();
    std::vector<double> state = reshape_hierarchical(x, spec_.in_dims).flat();

    std::size_t a_size = 1;
    std::size_t b_size = spec_.input_dim();
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t out_k = spec_.out_dims[k];
        b_size /= spec_.in_dims[k];
        state = contract_site(state, a_size, spec_.bond_dims[k], spec_.bond_dims[k + 1],
                              spec_.in_dims[k], out_k, b_size, sites_[k].data());
        a_size *= out_k;
    }
    return Tensor({spec_.output_dim()}, std::move(state));
}

// Independent of forward(): every matrix entry is rebuilt from scratch as the
// bond-index chain product of site slices.
Tensor MpoLayer::to_dense() const {
    const std::size_t in_total = spec_.input_dim();
    const std::size_t out_total = spec_.output_dim();
    if (in_total * out_total > kDenseGuardEntries) {
        throw ShapeError("mpo to_dense: result exceeds the 2^26 entry guard");
    }
    const std::size_t n = spec_.num_sites();
    Tensor dense({out_total, in_total});

    std::vector<std::size_t> j_digits(n), i_digits(n);
    std::vector<double> vec, next;
    for (std::size_t j = 0; j < out_total; ++j) {
        std::size_t jj = j;
        for (std::size_t k = n; k-- > 0;) {
            j_digits[k] = jj % spec_.out_dims[k];
            jj /= spec_.out_dims[k];
        }
        for (std::size_t i = 0; i < in_total; ++i) {
            std::size_t ii = i;
            for (std::size_t k = n; k-- > 0;) {
                i_digits[k] = ii % spec_.in_dims[k];
                ii /= spec_.in_dims[k];
            }
            vec.assign(1, 1.0);
            for (std::size_t k = 0; k < n; ++k) {
                const std::size_t d_prev = spec_.bond_dims[k];
                const std::size_t d_next = spec_.bond_dims[k + 1];
                const std::size_t in_k = spec_.in_dims[k];
                const std::size_t out_k = spec_.out_dims[k];
                const double* w = sites_[k].data();
                next.assign(d_next, 0.0);
                for (std::size_t d0 = 0; d0 < d_prev; ++d0) {
                    const double v = vec[d0];
                    if (v == 0.0) {
                        continue;
                    }
                    const double* slice =
                        w + ((d0 * out_k + j_digits[k]) * in_k + i_digits[k]) * d_next;
                    for (std::size_t d1 = 0; d1 < d_next; ++d1) {
                        next[d1] += v * slice[d1];
                    }
                }
                vec = next;
            }
            dense.at(j, i) = vec[0];
        }
    }
    return dense;
}

MpoLayer::Gradients MpoLayer::backward(const Tensor& x, const Tensor& grad_out) const {
    if (x.size() != spec_.input_dim()) {
        throw ShapeError("mpo backward: input length mismatch");
    }
    if (grad_out.size() != spec_.output_dim()) {
        throw ShapeError("mpo backward: grad_out length mismatch");
    }
    const std::size_t n = spec_.num_sites();

    // Replay the forward chain, keeping every intermediate state. state[k]
    // has layout (A_k, D_k, I_k, B_k) where a_sizes[k] = A_k and b_sizes[k]
    // is the trailing size B_k used when site k is consumed.
    std::vector<std::vector<double>> states(n + 1);
    std::vector<std::size_t> a_sizes(n), b_sizes(n);
    states[0] = x.flat();
    {
        std::size_t a_size = 1;
        std::size_t b_size = spec_.input_dim();
        for (std::size_t k = 0; k < n; ++k) {
            b_size /= spec_.in_dims[k];
            a_sizes[k] = a_size;
            b_sizes[k] = b_size;
            states[k + 1] =
                contract_site(states[k], a_size, spec_.bond_dims[k], spec_.bond_dims[k + 1],
                              spec_.in_dims[k], spec_.out_dims[k], b_size, sites_[k].data());
            a_size *= spec_.out_dims[k];
        }
    }

    Gradients grads;
    grads.sites.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        grads.sites.emplace_back(spec_.site_shape(k));
    }

    std::vector<double> g_next = grad_out.flat();
    for (std::size_t k = n; k-- > 0;) {
        const std::size_t a_size = a_sizes[k];
        const std::size_t b_size = b_sizes[k];
        const std::size_t d_prev = spec_.bond_dims[k];
        const std::size_t d_next = spec_.bond_dims[k + 1];
        const std::size_t in_k = spec_.in_dims[k];
        const std::size_t out_k = spec_.out_dims[k];
        const double* w = sites_[k].data();
        double* gw = grads.sites[k].data();
        const std::vector<double>& state = states[k];

        std::vector<double> g_prev(state.size(), 0.0);
        for (std::size_t a = 0; a < a_size; ++a) {
            for (std::size_t d0 = 0; d0 < d_prev; ++d0) {
                for (std::size_t i = 0; i < in_k; ++i) {
                    const std::size_t row_off = ((a * d_prev + d0) * in_k + i) * b_size;
                    double* g_prev_row = g_prev.data() + row_off;
                    const double* state_row = state.data() + row_off;
                    for (std::size_t j = 0; j < out_k; ++j) {
                        for (std::size_t d1 = 0; d1 < d_next; ++d1) {
                            const std::size_t w_idx =
                                ((d0 * out_k + j) * in_k + i) * d_next + d1;
                            const double wv = w[w_idx];
                            const double* g_row =
                                g_next.data() + ((a * out_k + j) * d_next + d1) * b_size;
                            double acc = 0.0;
                            for (std::size_t b = 0; b < b_size; ++b) {
                                g_prev_row[b] += wv * g_row[b];
                                acc += state_row[b] * g_row[b];
                            }
                            gw[w_idx] += acc;
                        }
                    }
                }
            }
        }
        g_next = std::move(g_prev);
    }
    grads.input = Tensor({spec_.input_dim()}, std::move(g_next));
    return grads;
}

void MpoLayer::save(std::ostream& out) const {
    nlohmann::json j;
    j["in_dims"] = spec_.in_dims;
    j["out_dims"] = spec_.out_dims;
    j["bond_dims"] = spec_.bond_dims;
    std::vector<double> params;
    params.reserve(param_count());
    for (const Tensor& t : sites_) {
        params.insert(params.end(), t.flat().begin(), t.flat().end());
    }
    j["params"] = params;
    out << j.dump();
    if (!out) {
        throw IoError("mpo save: stream write failed");
    }
}

MpoLayer MpoLayer::load(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("mpo load: ") + e.what());
    }
    MpoSpec spec;
    spec.in_dims = j.at("in_dims").get<std::vector<std::size_t>>();
    spec.out_dims = j.at("out_dims").get<std::vector<std::size_t>>();
    spec.bond_dims = j.at("bond_dims").get<std::vector<std::size_t>>();
    spec.validate();
    const std::vector<double> params = j.at("params").get<std::vector<double>>();
    std::size_t offset = 0;
    std::vector<Tensor> sites;
    for (std::size_t k = 0; k < spec.num_sites(); ++k) {
        const std::vector<std::size_t> shape = spec.site_shape(k);
        const std::size_t count = shape_product(shape);
        if (offset + count > params.size()) {
            throw IoError("mpo load: parameter array too short");
        }
        sites.emplace_back(shape, std::vector<double>(params.begin() + offset,
                                                      params.begin() + offset + count));
        offset += count;
    }
    if (offset != params.size()) {
        throw IoError("mpo load: parameter array too long");
    }
    return MpoLayer(std::move(spec), std::move(sites));
}

} // namespace qwthn
