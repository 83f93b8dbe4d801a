#pragma once

#include <iosfwd>
#include <vector>

#include "qwthn/tensor.hpp"

namespace qwthn {

// Matrix Product Operator layer: a linear map factorized into a chain of
// 4-index site tensors. Site k has shape (D_{k-1}, J_k, I_k, D_k) with open
// boundary D_0 = D_n = 1; prod(I_k) is the input width, prod(J_k) the output
// width.
struct MpoSpec {
    std::vector<std::size_t> in_dims;   // I_1..I_n
    std::vector<std::size_t> out_dims;  // J_1..J_n
    std::vector<std::size_t> bond_dims; // D_0..D_n

    std::size_t num_sites() const { return in_dims.size(); }
    std::size_t input_dim() const { return shape_product(in_dims); }
    std::size_t output_dim() const { return shape_product(out_dims); }
    std::vector<std::size_t> site_shape(std::size_t k) const;

    void validate() const;

    // Balanced factorizations of both widths, uniform interior bond.
    static MpoSpec balanced(std::size_t input_dim, std::size_t output_dim,
                            std::size_t sites, std::size_t bond);
};

// Factors `total` into `count` integers with product `total`, minimizing the
// largest factor (then the next largest, and so on); returned ascending.
// A prime total with count > 1 yields padding 1s.
std::vector<std::size_t> factorize_dims(std::size_t total, std::size_t count);

// Sum over sites of I_k * J_k * D_{k-1} * D_k.
std::size_t mpo_param_count(const MpoSpec& spec);

// Closed form for a uniform interior bond D:
// D*(I_1 J_1 + I_n J_n) + D^2 * sum_{k=2}^{n-1} I_k J_k.
// Requires all interior bonds equal.
std::size_t mpo_param_count_uniform(const MpoSpec& spec);

class MpoLayer {
public:
    MpoLayer(MpoSpec spec, std::vector<Tensor> sites);

    static MpoLayer kaiming_init(const MpoSpec& spec, RngState& rng);
    // Kaiming everywhere except the final site, which starts at zero so the
    // layer maps everything to the zero vector until trained.
    static MpoLayer zero_output_init(const MpoSpec& spec, RngState& rng);

    const MpoSpec& spec() const { return spec_; }
    const std::vector<Tensor>& sites() const { return sites_; }
    std::vector<Tensor>& sites() { return sites_; }

    std::size_t param_count() const;

    // Sequential left-to-right contraction of the reshaped input through the
    // chain; equals to_dense() * x.
    Tensor forward(const Tensor& x) const;

    // Full reconstruction W[j, i]; guarded against results above 2^26 entries.
    Tensor to_dense() const;

    struct Gradients {
        std::vector<Tensor> sites;
        Tensor input;
    };
    Gradients backward(const Tensor& x, const Tensor& grad_out) const;

    // JSON header (spec) plus decimal parameter array; round-trip exact.
    void save(std::ostream& out) const;
    static MpoLayer load(std::istream& in);

private:
    MpoSpec spec_;
    std::vector<Tensor> sites_;
};

} // namespace qwthn
