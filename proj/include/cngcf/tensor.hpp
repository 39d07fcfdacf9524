#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cngcf/error.hpp"
#include "cngcf/rng.hpp"

namespace cngcf {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

namespace detail {
struct Node;
Tensor wrap(std::shared_ptr<Node> node);
const std::shared_ptr<Node>& unwrap(const Tensor& t);
}  // namespace detail

class GradientMap;

/// Dense row-major tensor of 64-bit floats participating in reverse-mode
/// differentiation. A Tensor is a cheap handle onto a node; applying an
/// operation whose inputs (transitively) require gradients records the
/// operation, its parents and an adjoint closure. `backward` replays the
/// recorded operations in reverse creation order, which is a topological
/// order by construction.
///
/// Nodes are immutable once created. The single exception is
/// `mutable_data()`, which is restricted to leaves so an optimizer can update
/// parameters between graph builds.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double value);
    static Tensor from_vector(Shape shape, std::vector<double> data);
    static Tensor scalar(double value);
    /// Trainable leaf (requires_grad = true).
    static Tensor param(Shape shape, std::vector<double> data);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const;
    std::size_t size() const;
    std::span<const double> data() const;
    /// In-place access for optimizers; only valid on leaves.
    std::span<double> mutable_data();

    double item() const;  // value of a 1-element tensor
    double at(std::size_t i) const;
    double at(std::size_t row, std::size_t col) const;
    std::size_t rows() const;  // rank-2 only
    std::size_t cols() const;

    bool requires_grad() const;
    std::uint64_t id() const;

    /// Same values, detached from the recorded graph (no gradient flow).
    Tensor detach() const;

    bool all_finite() const;

  private:
    friend Tensor detail::wrap(std::shared_ptr<detail::Node> node);
    friend const std::shared_ptr<detail::Node>& detail::unwrap(const Tensor& t);

    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::Node> node_;
};

/// Gradients keyed by leaf tensor id, as produced by `backward`. Leaves that
/// did not participate in the loss read back as zero.
class GradientMap {
  public:
    Tensor grad_of(const Tensor& leaf) const;
    bool contains(const Tensor& leaf) const;
    std::size_t size() const { return grads_.size(); }

  private:
    friend GradientMap backward(const Tensor&, struct BackwardStats*);
    std::unordered_map<std::uint64_t, std::vector<double>> grads_;
};

struct BackwardStats {
    std::size_t nodes_reached{0};  // nodes in the replayed subgraph
    std::size_t ops_replayed{0};   // adjoint closures invoked
};

/// Reverse-mode sweep from a scalar loss. Replays every reachable recorded
/// operation exactly once and returns gradients for the requires_grad leaves.
GradientMap backward(const Tensor& loss, BackwardStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Primitive operations. Each records itself when an input requires gradients.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);  // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double factor);

/// Matrix product: {m,k}x{k,n} -> {m,n} or {m,k}x{k} -> {m}.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a x b^T for rank-2 a {m,k} and b {n,k} -> {m,n}.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor dot(const Tensor& a, const Tensor& b);  // vectors -> scalar

Tensor relu(const Tensor& x);  // subgradient at 0 is 0
Tensor exp(const Tensor& x);
Tensor sqrt(const Tensor& x);
/// Max-subtracted softmax over the last axis (vector, or each row of a matrix).
Tensor softmax(const Tensor& x);

Tensor sum(const Tensor& x);      // -> scalar
Tensor row_sum(const Tensor& x);  // {m,n} -> {m}

Tensor reshape(const Tensor& x, Shape shape);             // same element count
Tensor concat(const Tensor& a, const Tensor& b);          // vectors
Tensor concat_cols(std::span<const Tensor> mats);         // {m,ni} -> {m,sum ni}
Tensor vstack(const Tensor& a, const Tensor& b);          // {m1,n},{m2,n} -> {m1+m2,n}
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> indices);
/// Sums row r into segment seg[r]; rows of absent segments are zero.
Tensor segment_sum(const Tensor& x, std::span<const std::uint32_t> seg, std::size_t n_segments);
Tensor add_row_broadcast(const Tensor& m, const Tensor& row);  // {m,n} + {n}
Tensor add_col_broadcast(const Tensor& m, const Tensor& col);  // {m,n} + {m}
Tensor add_scalar_broadcast(const Tensor& m, const Tensor& scalar);

/// Reparameterized Gaussian draw mu + sigma (*) noise. Gradients flow to mu
/// and sigma only; sigma must be strictly positive.
Tensor gaussian_sample(const Tensor& mu, const Tensor& sigma, const Tensor& noise);

/// 0.5 * sum(mu^2 + sigma_sq - 1 - ln sigma_sq) against a standard normal
/// prior; sigma_sq must be strictly positive. Always >= 0.
Tensor kl_diag_normal(const Tensor& mu, const Tensor& sigma_sq);

/// Inverted dropout: zero with probability p and scale survivors by 1/(1-p)
/// in training mode; identity in evaluation mode. p in [0,1).
Tensor dropout(const Tensor& x, double p, bool training, RngStream& rng);

/// sum over entries of y*log(sigmoid(e)) + (1-y)*log(1-sigmoid(e)), with
/// probabilities clamped at 1e-12. y must contain only 0 or 1 and carries no
/// gradient.
Tensor logistic_log_likelihood(const Tensor& y, const Tensor& e);

/// sum over rows of y . log_softmax(e); alternative multinomial objective.
Tensor multinomial_log_likelihood(const Tensor& y, const Tensor& e);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

/// Throws NumericError naming `context` if any entry is not finite.
void check_finite(const Tensor& t, const std::string& context);

}  // namespace cngcf
