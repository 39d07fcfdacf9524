#include "cngcf/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <unordered_set>

namespace cngcf {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string out = "{";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ',';
        out += std::to_string(shape[i]);
    }
    out += '}';
    return out;
}

namespace detail {

struct Node {
    std::uint64_t id{0};
    Shape shape;
    std::vector<double> value;
    bool requires_grad{false};
    std::vector<std::shared_ptr<Node>> parents;
    // Adjoint closure: given the gradient w.r.t. this node, accumulate into
    // the parent buffers (nullptr for parents that do not require gradients).
    std::function<void(std::span<const double>, std::span<std::vector<double>* const>)> backprop;
};

Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }
const std::shared_ptr<Node>& unwrap(const Tensor& t) { return t.node_; }

namespace {

std::atomic<std::uint64_t> g_next_node_id{1};

std::shared_ptr<Node> make_node(Shape shape, std::vector<double> value, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->id = g_next_node_id.fetch_add(1, std::memory_order_relaxed);
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->requires_grad = requires_grad;
    return node;
}

}  // namespace
}  // namespace detail

using detail::Node;

namespace {

const Node& node_ref(const Tensor& t) {
    const auto& p = detail::unwrap(t);
    if (!p) throw InvalidInputError("operation on an undefined tensor");
    return *p;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (node_ref(a).shape != node_ref(b).shape) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

// Builds the result tensor; attaches parents + adjoint only when gradients
// are requested somewhere upstream.
template <typename Backprop>
Tensor make_op(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
               Backprop&& backprop) {
    bool needs_grad = false;
    for (const Tensor& t : inputs) needs_grad = needs_grad || node_ref(t).requires_grad;
    auto node = detail::make_node(std::move(shape), std::move(value), needs_grad);
    if (needs_grad) {
        node->parents.reserve(inputs.size());
        for (const Tensor& t : inputs) node->parents.push_back(detail::unwrap(t));
        node->backprop = std::forward<Backprop>(backprop);
    }
    return detail::wrap(std::move(node));
}

void axpy(std::vector<double>* out, std::span<const double> g) {
    if (out == nullptr) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*out)[i] += g[i];
}

}  // namespace

// --------------------------------------------------------------------------
// Tensor basics
// --------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape) {
    const std::size_t n = shape_size(shape);
    return detail::wrap(detail::make_node(std::move(shape), std::vector<double>(n, 0.0), false));
}

Tensor Tensor::full(Shape shape, double value) {
    const std::size_t n = shape_size(shape);
    return detail::wrap(detail::make_node(std::move(shape), std::vector<double>(n, value), false));
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> data) {
    if (shape_size(shape) != data.size()) {
        throw DimensionError("from_vector: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_size(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    return detail::wrap(detail::make_node(std::move(shape), std::move(data), false));
}

Tensor Tensor::scalar(double value) {
    return detail::wrap(detail::make_node(Shape{}, std::vector<double>{value}, false));
}

Tensor Tensor::param(Shape shape, std::vector<double> data) {
    if (shape_size(shape) != data.size()) {
        throw DimensionError("param: shape " + shape_str(shape) + " needs " +
                             std::to_string(shape_size(shape)) + " values, got " +
                             std::to_string(data.size()));
    }
    return detail::wrap(detail::make_node(std::move(shape), std::move(data), true));
}

const Shape& Tensor::shape() const { return node_ref(*this).shape; }
std::size_t Tensor::rank() const { return node_ref(*this).shape.size(); }
std::size_t Tensor::size() const { return node_ref(*this).value.size(); }

std::span<const double> Tensor::data() const { return node_ref(*this).value; }

std::span<double> Tensor::mutable_data() {
    Node& n = const_cast<Node&>(node_ref(*this));
    if (!n.parents.empty()) {
        throw InvalidInputError("mutable_data: only leaf tensors may be mutated");
    }
    return n.value;
}

double Tensor::item() const {
    const Node& n = node_ref(*this);
    if (n.value.size() != 1) {
        throw InvalidInputError("item: tensor has " + std::to_string(n.value.size()) +
                                " entries, expected 1");
    }
    return n.value[0];
}

double Tensor::at(std::size_t i) const { return node_ref(*this).value.at(i); }

double Tensor::at(std::size_t row, std::size_t col) const {
    const Node& n = node_ref(*this);
    if (n.shape.size() != 2) throw InvalidInputError("at(row,col): tensor is not rank-2");
    return n.value.at(row * n.shape[1] + col);
}

std::size_t Tensor::rows() const {
    const Node& n = node_ref(*this);
    if (n.shape.size() != 2) throw InvalidInputError("rows: tensor is not rank-2");
    return n.shape[0];
}

std::size_t Tensor::cols() const {
    const Node& n = node_ref(*this);
    if (n.shape.size() != 2) throw InvalidInputError("cols: tensor is not rank-2");
    return n.shape[1];
}

bool Tensor::requires_grad() const { return node_ref(*this).requires_grad; }
std::uint64_t Tensor::id() const { return node_ref(*this).id; }

Tensor Tensor::detach() const {
    const Node& n = node_ref(*this);
    return detail::wrap(detail::make_node(n.shape, n.value, false));
}

bool Tensor::all_finite() const {
    for (double v : node_ref(*this).value) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void check_finite(const Tensor& t, const std::string& context) {
    if (!t.all_finite()) throw NumericError("non-finite values in " + context);
}

// --------------------------------------------------------------------------
// backward
// --------------------------------------------------------------------------

Tensor GradientMap::grad_of(const Tensor& leaf) const {
    const auto it = grads_.find(leaf.id());
    if (it == grads_.end()) return Tensor::zeros(leaf.shape());
    return Tensor::from_vector(leaf.shape(), it->second);
}

bool GradientMap::contains(const Tensor& leaf) const { return grads_.contains(leaf.id()); }

GradientMap backward(const Tensor& loss, BackwardStats* stats) {
    const Node& root = node_ref(loss);
    if (root.value.size() != 1) {
        throw InvalidInputError("backward: loss must be a scalar, got shape " +
                                shape_str(root.shape));
    }

    // Reachable subgraph. Node ids increase with creation order and parents
    // are created before children, so descending id is a reverse topological
    // order and each node is replayed exactly once.
    std::vector<Node*> order;
    {
        std::unordered_set<Node*> seen;
        std::vector<Node*> stack{const_cast<Node*>(&root)};
        seen.insert(stack.back());
        while (!stack.empty()) {
            Node* n = stack.back();
            stack.pop_back();
            order.push_back(n);
            for (const auto& p : n->parents) {
                if (seen.insert(p.get()).second) stack.push_back(p.get());
            }
        }
    }
    std::sort(order.begin(), order.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

    std::unordered_map<Node*, std::vector<double>> grads;
    grads.reserve(order.size());
    grads[const_cast<Node*>(&root)] = {1.0};

    std::size_t ops_replayed = 0;
    std::vector<std::vector<double>*> parent_bufs;
    for (Node* n : order) {
        const auto it = grads.find(n);
        if (it == grads.end() || !n->backprop) continue;
        parent_bufs.assign(n->parents.size(), nullptr);
        for (std::size_t i = 0; i < n->parents.size(); ++i) {
            Node* p = n->parents[i].get();
            if (!p->requires_grad) continue;
            auto [slot, inserted] = grads.try_emplace(p);
            if (inserted) slot->second.assign(p->value.size(), 0.0);
            parent_bufs[i] = &slot->second;
        }
        n->backprop(std::span<const double>(it->second), std::span<std::vector<double>* const>(parent_bufs));
        ++ops_replayed;
    }

    GradientMap out;
    for (Node* n : order) {
        if (!n->requires_grad || !n->parents.empty()) continue;
        auto it = grads.find(n);
        if (it != grads.end()) out.grads_[n->id] = std::move(it->second);
    }
    if (stats != nullptr) {
        stats->nodes_reached = order.size();
        stats->ops_replayed = ops_replayed;
    }
    return out;
}

// --------------------------------------------------------------------------
// elementwise ops
// --------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto& av = node_ref(a).value;
    const auto& bv = node_ref(b).value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                       axpy(bufs[1], g);
                   });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto& av = node_ref(a).value;
    const auto& bv = node_ref(b).value;
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    return make_op(a.shape(), std::move(out), {a, b},
                   [](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*bufs[1])[i] -= g[i];
                       }
                   });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    std::vector<double> a_copy(av.begin(), av.end());
    std::vector<double> b_copy(bv.begin(), bv.end());
    return make_op(a.shape(), std::move(out), {a, b},
                   [a_copy = std::move(a_copy), b_copy = std::move(b_copy)](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*bufs[0])[i] += g[i] * b_copy[i];
                       }
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*bufs[1])[i] += g[i] * a_copy[i];
                       }
                   });
}

Tensor scale(const Tensor& a, double factor) {
    const auto av = a.data();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
    return make_op(a.shape(), std::move(out), {a},
                   [factor](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*bufs[0])[i] += g[i] * factor;
                       }
                   });
}

Tensor relu(const Tensor& x) {
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    std::vector<double> x_copy(xv.begin(), xv.end());
    return make_op(x.shape(), std::move(out), {x},
                   [x_copy = std::move(x_copy)](std::span<const double> g,
                                                std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                           if (x_copy[i] > 0.0) (*bufs[0])[i] += g[i];
                       }
                   });
}

Tensor exp(const Tensor& x) {
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
    std::vector<double> y_copy = out;
    return make_op(x.shape(), std::move(out), {x},
                   [y_copy = std::move(y_copy)](std::span<const double> g,
                                                std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < g.size(); ++i) (*bufs[0])[i] += g[i] * y_copy[i];
                   });
}

Tensor sqrt(const Tensor& x) {
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] < 0.0) throw InvalidInputError("sqrt: negative input");
        out[i] = std::sqrt(xv[i]);
    }
    std::vector<double> y_copy = out;
    return make_op(x.shape(), std::move(out), {x},
                   [y_copy = std::move(y_copy)](std::span<const double> g,
                                                std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                           (*bufs[0])[i] += g[i] * 0.5 / y_copy[i];
                       }
                   });
}

// --------------------------------------------------------------------------
// softmax / reductions
// --------------------------------------------------------------------------

namespace {

// Rows-of-a-matrix view; a vector is one row.
std::pair<std::size_t, std::size_t> rows_cols(const Tensor& x, const char* op) {
    const Shape& s = x.shape();
    if (s.size() == 1) return {1, s[0]};
    if (s.size() == 2) return {s[0], s[1]};
    throw InvalidInputError(std::string(op) + ": expected a vector or matrix, got shape " +
                            shape_str(s));
}

}  // namespace

Tensor softmax(const Tensor& x) {
    const auto [n_rows, n_cols] = rows_cols(x, "softmax");
    if (n_cols == 0) throw InvalidInputError("softmax: empty vector");
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* row = xv.data() + r * n_cols;
        double* orow = out.data() + r * n_cols;
        double mx = row[0];
        for (std::size_t j = 1; j < n_cols; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n_cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (std::size_t j = 0; j < n_cols; ++j) orow[j] /= denom;
    }
    std::vector<double> y_copy = out;
    return make_op(x.shape(), std::move(out), {x},
                   [y_copy = std::move(y_copy), n_rows, n_cols](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t r = 0; r < n_rows; ++r) {
                           const double* y = y_copy.data() + r * n_cols;
                           const double* gr = g.data() + r * n_cols;
                           double inner = 0.0;
                           for (std::size_t j = 0; j < n_cols; ++j) inner += gr[j] * y[j];
                           double* dst = bufs[0]->data() + r * n_cols;
                           for (std::size_t j = 0; j < n_cols; ++j) {
                               dst[j] += y[j] * (gr[j] - inner);
                           }
                       }
                   });
}

Tensor sum(const Tensor& x) {
    const auto xv = x.data();
    double total = 0.0;
    for (double v : xv) total += v;
    const std::size_t n = xv.size();
    return make_op(Shape{}, {total}, {x},
                   [n](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < n; ++i) (*bufs[0])[i] += g[0];
                   });
}

Tensor row_sum(const Tensor& x) {
    if (x.rank() != 2) throw InvalidInputError("row_sum: expected a matrix");
    const std::size_t m = x.rows(), n = x.cols();
    const auto xv = x.data();
    std::vector<double> out(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i] += xv[i * n + j];
    }
    return make_op(Shape{m}, std::move(out), {x},
                   [m, n](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < m; ++i) {
                           for (std::size_t j = 0; j < n; ++j) (*bufs[0])[i * n + j] += g[i];
                       }
                   });
}

// --------------------------------------------------------------------------
// matmul family
// --------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const bool vec_rhs = sb.size() == 1;
    if (sa.size() != 2 || (sb.size() != 2 && sb.size() != 1) || sa[1] != sb[0]) {
        throw DimensionError("matmul: cannot multiply " + shape_str(sa) + " by " + shape_str(sb));
    }
    const std::size_t m = sa[0], k = sa[1], n = vec_rhs ? 1 : sb[1];
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            const double* brow = bv.data() + kk * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    Shape out_shape = vec_rhs ? Shape{m} : Shape{m, n};
    std::vector<double> a_copy(av.begin(), av.end());
    std::vector<double> b_copy(bv.begin(), bv.end());
    return make_op(std::move(out_shape), std::move(out), {a, b},
                   [a_copy = std::move(a_copy), b_copy = std::move(b_copy), m, k, n](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {  // dA = G B^T
                           for (std::size_t i = 0; i < m; ++i) {
                               for (std::size_t kk = 0; kk < k; ++kk) {
                                   double acc = 0.0;
                                   const double* grow = g.data() + i * n;
                                   const double* brow = b_copy.data() + kk * n;
                                   for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                                   (*bufs[0])[i * k + kk] += acc;
                               }
                           }
                       }
                       if (bufs[1] != nullptr) {  // dB = A^T G
                           for (std::size_t i = 0; i < m; ++i) {
                               const double* grow = g.data() + i * n;
                               for (std::size_t kk = 0; kk < k; ++kk) {
                                   const double aik = a_copy[i * k + kk];
                                   double* dst = bufs[1]->data() + kk * n;
                                   for (std::size_t j = 0; j < n; ++j) dst[j] += aik * grow[j];
                               }
                           }
                       }
                   });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[1]) {
        throw DimensionError("matmul_nt: cannot multiply " + shape_str(sa) + " by transpose of " +
                             shape_str(sb));
    }
    const std::size_t m = sa[0], k = sa[1], n = sb[0];
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = av.data() + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = bv.data() + j * k;
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += arow[kk] * brow[kk];
            out[i * n + j] = acc;
        }
    }
    std::vector<double> a_copy(av.begin(), av.end());
    std::vector<double> b_copy(bv.begin(), bv.end());
    return make_op(Shape{m, n}, std::move(out), {a, b},
                   [a_copy = std::move(a_copy), b_copy = std::move(b_copy), m, k, n](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {  // dA = G B
                           for (std::size_t i = 0; i < m; ++i) {
                               const double* grow = g.data() + i * n;
                               double* dst = bufs[0]->data() + i * k;
                               for (std::size_t j = 0; j < n; ++j) {
                                   const double gij = grow[j];
                                   const double* brow = b_copy.data() + j * k;
                                   for (std::size_t kk = 0; kk < k; ++kk) dst[kk] += gij * brow[kk];
                               }
                           }
                       }
                       if (bufs[1] != nullptr) {  // dB = G^T A
                           for (std::size_t i = 0; i < m; ++i) {
                               const double* grow = g.data() + i * n;
                               const double* arow = a_copy.data() + i * k;
                               for (std::size_t j = 0; j < n; ++j) {
                                   const double gij = grow[j];
                                   double* dst = bufs[1]->data() + j * k;
                                   for (std::size_t kk = 0; kk < k; ++kk) dst[kk] += gij * arow[kk];
                               }
                           }
                       }
                   });
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1) {
        throw DimensionError("dot: expected vectors, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    require_same_shape(a, b, "dot");
    const auto av = a.data();
    const auto bv = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
    std::vector<double> a_copy(av.begin(), av.end());
    std::vector<double> b_copy(bv.begin(), bv.end());
    return make_op(Shape{}, {acc}, {a, b},
                   [a_copy = std::move(a_copy), b_copy = std::move(b_copy)](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {
                           for (std::size_t i = 0; i < b_copy.size(); ++i) {
                               (*bufs[0])[i] += g[0] * b_copy[i];
                           }
                       }
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < a_copy.size(); ++i) {
                               (*bufs[1])[i] += g[0] * a_copy[i];
                           }
                       }
                   });
}

// --------------------------------------------------------------------------
// structural ops
// --------------------------------------------------------------------------

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                             shape_str(shape));
    }
    const auto xv = x.data();
    return make_op(std::move(shape), std::vector<double>(xv.begin(), xv.end()), {x},
                   [](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                   });
}

Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1) {
        throw DimensionError("concat: expected vectors, got " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out;
    out.reserve(av.size() + bv.size());
    out.insert(out.end(), av.begin(), av.end());
    out.insert(out.end(), bv.begin(), bv.end());
    const std::size_t na = av.size();
    return make_op(Shape{av.size() + bv.size()}, std::move(out), {a, b},
                   [na](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {
                           for (std::size_t i = 0; i < na; ++i) (*bufs[0])[i] += g[i];
                       }
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = na; i < g.size(); ++i) (*bufs[1])[i - na] += g[i];
                       }
                   });
}

Tensor concat_cols(std::span<const Tensor> mats) {
    if (mats.empty()) throw InvalidInputError("concat_cols: no inputs");
    const std::size_t m = mats[0].rows();
    std::size_t total_cols = 0;
    std::vector<std::size_t> widths;
    widths.reserve(mats.size());
    for (const Tensor& t : mats) {
        if (t.rank() != 2 || t.rows() != m) {
            throw DimensionError("concat_cols: row-count mismatch at shape " + shape_str(t.shape()));
        }
        widths.push_back(t.cols());
        total_cols += t.cols();
    }
    std::vector<double> out(m * total_cols);
    std::size_t col_off = 0;
    for (std::size_t t = 0; t < mats.size(); ++t) {
        const auto v = mats[t].data();
        for (std::size_t i = 0; i < m; ++i) {
            std::copy(v.begin() + static_cast<std::ptrdiff_t>(i * widths[t]),
                      v.begin() + static_cast<std::ptrdiff_t>((i + 1) * widths[t]),
                      out.begin() + static_cast<std::ptrdiff_t>(i * total_cols + col_off));
        }
        col_off += widths[t];
    }
    std::vector<Tensor> inputs(mats.begin(), mats.end());
    return make_op(Shape{m, total_cols}, std::move(out), std::move(inputs),
                   [m, total_cols, widths](std::span<const double> g,
                                           std::span<std::vector<double>* const> bufs) {
                       std::size_t off = 0;
                       for (std::size_t t = 0; t < widths.size(); ++t) {
                           if (bufs[t] != nullptr) {
                               for (std::size_t i = 0; i < m; ++i) {
                                   for (std::size_t j = 0; j < widths[t]; ++j) {
                                       (*bufs[t])[i * widths[t] + j] += g[i * total_cols + off + j];
                                   }
                               }
                           }
                           off += widths[t];
                       }
                   });
}

Tensor vstack(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols()) {
        throw DimensionError("vstack: incompatible shapes " + shape_str(a.shape()) + " and " +
                             shape_str(b.shape()));
    }
    const auto av = a.data();
    const auto bv = b.data();
    std::vector<double> out;
    out.reserve(av.size() + bv.size());
    out.insert(out.end(), av.begin(), av.end());
    out.insert(out.end(), bv.begin(), bv.end());
    const std::size_t na = av.size();
    return make_op(Shape{a.rows() + b.rows(), a.cols()}, std::move(out), {a, b},
                   [na](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {
                           for (std::size_t i = 0; i < na; ++i) (*bufs[0])[i] += g[i];
                       }
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = na; i < g.size(); ++i) (*bufs[1])[i - na] += g[i];
                       }
                   });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() != 2) throw InvalidInputError("slice_rows: expected a matrix");
    if (begin > end || end > x.rows()) {
        throw DimensionError("slice_rows: range [" + std::to_string(begin) + "," +
                             std::to_string(end) + ") out of bounds for " + shape_str(x.shape()));
    }
    const std::size_t n = x.cols();
    const auto xv = x.data();
    std::vector<double> out(xv.begin() + static_cast<std::ptrdiff_t>(begin * n),
                            xv.begin() + static_cast<std::ptrdiff_t>(end * n));
    return make_op(Shape{end - begin, n}, std::move(out), {x},
                   [begin, n](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < g.size(); ++i) {
                           (*bufs[0])[begin * n + i] += g[i];
                       }
                   });
}

Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> indices) {
    if (x.rank() != 2) throw InvalidInputError("gather_rows: expected a matrix");
    const std::size_t m = x.rows(), n = x.cols();
    const auto xv = x.data();
    std::vector<double> out(indices.size() * n);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        if (indices[r] >= m) {
            throw InvalidInputError("gather_rows: index " + std::to_string(indices[r]) +
                                    " out of range for " + std::to_string(m) + " rows");
        }
        std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(indices[r] * n), n,
                    out.begin() + static_cast<std::ptrdiff_t>(r * n));
    }
    std::vector<std::uint32_t> idx(indices.begin(), indices.end());
    return make_op(Shape{indices.size(), n}, std::move(out), {x},
                   [idx = std::move(idx), n](std::span<const double> g,
                                             std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                           double* dst = bufs[0]->data() + idx[r] * n;
                           const double* src = g.data() + r * n;
                           for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
                       }
                   });
}

Tensor segment_sum(const Tensor& x, std::span<const std::uint32_t> seg, std::size_t n_segments) {
    if (x.rank() != 2) throw InvalidInputError("segment_sum: expected a matrix");
    if (seg.size() != x.rows()) {
        throw DimensionError("segment_sum: " + std::to_string(seg.size()) + " segment ids for " +
                             std::to_string(x.rows()) + " rows");
    }
    const std::size_t n = x.cols();
    const auto xv = x.data();
    std::vector<double> out(n_segments * n, 0.0);
    for (std::size_t r = 0; r < seg.size(); ++r) {
        if (seg[r] >= n_segments) {
            throw InvalidInputError("segment_sum: segment id " + std::to_string(seg[r]) +
                                    " out of range");
        }
        double* dst = out.data() + seg[r] * n;
        const double* src = xv.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
    }
    std::vector<std::uint32_t> seg_copy(seg.begin(), seg.end());
    return make_op(Shape{n_segments, n}, std::move(out), {x},
                   [seg_copy = std::move(seg_copy), n](std::span<const double> g,
                                                       std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t r = 0; r < seg_copy.size(); ++r) {
                           const double* src = g.data() + seg_copy[r] * n;
                           double* dst = bufs[0]->data() + r * n;
                           for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
                       }
                   });
}

Tensor add_row_broadcast(const Tensor& m, const Tensor& row) {
    if (m.rank() != 2 || row.rank() != 1 || m.cols() != row.size()) {
        throw DimensionError("add_row_broadcast: incompatible shapes " + shape_str(m.shape()) +
                             " and " + shape_str(row.shape()));
    }
    const std::size_t rows = m.rows(), n = m.cols();
    const auto mv = m.data();
    const auto rv = row.data();
    std::vector<double> out(mv.size());
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = mv[i * n + j] + rv[j];
    }
    return make_op(m.shape(), std::move(out), {m, row},
                   [rows, n](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < rows; ++i) {
                               for (std::size_t j = 0; j < n; ++j) (*bufs[1])[j] += g[i * n + j];
                           }
                       }
                   });
}

Tensor add_col_broadcast(const Tensor& m, const Tensor& col) {
    if (m.rank() != 2 || col.rank() != 1 || m.rows() != col.size()) {
        throw DimensionError("add_col_broadcast: incompatible shapes " + shape_str(m.shape()) +
                             " and " + shape_str(col.shape()));
    }
    const std::size_t rows = m.rows(), n = m.cols();
    const auto mv = m.data();
    const auto cv = col.data();
    std::vector<double> out(mv.size());
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = mv[i * n + j] + cv[i];
    }
    return make_op(m.shape(), std::move(out), {m, col},
                   [rows, n](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < rows; ++i) {
                               for (std::size_t j = 0; j < n; ++j) (*bufs[1])[i] += g[i * n + j];
                           }
                       }
                   });
}

Tensor add_scalar_broadcast(const Tensor& m, const Tensor& scalar) {
    if (scalar.size() != 1) {
        throw DimensionError("add_scalar_broadcast: bias must be a scalar, got " +
                             shape_str(scalar.shape()));
    }
    const auto mv = m.data();
    const double s = scalar.item();
    std::vector<double> out(mv.size());
    for (std::size_t i = 0; i < mv.size(); ++i) out[i] = mv[i] + s;
    return make_op(m.shape(), std::move(out), {m, scalar},
                   [](std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                       if (bufs[1] != nullptr) {
                           double acc = 0.0;
                           for (double v : g) acc += v;
                           (*bufs[1])[0] += acc;
                       }
                   });
}

// --------------------------------------------------------------------------
// model-facing primitives
// --------------------------------------------------------------------------

Tensor gaussian_sample(const Tensor& mu, const Tensor& sigma, const Tensor& noise) {
    require_same_shape(mu, sigma, "gaussian_sample");
    require_same_shape(mu, noise, "gaussian_sample");
    const auto mv = mu.data();
    const auto sv = sigma.data();
    const auto nv = noise.data();
    for (double s : sv) {
        if (!(s > 0.0)) throw InvalidInputError("gaussian_sample: sigma must be strictly positive");
    }
    std::vector<double> out(mv.size());
    for (std::size_t i = 0; i < mv.size(); ++i) out[i] = mv[i] + sv[i] * nv[i];
    std::vector<double> noise_copy(nv.begin(), nv.end());
    // Reparameterization: the noise is a constant, gradients flow to mu and
    // sigma only.
    return make_op(mu.shape(), std::move(out), {mu, sigma},
                   [noise_copy = std::move(noise_copy)](std::span<const double> g,
                                                        std::span<std::vector<double>* const> bufs) {
                       axpy(bufs[0], g);
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < g.size(); ++i) {
                               (*bufs[1])[i] += g[i] * noise_copy[i];
                           }
                       }
                   });
}

Tensor kl_diag_normal(const Tensor& mu, const Tensor& sigma_sq) {
    require_same_shape(mu, sigma_sq, "kl_diag_normal");
    const auto mv = mu.data();
    const auto sv = sigma_sq.data();
    double total = 0.0;
    for (std::size_t i = 0; i < mv.size(); ++i) {
        if (!(sv[i] > 0.0)) {
            throw InvalidInputError("kl_diag_normal: sigma_sq must be strictly positive");
        }
        total += mv[i] * mv[i] + sv[i] - 1.0 - std::log(sv[i]);
    }
    total *= 0.5;
    std::vector<double> mu_copy(mv.begin(), mv.end());
    std::vector<double> ss_copy(sv.begin(), sv.end());
    return make_op(Shape{}, {total}, {mu, sigma_sq},
                   [mu_copy = std::move(mu_copy), ss_copy = std::move(ss_copy)](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] != nullptr) {
                           for (std::size_t i = 0; i < mu_copy.size(); ++i) {
                               (*bufs[0])[i] += g[0] * mu_copy[i];
                           }
                       }
                       if (bufs[1] != nullptr) {
                           for (std::size_t i = 0; i < ss_copy.size(); ++i) {
                               (*bufs[1])[i] += g[0] * 0.5 * (1.0 - 1.0 / ss_copy[i]);
                           }
                       }
                   });
}

Tensor dropout(const Tensor& x, double p, bool training, RngStream& rng) {
    if (!(p >= 0.0 && p < 1.0)) throw InvalidInputError("dropout: p must be in [0,1)");
    if (!training || p == 0.0) return x;
    const auto xv = x.data();
    std::vector<double> mask(xv.size());
    const double keep_scale = 1.0 / (1.0 - p);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        mask[i] = rng.uniform01() < p ? 0.0 : keep_scale;
    }
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * mask[i];
    return make_op(x.shape(), std::move(out), {x},
                   [mask = std::move(mask)](std::span<const double> g,
                                            std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < g.size(); ++i) (*bufs[0])[i] += g[i] * mask[i];
                   });
}

namespace {

constexpr double kProbClamp = 1e-12;

double stable_sigmoid(double v) {
    if (v >= 0.0) {
        const double z = std::exp(-v);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(v);
    return z / (1.0 + z);
}

}  // namespace

Tensor logistic_log_likelihood(const Tensor& y, const Tensor& e) {
    require_same_shape(y, e, "logistic_log_likelihood");
    const auto yv = y.data();
    const auto ev = e.data();
    double total = 0.0;
    for (std::size_t i = 0; i < yv.size(); ++i) {
        if (yv[i] != 0.0 && yv[i] != 1.0) {
            throw InvalidInputError("logistic_log_likelihood: y entries must be 0 or 1");
        }
        const double s = stable_sigmoid(ev[i]);
        const double q = stable_sigmoid(-ev[i]);  // 1 - s, computed stably
        total += yv[i] * std::log(std::max(s, kProbClamp)) +
                 (1.0 - yv[i]) * std::log(std::max(q, kProbClamp));
    }
    std::vector<double> y_copy(yv.begin(), yv.end());
    std::vector<double> e_copy(ev.begin(), ev.end());
    return make_op(Shape{}, {total}, {e},
                   [y_copy = std::move(y_copy), e_copy = std::move(e_copy)](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t i = 0; i < e_copy.size(); ++i) {
                           const double s = stable_sigmoid(e_copy[i]);
                           const double q = stable_sigmoid(-e_copy[i]);
                           double d = 0.0;
                           if (y_copy[i] == 1.0) {
                               if (s > kProbClamp) d = q;  // d/de log sigmoid(e)
                           } else {
                               if (q > kProbClamp) d = -s;
                           }
                           (*bufs[0])[i] += g[0] * d;
                       }
                   });
}

Tensor multinomial_log_likelihood(const Tensor& y, const Tensor& e) {
    require_same_shape(y, e, "multinomial_log_likelihood");
    const auto [n_rows, n_cols] = rows_cols(e, "multinomial_log_likelihood");
    if (n_cols == 0) throw InvalidInputError("multinomial_log_likelihood: empty row");
    const auto yv = y.data();
    const auto ev = e.data();
    double total = 0.0;
    std::vector<double> soft(ev.size());
    std::vector<double> y_sums(n_rows, 0.0);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const double* erow = ev.data() + r * n_cols;
        const double* yrow = yv.data() + r * n_cols;
        double mx = erow[0];
        for (std::size_t j = 1; j < n_cols; ++j) mx = std::max(mx, erow[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < n_cols; ++j) denom += std::exp(erow[j] - mx);
        const double lse = mx + std::log(denom);
        for (std::size_t j = 0; j < n_cols; ++j) {
            soft[r * n_cols + j] = std::exp(erow[j] - lse);
            total += yrow[j] * (erow[j] - lse);
            y_sums[r] += yrow[j];
        }
    }
    std::vector<double> y_copy(yv.begin(), yv.end());
    return make_op(Shape{}, {total}, {e},
                   [y_copy = std::move(y_copy), soft = std::move(soft),
                    y_sums = std::move(y_sums), n_rows, n_cols](
                       std::span<const double> g, std::span<std::vector<double>* const> bufs) {
                       if (bufs[0] == nullptr) return;
                       for (std::size_t r = 0; r < n_rows; ++r) {
                           for (std::size_t j = 0; j < n_cols; ++j) {
                               const std::size_t i = r * n_cols + j;
                               (*bufs[0])[i] += g[0] * (y_copy[i] - y_sums[r] * soft[i]);
                           }
                       }
                   });
}

}  // namespace cngcf
