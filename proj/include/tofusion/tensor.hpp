#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <unordered_set>
#include <utility>
#include <vector>

#include "tofusion/rng.hpp"

namespace tofusion {

// Always-4D NCHW shape; lower-rank tensors use size-1 dims (scalar = 1x1x1x1).
struct Shape {
    int n = 1, c = 1, h = 1, w = 1;

    std::int64_t numel() const {
        return static_cast<std::int64_t>(n) * c * h * w;
    }
    bool operator==(const Shape& o) const { return n == o.n && c == o.c && h == o.h && w == o.w; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
};

inline Shape scalar_shape() { return Shape{1, 1, 1, 1}; }

// One recorded operation result. `backprop` reads this node's grad and
// accumulates into the parents; kink_sig fingerprints any branchy behavior
// (relu masks, argmin/argmax) so the finite-difference harness can detect
// coordinates whose perturbation crosses a kink.
template <typename T>
struct Node {
    Shape shape;
    std::vector<T> val;
    std::vector<T> grad;
    bool requires_grad = false;
    std::uint64_t kink_sig = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != val.size()) grad.assign(val.size(), T(0));
    }
};

template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor leaf(Shape shape, std::vector<T> values, bool requires_grad) {
        if (static_cast<std::int64_t>(values.size()) != shape.numel())
            throw std::invalid_argument("Tensor: value count does not match shape " + shape.str());
        auto n = std::make_shared<Node<T>>();
        n->shape = shape;
        n->val = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor constant(Shape shape, std::vector<T> values) {
        return leaf(shape, std::move(values), false);
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        return leaf(shape, std::vector<T>(static_cast<size_t>(shape.numel()), value), requires_grad);
    }

    static Tensor scalar(T value, bool requires_grad = false) {
        return leaf(scalar_shape(), {value}, requires_grad);
    }

    const Shape& shape() const { return node_->shape; }
    std::int64_t numel() const { return node_->shape.numel(); }
    const std::vector<T>& val() const { return node_->val; }
    std::vector<T>& val() { return node_->val; }
    const std::vector<T>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    T item() const {
        if (numel() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
        return node_->val[0];
    }

    void zero_grad() {
        node_->grad.assign(node_->val.size(), T(0));
    }

    std::shared_ptr<Node<T>>& node() { return node_; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

    explicit Tensor(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<Node<T>> node_;
};

namespace ad {

template <typename T>
Tensor<T> make_op(Shape shape, std::vector<T> val, std::vector<Tensor<T>> parents,
                  std::function<void(Node<T>&)> backprop, std::uint64_t kink_sig = 0) {
    auto n = std::make_shared<Node<T>>();
    n->shape = shape;
    n->val = std::move(val);
    n->kink_sig = kink_sig;
    bool req = false;
    n->parents.reserve(parents.size());
    for (auto& p : parents) {
        req = req || p.node()->requires_grad;
        n->parents.push_back(p.node());
    }
    n->requires_grad = req;
    if (req) n->backprop = std::move(backprop);
    return Tensor<T>(std::move(n));
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
}

// --- elementwise arithmetic ---

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.val()[i] + b.val()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
        for (int side = 0; side < 2; ++side) {
            auto& p = n.parents[static_cast<size_t>(side)];
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "sub");
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.val()[i] - b.val()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] -= n.grad[i];
        }
    });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "mul");
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.val()[i] * b.val()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] * pb->val[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pb->grad[i] += n.grad[i] * pa->val[i];
        }
    });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "div");
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.val()[i] / b.val()[i];
    return make_op<T>(a.shape(), std::move(v), {a, b}, [](Node<T>& n) {
        auto& pa = n.parents[0];
        auto& pb = n.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i) pa->grad[i] += n.grad[i] / pb->val[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < n.grad.size(); ++i)
                pb->grad[i] -= n.grad[i] * n.val[i] / pb->val[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.val()[i] * factor;
    return make_op<T>(a.shape(), std::move(v), {a}, [factor](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i] * factor;
    });
}

template <typename T>
Tensor<T> offset(const Tensor<T>& a, T shift) {
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = a.val()[i] + shift;
    return make_op<T>(a.shape(), std::move(v), {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) p->grad[i] += n.grad[i];
    });
}

// Fills a target shape from a scalar tensor; gradient sums back.
template <typename T>
Tensor<T> broadcast_scalar(const Tensor<T>& s, Shape shape) {
    if (s.numel() != 1) throw std::invalid_argument("broadcast_scalar: source is not a scalar");
    std::vector<T> v(static_cast<size_t>(shape.numel()), s.val()[0]);
    return make_op<T>(shape, std::move(v), {s}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        T acc = T(0);
        for (size_t i = 0; i < n.grad.size(); ++i) acc += n.grad[i];
        p->grad[0] += acc;
    });
}

// --- elementwise nonlinearities ---

namespace detail {
inline std::uint64_t sig_push(std::uint64_t h, std::uint64_t v) {
    return rng::mix64(h ^ (v + 0x9e3779b97f4a7c15ull));
}
}  // namespace detail

// Subgradient at 0 is 0. Branch signatures are only tracked on the
// double-precision replica used by grad_check.
template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    std::vector<T> v(a.val().size());
    std::uint64_t sig = 0x4e1u;
    for (size_t i = 0; i < v.size(); ++i) {
        const bool pos = a.val()[i] > T(0);
        v[i] = pos ? a.val()[i] : T(0);
        if constexpr (std::is_same_v<T, double>) sig = detail::sig_push(sig, pos ? 1 : 0);
    }
    return make_op<T>(a.shape(), std::move(v), {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            if (p->val[i] > T(0)) p->grad[i] += n.grad[i];
    }, sig);
}

template <typename T>
Tensor<T> abs_t(const Tensor<T>& a) {
    std::vector<T> v(a.val().size());
    std::uint64_t sig = 0xab5;
    for (size_t i = 0; i < v.size(); ++i) {
        v[i] = std::abs(a.val()[i]);
        if constexpr (std::is_same_v<T, double>)
            sig = detail::sig_push(sig, a.val()[i] > T(0) ? 2 : (a.val()[i] < T(0) ? 1 : 0));
    }
    return make_op<T>(a.shape(), std::move(v), {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const T x = p->val[i];
            if (x > T(0)) p->grad[i] += n.grad[i];
            else if (x < T(0)) p->grad[i] -= n.grad[i];
        }
    }, sig);
}

template <typename T>
Tensor<T> tanh_t(const Tensor<T>& a) {
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(a.val()[i]);
    return make_op<T>(a.shape(), std::move(v), {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad[i] += n.grad[i] * (T(1) - n.val[i] * n.val[i]);
    });
}

template <typename T>
Tensor<T> sqrt_t(const Tensor<T>& a) {
    std::vector<T> v(a.val().size());
    for (size_t i = 0; i < v.size(); ++i) v[i] = std::sqrt(a.val()[i]);
    return make_op<T>(a.shape(), std::move(v), {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i)
            p->grad[i] += n.grad[i] / (T(2) * n.val[i]);
    });
}

// Huber-style elementwise penalty: 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise.
template <typename T>
Tensor<T> smooth_l1(const Tensor<T>& a) {
    std::vector<T> v(a.val().size());
    std::uint64_t sig = 0x5111;
    for (size_t i = 0; i < v.size(); ++i) {
        const T x = a.val()[i];
        const bool quad = std::abs(x) < T(1);
        v[i] = quad ? T(0.5) * x * x : std::abs(x) - T(0.5);
        if constexpr (std::is_same_v<T, double>)
            sig = detail::sig_push(sig, (quad ? 4 : 0) | (x > T(0) ? 2 : (x < T(0) ? 1 : 0)));
    }
    return make_op<T>(a.shape(), std::move(v), {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < n.grad.size(); ++i) {
            const T x = p->val[i];
            const T dx = x > T(1) ? T(1) : (x < T(-1) ? T(-1) : x);
            p->grad[i] += n.grad[i] * dx;
        }
    }, sig);
}

// --- reductions ---

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    T acc = T(0);
    for (T x : a.val()) acc += x;
    return make_op<T>(scalar_shape(), {acc}, {a}, [](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += n.grad[0];
    });
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
    T acc = T(0);
    for (T x : a.val()) acc += x;
    const T inv = T(1) / static_cast<T>(a.numel());
    return make_op<T>(scalar_shape(), {acc * inv}, {a}, [inv](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += n.grad[0] * inv;
    });
}

template <typename T>
Tensor<T> min_all(const Tensor<T>& a) {
    size_t arg = 0;
    for (size_t i = 1; i < a.val().size(); ++i)
        if (a.val()[i] < a.val()[arg]) arg = i;
    return make_op<T>(scalar_shape(), {a.val()[arg]}, {a}, [arg](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        p->grad[arg] += n.grad[0];
    }, detail::sig_push(0x317, arg));
}

template <typename T>
Tensor<T> max_all(const Tensor<T>& a) {
    size_t arg = 0;
    for (size_t i = 1; i < a.val().size(); ++i)
        if (a.val()[i] > a.val()[arg]) arg = i;
    return make_op<T>(scalar_shape(), {a.val()[arg]}, {a}, [arg](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        p->grad[arg] += n.grad[0];
    }, detail::sig_push(0x3a8, arg));
}

// --- shape ops ---

template <typename T>
Tensor<T> upsample_nearest_2x(const Tensor<T>& a) {
    const Shape s = a.shape();
    const Shape os{s.n, s.c, s.h * 2, s.w * 2};
    std::vector<T> v(static_cast<size_t>(os.numel()));
    const auto& x = a.val();
    for (int n = 0; n < s.n; ++n)
        for (int c = 0; c < s.c; ++c) {
            const size_t ibase = (static_cast<size_t>(n) * s.c + c) * s.h * s.w;
            const size_t obase = (static_cast<size_t>(n) * s.c + c) * os.h * os.w;
            for (int y = 0; y < os.h; ++y) {
                const size_t irow = ibase + static_cast<size_t>(y / 2) * s.w;
                const size_t orow = obase + static_cast<size_t>(y) * os.w;
                for (int xx = 0; xx < os.w; ++xx) v[orow + xx] = x[irow + xx / 2];
            }
        }
    return make_op<T>(os, std::move(v), {a}, [s, os](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (int b = 0; b < s.n; ++b)
            for (int c = 0; c < s.c; ++c) {
                const size_t ibase = (static_cast<size_t>(b) * s.c + c) * s.h * s.w;
                const size_t obase = (static_cast<size_t>(b) * s.c + c) * os.h * os.w;
                for (int y = 0; y < os.h; ++y) {
                    const size_t irow = ibase + static_cast<size_t>(y / 2) * s.w;
                    const size_t orow = obase + static_cast<size_t>(y) * os.w;
                    for (int xx = 0; xx < os.w; ++xx) p->grad[irow + xx / 2] += n.grad[orow + xx];
                }
            }
    });
}

template <typename T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: empty input");
    const Shape s0 = parts[0].shape();
    int ctotal = 0;
    for (const auto& p : parts) {
        const Shape s = p.shape();
        if (s.n != s0.n || s.h != s0.h || s.w != s0.w)
            throw std::invalid_argument("concat_channels: spatial/batch shape mismatch");
        ctotal += s.c;
    }
    const Shape os{s0.n, ctotal, s0.h, s0.w};
    std::vector<T> v(static_cast<size_t>(os.numel()));
    const size_t plane = static_cast<size_t>(s0.h) * s0.w;
    for (int n = 0; n < s0.n; ++n) {
        size_t oc = 0;
        for (const auto& p : parts) {
            const int pc = p.shape().c;
            const T* src = p.val().data() + static_cast<size_t>(n) * pc * plane;
            T* dst = v.data() + (static_cast<size_t>(n) * ctotal + oc) * plane;
            std::copy(src, src + static_cast<size_t>(pc) * plane, dst);
            oc += static_cast<size_t>(pc);
        }
    }
    std::vector<int> channels;
    for (const auto& p : parts) channels.push_back(p.shape().c);
    return make_op<T>(os, std::move(v), parts, [s0, ctotal, channels, plane](Node<T>& n) {
        for (int b = 0; b < s0.n; ++b) {
            size_t oc = 0;
            for (size_t pi = 0; pi < n.parents.size(); ++pi) {
                auto& p = n.parents[pi];
                const size_t pc = static_cast<size_t>(channels[pi]);
                if (p->requires_grad) {
                    p->ensure_grad();
                    const T* g = n.grad.data() + (static_cast<size_t>(b) * ctotal + oc) * plane;
                    T* dst = p->grad.data() + static_cast<size_t>(b) * pc * plane;
                    for (size_t i = 0; i < pc * plane; ++i) dst[i] += g[i];
                }
                oc += pc;
            }
        }
    });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    return concat_channels<T>({a, b});
}

// Channels [c0, c1) as a new tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& a, int c0, int c1) {
    const Shape s = a.shape();
    if (c0 < 0 || c1 > s.c || c0 >= c1) throw std::invalid_argument("slice_channels: bad range");
    const Shape os{s.n, c1 - c0, s.h, s.w};
    const size_t plane = static_cast<size_t>(s.h) * s.w;
    std::vector<T> v(static_cast<size_t>(os.numel()));
    for (int n = 0; n < s.n; ++n) {
        const T* src = a.val().data() + (static_cast<size_t>(n) * s.c + c0) * plane;
        T* dst = v.data() + static_cast<size_t>(n) * (c1 - c0) * plane;
        std::copy(src, src + static_cast<size_t>(c1 - c0) * plane, dst);
    }
    return make_op<T>(os, std::move(v), {a}, [s, c0, c1, plane](Node<T>& n) {
        auto& p = n.parents[0];
        p->ensure_grad();
        for (int b = 0; b < s.n; ++b) {
            const T* g = n.grad.data() + static_cast<size_t>(b) * (c1 - c0) * plane;
            T* dst = p->grad.data() + (static_cast<size_t>(b) * s.c + c0) * plane;
            for (size_t i = 0; i < static_cast<size_t>(c1 - c0) * plane; ++i) dst[i] += g[i];
        }
    });
}

}  // namespace ad

// Reverse-mode sweep from a scalar loss. Visits each reachable node exactly
// once in reverse topological order; gradients accumulate into every tensor
// on a requires-grad path. Graph construction and backward are
// single-threaded; only the kernels inside ops parallelize.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1) throw std::invalid_argument("backward: loss must be a scalar");
    Node<T>* root = loss.node().get();
    if (!root->requires_grad) return;

    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    struct Frame {
        Node<T>* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node<T>* p = f.node->parents[f.next_parent++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* n = *it;
        n->ensure_grad();
        if (n->backprop) n->backprop(*n);
    }
}

// Combined kink fingerprint of the graph below `loss`; used by grad_check to
// detect finite-difference probes that cross a non-smooth branch.
template <typename T>
std::uint64_t kink_signature(const Tensor<T>& loss) {
    std::uint64_t h = 0;
    std::unordered_set<const Node<T>*> visited;
    std::vector<const Node<T>*> stack{loss.node().get()};
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        const Node<T>* n = stack.back();
        stack.pop_back();
        h = ad::detail::sig_push(h, n->kink_sig);
        for (const auto& p : n->parents)
            if (visited.insert(p.get()).second) stack.push_back(p.get());
    }
    return h;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::int64_t checked = 0;
    std::int64_t skipped_kinks = 0;
};

// Central-difference verification of reverse-mode gradients, run on a
// double-precision replica of the graph. For each probed coordinate the
// builder is re-evaluated at x +/- eps; probes whose two evaluations disagree
// on any branch decision (relu/abs/argmin/...) are skipped, not scored.
// Relative error denominator is max(|analytic|, |numeric|, 1e-8).
// max_coords < 0 checks every coordinate; otherwise that many per input,
// deterministically sampled.
inline GradCheckResult grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& builder,
    std::vector<Tensor<double>> inputs, double eps = 1e-4, std::int64_t max_coords = -1,
    std::uint64_t sample_seed = 0) {
    Tensor<double> loss = builder(inputs);
    if (loss.numel() != 1) throw std::invalid_argument("grad_check: builder must return a scalar");
    for (auto& t : inputs) t.zero_grad();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto& t : inputs) {
        t.node()->ensure_grad();
        analytic.push_back(t.node()->grad);
    }

    GradCheckResult res;
    for (size_t ti = 0; ti < inputs.size(); ++ti) {
        auto& t = inputs[ti];
        const std::int64_t n = t.numel();
        std::vector<std::int64_t> coords;
        if (max_coords < 0 || max_coords >= n) {
            coords.resize(static_cast<size_t>(n));
            for (std::int64_t i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
        } else {
            coords.reserve(static_cast<size_t>(max_coords));
            for (std::int64_t k = 0; k < max_coords; ++k)
                coords.push_back(static_cast<std::int64_t>(
                    rng::hash(sample_seed, ti, static_cast<std::uint64_t>(k)) %
                    static_cast<std::uint64_t>(n)));
        }
        for (std::int64_t ci : coords) {
            const size_t i = static_cast<size_t>(ci);
            const double orig = t.val()[i];
            t.val()[i] = orig + eps;
            Tensor<double> lp = builder(inputs);
            const double fp = lp.item();
            const std::uint64_t sig_p = kink_signature(lp);
            t.val()[i] = orig - eps;
            Tensor<double> lm = builder(inputs);
            const double fm = lm.item();
            const std::uint64_t sig_m = kink_signature(lm);
            t.val()[i] = orig;
            if (sig_p != sig_m) {
                ++res.skipped_kinks;
                continue;
            }
            const double numeric = (fp - fm) / (2.0 * eps);
            const double a = analytic[ti][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            res.max_rel_err = std::max(res.max_rel_err, std::abs(a - numeric) / denom);
            ++res.checked;
        }
    }
    return res;
}

}  // namespace tofusion
