#include "stylediff/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "stylediff/errors.hpp"

namespace stylediff {

namespace {
thread_local bool g_grad_enabled = true;

bool track(const Var& a) { return g_grad_enabled && a->requires_grad; }

void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (!a->value.same_shape(b->value)) throw_contract(std::string(op) + ": shape mismatch");
}

Var make_node(Tensor value, std::vector<Var> parents, std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    bool rg = false;
    for (const auto& p : parents) rg = rg || p->requires_grad;
    if (g_grad_enabled && rg) {
        n->requires_grad = true;
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
    }
    return n;
}

Tensor& pgrad(Node& self, size_t i) { return self.parents[i]->ensure_grad(); }
bool pneeds(Node& self, size_t i) { return self.parents[i]->requires_grad; }

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }

Tensor& Node::ensure_grad() {
    if (!grad.defined()) grad = Tensor::zeros(value.shape());
    return grad;
}

void Param::zero_grad() {
    if (grad.defined())
        grad.fill(0.0);
    else
        grad = Tensor::zeros(value.shape());
}

double Param::grad_norm() const {
    if (!grad.defined()) return 0.0;
    double s = 0.0;
    const double* g = grad.data();
    for (int64_t i = 0; i < grad.size(); ++i) s += g[i] * g[i];
    return std::sqrt(s);
}

Var constant(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    return n;
}

Var make_leaf(Tensor value) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = g_grad_enabled;
    return n;
}

Var param_var(Param& p) {
    auto n = std::make_shared<Node>();
    n->value = p.value;  // shares the buffer
    if (g_grad_enabled && p.trainable) {
        n->requires_grad = true;
        n->param = &p;
    }
    return n;
}

void backward(const Var& root) {
    if (root->value.size() != 1) throw_contract("backward: root must be a scalar");
    if (!root->requires_grad) throw_contract("backward: root does not require grad");

    // Iterative post-order DFS for topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad().fill(1.0);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->grad.defined()) continue;
        if (n->backprop) n->backprop(*n);
        if (n->param) {
            // accumulate into the persistent parameter gradient
            if (!n->param->grad.defined()) n->param->grad = Tensor::zeros(n->value.shape());
            double* dst = n->param->grad.data();
            const double* src = n->grad.data();
            for (int64_t i = 0; i < n->grad.size(); ++i) dst[i] += src[i];
        }
    }
}

// ---------------------------------------------------------------- elementwise

Var add(const Var& a, const Var& b) {
    check_same_shape(a, b, "add");
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const double* g = self.grad.data();
        for (size_t k = 0; k < 2; ++k) {
            if (!pneeds(self, k)) continue;
            double* d = pgrad(self, k).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i];
        }
    });
}

Var sub(const Var& a, const Var& b) {
    check_same_shape(a, b, "sub");
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const double* g = self.grad.data();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i];
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] -= g[i];
        }
    });
}

Var mul(const Var& a, const Var& b) {
    check_same_shape(a, b, "mul");
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] * pb[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const double* g = self.grad.data();
        const double* va = self.parents[0]->value.data();
        const double* vb = self.parents[1]->value.data();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * vb[i];
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * va[i];
        }
    });
}

Var divide(const Var& a, const Var& b) {
    check_same_shape(a, b, "divide");
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] / pb[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const double* g = self.grad.data();
        const double* va = self.parents[0]->value.data();
        const double* vb = self.parents[1]->value.data();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] / vb[i];
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] -= g[i] * va[i] / (vb[i] * vb[i]);
        }
    });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] * s;
    return make_node(std::move(out), {a}, [s](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        double* d = pgrad(self, 0).data();
        for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * s;
    });
}

Var add_scalar(const Var& a, double s) {
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] + s;
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        double* d = pgrad(self, 0).data();
        for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i];
    });
}

Var sqrt_v(const Var& a) {
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = std::sqrt(pa[i]);
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        const double* y = self.value.data();
        double* d = pgrad(self, 0).data();
        for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * 0.5 / y[i];
    });
}

Var exp_v(const Var& a) {
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = std::exp(pa[i]);
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        const double* y = self.value.data();
        double* d = pgrad(self, 0).data();
        for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i] * y[i];
    });
}

Var silu(const Var& a) {
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) {
        double s = 1.0 / (1.0 + std::exp(-pa[i]));
        po[i] = pa[i] * s;
    }
    return make_node(std::move(out), {a}, [](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        const double* x = self.parents[0]->value.data();
        double* d = pgrad(self, 0).data();
        for (int64_t i = 0; i < self.grad.size(); ++i) {
            double s = 1.0 / (1.0 + std::exp(-x[i]));
            d[i] += g[i] * s * (1.0 + x[i] * (1.0 - s));
        }
    });
}

// ---------------------------------------------------------------- reductions

Var sum(const Var& a) {
    double acc = 0.0;
    const double* pa = a->value.data();
    for (int64_t i = 0; i < a->value.size(); ++i) acc += pa[i];
    return make_node(Tensor::scalar(acc), {a}, [](Node& self) {
        if (!pneeds(self, 0)) return;
        double g = self.grad[0];
        double* d = pgrad(self, 0).data();
        for (int64_t i = 0; i < self.parents[0]->value.size(); ++i) d[i] += g;
    });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a->value.size())); }

Var dot(const Var& a, const Var& b) {
    check_same_shape(a, b, "dot");
    double acc = 0.0;
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    for (int64_t i = 0; i < a->value.size(); ++i) acc += pa[i] * pb[i];
    return make_node(Tensor::scalar(acc), {a, b}, [](Node& self) {
        double g = self.grad[0];
        const double* va = self.parents[0]->value.data();
        const double* vb = self.parents[1]->value.data();
        int64_t n = self.parents[0]->value.size();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < n; ++i) d[i] += g * vb[i];
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int64_t i = 0; i < n; ++i) d[i] += g * va[i];
        }
    });
}

Var l1_mean(const Var& a, const Var& b) {
    check_same_shape(a, b, "l1_mean");
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    int64_t n = a->value.size();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) acc += std::abs(pa[i] - pb[i]);
    acc /= static_cast<double>(n);
    return make_node(Tensor::scalar(acc), {a, b}, [](Node& self) {
        double g = self.grad[0];
        const double* va = self.parents[0]->value.data();
        const double* vb = self.parents[1]->value.data();
        int64_t n = self.parents[0]->value.size();
        double inv = 1.0 / static_cast<double>(n);
        for (size_t k = 0; k < 2; ++k) {
            if (!pneeds(self, k)) continue;
            double sgn = (k == 0) ? 1.0 : -1.0;
            double* d = pgrad(self, k).data();
            for (int64_t i = 0; i < n; ++i) {
                double diff = va[i] - vb[i];
                double s = (diff > 0.0) ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                d[i] += g * sgn * s * inv;
            }
        }
    });
}

Var mse_mean(const Var& a, const Var& b) {
    check_same_shape(a, b, "mse_mean");
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    int64_t n = a->value.size();
    double acc = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        double d = pa[i] - pb[i];
        acc += d * d;
    }
    acc /= static_cast<double>(n);
    return make_node(Tensor::scalar(acc), {a, b}, [](Node& self) {
        double g = self.grad[0];
        const double* va = self.parents[0]->value.data();
        const double* vb = self.parents[1]->value.data();
        int64_t n = self.parents[0]->value.size();
        double c = 2.0 / static_cast<double>(n);
        for (size_t k = 0; k < 2; ++k) {
            if (!pneeds(self, k)) continue;
            double sgn = (k == 0) ? 1.0 : -1.0;
            double* d = pgrad(self, k).data();
            for (int64_t i = 0; i < n; ++i) d[i] += g * sgn * c * (va[i] - vb[i]);
        }
    });
}

Var scale_by(const Var& a, const Var& s) {
    if (s->value.size() != 1) throw_contract("scale_by: scale must be a scalar");
    double sv = s->value[0];
    Tensor out(a->value.shape());
    const double* pa = a->value.data();
    double* po = out.data();
    for (int64_t i = 0; i < out.size(); ++i) po[i] = pa[i] * sv;
    return make_node(std::move(out), {a, s}, [](Node& self) {
        const double* g = self.grad.data();
        const double* va = self.parents[0]->value.data();
        double sv = self.parents[1]->value[0];
        int64_t n = self.parents[0]->value.size();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < n; ++i) d[i] += g[i] * sv;
        }
        if (pneeds(self, 1)) {
            double acc = 0.0;
            for (int64_t i = 0; i < n; ++i) acc += g[i] * va[i];
            pgrad(self, 1).data()[0] += acc;
        }
    });
}

Var slice1d(const Var& a, int offset, int length) {
    if (a->value.ndim() != 1) throw_contract("slice1d: rank-1 input required");
    if (offset < 0 || length <= 0 || offset + length > a->value.dim(0))
        throw_param("slice1d: range out of bounds");
    Tensor out({length});
    const double* pa = a->value.data();
    double* po = out.data();
    for (int i = 0; i < length; ++i) po[i] = pa[offset + i];
    return make_node(std::move(out), {a}, [offset, length](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        double* d = pgrad(self, 0).data();
        for (int i = 0; i < length; ++i) d[offset + i] += g[i];
    });
}

Var flat_slice(const Var& a, int64_t offset, int length) {
    if (offset < 0 || length <= 0 || offset + length > a->value.size())
        throw_param("flat_slice: range out of bounds");
    Tensor out({length});
    const double* pa = a->value.data();
    double* po = out.data();
    for (int i = 0; i < length; ++i) po[i] = pa[offset + i];
    return make_node(std::move(out), {a}, [offset, length](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        double* d = pgrad(self, 0).data();
        for (int i = 0; i < length; ++i) d[offset + i] += g[i];
    });
}

Var stack_scalars(const std::vector<Var>& xs) {
    if (xs.empty()) throw_param("stack_scalars: empty input");
    Tensor out({static_cast<int>(xs.size())});
    double* po = out.data();
    std::vector<Var> parents;
    parents.reserve(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        if (xs[i]->value.size() != 1) throw_contract("stack_scalars: inputs must be scalars");
        po[i] = xs[i]->value[0];
        parents.push_back(xs[i]);
    }
    return make_node(std::move(out), std::move(parents), [](Node& self) {
        const double* g = self.grad.data();
        for (size_t i = 0; i < self.parents.size(); ++i) {
            if (!pneeds(self, i)) continue;
            pgrad(self, i).data()[0] += g[i];
        }
    });
}

Var pick(const Var& v, int index) {
    if (v->value.ndim() != 1) throw_contract("pick: rank-1 input required");
    if (index < 0 || index >= v->value.dim(0)) throw_param("pick: index out of range");
    return make_node(Tensor::scalar(v->value[index]), {v}, [index](Node& self) {
        if (!pneeds(self, 0)) return;
        pgrad(self, 0).data()[index] += self.grad[0];
    });
}

Var log_softmax(const Var& v) {
    if (v->value.ndim() != 1) throw_contract("log_softmax: rank-1 input required");
    int n = v->value.dim(0);
    const double* pv = v->value.data();
    double mx = pv[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, pv[i]);
    double se = 0.0;
    for (int i = 0; i < n; ++i) se += std::exp(pv[i] - mx);
    double lse = mx + std::log(se);
    Tensor out({n});
    double* po = out.data();
    for (int i = 0; i < n; ++i) po[i] = pv[i] - lse;
    return make_node(std::move(out), {v}, [n](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        const double* y = self.value.data();
        double gs = 0.0;
        for (int i = 0; i < n; ++i) gs += g[i];
        double* d = pgrad(self, 0).data();
        for (int i = 0; i < n; ++i) d[i] += g[i] - std::exp(y[i]) * gs;
    });
}

// ---------------------------------------------------------------- NN blocks

Var linear(const Var& x, const Var& w, const Var& b) {
    if (x->value.ndim() != 1 || w->value.ndim() != 2) throw_contract("linear: bad ranks");
    int in = x->value.dim(0);
    int out_dim = w->value.dim(0);
    if (w->value.dim(1) != in || b->value.dim(0) != out_dim) throw_contract("linear: shape mismatch");
    Tensor out({out_dim});
    const double* px = x->value.data();
    const double* pw = w->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    for (int o = 0; o < out_dim; ++o) {
        double acc = pb[o];
        const double* row = pw + static_cast<int64_t>(o) * in;
        for (int i = 0; i < in; ++i) acc += row[i] * px[i];
        po[o] = acc;
    }
    return make_node(std::move(out), {x, w, b}, [in, out_dim](Node& self) {
        const double* g = self.grad.data();
        const double* px = self.parents[0]->value.data();
        const double* pw = self.parents[1]->value.data();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int o = 0; o < out_dim; ++o) {
                const double* row = pw + static_cast<int64_t>(o) * in;
                double go = g[o];
                for (int i = 0; i < in; ++i) d[i] += go * row[i];
            }
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int o = 0; o < out_dim; ++o) {
                double go = g[o];
                double* row = d + static_cast<int64_t>(o) * in;
                for (int i = 0; i < in; ++i) row[i] += go * px[i];
            }
        }
        if (pneeds(self, 2)) {
            double* d = pgrad(self, 2).data();
            for (int o = 0; o < out_dim; ++o) d[o] += g[o];
        }
    });
}

namespace {

// Zero-padded copy so the conv kernels run without bounds checks.
Tensor pad_chw(const Tensor& x, int pad) {
    int c = x.dim(0), h = x.dim(1), w = x.dim(2);
    Tensor out({c, h + 2 * pad, w + 2 * pad});
    const double* px = x.data();
    double* po = out.data();
    int hw = h * w;
    int pw_ = w + 2 * pad;
    int phw = (h + 2 * pad) * pw_;
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y) {
            const double* src = px + ci * hw + y * w;
            double* dst = po + ci * phw + (y + pad) * pw_ + pad;
            std::copy(src, src + w, dst);
        }
    return out;
}

void unpad_accum_chw(const Tensor& padded, int pad, Tensor& dst) {
    int c = dst.dim(0), h = dst.dim(1), w = dst.dim(2);
    const double* pp = padded.data();
    double* pd = dst.data();
    int hw = h * w;
    int pw_ = w + 2 * pad;
    int phw = (h + 2 * pad) * pw_;
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < h; ++y) {
            const double* src = pp + ci * phw + (y + pad) * pw_ + pad;
            double* d = pd + ci * hw + y * w;
            for (int x = 0; x < w; ++x) d[x] += src[x];
        }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
    if (x->value.ndim() != 3 || w->value.ndim() != 4) throw_contract("conv2d: bad ranks");
    int ic = x->value.dim(0), h = x->value.dim(1), wd = x->value.dim(2);
    int oc = w->value.dim(0), k = w->value.dim(2);
    if (w->value.dim(1) != ic || w->value.dim(3) != k) throw_contract("conv2d: weight shape mismatch");
    if (b->value.dim(0) != oc) throw_contract("conv2d: bias shape mismatch");
    int oh = (h + 2 * pad - k) / stride + 1;
    int ow = (wd + 2 * pad - k) / stride + 1;

    Tensor xpad = (pad > 0) ? pad_chw(x->value, pad) : x->value;
    int ph = h + 2 * pad, pw_ = wd + 2 * pad;

    Tensor out({oc, oh, ow});
    {
        const double* pb = b->value.data();
        double* po = out.data();
        for (int o = 0; o < oc; ++o) {
            double bias = pb[o];
            double* plane = po + static_cast<int64_t>(o) * oh * ow;
            for (int i = 0; i < oh * ow; ++i) plane[i] = bias;
        }
        const double* pxp = xpad.data();
        const double* pwv = w->value.data();
        for (int o = 0; o < oc; ++o) {
            double* oplane = po + static_cast<int64_t>(o) * oh * ow;
            for (int i = 0; i < ic; ++i) {
                const double* iplane = pxp + static_cast<int64_t>(i) * ph * pw_;
                const double* wbase = pwv + ((static_cast<int64_t>(o) * ic + i) * k) * k;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        double wv = wbase[ky * k + kx];
                        for (int oy = 0; oy < oh; ++oy) {
                            const double* xr = iplane + (oy * stride + ky) * pw_ + kx;
                            double* orow = oplane + oy * ow;
                            if (stride == 1) {
                                for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * xr[ox];
                            } else {
                                for (int ox = 0; ox < ow; ++ox) orow[ox] += wv * xr[ox * stride];
                            }
                        }
                    }
            }
        }
    }

    auto bp = [ic, oc, h, wd, k, stride, pad, oh, ow, ph, pw_, xpad](Node& self) {
        const double* g = self.grad.data();
        const double* pwv = self.parents[1]->value.data();
        if (pneeds(self, 0)) {
            Tensor dxpad({ic, ph, pw_});
            double* pdx = dxpad.data();
            for (int o = 0; o < oc; ++o) {
                const double* gplane = g + static_cast<int64_t>(o) * oh * ow;
                for (int i = 0; i < ic; ++i) {
                    double* iplane = pdx + static_cast<int64_t>(i) * ph * pw_;
                    const double* wbase = pwv + ((static_cast<int64_t>(o) * ic + i) * k) * k;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            double wv = wbase[ky * k + kx];
                            for (int oy = 0; oy < oh; ++oy) {
                                double* xr = iplane + (oy * stride + ky) * pw_ + kx;
                                const double* grow = gplane + oy * ow;
                                if (stride == 1) {
                                    for (int ox = 0; ox < ow; ++ox) xr[ox] += wv * grow[ox];
                                } else {
                                    for (int ox = 0; ox < ow; ++ox) xr[ox * stride] += wv * grow[ox];
                                }
                            }
                        }
                }
            }
            Tensor& dx = pgrad(self, 0);
            if (pad > 0) {
                unpad_accum_chw(dxpad, pad, dx);
            } else {
                double* pd = dx.data();
                for (int64_t i = 0; i < dx.size(); ++i) pd[i] += pdx[i];
            }
        }
        if (pneeds(self, 1)) {
            double* dw = pgrad(self, 1).data();
            const double* pxp = xpad.data();
            for (int o = 0; o < oc; ++o) {
                const double* gplane = g + static_cast<int64_t>(o) * oh * ow;
                for (int i = 0; i < ic; ++i) {
                    const double* iplane = pxp + static_cast<int64_t>(i) * ph * pw_;
                    double* wbase = dw + ((static_cast<int64_t>(o) * ic + i) * k) * k;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            double acc = 0.0;
                            for (int oy = 0; oy < oh; ++oy) {
                                const double* xr = iplane + (oy * stride + ky) * pw_ + kx;
                                const double* grow = gplane + oy * ow;
                                if (stride == 1) {
                                    for (int ox = 0; ox < ow; ++ox) acc += xr[ox] * grow[ox];
                                } else {
                                    for (int ox = 0; ox < ow; ++ox) acc += xr[ox * stride] * grow[ox];
                                }
                            }
                            wbase[ky * k + kx] += acc;
                        }
                }
            }
        }
        if (pneeds(self, 2)) {
            double* db = pgrad(self, 2).data();
            for (int o = 0; o < oc; ++o) {
                const double* gplane = g + static_cast<int64_t>(o) * oh * ow;
                double acc = 0.0;
                for (int i = 0; i < oh * ow; ++i) acc += gplane[i];
                db[o] += acc;
            }
        }
    };
    return make_node(std::move(out), {x, w, b}, std::move(bp));
}

Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps) {
    if (x->value.ndim() != 3) throw_contract("group_norm: rank-3 input required");
    int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    if (c % groups != 0) throw_contract("group_norm: channels not divisible by groups");
    if (gamma->value.dim(0) != c || beta->value.dim(0) != c) throw_contract("group_norm: affine shape");
    int cg = c / groups;
    int hw = h * w;
    int64_t m = static_cast<int64_t>(cg) * hw;

    Tensor out({c, h, w});
    Tensor xhat({c, h, w});
    std::vector<double> inv_std(static_cast<size_t>(groups));
    const double* px = x->value.data();
    const double* pgm = gamma->value.data();
    const double* pbt = beta->value.data();
    double* po = out.data();
    double* ph_ = xhat.data();
    for (int g = 0; g < groups; ++g) {
        const double* base = px + static_cast<int64_t>(g) * cg * hw;
        double mu = 0.0;
        for (int64_t i = 0; i < m; ++i) mu += base[i];
        mu /= static_cast<double>(m);
        double var = 0.0;
        for (int64_t i = 0; i < m; ++i) {
            double d = base[i] - mu;
            var += d * d;
        }
        var /= static_cast<double>(m);
        double inv = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(g)] = inv;
        for (int cc = 0; cc < cg; ++cc) {
            int ch = g * cg + cc;
            const double* xrow = px + static_cast<int64_t>(ch) * hw;
            double* hrow = ph_ + static_cast<int64_t>(ch) * hw;
            double* orow = po + static_cast<int64_t>(ch) * hw;
            double gm = pgm[ch], bt = pbt[ch];
            for (int i = 0; i < hw; ++i) {
                double xh = (xrow[i] - mu) * inv;
                hrow[i] = xh;
                orow[i] = gm * xh + bt;
            }
        }
    }

    auto bp = [groups, cg, hw, m, xhat, inv_std](Node& self) {
        const double* g = self.grad.data();
        const double* ph_ = xhat.data();
        const double* pgm = self.parents[1]->value.data();
        int c = cg * groups;
        if (pneeds(self, 1)) {
            double* dg = pgrad(self, 1).data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + static_cast<int64_t>(ch) * hw;
                const double* hrow = ph_ + static_cast<int64_t>(ch) * hw;
                double acc = 0.0;
                for (int i = 0; i < hw; ++i) acc += grow[i] * hrow[i];
                dg[ch] += acc;
            }
        }
        if (pneeds(self, 2)) {
            double* db = pgrad(self, 2).data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + static_cast<int64_t>(ch) * hw;
                double acc = 0.0;
                for (int i = 0; i < hw; ++i) acc += grow[i];
                db[ch] += acc;
            }
        }
        if (pneeds(self, 0)) {
            double* dx = pgrad(self, 0).data();
            for (int grp = 0; grp < groups; ++grp) {
                double sum_dh = 0.0, sum_dh_h = 0.0;
                for (int cc = 0; cc < cg; ++cc) {
                    int ch = grp * cg + cc;
                    const double* grow = g + static_cast<int64_t>(ch) * hw;
                    const double* hrow = ph_ + static_cast<int64_t>(ch) * hw;
                    double gm = pgm[ch];
                    for (int i = 0; i < hw; ++i) {
                        double dh = grow[i] * gm;
                        sum_dh += dh;
                        sum_dh_h += dh * hrow[i];
                    }
                }
                double inv = inv_std[static_cast<size_t>(grp)];
                double mean_dh = sum_dh / static_cast<double>(m);
                double mean_dh_h = sum_dh_h / static_cast<double>(m);
                for (int cc = 0; cc < cg; ++cc) {
                    int ch = grp * cg + cc;
                    const double* grow = g + static_cast<int64_t>(ch) * hw;
                    const double* hrow = ph_ + static_cast<int64_t>(ch) * hw;
                    double* drow = dx + static_cast<int64_t>(ch) * hw;
                    double gm = pgm[ch];
                    for (int i = 0; i < hw; ++i) {
                        double dh = grow[i] * gm;
                        drow[i] += inv * (dh - mean_dh - hrow[i] * mean_dh_h);
                    }
                }
            }
        }
    };
    return make_node(std::move(out), {x, gamma, beta}, std::move(bp));
}

Var film(const Var& x, const Var& scale_c, const Var& shift_c) {
    if (x->value.ndim() != 3) throw_contract("film: rank-3 input required");
    int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    if (scale_c->value.dim(0) != c || shift_c->value.dim(0) != c) throw_contract("film: shape mismatch");
    int hw = h * w;
    Tensor out({c, h, w});
    const double* px = x->value.data();
    const double* ps = scale_c->value.data();
    const double* pb = shift_c->value.data();
    double* po = out.data();
    for (int ch = 0; ch < c; ++ch) {
        double s = 1.0 + ps[ch], b = pb[ch];
        const double* xr = px + static_cast<int64_t>(ch) * hw;
        double* orow = po + static_cast<int64_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) orow[i] = xr[i] * s + b;
    }
    return make_node(std::move(out), {x, scale_c, shift_c}, [c, hw](Node& self) {
        const double* g = self.grad.data();
        const double* px = self.parents[0]->value.data();
        const double* ps = self.parents[1]->value.data();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int ch = 0; ch < c; ++ch) {
                double s = 1.0 + ps[ch];
                const double* grow = g + static_cast<int64_t>(ch) * hw;
                double* drow = d + static_cast<int64_t>(ch) * hw;
                for (int i = 0; i < hw; ++i) drow[i] += grow[i] * s;
            }
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + static_cast<int64_t>(ch) * hw;
                const double* xr = px + static_cast<int64_t>(ch) * hw;
                double acc = 0.0;
                for (int i = 0; i < hw; ++i) acc += grow[i] * xr[i];
                d[ch] += acc;
            }
        }
        if (pneeds(self, 2)) {
            double* d = pgrad(self, 2).data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + static_cast<int64_t>(ch) * hw;
                double acc = 0.0;
                for (int i = 0; i < hw; ++i) acc += grow[i];
                d[ch] += acc;
            }
        }
    });
}

Var add_channel_bias(const Var& x, const Var& b) {
    if (x->value.ndim() != 3 || b->value.dim(0) != x->value.dim(0))
        throw_contract("add_channel_bias: shape mismatch");
    int c = x->value.dim(0);
    int hw = x->value.dim(1) * x->value.dim(2);
    Tensor out(x->value.shape());
    const double* px = x->value.data();
    const double* pb = b->value.data();
    double* po = out.data();
    for (int ch = 0; ch < c; ++ch) {
        double bv = pb[ch];
        const double* xr = px + static_cast<int64_t>(ch) * hw;
        double* orow = po + static_cast<int64_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) orow[i] = xr[i] + bv;
    }
    return make_node(std::move(out), {x, b}, [c, hw](Node& self) {
        const double* g = self.grad.data();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < self.grad.size(); ++i) d[i] += g[i];
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int ch = 0; ch < c; ++ch) {
                const double* grow = g + static_cast<int64_t>(ch) * hw;
                double acc = 0.0;
                for (int i = 0; i < hw; ++i) acc += grow[i];
                d[ch] += acc;
            }
        }
    });
}

Var upsample_nearest2(const Var& x) {
    if (x->value.ndim() != 3) throw_contract("upsample_nearest2: rank-3 input required");
    int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    Tensor out({c, h * 2, w * 2});
    const double* px = x->value.data();
    double* po = out.data();
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            const double* xr = px + (static_cast<int64_t>(ch) * h + y) * w;
            double* r0 = po + (static_cast<int64_t>(ch) * 2 * h + 2 * y) * 2 * w;
            double* r1 = r0 + 2 * w;
            for (int xx = 0; xx < w; ++xx) {
                double v = xr[xx];
                r0[2 * xx] = v;
                r0[2 * xx + 1] = v;
                r1[2 * xx] = v;
                r1[2 * xx + 1] = v;
            }
        }
    return make_node(std::move(out), {x}, [c, h, w](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        double* d = pgrad(self, 0).data();
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y) {
                double* drow = d + (static_cast<int64_t>(ch) * h + y) * w;
                const double* g0 = g + (static_cast<int64_t>(ch) * 2 * h + 2 * y) * 2 * w;
                const double* g1 = g0 + 2 * w;
                for (int xx = 0; xx < w; ++xx)
                    drow[xx] += g0[2 * xx] + g0[2 * xx + 1] + g1[2 * xx] + g1[2 * xx + 1];
            }
    });
}

Var concat_ch(const Var& a, const Var& b) {
    if (a->value.ndim() != 3 || b->value.ndim() != 3) throw_contract("concat_ch: rank-3 inputs");
    if (a->value.dim(1) != b->value.dim(1) || a->value.dim(2) != b->value.dim(2))
        throw_contract("concat_ch: spatial mismatch");
    int ca = a->value.dim(0), cb = b->value.dim(0);
    int h = a->value.dim(1), w = a->value.dim(2);
    Tensor out({ca + cb, h, w});
    double* po = out.data();
    std::copy(a->value.data(), a->value.data() + a->value.size(), po);
    std::copy(b->value.data(), b->value.data() + b->value.size(), po + a->value.size());
    return make_node(std::move(out), {a, b}, [](Node& self) {
        const double* g = self.grad.data();
        int64_t na = self.parents[0]->value.size();
        int64_t nb = self.parents[1]->value.size();
        if (pneeds(self, 0)) {
            double* d = pgrad(self, 0).data();
            for (int64_t i = 0; i < na; ++i) d[i] += g[i];
        }
        if (pneeds(self, 1)) {
            double* d = pgrad(self, 1).data();
            for (int64_t i = 0; i < nb; ++i) d[i] += g[na + i];
        }
    });
}

Var global_avg_pool(const Var& x) {
    if (x->value.ndim() != 3) throw_contract("global_avg_pool: rank-3 input required");
    int c = x->value.dim(0);
    int hw = x->value.dim(1) * x->value.dim(2);
    Tensor out({c});
    const double* px = x->value.data();
    double* po = out.data();
    for (int ch = 0; ch < c; ++ch) {
        const double* xr = px + static_cast<int64_t>(ch) * hw;
        double acc = 0.0;
        for (int i = 0; i < hw; ++i) acc += xr[i];
        po[ch] = acc / static_cast<double>(hw);
    }
    return make_node(std::move(out), {x}, [c, hw](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        double* d = pgrad(self, 0).data();
        double inv = 1.0 / static_cast<double>(hw);
        for (int ch = 0; ch < c; ++ch) {
            double gv = g[ch] * inv;
            double* drow = d + static_cast<int64_t>(ch) * hw;
            for (int i = 0; i < hw; ++i) drow[i] += gv;
        }
    });
}

Var channel_l2_normalize(const Var& x, double eps) {
    if (x->value.ndim() != 3) throw_contract("channel_l2_normalize: rank-3 input required");
    int c = x->value.dim(0), h = x->value.dim(1), w = x->value.dim(2);
    int hw = h * w;
    Tensor out({c, h, w});
    Tensor inv_n({h, w});
    const double* px = x->value.data();
    double* po = out.data();
    double* pn = inv_n.data();
    for (int i = 0; i < hw; ++i) {
        double s = eps;
        for (int ch = 0; ch < c; ++ch) {
            double v = px[static_cast<int64_t>(ch) * hw + i];
            s += v * v;
        }
        pn[i] = 1.0 / std::sqrt(s);
    }
    for (int ch = 0; ch < c; ++ch) {
        const double* xr = px + static_cast<int64_t>(ch) * hw;
        double* orow = po + static_cast<int64_t>(ch) * hw;
        for (int i = 0; i < hw; ++i) orow[i] = xr[i] * pn[i];
    }
    return make_node(std::move(out), {x}, [c, hw, inv_n](Node& self) {
        if (!pneeds(self, 0)) return;
        const double* g = self.grad.data();
        const double* px = self.parents[0]->value.data();
        const double* pn = inv_n.data();
        double* d = pgrad(self, 0).data();
        for (int i = 0; i < hw; ++i) {
            double gx = 0.0;
            for (int ch = 0; ch < c; ++ch)
                gx += g[static_cast<int64_t>(ch) * hw + i] * px[static_cast<int64_t>(ch) * hw + i];
            double n1 = pn[i];
            double n3 = n1 * n1 * n1;
            for (int ch = 0; ch < c; ++ch) {
                int64_t idx = static_cast<int64_t>(ch) * hw + i;
                d[idx] += g[idx] * n1 - px[idx] * gx * n3;
            }
        }
    });
}

Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double step) {
    Tensor g = Tensor::zeros(x.shape());
    Tensor probe = x.clone();
    double* pp = probe.data();
    double* pg = g.data();
    for (int64_t i = 0; i < x.size(); ++i) {
        double saved = pp[i];
        pp[i] = saved + step;
        double fp = f(probe);
        pp[i] = saved - step;
        double fm = f(probe);
        pp[i] = saved;
        pg[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

}  // namespace stylediff
