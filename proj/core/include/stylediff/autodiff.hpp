#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "stylediff/tensor.hpp"

namespace stylediff {

struct Param;
struct Node;
using Var = std::shared_ptr<Node>;

// One value in the computation graph. Ops allocate a fresh Node per result;
// backward() walks the graph in reverse topological order and accumulates
// gradients into node.grad (and, for parameter leaves, into Param::grad).
struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    std::vector<Var> parents;
    std::function<void(Node&)> backprop;
    Param* param = nullptr;
    bool requires_grad = false;

    Tensor& ensure_grad();
};

// Trainable tensor with persistent gradient and Adam state. Owned by a
// ParamStore; graphs reference it through param_var().
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m, adam_v;
    bool trainable = true;

    void zero_grad();
    double grad_norm() const;
};

// Gradient recording is on by default; NoGradGuard turns it off for the
// current scope (inference paths). Value arithmetic is identical either way.
bool grad_enabled();
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool saved_;
};

Var constant(Tensor value);
Var make_leaf(Tensor value);      // differentiable non-parameter leaf (images, latents)
Var param_var(Param& p);          // frozen params become constants

// Runs reverse-mode accumulation from a scalar root.
void backward(const Var& root);

// ---- elementwise / scalar ----
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var divide(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var sqrt_v(const Var& a);
Var exp_v(const Var& a);
Var silu(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// ---- reductions / vector ops ----
Var sum(const Var& a);
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);
Var l1_mean(const Var& a, const Var& b);   // mean |a - b|
Var mse_mean(const Var& a, const Var& b);  // mean (a - b)^2
Var scale_by(const Var& a, const Var& s);  // s: 1-element tensor, broadcast
Var slice1d(const Var& a, int offset, int length);
Var flat_slice(const Var& a, int64_t offset, int length);  // any rank, flat indexing
Var stack_scalars(const std::vector<Var>& xs);
Var pick(const Var& v, int index);
Var log_softmax(const Var& v);

// ---- NN building blocks (shapes: vectors [N], feature maps [C,H,W]) ----
Var linear(const Var& x, const Var& w, const Var& b);              // w: [out,in], b: [out]
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);  // w: [oc,ic,k,k]
Var group_norm(const Var& x, int groups, const Var& gamma, const Var& beta, double eps = 1e-5);
Var film(const Var& x, const Var& scale_c, const Var& shift_c);    // x*(1+s_c)+b_c per channel
Var add_channel_bias(const Var& x, const Var& b);
Var upsample_nearest2(const Var& x);
Var concat_ch(const Var& a, const Var& b);
Var global_avg_pool(const Var& x);                                 // [C,H,W] -> [C]
Var channel_l2_normalize(const Var& x, double eps = 1e-10);        // per spatial location

// Finite-difference gradient of f at x (central differences); test oracle
// but lives here so every consumer checks against the same stencil.
Tensor finite_difference_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                              double step);

}  // namespace stylediff
