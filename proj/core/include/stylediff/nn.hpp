#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "stylediff/autodiff.hpp"
#include "stylediff/rng.hpp"

namespace stylediff {

// Owns the named parameters of one network. Pointers stay valid for the
// store's lifetime; registration order is the serialization order.
class ParamStore {
public:
    Param* add(const std::string& name, Tensor init);
    Param* find(const std::string& name);
    const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

    void zero_grad();
    void set_trainable(bool trainable);
    double grad_norm() const;
    int64_t param_count() const;

    // Fills every parameter with N(0, sigma) draws; test helper for "generic"
    // (untrained but non-degenerate) networks.
    void randomize(Rng& rng, double sigma = 0.5);

    std::map<std::string, Tensor> snapshot() const;           // deep copies
    void load(const std::map<std::string, Tensor>& tensors);  // strict by name+shape
    bool bytes_equal(const std::map<std::string, Tensor>& snap) const;

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::map<std::string, size_t> index_;
};

struct LinearLayer {
    Param* w = nullptr;
    Param* b = nullptr;
    void init(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
              bool zero = false);
    Var operator()(const Var& x) const { return linear(x, param_var(*w), param_var(*b)); }
};

struct Conv2dLayer {
    Param* w = nullptr;
    Param* b = nullptr;
    int stride = 1;
    int pad = 1;
    void init(ParamStore& store, const std::string& name, int in_ch, int out_ch, int k, int stride_,
              int pad_, Rng& rng, bool zero = false);
    Var operator()(const Var& x) const {
        return conv2d(x, param_var(*w), param_var(*b), stride, pad);
    }
};

struct GroupNormLayer {
    Param* gamma = nullptr;
    Param* beta = nullptr;
    int groups = 4;
    void init(ParamStore& store, const std::string& name, int channels, int groups_);
    Var operator()(const Var& x) const {
        return group_norm(x, groups, param_var(*gamma), param_var(*beta));
    }
};

// Sinusoidal position embedding table over timesteps 0..T (geometric
// frequency ladder), row t fetched as a constant.
Tensor sinusoidal_embedding_table(int t_max, int dim);

// Adam with bias correction; updates only trainable params.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(ParamStore& store);
    void reset() { t_ = 0; }
    double lr;

private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

}  // namespace stylediff
