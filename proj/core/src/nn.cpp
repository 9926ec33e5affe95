#include "stylediff/nn.hpp"

#include <cmath>

#include "stylediff/errors.hpp"

namespace stylediff {

Param* ParamStore::add(const std::string& name, Tensor init) {
    if (index_.count(name)) throw_contract("duplicate parameter name: " + name);
    auto p = std::make_unique<Param>();
    p->name = name;
    p->value = std::move(init);
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back().get();
}

Param* ParamStore::find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
}

void ParamStore::zero_grad() {
    for (auto& p : params_) p->zero_grad();
}

void ParamStore::set_trainable(bool trainable) {
    for (auto& p : params_) p->trainable = trainable;
}

double ParamStore::grad_norm() const {
    double s = 0.0;
    for (const auto& p : params_) {
        double n = p->grad_norm();
        s += n * n;
    }
    return std::sqrt(s);
}

int64_t ParamStore::param_count() const {
    int64_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
}

void ParamStore::randomize(Rng& rng, double sigma) {
    for (auto& p : params_) {
        double* d = p->value.data();
        for (int64_t i = 0; i < p->value.size(); ++i) d[i] = sigma * rng.normal();
    }
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
    std::map<std::string, Tensor> out;
    for (const auto& p : params_) out[p->name] = p->value.clone();
    return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& tensors) {
    for (auto& p : params_) {
        auto it = tensors.find(p->name);
        if (it == tensors.end()) throw_contract("checkpoint missing tensor: " + p->name);
        if (!(it->second.shape() == p->value.shape()))
            throw_contract("checkpoint shape mismatch for tensor: " + p->name);
        p->value = it->second.clone();
    }
}

bool ParamStore::bytes_equal(const std::map<std::string, Tensor>& snap) const {
    for (const auto& p : params_) {
        auto it = snap.find(p->name);
        if (it == snap.end()) return false;
        if (!Tensor::equal(p->value, it->second)) return false;
    }
    return true;
}

namespace {

Tensor gaussian_init(std::vector<int> shape, double sigma, Rng& rng) {
    Tensor t(std::move(shape));
    double* d = t.data();
    for (int64_t i = 0; i < t.size(); ++i) d[i] = sigma * rng.normal();
    return t;
}

}  // namespace

void LinearLayer::init(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
                       bool zero) {
    double sigma = zero ? 0.0 : std::sqrt(1.0 / in);
    w = store.add(name + ".w", zero ? Tensor::zeros({out, in}) : gaussian_init({out, in}, sigma, rng));
    b = store.add(name + ".b", Tensor::zeros({out}));
}

void Conv2dLayer::init(ParamStore& store, const std::string& name, int in_ch, int out_ch, int k,
                       int stride_, int pad_, Rng& rng, bool zero) {
    stride = stride_;
    pad = pad_;
    double sigma = zero ? 0.0 : std::sqrt(1.0 / (in_ch * k * k));
    w = store.add(name + ".w", zero ? Tensor::zeros({out_ch, in_ch, k, k})
                                    : gaussian_init({out_ch, in_ch, k, k}, sigma, rng));
    b = store.add(name + ".b", Tensor::zeros({out_ch}));
}

void GroupNormLayer::init(ParamStore& store, const std::string& name, int channels, int groups_) {
    groups = groups_;
    gamma = store.add(name + ".gamma", Tensor::full({channels}, 1.0));
    beta = store.add(name + ".beta", Tensor::zeros({channels}));
}

Tensor sinusoidal_embedding_table(int t_max, int dim) {
    if (dim % 2 != 0) throw_param("sinusoidal embedding dim must be even");
    int half = dim / 2;
    Tensor table({t_max + 1, dim});
    double* d = table.data();
    for (int t = 0; t <= t_max; ++t) {
        for (int i = 0; i < half; ++i) {
            double freq = std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
            double a = static_cast<double>(t) * freq;
            d[static_cast<int64_t>(t) * dim + i] = std::sin(a);
            d[static_cast<int64_t>(t) * dim + half + i] = std::cos(a);
        }
    }
    return table;
}

AdamOptimizer::AdamOptimizer(double lr_, double beta1, double beta2, double eps)
    : lr(lr_), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamOptimizer::step(ParamStore& store) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (const auto& p : store.all()) {
        if (!p->trainable || !p->grad.defined()) continue;
        if (!p->adam_m.defined()) {
            p->adam_m = Tensor::zeros(p->value.shape());
            p->adam_v = Tensor::zeros(p->value.shape());
        }
        double* v = p->value.data();
        double* g = p->grad.data();
        double* m = p->adam_m.data();
        double* s = p->adam_v.data();
        for (int64_t i = 0; i < p->value.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            s[i] = beta2_ * s[i] + (1.0 - beta2_) * g[i] * g[i];
            double mhat = m[i] / bc1;
            double shat = s[i] / bc2;
            v[i] -= lr * mhat / (std::sqrt(shat) + eps_);
        }
    }
}

}  // namespace stylediff
