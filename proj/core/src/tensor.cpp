#include "stylediff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "stylediff/errors.hpp"

namespace stylediff {

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw_param("tensor dimensions must be positive");
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty() || shape_.size() > 4) throw_param("tensor rank must be 1..4");
    data_ = std::make_shared<std::vector<double>>(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t;
    t.shape_ = std::move(shape);
    if (t.shape_.empty() || t.shape_.size() > 4) throw_param("tensor rank must be 1..4");
    if (shape_numel(t.shape_) != static_cast<int64_t>(values.size()))
        throw_param("tensor data size does not match shape");
    t.data_ = std::make_shared<std::vector<double>>(std::move(values));
    return t;
}

Tensor Tensor::clone() const {
    Tensor t;
    t.shape_ = shape_;
    if (data_) t.data_ = std::make_shared<std::vector<double>>(*data_);
    return t;
}

void Tensor::fill(double v) { std::fill(data_->begin(), data_->end(), v); }

bool Tensor::all_finite() const {
    for (double v : *data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::item() const {
    if (size() != 1) throw_contract("item() requires a 1-element tensor");
    return (*data_)[0];
}

bool Tensor::equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    const double* pa = a.data();
    const double* pb = b.data();
    for (int64_t i = 0; i < a.size(); ++i)
        if (pa[i] != pb[i]) return false;
    return true;
}

}  // namespace stylediff
