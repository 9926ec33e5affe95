#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace stylediff {

// Dense double tensor, row-major, rank <= 4. Copies share the buffer; clone()
// makes an independent one. Every op in the library allocates fresh outputs,
// so shared buffers are never mutated behind a reader's back (the optimizer
// updates parameter buffers between graph builds, which is the one sanctioned
// in-place writer).
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double v);
    static Tensor from(std::vector<int> shape, std::vector<double> values);
    static Tensor scalar(double v) { return from({1}, {v}); }

    bool defined() const { return data_ != nullptr; }
    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return data_ ? static_cast<int64_t>(data_->size()) : 0; }

    double* data() { return data_->data(); }
    const double* data() const { return data_->data(); }

    double& operator[](int64_t i) { return (*data_)[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return (*data_)[static_cast<size_t>(i)]; }

    // Convenience indexers; hot loops use raw data().
    double& at(int a) { return (*data_)[static_cast<size_t>(a)]; }
    double& at(int a, int b) { return (*data_)[static_cast<size_t>(a) * shape_[1] + b]; }
    double& at(int a, int b, int c) {
        return (*data_)[(static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }
    double at(int a) const { return (*data_)[static_cast<size_t>(a)]; }
    double at(int a, int b) const { return (*data_)[static_cast<size_t>(a) * shape_[1] + b]; }
    double at(int a, int b, int c) const {
        return (*data_)[(static_cast<size_t>(a) * shape_[1] + b) * shape_[2] + c];
    }

    Tensor clone() const;
    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;
    double item() const;  // element 0 of a 1-element tensor

    // Exact element-wise equality (bit-level for normal values).
    static bool equal(const Tensor& a, const Tensor& b);

private:
    std::vector<int> shape_;
    std::shared_ptr<std::vector<double>> data_;
};

int64_t shape_numel(const std::vector<int>& shape);

}  // namespace stylediff
