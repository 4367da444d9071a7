#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cbsa/rng.hpp"

namespace cbsa {

// Dense row-major tensor of 64-bit floats. Most of the pipeline works with
// 2-D matrices; shape is kept general so prompt blocks and scalars fit the
// same type. Invariant: data.size() == product(shape), all entries finite
// after any op on finite inputs within documented domains.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(int rows, int cols);

    static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
    static Tensor full(int rows, int cols, double v);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> v);                  // 1 x n
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);
    static Tensor identity(int n);
    static Tensor gaussian(int rows, int cols, double sigma, Rng& rng);

    const std::vector<int>& shape() const { return shape_; }
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // 2-D accessors; rows()/cols() also accept 1-D ([n] reads as 1 x n).
    int rows() const;
    int cols() const;
    bool is_scalar() const { return data_.size() == 1; }
    double scalar_value() const;

    double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols() + c]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool all_finite() const;
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

// Plain (non-recorded) tensor math. The gradient tape wraps these for its
// forward pass; data generation, file I/O and metrics use them directly.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_rowvec(const Tensor& a, const Tensor& v);  // v is 1 x cols(a)
Tensor affine(const Tensor& a, double scale, double shift);
Tensor negate(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh_t(const Tensor& a);
Tensor log_t(const Tensor& a);          // requires every entry > 0
Tensor pow_t(const Tensor& a, double exponent);  // requires every entry >= 0
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor softmax_rows(const Tensor& a, double temperature);
Tensor l2_normalize_rows(const Tensor& a);  // row norms must exceed 1e-12
Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps = 1e-6);
Tensor concat_rows(const Tensor& a, const Tensor& b);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
Tensor slice_rows(const Tensor& a, int r0, int r1);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor row_sums(const Tensor& a);       // m x n -> m x 1
Tensor sum_t(const Tensor& a);          // -> 1 x 1
Tensor mean_t(const Tensor& a);         // -> 1 x 1
Tensor pick_per_row(const Tensor& a, const std::vector<int>& idx);  // m x 1

double dot(const Tensor& a, const Tensor& b);
double row_norm(const Tensor& a, int r);

void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace cbsa
