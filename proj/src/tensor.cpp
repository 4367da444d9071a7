#include "cbsa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cbsa/error.hpp"

namespace cbsa {

namespace {

std::size_t product(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int s : shape) {
        if (s <= 0) throw ShapeError("tensor dimensions must be positive");
        n *= static_cast<std::size_t>(s);
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(product(shape_), 0.0);
}

Tensor::Tensor(int rows, int cols) : Tensor(std::vector<int>{rows, cols}) {}

Tensor Tensor::full(int rows, int cols, double v) {
    Tensor t(rows, cols);
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
}

Tensor Tensor::scalar(double v) {
    Tensor t(1, 1);
    t.data_[0] = v;
    return t;
}

Tensor Tensor::row(std::vector<double> v) {
    Tensor t(1, static_cast<int>(v.size()));
    t.data_ = std::move(v);
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ShapeError("from_rows: no rows");
    Tensor t(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw ShapeError("from_rows: ragged rows");
        std::copy(rows[r].begin(), rows[r].end(),
                  t.data_.begin() + static_cast<std::ptrdiff_t>(r * rows[0].size()));
    }
    return t;
}

Tensor Tensor::identity(int n) {
    Tensor t(n, n);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

Tensor Tensor::gaussian(int rows, int cols, double sigma, Rng& rng) {
    Tensor t(rows, cols);
    for (auto& v : t.data_) v = rng.normal(0.0, sigma);
    return t;
}

int Tensor::rows() const {
    if (shape_.size() == 2) return shape_[0];
    if (shape_.size() == 1) return 1;
    throw ShapeError("rows(): tensor is not 2-D: " + shape_str());
}

int Tensor::cols() const {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() == 1) return shape_[0];
    throw ShapeError("cols(): tensor is not 2-D: " + shape_str());
}

double Tensor::scalar_value() const {
    if (data_.size() != 1) throw ContractError("scalar_value(): tensor has " +
                                               std::to_string(data_.size()) + " elements");
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << "x";
        os << shape_[i];
    }
    os << "]";
    return os.str();
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const int m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2)
        throw ShapeError("matmul: inner dimensions disagree " + a.shape_str() +
                         " x " + b.shape_str());
    Tensor c(m, n);
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    // i-k-j order keeps the b walk contiguous.
    for (int i = 0; i < m; ++i) {
        const double* arow = pa + static_cast<std::size_t>(i) * k;
        double* crow = pc + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor t(n, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += b[i];
    return c;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] -= b[i];
    return c;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= b[i];
    return c;
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    if (v.rows() != 1 || v.cols() != a.cols())
        throw ShapeError("add_rowvec: " + a.shape_str() + " + " + v.shape_str());
    Tensor c = a;
    const int m = a.rows(), n = a.cols();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) c.at(i, j) += v[j];
    return c;
}

Tensor affine(const Tensor& a, double scale, double shift) {
    Tensor c = a;
    for (auto& v : c.raw()) v = scale * v + shift;
    return c;
}

Tensor negate(const Tensor& a) { return affine(a, -1.0, 0.0); }

Tensor sigmoid(const Tensor& a) {
    Tensor c = a;
    for (auto& v : c.raw()) {
        // Split by sign to avoid overflow in exp.
        if (v >= 0.0) {
            v = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            v = e / (1.0 + e);
        }
    }
    return c;
}

Tensor tanh_t(const Tensor& a) {
    Tensor c = a;
    for (auto& v : c.raw()) v = std::tanh(v);
    return c;
}

Tensor log_t(const Tensor& a) {
    Tensor c = a;
    for (auto& v : c.raw()) {
        if (v <= 0.0)
            throw DomainError("log: non-positive operand " + std::to_string(v));
        v = std::log(v);
    }
    return c;
}

Tensor pow_t(const Tensor& a, double exponent) {
    Tensor c = a;
    for (auto& v : c.raw()) {
        if (v < 0.0)
            throw DomainError("pow: negative base " + std::to_string(v));
        v = std::pow(v, exponent);
    }
    return c;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor c = a;
    for (auto& v : c.raw()) v = std::min(hi, std::max(lo, v));
    return c;
}

Tensor softmax_rows(const Tensor& a, double temperature) {
    if (temperature <= 0.0)
        throw DomainError("softmax_rows: temperature must be positive");
    const int m = a.rows(), n = a.cols();
    Tensor c(m, n);
    for (int i = 0; i < m; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, a.at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp((a.at(i, j) - mx) / temperature);
            c.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) c.at(i, j) /= z;
    }
    return c;
}

double row_norm(const Tensor& a, int r) {
    double s = 0.0;
    for (int j = 0; j < a.cols(); ++j) s += a.at(r, j) * a.at(r, j);
    return std::sqrt(s);
}

Tensor l2_normalize_rows(const Tensor& a) {
    const int m = a.rows(), n = a.cols();
    Tensor c = a;
    for (int i = 0; i < m; ++i) {
        const double norm = row_norm(a, i);
        if (norm <= 1e-12)
            throw DomainError("l2_normalize_rows: degenerate row " + std::to_string(i) +
                              " with norm " + std::to_string(norm));
        for (int j = 0; j < n; ++j) c.at(i, j) /= norm;
    }
    return c;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias,
                       double eps) {
    const int m = x.rows(), n = x.cols();
    if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
        throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(n));
    Tensor c(m, n);
    for (int i = 0; i < m; ++i) {
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += x.at(i, j);
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = x.at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < n; ++j)
            c.at(i, j) = (x.at(i, j) - mean) * inv * gain[j] + bias[j];
    }
    return c;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.cols())
        throw ShapeError("concat_rows: column counts differ " + a.shape_str() +
                         " vs " + b.shape_str());
    Tensor c(a.rows() + b.rows(), a.cols());
    std::copy(a.raw().begin(), a.raw().end(), c.raw().begin());
    std::copy(b.raw().begin(), b.raw().end(),
              c.raw().begin() + static_cast<std::ptrdiff_t>(a.size()));
    return c;
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
    if (idx.empty()) throw ShapeError("gather_rows: empty index list");
    const int n = a.cols();
    Tensor c(static_cast<int>(idx.size()), n);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= a.rows())
            throw ShapeError("gather_rows: row index " + std::to_string(idx[r]) +
                             " out of range for " + a.shape_str());
        for (int j = 0; j < n; ++j) c.at(static_cast<int>(r), j) = a.at(idx[r], j);
    }
    return c;
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
    if (r0 < 0 || r1 > a.rows() || r0 >= r1)
        throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + "," +
                         std::to_string(r1) + ") for " + a.shape_str());
    Tensor c(r1 - r0, a.cols());
    std::copy(a.raw().begin() + static_cast<std::ptrdiff_t>(r0) * a.cols(),
              a.raw().begin() + static_cast<std::ptrdiff_t>(r1) * a.cols(),
              c.raw().begin());
    return c;
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
    if (c0 < 0 || c1 > a.cols() || c0 >= c1)
        throw ShapeError("slice_cols: bad range [" + std::to_string(c0) + "," +
                         std::to_string(c1) + ") for " + a.shape_str());
    Tensor c(a.rows(), c1 - c0);
    for (int i = 0; i < a.rows(); ++i)
        for (int j = c0; j < c1; ++j) c.at(i, j - c0) = a.at(i, j);
    return c;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows())
        throw ShapeError("concat_cols: row counts differ " + a.shape_str() + " vs " +
                         b.shape_str());
    Tensor c(a.rows(), a.cols() + b.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) c.at(i, j) = a.at(i, j);
        for (int j = 0; j < b.cols(); ++j) c.at(i, a.cols() + j) = b.at(i, j);
    }
    return c;
}

Tensor row_sums(const Tensor& a) {
    Tensor c(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a.at(i, j);
        c.at(i, 0) = s;
    }
    return c;
}

Tensor sum_t(const Tensor& a) {
    double s = 0.0;
    for (double v : a.raw()) s += v;
    return Tensor::scalar(s);
}

Tensor mean_t(const Tensor& a) {
    return Tensor::scalar(sum_t(a).scalar_value() / static_cast<double>(a.size()));
}

Tensor pick_per_row(const Tensor& a, const std::vector<int>& idx) {
    if (static_cast<int>(idx.size()) != a.rows())
        throw ShapeError("pick_per_row: need one index per row");
    Tensor c(a.rows(), 1);
    for (int i = 0; i < a.rows(); ++i) {
        if (idx[i] < 0 || idx[i] >= a.cols())
            throw ShapeError("pick_per_row: column index out of range");
        c.at(i, 0) = a.at(i, idx[i]);
    }
    return c;
}

double dot(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "dot");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace cbsa
