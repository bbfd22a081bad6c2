#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace oclb {

/// h x w x d activation tensor, row-major with the channel index innermost.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(std::size_t h, std::size_t w, std::size_t d);
    /// Throws ContractError on a length/shape mismatch, DataError on non-finite values.
    FeatureMap(std::size_t h, std::size_t w, std::size_t d, std::vector<float> data);

    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t channels() const noexcept { return d_; }
    std::size_t positions() const noexcept { return h_ * w_; }
    std::size_t size() const noexcept { return data_.size(); }

    float& at(std::size_t y, std::size_t x, std::size_t c) { return data_[(y * w_ + x) * d_ + c]; }
    float at(std::size_t y, std::size_t x, std::size_t c) const { return data_[(y * w_ + x) * d_ + c]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

private:
    std::size_t h_ = 0;
    std::size_t w_ = 0;
    std::size_t d_ = 0;
    std::vector<float> data_;
};

/// Dense 32-bit vector, the storage and wire type for embeddings.
class Vector {
public:
    Vector() = default;
    explicit Vector(std::vector<float> data);
    explicit Vector(std::span<const double> data);

    std::size_t dim() const noexcept { return data_.size(); }
    float operator[](std::size_t i) const { return data_[i]; }
    std::span<const float> data() const noexcept { return data_; }

    std::vector<double> to_double() const;

    friend bool operator==(const Vector&, const Vector&) = default;

private:
    std::vector<float> data_;
};

/// Dense square matrix in 64-bit precision intended to be symmetric.
///
/// Symmetry is not enforced on construction so operations that need it can
/// report a ContractError on bad input; `is_symmetric` applies the
/// |a_ij - a_ji| <= tol * max(1, |a_ij|) test.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t n);
    SymMatrix(std::size_t n, std::vector<double> data);

    static SymMatrix identity(std::size_t n);
    static SymMatrix diagonal(std::span<const double> diag);

    std::size_t dim() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }
    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    bool is_symmetric(double tol = 1e-6) const;

    /// y = A x
    std::vector<double> multiply(std::span<const double> x) const;

    friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular Cholesky factor A = L L^T of a symmetric positive-definite matrix.
class Cholesky {
public:
    /// Throws NumericError carrying the first non-positive pivot index.
    explicit Cholesky(const SymMatrix& a);

    std::size_t dim() const noexcept { return n_; }
    std::vector<double> solve(std::span<const double> b) const;
    double log_det() const;
    SymMatrix inverse() const;

private:
    std::size_t n_;
    std::vector<double> l_;
};

/// (1 - eps) * sigma + eps * I
SymMatrix shrink(const SymMatrix& sigma, double eps);

/// [(1 - eps) * sigma + eps * I]^{-1}, computed through a Cholesky factorization.
SymMatrix shrunk_inverse(const SymMatrix& sigma, double eps);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace oclb
