#include "oclb/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oclb/errors.hpp"

namespace oclb {

namespace {

template <typename T>
void require_finite(std::span<const T> v, const char* what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) {
            throw DataError(std::string(what) + ": non-finite value at index " + std::to_string(i));
        }
    }
}

}  // namespace

FeatureMap::FeatureMap(std::size_t h, std::size_t w, std::size_t d)
    : FeatureMap(h, w, d, std::vector<float>(h * w * d, 0.0f)) {}

FeatureMap::FeatureMap(std::size_t h, std::size_t w, std::size_t d, std::vector<float> data)
    : h_(h), w_(w), d_(d), data_(std::move(data)) {
    if (h == 0 || w == 0 || d == 0) {
        throw ContractError("FeatureMap: every dimension must be >= 1");
    }
    if (data_.size() != h * w * d) {
        throw ContractError("FeatureMap: data length " + std::to_string(data_.size()) +
                            " != h*w*d = " + std::to_string(h * w * d));
    }
    require_finite<float>(data_, "FeatureMap");
}

Vector::Vector(std::vector<float> data) : data_(std::move(data)) {
    require_finite<float>(data_, "Vector");
}

Vector::Vector(std::span<const double> data) : data_(data.begin(), data.end()) {
    require_finite<float>(data_, "Vector");
}

std::vector<double> Vector::to_double() const {
    return {data_.begin(), data_.end()};
}

SymMatrix::SymMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

SymMatrix::SymMatrix(std::size_t n, std::vector<double> data) : n_(n), data_(std::move(data)) {
    if (data_.size() != n * n) {
        throw ContractError("SymMatrix: data length != n*n");
    }
    require_finite<double>(data_, "SymMatrix");
}

SymMatrix SymMatrix::identity(std::size_t n) {
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
    SymMatrix m(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) {
        m(i, i) = diag[i];
    }
    return m;
}

bool SymMatrix::is_symmetric(double tol) const {
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            const double a = (*this)(i, j);
            if (std::abs(a - (*this)(j, i)) > tol * std::max(1.0, std::abs(a))) {
                return false;
            }
        }
    }
    return true;
}

std::vector<double> SymMatrix::multiply(std::span<const double> x) const {
    if (x.size() != n_) {
        throw ContractError("SymMatrix::multiply: dim mismatch");
    }
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        y[i] = dot(std::span<const double>(data_).subspan(i * n_, n_), x);
    }
    return y;
}

Cholesky::Cholesky(const SymMatrix& a) : n_(a.dim()), l_(a.dim() * a.dim(), 0.0) {
    for (std::size_t j = 0; j < n_; ++j) {
        double diag = a(j, j);
        const double* lj = &l_[j * n_];
        for (std::size_t k = 0; k < j; ++k) {
            diag -= lj[k] * lj[k];
        }
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            throw NumericError("Cholesky: matrix is not positive definite", j);
        }
        const double ljj = std::sqrt(diag);
        l_[j * n_ + j] = ljj;
        for (std::size_t i = j + 1; i < n_; ++i) {
            const double* li = &l_[i * n_];
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) {
                s -= li[k] * lj[k];
            }
            l_[i * n_ + j] = s / ljj;
        }
    }
}

std::vector<double> Cholesky::solve(std::span<const double> b) const {
    if (b.size() != n_) {
        throw ContractError("Cholesky::solve: dim mismatch");
    }
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n_; ++i) {
        const double* li = &l_[i * n_];
        double s = y[i];
        for (std::size_t k = 0; k < i; ++k) {
            s -= li[k] * y[k];
        }
        y[i] = s / li[i];
    }
    for (std::size_t ii = n_; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n_; ++k) {
            s -= l_[k * n_ + ii] * y[k];
        }
        y[ii] = s / l_[ii * n_ + ii];
    }
    return y;
}

double Cholesky::log_det() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        s += std::log(l_[i * n_ + i]);
    }
    return 2.0 * s;
}

SymMatrix Cholesky::inverse() const {
    SymMatrix inv(n_);
    std::vector<double> e(n_, 0.0);
    for (std::size_t j = 0; j < n_; ++j) {
        e[j] = 1.0;
        const auto col = solve(e);
        e[j] = 0.0;
        for (std::size_t i = 0; i < n_; ++i) {
            inv(i, j) = col[i];
        }
    }
    // Round-off leaves the solved columns slightly asymmetric.
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = i + 1; j < n_; ++j) {
            const double avg = 0.5 * (inv(i, j) + inv(j, i));
            inv(i, j) = avg;
            inv(j, i) = avg;
        }
    }
    return inv;
}

SymMatrix shrink(const SymMatrix& sigma, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
        throw ContractError("shrink: epsilon must be positive");
    }
    if (!sigma.is_symmetric()) {
        throw ContractError("shrink: covariance is not symmetric");
    }
    const std::size_t n = sigma.dim();
    SymMatrix out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out(i, j) = (1.0 - eps) * sigma(i, j) + (i == j ? eps : 0.0);
        }
    }
    return out;
}

SymMatrix shrunk_inverse(const SymMatrix& sigma, double eps) {
    return Cholesky(shrink(sigma, eps)).inverse();
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

}  // namespace oclb
