#pragma once

// Independent reference implementations used only by tests. Each one takes a
// different arithmetic route from the library code it checks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

/// Gauss-Jordan inverse with partial pivoting.
inline Mat gauss_jordan_inverse(Mat a) {
    const std::size_t n = a.size();
    Mat inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        std::swap(a[col], a[piv]);
        std::swap(inv[col], inv[piv]);
        const double p = a[col][col];
        for (std::size_t j = 0; j < n; ++j) {
            a[col][j] /= p;
            inv[col][j] /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                a[r][j] -= f * a[col][j];
                inv[r][j] -= f * inv[col][j];
            }
        }
    }
    return inv;
}

/// log|det A| by Gaussian elimination with partial pivoting.
inline double log_abs_det(Mat a) {
    const std::size_t n = a.size();
    double acc = 0.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        std::swap(a[col], a[piv]);
        acc += std::log(std::abs(a[col][col]));
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t j = col; j < n; ++j) a[r][j] -= f * a[col][j];
        }
    }
    return acc;
}

inline Mat shrunk(const Mat& s, double eps) {
    Mat out = s;
    for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) out[i][j] = (1.0 - eps) * s[i][j] + (i == j ? eps : 0.0);
    }
    return out;
}

inline std::vector<double> mat_vec(const Mat& a, const std::vector<double>& x) {
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
    }
    return y;
}

/// Two-pass moments of one channel: mean, then sigma, then E[((x - mu) / sigma)^r] via std::pow.
inline std::vector<double> two_pass_moments(const std::vector<double>& x, std::size_t order, double floor) {
    const double n = static_cast<double>(x.size());
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= n;
    std::vector<double> out{mu};
    if (order == 1) return out;
    double var = 0.0;
    for (double v : x) var += std::pow(v - mu, 2.0);
    const double sigma = std::sqrt(var / n);
    out.push_back(sigma);
    for (std::size_t r = 3; r <= order; ++r) {
        if (sigma <= floor) {
            out.push_back(0.0);
            continue;
        }
        double m = 0.0;
        for (double v : x) m += std::pow((v - mu) / sigma, static_cast<double>(r));
        out.push_back(m / n);
    }
    return out;
}

/// W1 as the integral of |F_a - F_b| over the merged support.
inline double w1_cdf(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    std::sort(pts.begin(), pts.end());
    auto cdf = [](const std::vector<double>& s, double x) {
        return static_cast<double>(std::upper_bound(s.begin(), s.end(), x) - s.begin()) /
               static_cast<double>(s.size());
    };
    double area = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        area += std::abs(cdf(a, pts[i]) - cdf(b, pts[i])) * (pts[i + 1] - pts[i]);
    }
    return area;
}

inline std::vector<double> batch_mean(const std::vector<std::vector<double>>& xs) {
    std::vector<double> m(xs.front().size(), 0.0);
    for (const auto& x : xs) {
        for (std::size_t i = 0; i < x.size(); ++i) m[i] += x[i];
    }
    for (auto& v : m) v /= static_cast<double>(xs.size());
    return m;
}

inline std::vector<double> batch_pop_variance(const std::vector<std::vector<double>>& xs) {
    const auto m = batch_mean(xs);
    std::vector<double> v(m.size(), 0.0);
    for (const auto& x : xs) {
        for (std::size_t i = 0; i < x.size(); ++i) v[i] += (x[i] - m[i]) * (x[i] - m[i]);
    }
    for (auto& e : v) e /= static_cast<double>(xs.size());
    return v;
}

/// Shared covariance after replaying a labelled stream, as the closed-form sum
/// Sigma_N = (1/N) sum_k k/(k+1) d_k d_k^T with d_k = z_k - (class mean before sample k).
/// A sample of an unseen class has d_k = 0.
inline Mat replay_covariance(const std::vector<std::vector<double>>& zs, const std::vector<int>& ys) {
    const std::size_t dim = zs.front().size();
    Mat s(dim, std::vector<double>(dim, 0.0));
    std::map<int, std::vector<std::vector<double>>> seen;
    for (std::size_t k = 0; k < zs.size(); ++k) {
        auto& hist = seen[ys[k]];
        if (!hist.empty()) {
            const auto m = batch_mean(hist);
            const double w = static_cast<double>(k) / static_cast<double>(k + 1);
            for (std::size_t i = 0; i < dim; ++i) {
                for (std::size_t j = 0; j < dim; ++j) s[i][j] += w * (zs[k][i] - m[i]) * (zs[k][j] - m[j]);
            }
        }
        hist.push_back(zs[k]);
    }
    for (auto& row : s) {
        for (auto& v : row) v /= static_cast<double>(zs.size());
    }
    return s;
}

/// Index of the nearest point by exhaustive scan; ties to the lowest index.
inline std::size_t nearest(const std::vector<std::vector<double>>& pts, const std::vector<double>& q) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double d = 0.0;
        for (std::size_t j = 0; j < q.size(); ++j) d += (pts[i][j] - q[j]) * (pts[i][j] - q[j]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

/// Gaussian discriminant score -0.5 log det S - 0.5 (z - m)^T S^{-1} (z - m) with a dense inverse.
inline double qda_score(const Mat& s, const std::vector<double>& m, const std::vector<double>& z) {
    const auto inv = gauss_jordan_inverse(s);
    std::vector<double> d(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) d[i] = z[i] - m[i];
    const auto sd = mat_vec(inv, d);
    double q = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) q += d[i] * sd[i];
    return -0.5 * log_abs_det(s) - 0.5 * q;
}

// Metric oracles over a dense K x K table (entries above the diagonal ignored).
// They sum in the same ascending order as the definitions, so equality is exact.

inline double bwt(const Mat& r) {
    const std::size_t K = r.size();
    double s = 0.0;
    for (std::size_t k = 0; k < K - 1; ++k) s += r[K - 1][k] - r[k][k];
    return s / static_cast<double>(K - 1);
}

inline double forgetting(const Mat& r) {
    const std::size_t K = r.size();
    double s = 0.0;
    for (std::size_t k = 0; k < K - 1; ++k) {
        std::vector<double> col;
        for (std::size_t t = k; t < K - 1; ++t) col.push_back(r[t][k]);
        s += *std::max_element(col.begin(), col.end()) - r[K - 1][k];
    }
    return s / static_cast<double>(K - 1);
}

inline double plasticity(const Mat& r) {
    double s = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) s += r[k][k];
    return s / static_cast<double>(r.size());
}

}  // namespace oracle
