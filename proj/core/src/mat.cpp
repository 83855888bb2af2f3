#include "stylebank/mat.hpp"

#include <cmath>
#include <stdexcept>

namespace stylebank {

Mat matmul(const Mat& a, const Mat& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: inner dimensions differ");
    Mat c(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (int k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (int j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Mat matmul_nt(const Mat& a, const Mat& b) {
    if (a.cols != b.cols) throw std::invalid_argument("matmul_nt: inner dimensions differ");
    Mat c(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double s = 0.0;
            for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

void add_inplace(Mat& a, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("add_inplace: shape mismatch");
    for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

void axpy_inplace(Mat& a, double s, const Mat& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("axpy_inplace: shape mismatch");
    for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += s * b.v[i];
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const std::vector<double>& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    const double na = l2_norm(a);
    const double nb = l2_norm(b);
    if (na < 1e-12 || nb < 1e-12) throw std::invalid_argument("cosine_distance: zero-norm input");
    return 1.0 - dot(a, b) / (na * nb);
}

void l2_normalize(std::vector<double>& a, double min_norm) {
    const double n = l2_norm(a);
    if (n < min_norm) throw std::runtime_error("l2_normalize: norm below threshold (degenerate vector)");
    for (double& x : a) x /= n;
}

void fill_normal(Mat& m, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& x : m.v) x = dist(rng);
}

void fill_uniform(Mat& m, std::mt19937_64& rng, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    for (double& x : m.v) x = dist(rng);
}

void fill_const(Mat& m, double value) {
    for (double& x : m.v) x = value;
}

bool all_finite(const Mat& m) {
    for (double x : m.v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace stylebank
