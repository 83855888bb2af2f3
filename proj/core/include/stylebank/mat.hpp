#pragma once

#include <cstddef>
#include <random>
#include <vector>

namespace stylebank {

/// Dense row-major matrix of doubles. All numeric work in the project runs in
/// double precision; float32 appears only in the file formats.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }

    double* row_ptr(int r) { return v.data() + static_cast<size_t>(r) * cols; }
    const double* row_ptr(int r) const { return v.data() + static_cast<size_t>(r) * cols; }

    size_t size() const { return v.size(); }
    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

Mat matmul(const Mat& a, const Mat& b);
// a * transpose(b); a is m x k, b is n x k, result m x n.
Mat matmul_nt(const Mat& a, const Mat& b);

void add_inplace(Mat& a, const Mat& b);
void axpy_inplace(Mat& a, double s, const Mat& b);  // a += s * b

double dot(const std::vector<double>& a, const std::vector<double>& b);
double l2_norm(const std::vector<double>& a);
// 1 - <a,b>/(|a||b|); throws on zero-norm input.
double cosine_distance(const std::vector<double>& a, const std::vector<double>& b);
// Normalizes in place; throws if the norm is below `min_norm`.
void l2_normalize(std::vector<double>& a, double min_norm = 1e-12);

void fill_normal(Mat& m, std::mt19937_64& rng, double stddev);
void fill_uniform(Mat& m, std::mt19937_64& rng, double lo, double hi);
void fill_const(Mat& m, double value);

bool all_finite(const Mat& m);

}  // namespace stylebank
