#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "stylebank/autodiff.hpp"

using namespace stylebank;

namespace {

Mat random_mat(std::mt19937_64& rng, int r, int c, double scale = 1.0) {
    Mat m(r, c);
    fill_normal(m, rng, scale);
    return m;
}

// Central finite differences of a scalar-valued graph function of one leaf.
double max_rel_error(const Mat& x0, const std::function<Graph::Id(Graph&, Graph::Id)>& build) {
    Graph g;
    const Graph::Id x = g.leaf(x0, true);
    const Graph::Id y = build(g, x);
    g.backward(y);
    const Mat analytic = g.grad(x);

    const double h = 1e-6;
    double worst = 0.0;
    for (size_t i = 0; i < x0.v.size(); ++i) {
        Mat xp = x0;
        xp.v[i] += h;
        Graph gp;
        const double fp = gp.scalar(build(gp, gp.leaf(xp, false)));
        Mat xm = x0;
        xm.v[i] -= h;
        Graph gm;
        const double fm = gm.scalar(build(gm, gm.leaf(xm, false)));
        const double fd = (fp - fm) / (2 * h);
        const double denom = std::max({std::fabs(fd), std::fabs(analytic.v[i]), 1e-8});
        worst = std::max(worst, std::fabs(fd - analytic.v[i]) / denom);
    }
    return worst;
}

// Reduce an arbitrary matrix node to a scalar with fixed random weights so
// every element influences the loss.
Graph::Id weighted_sum(Graph& g, Graph::Id m, uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Mat& mv = g.value(m);
    Mat u(1, mv.rows);
    fill_normal(u, rng, 1.0);
    Mat v(mv.cols, 1);
    fill_normal(v, rng, 1.0);
    const Graph::Id left = g.matmul(g.leaf(std::move(u), false), m);
    return g.matmul(left, g.leaf(std::move(v), false));
}

}  // namespace

TEST_CASE("autodiff matches finite differences per op") {
    std::mt19937_64 rng(123);

    SUBCASE("matmul lhs and rhs") {
        const Mat a = random_mat(rng, 3, 4);
        const Mat b = random_mat(rng, 4, 5);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.matmul(x, g.leaf(b, false)), 1);
              }) < 1e-6);
        CHECK(max_rel_error(b, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.matmul(g.leaf(a, false), x), 2);
              }) < 1e-6);
    }

    SUBCASE("matmul_nt both sides") {
        const Mat a = random_mat(rng, 3, 4);
        const Mat b = random_mat(rng, 5, 4);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.matmul_nt(x, g.leaf(b, false)), 3);
              }) < 1e-6);
        CHECK(max_rel_error(b, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.matmul_nt(g.leaf(a, false), x), 4);
              }) < 1e-6);
    }

    SUBCASE("add sub scale add_rowvec") {
        const Mat a = random_mat(rng, 4, 3);
        const Mat b = random_mat(rng, 4, 3);
        const Mat row = random_mat(rng, 1, 3);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  Graph::Id y = g.add(x, g.leaf(b, false));
                  y = g.sub(y, g.scale(x, 0.7));
                  y = g.add_rowvec(y, g.leaf(row, false));
                  return weighted_sum(g, y, 5);
              }) < 1e-6);
        CHECK(max_rel_error(row, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.add_rowvec(g.leaf(a, false), x), 6);
              }) < 1e-6);
    }

    SUBCASE("slice and concat") {
        const Mat a = random_mat(rng, 3, 6);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  Graph::Id left = g.slice_cols(x, 0, 2);
                  Graph::Id right = g.slice_cols(x, 2, 6);
                  Graph::Id joined = g.concat_cols({right, left});
                  Graph::Id stacked = g.concat_rows({joined, joined});
                  return weighted_sum(g, stacked, 7);
              }) < 1e-6);
    }

    SUBCASE("replace_rows routes gradient around overwritten rows") {
        const Mat a = random_mat(rng, 5, 3);
        const Mat b = random_mat(rng, 2, 3);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.replace_rows(x, 1, g.leaf(b, false)), 8);
              }) < 1e-6);
        CHECK(max_rel_error(b, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.replace_rows(g.leaf(a, false), 1, x), 9);
              }) < 1e-6);
        // Overwritten rows of a contribute nothing.
        Graph g;
        const Graph::Id x = g.leaf(a, true);
        const Graph::Id y = weighted_sum(g, g.replace_rows(x, 1, g.leaf(b, false)), 10);
        g.backward(y);
        for (int c = 0; c < 3; ++c) {
            CHECK(g.grad(x)(1, c) == 0.0);
            CHECK(g.grad(x)(2, c) == 0.0);
        }
    }

    SUBCASE("row and gather_rows") {
        const Mat a = random_mat(rng, 6, 4);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.row(x, 3), 11);
              }) < 1e-6);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.gather_rows(x, {0, 2, 2, 5}), 12);
              }) < 1e-6);
    }

    SUBCASE("gelu relu") {
        const Mat a = random_mat(rng, 4, 4);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.gelu(x), 13);
              }) < 1e-5);
        Mat shifted = a;
        for (double& x : shifted.v) x += (x > 0 ? 0.5 : -0.5);  // keep clear of the kink
        CHECK(max_rel_error(shifted, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.relu(x), 14);
              }) < 1e-6);
    }

    SUBCASE("layer_norm input gain bias") {
        const Mat a = random_mat(rng, 3, 8);
        const Mat gain = random_mat(rng, 1, 8);
        const Mat bias = random_mat(rng, 1, 8);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.layer_norm(x, g.leaf(gain, false), g.leaf(bias, false)), 15);
              }) < 1e-5);
        CHECK(max_rel_error(gain, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.layer_norm(g.leaf(a, false), x, g.leaf(bias, false)), 16);
              }) < 1e-5);
        CHECK(max_rel_error(bias, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.layer_norm(g.leaf(a, false), g.leaf(gain, false), x), 17);
              }) < 1e-6);
    }

    SUBCASE("masked softmax") {
        const Mat a = random_mat(rng, 3, 6);
        const std::vector<uint8_t> mask = {1, 1, 0, 1, 0, 1};
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return weighted_sum(g, g.softmax_rows_masked(x, mask), 18);
              }) < 1e-5);
        Graph g;
        const Graph::Id p = g.softmax_rows_masked(g.leaf(a, false), mask);
        for (int r = 0; r < 3; ++r) {
            double sum = 0.0;
            for (int c = 0; c < 6; ++c) sum += g.value(p)(r, c);
            CHECK(sum == doctest::Approx(1.0));
            CHECK(g.value(p)(r, 2) == 0.0);
            CHECK(g.value(p)(r, 4) == 0.0);
        }
    }

    SUBCASE("l2_normalize_row and dot_rows") {
        const Mat a = random_mat(rng, 1, 7);
        const Mat b = random_mat(rng, 1, 7);
        CHECK(max_rel_error(a, [&](Graph& g, Graph::Id x) {
                  return g.dot_rows(g.l2_normalize_row(x), g.leaf(b, false));
              }) < 1e-5);
        CHECK(max_rel_error(b, [&](Graph& g, Graph::Id x) {
                  return g.dot_rows(g.l2_normalize_row(g.leaf(a, false)), x);
              }) < 1e-6);
    }

    SUBCASE("scalar ops") {
        const Mat a = random_mat(rng, 1, 1);
        Mat pos = a;
        pos.v[0] = std::fabs(pos.v[0]) + 0.5;
        const Mat b = random_mat(rng, 1, 1);
        CHECK(max_rel_error(pos, [&](Graph& g, Graph::Id x) {
                  Graph::Id r = g.sqrt_scalar(x);
                  r = g.div_scalars(g.leaf(b, false), r);
                  r = g.mul_scalars(r, g.add_const(x, 2.0));
                  return g.mean_scalars({r, g.scale(r, 0.25)});
              }) < 1e-5);
    }
}

TEST_CASE("backward is single-shot and shape checked") {
    Graph g;
    Mat a(2, 2);
    a(0, 0) = 1.0;
    const Graph::Id x = g.leaf(a, true);
    CHECK_THROWS(g.backward(x));  // not 1x1
    const Graph::Id s = g.dot_rows(g.row(x, 0), g.row(x, 1));
    g.backward(s);
    CHECK_THROWS(g.backward(s));  // already consumed
}
