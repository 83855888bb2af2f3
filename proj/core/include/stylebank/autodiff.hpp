#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "stylebank/mat.hpp"

namespace stylebank {

/// Reverse-mode autodiff over a flat tape of Mat-valued nodes.
///
/// Usage pattern: build the forward expression once, call backward() on a
/// 1x1 root exactly once, read gradients off the leaves. The tape is cheap
/// to rebuild, so training allocates a fresh Graph per step.
class Graph {
public:
    using Id = int32_t;

    Id leaf(Mat value, bool requires_grad = false);

    // elementwise / linear algebra
    Id add(Id a, Id b);
    Id sub(Id a, Id b);
    Id scale(Id a, double s);
    Id add_rowvec(Id a, Id row);      // row is 1 x C, broadcast over rows of a
    Id matmul(Id a, Id b);
    Id matmul_nt(Id a, Id b);         // a * transpose(b)

    // shape surgery
    Id slice_cols(Id a, int c0, int c1);
    Id concat_cols(const std::vector<Id>& parts);
    Id concat_rows(const std::vector<Id>& parts);
    Id replace_rows(Id a, int r0, Id b);  // overwrite rows [r0, r0+b.rows)
    Id row(Id a, int r);                  // 1 x C copy of one row
    Id gather_rows(Id table, const std::vector<int>& ids);

    // nonlinearities
    Id gelu(Id a);
    Id relu(Id a);
    Id layer_norm(Id a, Id gain, Id bias);  // per-row; gain/bias are 1 x C
    // Row-wise softmax; key_allowed[j] == 0 masks column j out (score -> 0 weight).
    Id softmax_rows_masked(Id a, std::vector<uint8_t> key_allowed);
    Id l2_normalize_row(Id a);  // a is 1 x C

    // scalar (1x1) arithmetic
    Id dot_rows(Id a, Id b);  // <a, b> for 1 x C inputs
    Id add_const(Id a, double c);
    Id mul_scalars(Id a, Id b);
    Id div_scalars(Id a, Id b);
    Id sqrt_scalar(Id a);
    Id mean_scalars(const std::vector<Id>& xs);

    const Mat& value(Id id) const { return nodes_[id].val; }
    const Mat& grad(Id id) const { return nodes_[id].grad; }
    bool requires_grad(Id id) const { return nodes_[id].requires_grad; }
    double scalar(Id id) const;

    void backward(Id root);  // root must be 1x1; call once per graph
    size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Mat val;
        Mat grad;
        bool requires_grad = false;
        std::function<void(Graph&)> back;
    };

    Id push(Mat val, bool requires_grad, std::function<void(Graph&)> back);
    Mat& gref(Id id) { return nodes_[id].grad; }

    std::vector<Node> nodes_;
    bool ran_backward_ = false;
};

}  // namespace stylebank
