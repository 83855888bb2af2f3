#include "stylebank/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

namespace stylebank {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
constexpr double kLnEps = 1e-5;
}  // namespace

Graph::Id Graph::push(Mat val, bool requires_grad, std::function<void(Graph&)> back) {
    Node n;
    n.val = std::move(val);
    n.requires_grad = requires_grad;
    if (requires_grad) n.grad = Mat(n.val.rows, n.val.cols);
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return static_cast<Id>(nodes_.size() - 1);
}

Graph::Id Graph::leaf(Mat value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

double Graph::scalar(Id id) const {
    const Mat& m = nodes_[id].val;
    if (m.rows != 1 || m.cols != 1) throw std::logic_error("scalar(): node is not 1x1");
    return m.v[0];
}

Graph::Id Graph::add(Id a, Id b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
    Mat out = av;
    add_inplace(out, bv);
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const Mat& go = g.gref(id);
            if (g.requires_grad(a)) add_inplace(g.gref(a), go);
            if (g.requires_grad(b)) add_inplace(g.gref(b), go);
        };
    }
    return id;
}

Graph::Id Graph::sub(Id a, Id b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
    Mat out = av;
    axpy_inplace(out, -1.0, bv);
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const Mat& go = g.gref(id);
            if (g.requires_grad(a)) add_inplace(g.gref(a), go);
            if (g.requires_grad(b)) axpy_inplace(g.gref(b), -1.0, go);
        };
    }
    return id;
}

Graph::Id Graph::scale(Id a, double s) {
    Mat out = value(a);
    for (double& x : out.v) x *= s;
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, s, id](Graph& g) {
            axpy_inplace(g.gref(a), s, g.gref(id));
        };
    }
    return id;
}

Graph::Id Graph::add_rowvec(Id a, Id rowv) {
    const Mat& av = value(a);
    const Mat& rv = value(rowv);
    if (rv.rows != 1 || rv.cols != av.cols) throw std::invalid_argument("add_rowvec: shape mismatch");
    Mat out = av;
    for (int r = 0; r < out.rows; ++r)
        for (int c = 0; c < out.cols; ++c) out(r, c) += rv(0, c);
    const bool rg = requires_grad(a) || requires_grad(rowv);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, rowv, id](Graph& g) {
            const Mat& go = g.gref(id);
            if (g.requires_grad(a)) add_inplace(g.gref(a), go);
            if (g.requires_grad(rowv)) {
                Mat& gr = g.gref(rowv);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) gr(0, c) += go(r, c);
            }
        };
    }
    return id;
}

Graph::Id Graph::matmul(Id a, Id b) {
    Mat out = stylebank::matmul(value(a), value(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const Mat& go = g.gref(id);
            const Mat& av = g.value(a);
            const Mat& bv = g.value(b);
            if (g.requires_grad(a)) {
                // dA = dC * B^T
                Mat da = stylebank::matmul_nt(go, bv);
                add_inplace(g.gref(a), da);
            }
            if (g.requires_grad(b)) {
                // dB = A^T * dC, computed directly
                Mat& gb = g.gref(b);
                for (int k = 0; k < av.rows; ++k) {
                    const double* arow = av.row_ptr(k);
                    const double* grow = go.row_ptr(k);
                    for (int i = 0; i < av.cols; ++i) {
                        const double aki = arow[i];
                        if (aki == 0.0) continue;
                        double* gbrow = gb.row_ptr(i);
                        for (int j = 0; j < go.cols; ++j) gbrow[j] += aki * grow[j];
                    }
                }
            }
        };
    }
    return id;
}

Graph::Id Graph::matmul_nt(Id a, Id b) {
    Mat out = stylebank::matmul_nt(value(a), value(b));
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const Mat& go = g.gref(id);  // m x n, C = A * B^T
            const Mat& av = g.value(a);  // m x k
            const Mat& bv = g.value(b);  // n x k
            if (g.requires_grad(a)) {
                // dA = dC * B
                Mat da = stylebank::matmul(go, bv);
                add_inplace(g.gref(a), da);
            }
            if (g.requires_grad(b)) {
                // dB = dC^T * A
                Mat& gb = g.gref(b);
                for (int i = 0; i < go.rows; ++i) {
                    const double* grow = go.row_ptr(i);
                    const double* arow = av.row_ptr(i);
                    for (int j = 0; j < go.cols; ++j) {
                        const double gij = grow[j];
                        if (gij == 0.0) continue;
                        double* gbrow = gb.row_ptr(j);
                        for (int k = 0; k < av.cols; ++k) gbrow[k] += gij * arow[k];
                    }
                }
            }
        };
    }
    return id;
}

Graph::Id Graph::slice_cols(Id a, int c0, int c1) {
    const Mat& av = value(a);
    if (c0 < 0 || c1 > av.cols || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Mat out(av.rows, c1 - c0);
    for (int r = 0; r < av.rows; ++r)
        for (int c = c0; c < c1; ++c) out(r, c - c0) = av(r, c);
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, c0, id](Graph& g) {
            const Mat& go = g.gref(id);
            Mat& ga = g.gref(a);
            for (int r = 0; r < go.rows; ++r)
                for (int c = 0; c < go.cols; ++c) ga(r, c0 + c) += go(r, c);
        };
    }
    return id;
}

Graph::Id Graph::concat_cols(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    int rows = value(parts[0]).rows;
    int cols = 0;
    bool rg = false;
    for (Id p : parts) {
        if (value(p).rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += value(p).cols;
        rg = rg || requires_grad(p);
    }
    Mat out(rows, cols);
    int off = 0;
    for (Id p : parts) {
        const Mat& pv = value(p);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < pv.cols; ++c) out(r, off + c) = pv(r, c);
        off += pv.cols;
    }
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Id> ps = parts;
        nodes_[id].back = [ps, id](Graph& g) {
            const Mat& go = g.gref(id);
            int off = 0;
            for (Id p : ps) {
                const int pc = g.value(p).cols;
                if (g.requires_grad(p)) {
                    Mat& gp = g.gref(p);
                    for (int r = 0; r < go.rows; ++r)
                        for (int c = 0; c < pc; ++c) gp(r, c) += go(r, off + c);
                }
                off += pc;
            }
        };
    }
    return id;
}

Graph::Id Graph::concat_rows(const std::vector<Id>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    int cols = value(parts[0]).cols;
    int rows = 0;
    bool rg = false;
    for (Id p : parts) {
        if (value(p).cols != cols) throw std::invalid_argument("concat_rows: col mismatch");
        rows += value(p).rows;
        rg = rg || requires_grad(p);
    }
    Mat out(rows, cols);
    int off = 0;
    for (Id p : parts) {
        const Mat& pv = value(p);
        for (int r = 0; r < pv.rows; ++r)
            for (int c = 0; c < cols; ++c) out(off + r, c) = pv(r, c);
        off += pv.rows;
    }
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Id> ps = parts;
        nodes_[id].back = [ps, id](Graph& g) {
            const Mat& go = g.gref(id);
            int off = 0;
            for (Id p : ps) {
                const int pr = g.value(p).rows;
                if (g.requires_grad(p)) {
                    Mat& gp = g.gref(p);
                    for (int r = 0; r < pr; ++r)
                        for (int c = 0; c < go.cols; ++c) gp(r, c) += go(off + r, c);
                }
                off += pr;
            }
        };
    }
    return id;
}

Graph::Id Graph::replace_rows(Id a, int r0, Id b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (bv.cols != av.cols || r0 < 0 || r0 + bv.rows > av.rows)
        throw std::invalid_argument("replace_rows: bad range");
    Mat out = av;
    for (int r = 0; r < bv.rows; ++r)
        for (int c = 0; c < bv.cols; ++c) out(r0 + r, c) = bv(r, c);
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        const int brows = bv.rows;
        nodes_[id].back = [a, b, r0, brows, id](Graph& g) {
            const Mat& go = g.gref(id);
            if (g.requires_grad(a)) {
                Mat& ga = g.gref(a);
                for (int r = 0; r < go.rows; ++r) {
                    if (r >= r0 && r < r0 + brows) continue;  // overwritten rows carry no grad
                    for (int c = 0; c < go.cols; ++c) ga(r, c) += go(r, c);
                }
            }
            if (g.requires_grad(b)) {
                Mat& gb = g.gref(b);
                for (int r = 0; r < brows; ++r)
                    for (int c = 0; c < go.cols; ++c) gb(r, c) += go(r0 + r, c);
            }
        };
    }
    return id;
}

Graph::Id Graph::row(Id a, int r) {
    const Mat& av = value(a);
    if (r < 0 || r >= av.rows) throw std::invalid_argument("row: out of range");
    Mat out(1, av.cols);
    for (int c = 0; c < av.cols; ++c) out(0, c) = av(r, c);
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, r, id](Graph& g) {
            const Mat& go = g.gref(id);
            Mat& ga = g.gref(a);
            for (int c = 0; c < go.cols; ++c) ga(r, c) += go(0, c);
        };
    }
    return id;
}

Graph::Id Graph::gather_rows(Id table, const std::vector<int>& ids) {
    const Mat& tv = value(table);
    Mat out(static_cast<int>(ids.size()), tv.cols);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= tv.rows) throw std::invalid_argument("gather_rows: id out of range");
        for (int c = 0; c < tv.cols; ++c) out(static_cast<int>(i), c) = tv(ids[i], c);
    }
    const bool rg = requires_grad(table);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<int> idx = ids;
        nodes_[id].back = [table, idx, id](Graph& g) {
            const Mat& go = g.gref(id);
            Mat& gt = g.gref(table);
            for (size_t i = 0; i < idx.size(); ++i)
                for (int c = 0; c < go.cols; ++c) gt(idx[i], c) += go(static_cast<int>(i), c);
        };
    }
    return id;
}

Graph::Id Graph::gelu(Id a) {
    const Mat& av = value(a);
    Mat out(av.rows, av.cols);
    for (size_t i = 0; i < av.v.size(); ++i) {
        const double x = av.v[i];
        out.v[i] = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    }
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, id](Graph& g) {
            const Mat& go = g.gref(id);
            const Mat& av2 = g.value(a);
            Mat& ga = g.gref(a);
            for (size_t i = 0; i < av2.v.size(); ++i) {
                const double x = av2.v[i];
                const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
                const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
                ga.v[i] += go.v[i] * (cdf + x * pdf);
            }
        };
    }
    return id;
}

Graph::Id Graph::relu(Id a) {
    const Mat& av = value(a);
    Mat out(av.rows, av.cols);
    for (size_t i = 0; i < av.v.size(); ++i) out.v[i] = av.v[i] > 0.0 ? av.v[i] : 0.0;
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, id](Graph& g) {
            const Mat& go = g.gref(id);
            const Mat& av2 = g.value(a);
            Mat& ga = g.gref(a);
            for (size_t i = 0; i < av2.v.size(); ++i)
                if (av2.v[i] > 0.0) ga.v[i] += go.v[i];
        };
    }
    return id;
}

Graph::Id Graph::layer_norm(Id a, Id gain, Id bias) {
    const Mat& av = value(a);
    const Mat& gv = value(gain);
    const Mat& bv = value(bias);
    if (gv.rows != 1 || bv.rows != 1 || gv.cols != av.cols || bv.cols != av.cols)
        throw std::invalid_argument("layer_norm: gain/bias shape mismatch");
    const int C = av.cols;
    Mat out(av.rows, C);
    Mat xhat(av.rows, C);
    std::vector<double> inv_sigma(av.rows);
    for (int r = 0; r < av.rows; ++r) {
        double mu = 0.0;
        for (int c = 0; c < C; ++c) mu += av(r, c);
        mu /= C;
        double var = 0.0;
        for (int c = 0; c < C; ++c) {
            const double d = av(r, c) - mu;
            var += d * d;
        }
        var /= C;
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_sigma[r] = is;
        for (int c = 0; c < C; ++c) {
            const double xh = (av(r, c) - mu) * is;
            xhat(r, c) = xh;
            out(r, c) = xh * gv(0, c) + bv(0, c);
        }
    }
    const bool rg = requires_grad(a) || requires_grad(gain) || requires_grad(bias);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        auto xh = std::make_shared<Mat>(std::move(xhat));
        auto is = std::make_shared<std::vector<double>>(std::move(inv_sigma));
        nodes_[id].back = [a, gain, bias, id, xh, is](Graph& g) {
            const Mat& go = g.gref(id);
            const Mat& gv2 = g.value(gain);
            const int C = go.cols;
            if (g.requires_grad(gain)) {
                Mat& gg = g.gref(gain);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < C; ++c) gg(0, c) += go(r, c) * (*xh)(r, c);
            }
            if (g.requires_grad(bias)) {
                Mat& gb = g.gref(bias);
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < C; ++c) gb(0, c) += go(r, c);
            }
            if (g.requires_grad(a)) {
                Mat& ga = g.gref(a);
                for (int r = 0; r < go.rows; ++r) {
                    double mean_dxhat = 0.0;
                    double mean_dxhat_xhat = 0.0;
                    for (int c = 0; c < C; ++c) {
                        const double dxh = go(r, c) * gv2(0, c);
                        mean_dxhat += dxh;
                        mean_dxhat_xhat += dxh * (*xh)(r, c);
                    }
                    mean_dxhat /= C;
                    mean_dxhat_xhat /= C;
                    const double s = (*is)[r];
                    for (int c = 0; c < C; ++c) {
                        const double dxh = go(r, c) * gv2(0, c);
                        ga(r, c) += s * (dxh - mean_dxhat - (*xh)(r, c) * mean_dxhat_xhat);
                    }
                }
            }
        };
    }
    return id;
}

Graph::Id Graph::softmax_rows_masked(Id a, std::vector<uint8_t> key_allowed) {
    const Mat& av = value(a);
    if (!key_allowed.empty() && static_cast<int>(key_allowed.size()) != av.cols)
        throw std::invalid_argument("softmax_rows_masked: mask length mismatch");
    Mat out(av.rows, av.cols);
    for (int r = 0; r < av.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < av.cols; ++c) {
            if (!key_allowed.empty() && !key_allowed[c]) continue;
            mx = std::max(mx, av(r, c));
        }
        if (mx == -1e300) throw std::invalid_argument("softmax_rows_masked: all keys masked");
        double sum = 0.0;
        for (int c = 0; c < av.cols; ++c) {
            if (!key_allowed.empty() && !key_allowed[c]) {
                out(r, c) = 0.0;
                continue;
            }
            const double e = std::exp(av(r, c) - mx);
            out(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < av.cols; ++c) out(r, c) /= sum;
    }
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        auto mask = std::make_shared<std::vector<uint8_t>>(std::move(key_allowed));
        nodes_[id].back = [a, id, mask](Graph& g) {
            const Mat& go = g.gref(id);
            const Mat& p = g.value(id);
            Mat& ga = g.gref(a);
            for (int r = 0; r < go.rows; ++r) {
                double dotp = 0.0;
                for (int c = 0; c < go.cols; ++c) dotp += p(r, c) * go(r, c);
                for (int c = 0; c < go.cols; ++c) {
                    if (!mask->empty() && !(*mask)[c]) continue;
                    ga(r, c) += p(r, c) * (go(r, c) - dotp);
                }
            }
        };
    }
    return id;
}

Graph::Id Graph::l2_normalize_row(Id a) {
    const Mat& av = value(a);
    if (av.rows != 1) throw std::invalid_argument("l2_normalize_row: expects 1 x C");
    double n2 = 0.0;
    for (double x : av.v) n2 += x * x;
    const double n = std::sqrt(n2);
    if (n < 1e-12) throw std::runtime_error("l2_normalize_row: zero-norm vector");
    Mat out(1, av.cols);
    for (int c = 0; c < av.cols; ++c) out(0, c) = av(0, c) / n;
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, id, n](Graph& g) {
            const Mat& go = g.gref(id);
            const Mat& yv = g.value(id);
            Mat& ga = g.gref(a);
            double ydot = 0.0;
            for (int c = 0; c < go.cols; ++c) ydot += yv(0, c) * go(0, c);
            for (int c = 0; c < go.cols; ++c) ga(0, c) += (go(0, c) - yv(0, c) * ydot) / n;
        };
    }
    return id;
}

Graph::Id Graph::dot_rows(Id a, Id b) {
    const Mat& av = value(a);
    const Mat& bv = value(b);
    if (av.rows != 1 || bv.rows != 1 || av.cols != bv.cols)
        throw std::invalid_argument("dot_rows: expects matching 1 x C inputs");
    Mat out(1, 1);
    double s = 0.0;
    for (int c = 0; c < av.cols; ++c) s += av(0, c) * bv(0, c);
    out(0, 0) = s;
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const double go = g.gref(id)(0, 0);
            const Mat& av2 = g.value(a);
            const Mat& bv2 = g.value(b);
            if (g.requires_grad(a)) {
                Mat& ga = g.gref(a);
                for (int c = 0; c < av2.cols; ++c) ga(0, c) += go * bv2(0, c);
            }
            if (g.requires_grad(b)) {
                Mat& gb = g.gref(b);
                for (int c = 0; c < bv2.cols; ++c) gb(0, c) += go * av2(0, c);
            }
        };
    }
    return id;
}

Graph::Id Graph::add_const(Id a, double c) {
    Mat out = value(a);
    for (double& x : out.v) x += c;
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, id](Graph& g) { add_inplace(g.gref(a), g.gref(id)); };
    }
    return id;
}

Graph::Id Graph::mul_scalars(Id a, Id b) {
    const double av = scalar(a);
    const double bv = scalar(b);
    Mat out(1, 1);
    out(0, 0) = av * bv;
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const double go = g.gref(id)(0, 0);
            if (g.requires_grad(a)) g.gref(a)(0, 0) += go * g.scalar(b);
            if (g.requires_grad(b)) g.gref(b)(0, 0) += go * g.scalar(a);
        };
    }
    return id;
}

Graph::Id Graph::div_scalars(Id a, Id b) {
    const double av = scalar(a);
    const double bv = scalar(b);
    if (bv == 0.0) throw std::runtime_error("div_scalars: division by zero");
    Mat out(1, 1);
    out(0, 0) = av / bv;
    const bool rg = requires_grad(a) || requires_grad(b);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, b, id](Graph& g) {
            const double go = g.gref(id)(0, 0);
            const double bv2 = g.scalar(b);
            if (g.requires_grad(a)) g.gref(a)(0, 0) += go / bv2;
            if (g.requires_grad(b)) g.gref(b)(0, 0) -= go * g.scalar(a) / (bv2 * bv2);
        };
    }
    return id;
}

Graph::Id Graph::sqrt_scalar(Id a) {
    const double av = scalar(a);
    if (av < 0.0) throw std::runtime_error("sqrt_scalar: negative input");
    Mat out(1, 1);
    out(0, 0) = std::sqrt(av);
    const bool rg = requires_grad(a);
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        nodes_[id].back = [a, id](Graph& g) {
            const double y = g.scalar(id);
            if (y > 0.0) g.gref(a)(0, 0) += g.gref(id)(0, 0) * 0.5 / y;
        };
    }
    return id;
}

Graph::Id Graph::mean_scalars(const std::vector<Id>& xs) {
    if (xs.empty()) throw std::invalid_argument("mean_scalars: empty");
    double s = 0.0;
    bool rg = false;
    for (Id x : xs) {
        s += scalar(x);
        rg = rg || requires_grad(x);
    }
    Mat out(1, 1);
    out(0, 0) = s / static_cast<double>(xs.size());
    Id id = push(std::move(out), rg, nullptr);
    if (rg) {
        std::vector<Id> ids = xs;
        nodes_[id].back = [ids, id](Graph& g) {
            const double go = g.gref(id)(0, 0) / static_cast<double>(ids.size());
            for (Id x : ids)
                if (g.requires_grad(x)) g.gref(x)(0, 0) += go;
        };
    }
    return id;
}

void Graph::backward(Id root) {
    if (ran_backward_) throw std::logic_error("backward: graph already consumed");
    const Mat& rv = nodes_[root].val;
    if (rv.rows != 1 || rv.cols != 1) throw std::logic_error("backward: root is not 1x1");
    if (!nodes_[root].requires_grad) throw std::logic_error("backward: root has no grad path");
    ran_backward_ = true;
    nodes_[root].grad(0, 0) = 1.0;
    for (Id i = root; i >= 0; --i) {
        Node& n = nodes_[i];
        if (n.requires_grad && n.back) n.back(*this);
    }
}

}  // namespace stylebank
