#pragma once

#include "hgul/common.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

namespace hgul::ad {

using hgul::Mat;
using hgul::Vec;

struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void()> backward;  // accumulates into input grads
};

using Var = std::shared_ptr<Node>;

inline void check_finite(const Mat& m, const char* op) {
#ifndef NDEBUG
    if (!m.allFinite()) throw InvariantError(std::string("non-finite values after op '") + op + "'");
#else
    (void)m;
    (void)op;
#endif
}

// Reverse-mode tape over dense matrices. Nodes are recorded in creation
// order; backward() replays them in exact reverse order, so every op's
// inputs are visited after the op itself.
class Tape {
public:
    Var constant(Mat v) { return make(std::move(v), false, nullptr, "constant"); }

    Var param(Mat v) { return make(std::move(v), true, nullptr, "param"); }

    Var matmul(const Var& a, const Var& b) {
        require(a->value.cols() == b->value.rows(), "matmul: inner dimensions disagree");
        Var out = make(a->value * b->value, a->requires_grad || b->requires_grad, nullptr, "matmul");
        out->backward = [out, a, b] {
            if (a->requires_grad) a->grad.noalias() += out->grad * b->value.transpose();
            if (b->requires_grad) b->grad.noalias() += a->value.transpose() * out->grad;
        };
        return out;
    }

    Var add(const Var& a, const Var& b) {
        require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
                "add: shape mismatch");
        Var out = make(a->value + b->value, a->requires_grad || b->requires_grad, nullptr, "add");
        out->backward = [out, a, b] {
            if (a->requires_grad) a->grad += out->grad;
            if (b->requires_grad) b->grad += out->grad;
        };
        return out;
    }

    Var sub(const Var& a, const Var& b) {
        require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
                "sub: shape mismatch");
        Var out = make(a->value - b->value, a->requires_grad || b->requires_grad, nullptr, "sub");
        out->backward = [out, a, b] {
            if (a->requires_grad) a->grad += out->grad;
            if (b->requires_grad) b->grad -= out->grad;
        };
        return out;
    }

    Var hadamard(const Var& a, const Var& b) {
        require(a->value.rows() == b->value.rows() && a->value.cols() == b->value.cols(),
                "hadamard: shape mismatch");
        Var out = make(a->value.cwiseProduct(b->value), a->requires_grad || b->requires_grad,
                       nullptr, "hadamard");
        out->backward = [out, a, b] {
            if (a->requires_grad) a->grad += out->grad.cwiseProduct(b->value);
            if (b->requires_grad) b->grad += out->grad.cwiseProduct(a->value);
        };
        return out;
    }

    Var scale(const Var& a, double c) {
        Var out = make(a->value * c, a->requires_grad, nullptr, "scale");
        out->backward = [out, a, c] {
            if (a->requires_grad) a->grad += out->grad * c;
        };
        return out;
    }

    Var add_scalar(const Var& a, double c) {
        Var out = make(a->value.array() + c, a->requires_grad, nullptr, "add_scalar");
        out->backward = [out, a] {
            if (a->requires_grad) a->grad += out->grad;
        };
        return out;
    }

    // broadcast a 1 x d row vector over every row of an n x d matrix
    Var add_rowvec(const Var& a, const Var& b) {
        require(b->value.rows() == 1 && b->value.cols() == a->value.cols(),
                "add_rowvec: b must be 1 x cols(a)");
        Var out = make(a->value.rowwise() + b->value.row(0), a->requires_grad || b->requires_grad,
                       nullptr, "add_rowvec");
        out->backward = [out, a, b] {
            if (a->requires_grad) a->grad += out->grad;
            if (b->requires_grad) b->grad += out->grad.colwise().sum();
        };
        return out;
    }

    Var sigmoid(const Var& a) {
        Mat y = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
        Var out = make(std::move(y), a->requires_grad, nullptr, "sigmoid");
        out->backward = [out, a] {
            if (a->requires_grad)
                a->grad.array() +=
                    out->grad.array() * out->value.array() * (1.0 - out->value.array());
        };
        return out;
    }

    Var relu(const Var& a) {
        Var out = make(a->value.cwiseMax(0.0), a->requires_grad, nullptr, "relu");
        out->backward = [out, a] {
            if (a->requires_grad)
                a->grad.array() += out->grad.array() * (a->value.array() > 0.0).cast<double>();
        };
        return out;
    }

    Var sum(const Var& a) {
        Mat s(1, 1);
        s(0, 0) = a->value.sum();
        Var out = make(std::move(s), a->requires_grad, nullptr, "sum");
        out->backward = [out, a] {
            if (a->requires_grad) a->grad.array() += out->grad(0, 0);
        };
        return out;
    }

    Var transpose(const Var& a) {
        Var out = make(a->value.transpose(), a->requires_grad, nullptr, "transpose");
        out->backward = [out, a] {
            if (a->requires_grad) a->grad += out->grad.transpose();
        };
        return out;
    }

    Var concat_cols(const Var& a, const Var& b) {
        require(a->value.rows() == b->value.rows(), "concat_cols: row counts differ");
        Mat v(a->value.rows(), a->value.cols() + b->value.cols());
        v << a->value, b->value;
        Var out = make(std::move(v), a->requires_grad || b->requires_grad, nullptr, "concat_cols");
        out->backward = [out, a, b] {
            if (a->requires_grad) a->grad += out->grad.leftCols(a->value.cols());
            if (b->requires_grad) b->grad += out->grad.rightCols(b->value.cols());
        };
        return out;
    }

    Var row_sums(const Var& a) {
        Var out = make(a->value.rowwise().sum(), a->requires_grad, nullptr, "row_sums");
        out->backward = [out, a] {
            if (a->requires_grad) a->grad.colwise() += Eigen::VectorXd(out->grad.col(0));
        };
        return out;
    }

    // entrywise power; for fractional exponents entries must stay positive
    Var pow_elem(const Var& a, double p) {
        Var out = make(a->value.array().pow(p).matrix(), a->requires_grad, nullptr, "pow_elem");
        out->backward = [out, a, p] {
            if (a->requires_grad)
                a->grad.array() += out->grad.array() * p * a->value.array().pow(p - 1.0);
        };
        return out;
    }

    Var clamp_min(const Var& a, double lo) {
        Var out = make(a->value.cwiseMax(lo), a->requires_grad, nullptr, "clamp_min");
        out->backward = [out, a, lo] {
            if (a->requires_grad)
                a->grad.array() += out->grad.array() * (a->value.array() > lo).cast<double>();
        };
        return out;
    }

    // scale row i of a by v(i); v is n x 1
    Var scale_rows(const Var& a, const Var& v) {
        require(v->value.cols() == 1 && v->value.rows() == a->value.rows(),
                "scale_rows: v must be rows(a) x 1");
        Var out = make(v->value.col(0).asDiagonal() * a->value,
                       a->requires_grad || v->requires_grad, nullptr, "scale_rows");
        out->backward = [out, a, v] {
            if (a->requires_grad) a->grad += v->value.col(0).asDiagonal() * out->grad;
            if (v->requires_grad)
                v->grad.col(0) += out->grad.cwiseProduct(a->value).rowwise().sum();
        };
        return out;
    }

    Var scale_cols(const Var& a, const Var& v) {
        require(v->value.cols() == 1 && v->value.rows() == a->value.cols(),
                "scale_cols: v must be cols(a) x 1");
        Var out = make(a->value * v->value.col(0).asDiagonal(),
                       a->requires_grad || v->requires_grad, nullptr, "scale_cols");
        out->backward = [out, a, v] {
            if (a->requires_grad) a->grad += out->grad * v->value.col(0).asDiagonal();
            if (v->requires_grad)
                v->grad.col(0) += out->grad.cwiseProduct(a->value).colwise().sum().transpose();
        };
        return out;
    }

    Var block(const Var& a, int r0, int c0, int rows, int cols) {
        require(r0 >= 0 && c0 >= 0 && r0 + rows <= a->value.rows() && c0 + cols <= a->value.cols(),
                "block: out of range");
        Var out = make(a->value.block(r0, c0, rows, cols), a->requires_grad, nullptr, "block");
        out->backward = [out, a, r0, c0, rows, cols] {
            if (a->requires_grad) a->grad.block(r0, c0, rows, cols) += out->grad;
        };
        return out;
    }

    Var reshape(const Var& a, int rows, int cols) {
        require(rows * cols == a->value.size(), "reshape: element count mismatch");
        Mat v(rows, cols);
        // row-major flattening on both sides
        for (int i = 0, idx = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j, ++idx)
                v(i, j) = a->value(idx / static_cast<int>(a->value.cols()),
                                   idx % static_cast<int>(a->value.cols()));
        Var out = make(std::move(v), a->requires_grad, nullptr, "reshape");
        out->backward = [out, a, rows, cols] {
            if (!a->requires_grad) return;
            int ac = static_cast<int>(a->value.cols());
            for (int i = 0, idx = 0; i < rows; ++i)
                for (int j = 0; j < cols; ++j, ++idx)
                    a->grad(idx / ac, idx % ac) += out->grad(i, j);
        };
        return out;
    }

    Var softmax_rows(const Var& a) {
        Mat y = a->value;
        for (int i = 0; i < y.rows(); ++i) {
            double m = y.row(i).maxCoeff();
            y.row(i) = (y.row(i).array() - m).exp();
            y.row(i) /= y.row(i).sum();
        }
        Var out = make(std::move(y), a->requires_grad, nullptr, "softmax_rows");
        out->backward = [out, a] {
            if (!a->requires_grad) return;
            for (int i = 0; i < out->value.rows(); ++i) {
                double dot = out->grad.row(i).dot(out->value.row(i));
                a->grad.row(i) +=
                    (out->grad.row(i).array() - dot).matrix().cwiseProduct(out->value.row(i));
            }
        };
        return out;
    }

    // masked mean cross-entropy from logits; labels are class ids
    Var cross_entropy(const Var& logits, const std::vector<int>& labels,
                      const std::vector<char>& mask) {
        require(static_cast<int>(labels.size()) == logits->value.rows(),
                "cross_entropy: label count != rows");
        require(mask.size() == labels.size(), "cross_entropy: mask length mismatch");
        int m = 0;
        for (char c : mask) m += c ? 1 : 0;
        require(m > 0, "cross_entropy: empty mask");
        int n = static_cast<int>(logits->value.rows());
        Mat probs(n, logits->value.cols());
        double loss = 0.0;
        for (int i = 0; i < n; ++i) {
            double mx = logits->value.row(i).maxCoeff();
            Eigen::RowVectorXd e = (logits->value.row(i).array() - mx).exp();
            double z = e.sum();
            probs.row(i) = e / z;
            if (mask[static_cast<size_t>(i)])
                loss -= std::log(std::max(probs(i, labels[static_cast<size_t>(i)]), 1e-300));
        }
        loss /= m;
        Mat s(1, 1);
        s(0, 0) = loss;
        Var out = make(std::move(s), logits->requires_grad, nullptr, "cross_entropy");
        out->backward = [out, logits, labels, mask, probs, m] {
            if (!logits->requires_grad) return;
            double g = out->grad(0, 0) / m;
            for (int i = 0; i < probs.rows(); ++i) {
                if (!mask[static_cast<size_t>(i)]) continue;
                logits->grad.row(i) += g * probs.row(i);
                logits->grad(i, labels[static_cast<size_t>(i)]) -= g;
            }
        };
        return out;
    }

    // Hard threshold with straight-through gradients: the forward value is
    // the 0/1 indicator of y > delta, but the backward pass treats the op as
    // the identity on y. soft=true skips the thresholding entirely (used for
    // the smooth surrogate path in gradient checks and to expose the soft
    // samples themselves).
    Var hard_threshold_ste(const Var& y, double delta, bool soft = false) {
        Mat z = soft ? y->value : (y->value.array() > delta).cast<double>().matrix();
        Var out = make(std::move(z), y->requires_grad, nullptr, "hard_threshold_ste");
        out->backward = [out, y] {
            if (y->requires_grad) y->grad += out->grad;
        };
        return out;
    }

    // Scatter per-edge weights (|E| x 1) into a dense (rows x cols) matrix at
    // the given positions; duplicate positions accumulate.
    Var scatter_edges(const Var& w, const std::vector<std::pair<int, int>>& pos, int rows,
                      int cols) {
        require(w->value.cols() == 1 && w->value.rows() == static_cast<int>(pos.size()),
                "scatter_edges: w must be |pos| x 1");
        Mat v = Mat::Zero(rows, cols);
        for (size_t e = 0; e < pos.size(); ++e) v(pos[e].first, pos[e].second) += w->value(static_cast<int>(e), 0);
        Var out = make(std::move(v), w->requires_grad, nullptr, "scatter_edges");
        out->backward = [out, w, pos] {
            if (!w->requires_grad) return;
            for (size_t e = 0; e < pos.size(); ++e)
                w->grad(static_cast<int>(e), 0) += out->grad(pos[e].first, pos[e].second);
        };
        return out;
    }

    // Per-edge cosine similarity between rows of hs and hd:
    // w_e = <hs_u, hd_v> / (|hs_u||hd_v| + eps).
    Var edge_cosine(const Var& hs, const Var& hd, const std::vector<std::pair<int, int>>& edges,
                    double eps = 1e-12) {
        Mat w(static_cast<int>(edges.size()), 1);
        for (size_t e = 0; e < edges.size(); ++e) {
            auto u = hs->value.row(edges[e].first);
            auto v = hd->value.row(edges[e].second);
            w(static_cast<int>(e), 0) = u.dot(v) / (u.norm() * v.norm() + eps);
        }
        Var out = make(std::move(w), hs->requires_grad || hd->requires_grad, nullptr, "edge_cosine");
        out->backward = [out, hs, hd, edges, eps] {
            for (size_t e = 0; e < edges.size(); ++e) {
                double g = out->grad(static_cast<int>(e), 0);
                if (g == 0.0) continue;
                auto u = hs->value.row(edges[e].first);
                auto v = hd->value.row(edges[e].second);
                double nu = u.norm(), nv = v.norm();
                double den = nu * nv + eps;
                double s = u.dot(v);
                if (hs->requires_grad)
                    hs->grad.row(edges[e].first) +=
                        g * (v / den - (s / (den * den)) * nv * (u / std::max(nu, 1e-30)));
                if (hd->requires_grad)
                    hd->grad.row(edges[e].second) +=
                        g * (u / den - (s / (den * den)) * nu * (v / std::max(nv, 1e-30)));
            }
        };
        return out;
    }

    // Clamp entries at 0, then normalize each row to sum 1. A row whose
    // clamped sum is ~0 falls back to the identity row (the node keeps its
    // own features downstream), with zero gradient.
    Var row_normalize_clamped(const Var& a, double tiny = 1e-12) {
        require(a->value.rows() == a->value.cols(), "row_normalize_clamped: matrix not square");
        int n = static_cast<int>(a->value.rows());
        Mat c = a->value.cwiseMax(0.0);
        Vec s = c.rowwise().sum();
        Mat v(n, n);
        std::vector<char> fallback(static_cast<size_t>(n), 0);
        for (int i = 0; i < n; ++i) {
            if (s(i) > tiny) {
                v.row(i) = c.row(i) / s(i);
            } else {
                v.row(i).setZero();
                v(i, i) = 1.0;
                fallback[static_cast<size_t>(i)] = 1;
            }
        }
        Var out = make(std::move(v), a->requires_grad, nullptr, "row_normalize_clamped");
        out->backward = [out, a, c, s, fallback] {
            if (!a->requires_grad) return;
            for (int i = 0; i < c.rows(); ++i) {
                if (fallback[static_cast<size_t>(i)]) continue;
                double dot = out->grad.row(i).dot(out->value.row(i));
                Eigen::RowVectorXd gc = (out->grad.row(i).array() - dot) / s(i);
                a->grad.row(i) +=
                    gc.cwiseProduct((a->value.row(i).array() > 0.0).cast<double>().matrix());
            }
        };
        return out;
    }

    // Per-feature standardization over rows with a learnable affine:
    // out = scale * (x - mean) / (std + eps) + shift, column by column.
    Var graph_norm(const Var& x, const Var& scale_v, const Var& shift_v, double eps = 1e-5) {
        int n = static_cast<int>(x->value.rows()), d = static_cast<int>(x->value.cols());
        require(scale_v->value.rows() == 1 && scale_v->value.cols() == d, "graph_norm: bad scale shape");
        require(shift_v->value.rows() == 1 && shift_v->value.cols() == d, "graph_norm: bad shift shape");
        Eigen::RowVectorXd mu = x->value.colwise().mean();
        Mat u = x->value.rowwise() - mu;
        Eigen::RowVectorXd sigma = (u.array().square().colwise().sum() / n).sqrt();
        Mat y = u.array().rowwise() / (sigma.array() + eps);
        Mat v = (y.array().rowwise() * scale_v->value.row(0).array()).rowwise() +
                shift_v->value.row(0).array();
        Var out = make(std::move(v), x->requires_grad || scale_v->requires_grad || shift_v->requires_grad,
                       nullptr, "graph_norm");
        out->backward = [out, x, scale_v, shift_v, u, sigma, y, eps, n] {
            if (scale_v->requires_grad)
                scale_v->grad.row(0) += out->grad.cwiseProduct(y).colwise().sum();
            if (shift_v->requires_grad) shift_v->grad.row(0) += out->grad.colwise().sum();
            if (!x->requires_grad) return;
            for (int j = 0; j < u.cols(); ++j) {
                double sj = sigma(j) + eps;
                double sc = scale_v->value(0, j);
                Eigen::VectorXd g = out->grad.col(j) * sc;
                double gmean = g.mean();
                double gu = g.dot(u.col(j));
                double sig = std::max(sigma(j), 1e-30);
                x->grad.col(j) +=
                    (g.array() - gmean).matrix() / sj - u.col(j) * (gu / (n * sig * sj * sj));
            }
        };
        return out;
    }

    // Replays recorded ops newest-to-oldest, accumulating gradients from the
    // given scalar loss. Gradients of all nodes are reset first, so repeated
    // calls are reproducible bit for bit.
    void backward(const Var& loss) {
        require(loss->value.rows() == 1 && loss->value.cols() == 1, "backward: loss must be 1x1");
        for (auto& n : nodes_) n->grad.setZero(n->value.rows(), n->value.cols());
        loss->grad(0, 0) = 1.0;
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
            if ((*it)->backward) (*it)->backward();
    }

    size_t size() const { return nodes_.size(); }

    // Every op closure captures its own output node, so nodes own themselves
    // through their backward functions; dropping the closures here breaks the
    // cycles and releases the whole graph with the tape.
    ~Tape() {
        for (auto& n : nodes_) n->backward = nullptr;
    }

private:
    Var make(Mat v, bool req, std::function<void()> bw, const char* opname) {
        check_finite(v, opname);
        auto n = std::make_shared<Node>();
        n->value = std::move(v);
        n->grad = Mat::Zero(n->value.rows(), n->value.cols());
        n->requires_grad = req;
        n->backward = std::move(bw);
        nodes_.push_back(n);
        return n;
    }

    std::vector<Var> nodes_;
};

// D^{-1/2} (A + I) D^{-1/2} on the tape, mirroring graph-core's
// normalize_adjacency. Degrees are floored at a tiny positive value so
// learnable negative edge weights cannot push them to zero.
inline Var normalize_adjacency(Tape& t, const Var& a) {
    int n = static_cast<int>(a->value.rows());
    Var m = t.add(a, t.constant(Mat::Identity(n, n)));
    Var s = t.pow_elem(t.clamp_min(t.row_sums(m), 1e-8), -0.5);
    return t.scale_cols(t.scale_rows(m, s), s);
}

// Truncated geometric-series resolvent: sum_{k=0..K} alpha^k A^k, stopping
// early once the Frobenius norm of the next term falls below tol.
inline Var ppr_kernel(Tape& t, const Var& a_hat, double alpha, int k_iter, double tol = 0.0) {
    int n = static_cast<int>(a_hat->value.rows());
    Var acc = t.constant(Mat::Identity(n, n));
    Var term = acc;
    for (int k = 1; k <= k_iter; ++k) {
        term = t.scale(t.matmul(a_hat, term), alpha);
        acc = t.add(acc, term);
        if (tol > 0.0 && term->value.norm() < tol) break;
    }
    return acc;
}

}  // namespace hgul::ad
