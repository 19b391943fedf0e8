#pragma once

#include "ccd/common.hpp"

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace ccd::ad {

using ccd::Mat;

/// Reverse-mode tape over dense double matrices. A tape is built fresh for
/// every forward pass; node creation order is the topological order used by
/// backward(). Backward closures reference parents by id only (the node
/// vector may reallocate while the graph is being built).
class Tape {
public:
    struct Node {
        Mat value;
        Mat grad;  // empty until touched by backward
        std::function<void(Tape&, const Mat&)> backward;
    };

    int push(Mat value, std::function<void(Tape&, const Mat&)> backward = nullptr) {
        nodes_.push_back(Node{std::move(value), Mat(), std::move(backward)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
    const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    void accumulate(int id, const Mat& g) {
        Mat& dst = nodes_[static_cast<std::size_t>(id)].grad;
        if (dst.size() == 0)
            dst = g;
        else
            dst += g;
    }

    /// Seeds d(root)/d(root) = 1 and sweeps the tape in reverse.
    /// The root must be a 1x1 scalar node.
    void backward(int root) {
        Node& r = nodes_[static_cast<std::size_t>(root)];
        if (r.value.size() != 1) throw contract_error("backward: root is not scalar");
        r.grad = Mat::Ones(1, 1);
        for (int id = root; id >= 0; --id) {
            Node& n = nodes_[static_cast<std::size_t>(id)];
            if (n.grad.size() == 0 || !n.backward) continue;
            n.backward(*this, n.grad);
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    std::vector<Node> nodes_;
};

/// Lightweight handle into a tape.
class Var {
public:
    Var() = default;
    Var(Tape* tape, int id) : tape_(tape), id_(id) {}

    const Mat& val() const { return tape_->value(id_); }
    const Mat& grad() const { return tape_->node(id_).grad; }
    int id() const { return id_; }
    Tape& tape() const { return *tape_; }
    bool valid() const { return tape_ != nullptr; }

    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }
    double scalar() const { return val()(0, 0); }

private:
    Tape* tape_ = nullptr;
    int id_ = -1;
};

inline Var constant(Tape& t, Mat v) { return Var(&t, t.push(std::move(v))); }

/// A differentiable input; gradients accumulate on its node.
inline Var leaf(Tape& t, const Mat& v) { return Var(&t, t.push(v)); }

namespace detail {
inline void check_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw contract_error(std::string(op) + ": shape mismatch");
}
}  // namespace detail

inline Var add(Var a, Var b) {
    detail::check_same_shape(a, b, "add");
    Tape& t = a.tape();
    int ia = a.id(), ib = b.id();
    return Var(&t, t.push(a.val() + b.val(), [ia, ib](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, g);
                   tp.accumulate(ib, g);
               }));
}

inline Var sub(Var a, Var b) {
    detail::check_same_shape(a, b, "sub");
    Tape& t = a.tape();
    int ia = a.id(), ib = b.id();
    return Var(&t, t.push(a.val() - b.val(), [ia, ib](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, g);
                   tp.accumulate(ib, Mat(-g));
               }));
}

inline Var matmul(Var a, Var b) {
    if (a.cols() != b.rows()) throw contract_error("matmul: inner dimension mismatch");
    Tape& t = a.tape();
    int ia = a.id(), ib = b.id();
    return Var(&t, t.push(a.val() * b.val(), [ia, ib](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, g * tp.value(ib).transpose());
                   tp.accumulate(ib, tp.value(ia).transpose() * g);
               }));
}

/// Adds a 1xK row vector to every row of x.
inline Var add_rowvec(Var x, Var b) {
    if (b.rows() != 1 || b.cols() != x.cols()) throw contract_error("add_rowvec: bad bias shape");
    Tape& t = x.tape();
    int ix = x.id(), ib = b.id();
    Mat out = x.val();
    out.rowwise() += b.val().row(0);
    return Var(&t, t.push(std::move(out), [ix, ib](Tape& tp, const Mat& g) {
                   tp.accumulate(ix, g);
                   tp.accumulate(ib, Mat(g.colwise().sum()));
               }));
}

inline Var cmul(Var a, Var b) {
    detail::check_same_shape(a, b, "cmul");
    Tape& t = a.tape();
    int ia = a.id(), ib = b.id();
    return Var(&t, t.push(a.val().cwiseProduct(b.val()), [ia, ib](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                   tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
               }));
}

inline Var cmul_const(Var a, const Mat& m) {
    if (a.rows() != m.rows() || a.cols() != m.cols())
        throw contract_error("cmul_const: shape mismatch");
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(a.val().cwiseProduct(m), [ia, m](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, g.cwiseProduct(m));
               }));
}

/// Elementwise product where each row of x is scaled by a 1xK row variable.
inline Var cmul_rowvec(Var x, Var r) {
    if (r.rows() != 1 || r.cols() != x.cols()) throw contract_error("cmul_rowvec: bad row shape");
    Tape& t = x.tape();
    int ix = x.id(), ir = r.id();
    Mat out = x.val().array().rowwise() * r.val().row(0).array();
    return Var(&t, t.push(std::move(out), [ix, ir](Tape& tp, const Mat& g) {
                   tp.accumulate(ix, Mat(g.array().rowwise() * tp.value(ir).row(0).array()));
                   tp.accumulate(ir, Mat((g.array() * tp.value(ix).array()).colwise().sum()));
               }));
}

/// Elementwise product where each row of x is scaled by the same 1xK row.
inline Var cmul_rowvec_const(Var x, const Eigen::RowVectorXd& r) {
    if (r.cols() != x.cols()) throw contract_error("cmul_rowvec_const: bad row shape");
    Tape& t = x.tape();
    int ix = x.id();
    Mat out = x.val().array().rowwise() * r.array();
    return Var(&t, t.push(std::move(out), [ix, r](Tape& tp, const Mat& g) {
                   tp.accumulate(ix, Mat(g.array().rowwise() * r.array()));
               }));
}

inline Var scale(Var a, double s) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(a.val() * s, [ia, s](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, Mat(g * s));
               }));
}

inline Var add_const(Var a, const Mat& c) {
    if (a.rows() != c.rows() || a.cols() != c.cols())
        throw contract_error("add_const: shape mismatch");
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(a.val() + c, [ia](Tape& tp, const Mat& g) { tp.accumulate(ia, g); }));
}

inline Var add_scalar(Var a, double s) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(Mat(a.val().array() + s),
                          [ia](Tape& tp, const Mat& g) { tp.accumulate(ia, g); }));
}

inline Var sigmoid(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    Mat s = (1.0 / (1.0 + (-a.val().array()).exp())).matrix();
    int out = t.push(s, nullptr);
    t.node(out).backward = [ia, out](Tape& tp, const Mat& g) {
        const Mat& y = tp.value(out);
        tp.accumulate(ia, Mat(g.array() * y.array() * (1.0 - y.array())));
    };
    return Var(&t, out);
}

inline Var tanh_op(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    int out = t.push(Mat(a.val().array().tanh()), nullptr);
    t.node(out).backward = [ia, out](Tape& tp, const Mat& g) {
        const Mat& y = tp.value(out);
        tp.accumulate(ia, Mat(g.array() * (1.0 - y.array().square())));
    };
    return Var(&t, out);
}

inline Var relu(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(a.val().cwiseMax(0.0), [ia](Tape& tp, const Mat& g) {
                   Mat m = (tp.value(ia).array() > 0.0).cast<double>();
                   tp.accumulate(ia, Mat(g.cwiseProduct(m)));
               }));
}

inline Var elu(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    Mat out = a.val().unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
    return Var(&t, t.push(std::move(out), [ia](Tape& tp, const Mat& g) {
                   Mat d = tp.value(ia).unaryExpr(
                       [](double v) { return v > 0.0 ? 1.0 : std::exp(v); });
                   tp.accumulate(ia, Mat(g.cwiseProduct(d)));
               }));
}

inline Var exp_op(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    int out = t.push(Mat(a.val().array().exp()), nullptr);
    t.node(out).backward = [ia, out](Tape& tp, const Mat& g) {
        tp.accumulate(ia, Mat(g.cwiseProduct(tp.value(out))));
    };
    return Var(&t, out);
}

inline Var log_op(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(Mat(a.val().array().log()), [ia](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, Mat(g.cwiseQuotient(tp.value(ia))));
               }));
}

inline Var square(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(Mat(a.val().array().square()), [ia](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, Mat(2.0 * g.cwiseProduct(tp.value(ia))));
               }));
}

/// Clamp to [lo, hi]; gradient passes through the unclamped region only.
inline Var clamp(Var a, double lo, double hi) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(a.val().cwiseMax(lo).cwiseMin(hi), [ia, lo, hi](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   Mat m = ((v.array() >= lo) && (v.array() <= hi)).cast<double>();
                   tp.accumulate(ia, Mat(g.cwiseProduct(m)));
               }));
}

inline Var sum(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    Mat s(1, 1);
    s(0, 0) = a.val().sum();
    return Var(&t, t.push(std::move(s), [ia](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   tp.accumulate(ia, Mat(Mat::Constant(v.rows(), v.cols(), g(0, 0))));
               }));
}

/// Per-row sums, then mean over rows: the usual "sum over features,
/// average over the batch" reduction. Returns 1x1.
inline Var batch_mean_rowsum(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    const double n = static_cast<double>(a.rows());
    Mat s(1, 1);
    s(0, 0) = a.val().sum() / n;
    return Var(&t, t.push(std::move(s), [ia, n](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   tp.accumulate(ia, Mat(Mat::Constant(v.rows(), v.cols(), g(0, 0) / n)));
               }));
}

/// Row-wise sums: (B, K) -> (B, 1).
inline Var row_sum(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(Mat(a.val().rowwise().sum()), [ia](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   tp.accumulate(ia, Mat(g * Mat::Ones(1, v.cols())));
               }));
}

inline Var mean_all(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    const double n = static_cast<double>(a.val().size());
    Mat s(1, 1);
    s(0, 0) = a.val().mean();
    return Var(&t, t.push(std::move(s), [ia, n](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   tp.accumulate(ia, Mat(Mat::Constant(v.rows(), v.cols(), g(0, 0) / n)));
               }));
}

inline Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
    if (begin < 0 || begin + count > a.cols()) throw contract_error("slice_cols: out of range");
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t,
               t.push(a.val().middleCols(begin, count), [ia, begin, count](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   Mat full = Mat::Zero(v.rows(), v.cols());
                   full.middleCols(begin, count) = g;
                   tp.accumulate(ia, full);
               }));
}

inline Var concat_cols(Var a, Var b) {
    if (a.rows() != b.rows()) throw contract_error("concat_cols: row mismatch");
    Tape& t = a.tape();
    int ia = a.id(), ib = b.id();
    Mat out(a.rows(), a.cols() + b.cols());
    out.leftCols(a.cols()) = a.val();
    out.rightCols(b.cols()) = b.val();
    Eigen::Index ca = a.cols(), cb = b.cols();
    return Var(&t, t.push(std::move(out), [ia, ib, ca, cb](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, Mat(g.leftCols(ca)));
                   tp.accumulate(ib, Mat(g.rightCols(cb)));
               }));
}

inline Var transpose(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    return Var(&t, t.push(a.val().transpose(), [ia](Tape& tp, const Mat& g) {
                   tp.accumulate(ia, g.transpose());
               }));
}

/// Matrix inverse. d(A^-1) pulls back as -A^-T G A^-T.
inline Var inverse(Var a) {
    if (a.rows() != a.cols()) throw contract_error("inverse: matrix not square");
    Tape& t = a.tape();
    int ia = a.id();
    int out = t.push(a.val().inverse(), nullptr);
    t.node(out).backward = [ia, out](Tape& tp, const Mat& g) {
        const Mat& inv = tp.value(out);
        tp.accumulate(ia, Mat(-inv.transpose() * g * inv.transpose()));
    };
    return Var(&t, out);
}

/// Frobenius norm as a 1x1 scalar.
inline Var frobenius(Var a) {
    Tape& t = a.tape();
    int ia = a.id();
    Mat s(1, 1);
    s(0, 0) = a.val().norm();
    return Var(&t, t.push(std::move(s), [ia](Tape& tp, const Mat& g) {
                   const Mat& v = tp.value(ia);
                   double norm = v.norm();
                   if (norm == 0.0) return;  // subgradient 0 at the origin
                   tp.accumulate(ia, Mat(g(0, 0) / norm * v));
               }));
}

inline Var affine(Var x, Var w, Var b) { return add_rowvec(matmul(x, w), b); }

}  // namespace ccd::ad
