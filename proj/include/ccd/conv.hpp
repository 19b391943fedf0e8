#pragma once

#include "ccd/autodiff.hpp"

#include <vector>

namespace ccd::ad {

/// Geometry of one convolution stage. Batches are stored as one row per
/// sample, channel-major then row-major within each channel.
struct ConvSpec {
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0;
    int kh = 0, kw = 0;
    int stride = 1, pad = 0;

    int conv_out_h() const { return (in_h + 2 * pad - kh) / stride + 1; }
    int conv_out_w() const { return (in_w + 2 * pad - kw) / stride + 1; }
    int deconv_out_h() const { return (in_h - 1) * stride - 2 * pad + kh; }
    int deconv_out_w() const { return (in_w - 1) * stride - 2 * pad + kw; }
};

namespace detail {

/// Gathers k x k patches over a C x H x W volume (zero padding) into a
/// (C*kh*kw) x (oh*ow) matrix.
inline Mat im2col(const double* src, int c, int h, int w, int kh, int kw, int stride, int pad) {
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    Mat cols = Mat::Zero(static_cast<Eigen::Index>(c) * kh * kw,
                         static_cast<Eigen::Index>(oh) * ow);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
            Eigen::Index row = 0;
            for (int ch = 0; ch < c; ++ch) {
                const double* plane = src + static_cast<std::size_t>(ch) * h * w;
                for (int ky = 0; ky < kh; ++ky) {
                    const int y = oy * stride - pad + ky;
                    for (int kx = 0; kx < kw; ++kx, ++row) {
                        const int x = ox * stride - pad + kx;
                        if (y >= 0 && y < h && x >= 0 && x < w)
                            cols(row, col) = plane[static_cast<std::size_t>(y) * w + x];
                    }
                }
            }
        }
    }
    return cols;
}

/// Adjoint of im2col: scatter-adds patch columns back onto the volume.
inline void col2im(const Mat& cols, int c, int h, int w, int kh, int kw, int stride, int pad,
                   double* dst) {
    const int oh = (h + 2 * pad - kh) / stride + 1;
    const int ow = (w + 2 * pad - kw) / stride + 1;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const Eigen::Index col = static_cast<Eigen::Index>(oy) * ow + ox;
            Eigen::Index row = 0;
            for (int ch = 0; ch < c; ++ch) {
                double* plane = dst + static_cast<std::size_t>(ch) * h * w;
                for (int ky = 0; ky < kh; ++ky) {
                    const int y = oy * stride - pad + ky;
                    for (int kx = 0; kx < kw; ++kx, ++row) {
                        const int x = ox * stride - pad + kx;
                        if (y >= 0 && y < h && x >= 0 && x < w)
                            plane[static_cast<std::size_t>(y) * w + x] += cols(row, col);
                    }
                }
            }
        }
    }
}

inline std::vector<double> row_copy(const Mat& m, Eigen::Index r) {
    std::vector<double> buf(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) buf[static_cast<std::size_t>(j)] = m(r, j);
    return buf;
}

}  // namespace detail

/// 2-D convolution. x: (B, in_c*in_h*in_w); w: (out_c, in_c*kh*kw);
/// b: (1, out_c). Returns (B, out_c*oh*ow).
inline Var conv2d(Var x, Var w, Var b, const ConvSpec& cs) {
    const int oh = cs.conv_out_h(), ow = cs.conv_out_w();
    const Eigen::Index plane = static_cast<Eigen::Index>(oh) * ow;
    if (x.cols() != static_cast<Eigen::Index>(cs.in_c) * cs.in_h * cs.in_w)
        throw contract_error("conv2d: input width mismatch");
    if (w.rows() != cs.out_c || w.cols() != static_cast<Eigen::Index>(cs.in_c) * cs.kh * cs.kw)
        throw contract_error("conv2d: weight shape mismatch");

    Tape& t = x.tape();
    const int ix = x.id(), iw = w.id(), ib = b.id();
    const Eigen::Index batch = x.rows();
    Mat out(batch, static_cast<Eigen::Index>(cs.out_c) * plane);
    for (Eigen::Index s = 0; s < batch; ++s) {
        auto buf = detail::row_copy(x.val(), s);
        Mat cols = detail::im2col(buf.data(), cs.in_c, cs.in_h, cs.in_w, cs.kh, cs.kw, cs.stride,
                                  cs.pad);
        Mat res = w.val() * cols;  // out_c x (oh*ow)
        for (int ch = 0; ch < cs.out_c; ++ch)
            out.row(s).segment(ch * plane, plane) =
                res.row(ch).array() + b.val()(0, ch);
    }
    return Var(&t, t.push(std::move(out), [ix, iw, ib, cs, plane](Tape& tp, const Mat& g) {
                   const Mat& xv = tp.value(ix);
                   const Mat& wv = tp.value(iw);
                   const Eigen::Index batch = xv.rows();
                   Mat dx = Mat::Zero(xv.rows(), xv.cols());
                   Mat dw = Mat::Zero(wv.rows(), wv.cols());
                   Mat db = Mat::Zero(1, cs.out_c);
                   std::vector<double> dxbuf(static_cast<std::size_t>(xv.cols()));
                   for (Eigen::Index s = 0; s < batch; ++s) {
                       Mat gs(cs.out_c, plane);
                       for (int ch = 0; ch < cs.out_c; ++ch)
                           gs.row(ch) = g.row(s).segment(ch * plane, plane);
                       auto buf = detail::row_copy(xv, s);
                       Mat cols = detail::im2col(buf.data(), cs.in_c, cs.in_h, cs.in_w, cs.kh,
                                                 cs.kw, cs.stride, cs.pad);
                       dw.noalias() += gs * cols.transpose();
                       db += gs.rowwise().sum().transpose();
                       Mat dcols = wv.transpose() * gs;
                       std::fill(dxbuf.begin(), dxbuf.end(), 0.0);
                       detail::col2im(dcols, cs.in_c, cs.in_h, cs.in_w, cs.kh, cs.kw, cs.stride,
                                      cs.pad, dxbuf.data());
                       for (Eigen::Index j = 0; j < xv.cols(); ++j)
                           dx(s, j) = dxbuf[static_cast<std::size_t>(j)];
                   }
                   tp.accumulate(ix, dx);
                   tp.accumulate(iw, dw);
                   tp.accumulate(ib, db);
               }));
}

/// Transposed 2-D convolution (stride-s upsampling). x: (B, in_c*in_h*in_w);
/// w: (in_c, out_c*kh*kw); b: (1, out_c). Returns (B, out_c*OH*OW) with
/// OH = (in_h-1)*stride - 2*pad + kh.
inline Var conv_transpose2d(Var x, Var w, Var b, const ConvSpec& cs) {
    const int oh = cs.deconv_out_h(), ow = cs.deconv_out_w();
    const Eigen::Index in_plane = static_cast<Eigen::Index>(cs.in_h) * cs.in_w;
    const Eigen::Index out_plane = static_cast<Eigen::Index>(oh) * ow;
    if (x.cols() != static_cast<Eigen::Index>(cs.in_c) * in_plane)
        throw contract_error("conv_transpose2d: input width mismatch");
    if (w.rows() != cs.in_c || w.cols() != static_cast<Eigen::Index>(cs.out_c) * cs.kh * cs.kw)
        throw contract_error("conv_transpose2d: weight shape mismatch");

    Tape& t = x.tape();
    const int ix = x.id(), iw = w.id(), ib = b.id();
    const Eigen::Index batch = x.rows();
    Mat out = Mat::Zero(batch, static_cast<Eigen::Index>(cs.out_c) * out_plane);
    std::vector<double> obuf(static_cast<std::size_t>(cs.out_c) * out_plane);
    for (Eigen::Index s = 0; s < batch; ++s) {
        Mat xs(cs.in_c, in_plane);
        for (int ch = 0; ch < cs.in_c; ++ch)
            xs.row(ch) = x.val().row(s).segment(ch * in_plane, in_plane);
        Mat cols = w.val().transpose() * xs;  // (out_c*kh*kw) x (in_h*in_w)
        std::fill(obuf.begin(), obuf.end(), 0.0);
        detail::col2im(cols, cs.out_c, oh, ow, cs.kh, cs.kw, cs.stride, cs.pad, obuf.data());
        for (int ch = 0; ch < cs.out_c; ++ch)
            for (Eigen::Index j = 0; j < out_plane; ++j)
                out(s, ch * out_plane + j) = obuf[static_cast<std::size_t>(ch * out_plane + j)] +
                                             b.val()(0, ch);
    }
    return Var(&t, t.push(std::move(out), [ix, iw, ib, cs, oh, ow, in_plane, out_plane](
                                              Tape& tp, const Mat& g) {
                   const Mat& xv = tp.value(ix);
                   const Mat& wv = tp.value(iw);
                   const Eigen::Index batch = xv.rows();
                   Mat dx = Mat::Zero(xv.rows(), xv.cols());
                   Mat dw = Mat::Zero(wv.rows(), wv.cols());
                   Mat db = Mat::Zero(1, cs.out_c);
                   for (Eigen::Index s = 0; s < batch; ++s) {
                       auto gbuf = detail::row_copy(g, s);
                       Mat dcols = detail::im2col(gbuf.data(), cs.out_c, oh, ow, cs.kh, cs.kw,
                                                  cs.stride, cs.pad);
                       Mat xs(cs.in_c, in_plane);
                       for (int ch = 0; ch < cs.in_c; ++ch)
                           xs.row(ch) = xv.row(s).segment(ch * in_plane, in_plane);
                       dw.noalias() += xs * dcols.transpose();
                       Mat dxs = wv * dcols;  // in_c x (in_h*in_w)
                       for (int ch = 0; ch < cs.in_c; ++ch)
                           dx.row(s).segment(ch * in_plane, in_plane) = dxs.row(ch);
                       for (int ch = 0; ch < cs.out_c; ++ch)
                           db(0, ch) += g.row(s).segment(ch * out_plane, out_plane).sum();
                   }
                   tp.accumulate(ix, dx);
                   tp.accumulate(iw, dw);
                   tp.accumulate(ib, db);
               }));
}

}  // namespace ccd::ad
