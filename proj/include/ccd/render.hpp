#pragma once

#include "ccd/factors.hpp"

#include <cmath>

namespace ccd {

namespace detail {

struct Frame {
    double cx, cy;      // center, pixel units
    double half;        // half extent, pixels
    double cosa, sina;  // rotation
};

/// Maps a pixel center into the unit shape frame (y up, rotation removed).
inline void to_shape_frame(const Frame& fr, double px, double py, double& xs, double& ys) {
    const double dx = (px - fr.cx) / fr.half;
    const double dy = (fr.cy - py) / fr.half;
    xs = fr.cosa * dx + fr.sina * dy;
    ys = -fr.sina * dx + fr.cosa * dy;
}

inline bool inside_square(double x, double y) { return std::abs(x) <= 1.0 && std::abs(y) <= 1.0; }

inline bool inside_ellipse(double x, double y) {
    const double ey = y / 0.6;
    return x * x + ey * ey <= 1.0;
}

inline bool inside_heart(double x, double y) {
    // classic sextic heart, grown slightly to fill the unit box
    const double hx = x * 1.2;
    const double hy = y * 1.2 - 0.1;
    const double q = hx * hx + hy * hy - 1.0;
    return q * q * q - hx * hx * hy * hy * hy <= 0.0;
}

inline bool inside_wedge(double x, double y) {
    // triangle with apex (0,1) and base y = -0.8
    if (y < -0.8 || y > 1.0) return false;
    const double halfwidth = (1.0 - y) / 1.8;
    return std::abs(x) <= halfwidth;
}

inline bool inside_capsule(double x, double y) {
    if (std::abs(y) > 0.5) return false;
    if (std::abs(x) <= 0.5) return true;
    const double ex = std::abs(x) - 0.5;
    return ex * ex + y * y <= 0.25;
}

/// Hue in degrees -> RGB. Saturation/value fixed per use site.
inline void hsv_to_rgb(double h_deg, double s, double v, float& r, float& g, float& b) {
    const double h = h_deg / 60.0;
    const int i = static_cast<int>(std::floor(h)) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double rr = 0, gg = 0, bb = 0;
    switch (i) {
        case 0: rr = v; gg = t; bb = p; break;
        case 1: rr = q; gg = v; bb = p; break;
        case 2: rr = p; gg = v; bb = t; break;
        case 3: rr = p; gg = q; bb = v; break;
        case 4: rr = t; gg = p; bb = v; break;
        default: rr = v; gg = p; bb = q; break;
    }
    r = static_cast<float>(rr);
    g = static_cast<float>(gg);
    b = static_cast<float>(bb);
}

inline bool inside_shape(int shape_id, double x, double y) {
    switch (shape_id) {
        case 0: return inside_square(x, y);
        case 1: return inside_ellipse(x, y);
        case 2: return inside_heart(x, y);
        case 3: return inside_capsule(x, y);
        default: return false;
    }
}

inline Sample render_dsprites(const FactorSpace& space, const std::vector<std::size_t>& idx) {
    const double color = 1.0;  // single-intensity white; widened grids map below
    const auto& colorspec = space.factors[0];
    const double intensity =
        colorspec.cardinality() > 1 ? 0.5 + 0.5 * colorspec.normalized(idx[0]) : color;
    const int shape_id = static_cast<int>(space.factors[1].values[idx[1]]);
    const double scale_u = space.factors[2].normalized(idx[2]);
    const double angle = space.factors[3].values[idx[3]];
    const double pos_x = space.factors[4].normalized(idx[4]);
    const double pos_y = space.factors[5].normalized(idx[5]);

    const int h = space.image_h, w = space.image_w;
    Frame fr;
    fr.half = 6.0 + 8.0 * scale_u;
    fr.cx = static_cast<double>(w) * (0.25 + 0.5 * pos_x);
    fr.cy = static_cast<double>(h) * (0.25 + 0.5 * (1.0 - pos_y));  // posY=1 is top
    fr.cosa = std::cos(angle);
    fr.sina = std::sin(angle);

    Sample s;
    s.h = h;
    s.w = w;
    s.c = 1;
    s.image.assign(static_cast<std::size_t>(h) * w, 0.0f);
    for (int r = 0; r < h; ++r) {
        for (int cpx = 0; cpx < w; ++cpx) {
            double xs, ys;
            to_shape_frame(fr, cpx + 0.5, r + 0.5, xs, ys);
            if (inside_shape(shape_id, xs, ys))
                s.image[static_cast<std::size_t>(r) * w + cpx] = static_cast<float>(intensity);
        }
    }
    return s;
}

inline Sample render_shapes3d(const FactorSpace& space, const std::vector<std::size_t>& idx) {
    const double floor_u = space.factors[0].normalized(idx[0]);
    const double wall_u = space.factors[1].normalized(idx[1]);
    const double object_u = space.factors[2].normalized(idx[2]);
    const double scale_u = space.factors[3].normalized(idx[3]);
    const int shape_id = static_cast<int>(space.factors[4].values[idx[4]]);
    const std::size_t orient = idx[5];

    const int h = space.image_h, w = space.image_w;
    // hue range capped at 300 degrees so grid endpoints stay distinct
    float fr_r, fr_g, fr_b, wl_r, wl_g, wl_b, ob_r, ob_g, ob_b;
    hsv_to_rgb(floor_u * 300.0, 0.85, 0.75, fr_r, fr_g, fr_b);
    hsv_to_rgb(wall_u * 300.0, 0.75, 0.9, wl_r, wl_g, wl_b);
    hsv_to_rgb(object_u * 300.0, 0.95, 1.0, ob_r, ob_g, ob_b);

    Frame frm;
    frm.half = 8.0 + 6.0 * scale_u;
    frm.cx = w / 2.0;
    frm.cy = h * 0.47;
    const double angle = 0.35 * static_cast<double>(orient);
    frm.cosa = std::cos(angle);
    frm.sina = std::sin(angle);

    const int floor_top = (h * 2) / 3;

    Sample s;
    s.h = h;
    s.w = w;
    s.c = 3;
    s.image.assign(static_cast<std::size_t>(h) * w * 3, 0.0f);
    // shapes3d object ids reuse: 0 block(square), 1 ellipsoid, 2 wedge, 3 capsule
    for (int r = 0; r < h; ++r) {
        for (int cpx = 0; cpx < w; ++cpx) {
            float rr, gg, bb;
            if (r >= floor_top) {
                rr = fr_r;
                gg = fr_g;
                bb = fr_b;
            } else {
                rr = wl_r;
                gg = wl_g;
                bb = wl_b;
            }
            double xs, ys;
            to_shape_frame(frm, cpx + 0.5, r + 0.5, xs, ys);
            const bool inside = shape_id == 2 ? inside_wedge(xs, ys)
                                              : inside_shape(shape_id == 0   ? 0
                                                             : shape_id == 1 ? 1
                                                                             : 3,
                                                             xs, ys);
            if (inside) {
                rr = ob_r;
                gg = ob_g;
                bb = ob_b;
            }
            const std::size_t base = (static_cast<std::size_t>(r) * w + cpx) * 3;
            s.image[base] = rr;
            s.image[base + 1] = gg;
            s.image[base + 2] = bb;
        }
    }
    return s;
}

}  // namespace detail

/// Deterministically rasterizes the sample for one grid index vector.
inline Sample render(const FactorSpace& space, const std::vector<std::size_t>& factor_index) {
    if (factor_index.size() != space.m()) throw contract_error("render: index length mismatch");
    for (std::size_t f = 0; f < space.m(); ++f)
        if (factor_index[f] >= space.factors[f].cardinality())
            throw contract_error("render: index out of range for '" + space.factors[f].name +
                                 "'");
    Sample s = space.dataset_name == "dsprites_like"
                   ? detail::render_dsprites(space, factor_index)
                   : detail::render_shapes3d(space, factor_index);
    s.u = space.normalized_labels(factor_index);
    s.factor_index = factor_index;
    return s;
}

}  // namespace ccd
