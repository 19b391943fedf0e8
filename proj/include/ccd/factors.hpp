#pragma once

#include "ccd/common.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace ccd {

enum class FactorKind { Categorical, Continuous };

/// One generative factor: an ordered grid of raw values inside a declared
/// native range. Categorical grids hold category indices 0..K-1.
struct FactorSpec {
    std::string name;
    FactorKind kind = FactorKind::Continuous;
    std::vector<double> values;
    double lo = 0.0, hi = 1.0;
    std::vector<std::string> category_labels;  // categorical only, optional

    std::size_t cardinality() const { return values.size(); }

    /// Normalized label for grid position `idx`: min-max over the native
    /// range for continuous factors, idx/(K-1) for categorical (0 if K==1).
    double normalized(std::size_t idx) const {
        if (kind == FactorKind::Categorical) {
            const std::size_t k = values.size();
            return k <= 1 ? 0.0 : static_cast<double>(idx) / static_cast<double>(k - 1);
        }
        return hi == lo ? 0.0 : (values[idx] - lo) / (hi - lo);
    }

    void validate() const {
        if (values.empty()) throw config_error("factor '" + name + "': empty value grid");
        if (!std::is_sorted(values.begin(), values.end(),
                            [](double a, double b) { return a < b; }) ||
            std::adjacent_find(values.begin(), values.end()) != values.end())
            throw config_error("factor '" + name + "': values not strictly increasing");
        if (kind == FactorKind::Continuous)
            for (double v : values)
                if (v < lo || v > hi)
                    throw config_error("factor '" + name + "': value outside [lo, hi]");
    }
};

/// The ordered set of m mutually independent factors; the corpus is the full
/// Cartesian product of their grids, enumerated with the last factor fastest.
struct FactorSpace {
    std::string dataset_name;
    std::vector<FactorSpec> factors;
    int image_h = 64, image_w = 64, image_c = 1;

    std::size_t m() const { return factors.size(); }

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& f : factors) n *= f.cardinality();
        return n;
    }

    int factor_index_of(const std::string& name) const {
        for (std::size_t i = 0; i < factors.size(); ++i)
            if (factors[i].name == name) return static_cast<int>(i);
        throw config_error("unknown factor name: " + name);
    }

    std::vector<std::size_t> ordinal_to_index(std::size_t ordinal) const {
        std::vector<std::size_t> idx(factors.size());
        for (std::size_t f = factors.size(); f-- > 0;) {
            const std::size_t k = factors[f].cardinality();
            idx[f] = ordinal % k;
            ordinal /= k;
        }
        return idx;
    }

    std::size_t index_to_ordinal(const std::vector<std::size_t>& idx) const {
        if (idx.size() != factors.size()) throw contract_error("index vector length mismatch");
        std::size_t ordinal = 0;
        for (std::size_t f = 0; f < factors.size(); ++f) {
            if (idx[f] >= factors[f].cardinality())
                throw contract_error("factor index out of range for '" + factors[f].name + "'");
            ordinal = ordinal * factors[f].cardinality() + idx[f];
        }
        return ordinal;
    }

    Vec normalized_labels(const std::vector<std::size_t>& idx) const {
        Vec u(static_cast<Eigen::Index>(factors.size()));
        for (std::size_t f = 0; f < factors.size(); ++f)
            u(static_cast<Eigen::Index>(f)) = factors[f].normalized(idx[f]);
        return u;
    }
};

/// One rendered image with its labels. Image intensities are stored
/// HWC row-major in [0,1], matching the on-disk layout.
struct Sample {
    std::vector<float> image;
    int h = 0, w = 0, c = 0;
    Vec u;
    std::vector<std::size_t> factor_index;
};

enum class Resolution { Mini, FullGrid };

struct FactorSpaceOptions {
    // dSprites color grid; the source corpus has the single value "white".
    std::vector<double> dsprites_color_values = {1.0};
};

namespace detail {

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i)
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return v;
}

inline std::vector<double> indices(std::size_t k) {
    std::vector<double> v(k);
    for (std::size_t i = 0; i < k; ++i) v[i] = static_cast<double>(i);
    return v;
}

}  // namespace detail

/// Builds the six-factor spaces. `mini` keeps the Cartesian product small
/// enough for desk-scale training; `full-grid` widens the continuous grids.
/// The per-factor native ranges are identical across resolutions.
///
/// Grid-size note: the dSprites-like orientation grid is spaced 0.9 rad over
/// [0, 4.5] so that no two grid angles coincide modulo the symmetry group of
/// any rendered shape (pi/2 for squares, pi for ellipses); every orientation
/// step therefore changes at least one pixel.
inline FactorSpace build_factor_space(const std::string& dataset_name, Resolution res,
                                      const FactorSpaceOptions& opt = {}) {
    using detail::indices;
    using detail::linspace;
    FactorSpace s;
    s.dataset_name = dataset_name;
    const bool mini = res == Resolution::Mini;
    if (dataset_name == "dsprites_like") {
        s.image_c = 1;
        std::vector<double> colors = opt.dsprites_color_values;
        s.factors = {
            FactorSpec{"color", FactorKind::Categorical, indices(colors.size()), 0.0,
                       colors.size() > 1 ? static_cast<double>(colors.size() - 1) : 1.0,
                       {}},
            FactorSpec{"shape", FactorKind::Categorical, indices(3), 0.0, 2.0,
                       {"square", "ellipse", "heart"}},
            FactorSpec{"scale", FactorKind::Continuous, linspace(0.5, 1.0, mini ? 5 : 6), 0.5,
                       1.0, {}},
            FactorSpec{"orientation", FactorKind::Continuous, linspace(0.0, 4.5, mini ? 6 : 8),
                       0.0, 4.5, {}},
            FactorSpec{"posX", FactorKind::Continuous, linspace(0.0, 1.0, mini ? 6 : 8), 0.0,
                       1.0, {}},
            FactorSpec{"posY", FactorKind::Continuous, linspace(0.0, 1.0, mini ? 6 : 8), 0.0,
                       1.0, {}},
        };
    } else if (dataset_name == "shapes3d_like") {
        s.image_c = 3;
        const std::size_t hue_n = mini ? 4 : 5;
        s.factors = {
            FactorSpec{"floor_hue", FactorKind::Continuous, linspace(0.0, 1.0, hue_n), 0.0, 1.0,
                       {}},
            FactorSpec{"wall_hue", FactorKind::Continuous, linspace(0.0, 1.0, hue_n), 0.0, 1.0,
                       {}},
            FactorSpec{"object_hue", FactorKind::Continuous, linspace(0.0, 1.0, hue_n), 0.0, 1.0,
                       {}},
            FactorSpec{"scale", FactorKind::Continuous, linspace(0.75, 1.25, mini ? 4 : 5), 0.75,
                       1.25, {}},
            FactorSpec{"shape", FactorKind::Categorical, indices(4), 0.0, 3.0,
                       {"block", "ellipsoid", "wedge", "capsule"}},
            FactorSpec{"orientation", FactorKind::Categorical, indices(4), 0.0, 3.0,
                       {"az0", "az1", "az2", "az3"}},
        };
    } else {
        throw config_error("unknown dataset_name: " + dataset_name);
    }
    for (const auto& f : s.factors) f.validate();
    return s;
}

}  // namespace ccd
