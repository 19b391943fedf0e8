#pragma once

// Central finite-difference oracle used to validate analytic gradients.
// Kept independent of the tape internals: it only re-runs the scalar
// forward function with perturbed inputs.

#include "ccd/common.hpp"

#include <functional>
#include <vector>

namespace ccdtest {

using ccd::Mat;

struct GradCheckResult {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    Eigen::Index worst_param = -1;
    Eigen::Index worst_entry = -1;
};

/// f: evaluates the scalar objective from the current parameter set.
/// grads: analytic gradients already computed at `params`.
inline GradCheckResult gradcheck(const std::function<double(const std::vector<Mat>&)>& f,
                                 std::vector<Mat> params, const std::vector<Mat>& grads,
                                 double h = 1e-5) {
    GradCheckResult res;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (Eigen::Index i = 0; i < params[p].size(); ++i) {
            const double saved = params[p](i);
            params[p](i) = saved + h;
            const double up = f(params);
            params[p](i) = saved - h;
            const double dn = f(params);
            params[p](i) = saved;
            const double numeric = (up - dn) / (2.0 * h);
            const double analytic = grads[p].size() ? grads[p](i) : 0.0;
            const double abs_err = std::abs(numeric - analytic);
            const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            const double rel = abs_err / denom;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = static_cast<Eigen::Index>(p);
                res.worst_entry = i;
            }
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
        }
    }
    return res;
}

/// Pass when the relative error is small; tiny gradients are compared
/// absolutely (finite differences bottom out near 1e-10 at h=1e-5).
inline bool grad_ok(const GradCheckResult& r, double rel_tol = 1e-4, double abs_floor = 1e-7) {
    return r.max_rel_err < rel_tol || r.max_abs_err < abs_floor;
}

}  // namespace ccdtest
