#pragma once

#include "ccd/autodiff.hpp"
#include "ccd/common.hpp"

#include <optional>

namespace ccd {

struct LossWeights {
    double alpha = 0.5;
    double beta1 = 1.0;
    double beta2 = 0.6;
    double delta = 0.5;
    double gamma = 0.5;

    /// Published defaults per dataset.
    static LossWeights defaults_for(const std::string& dataset_name) {
        if (dataset_name == "shapes3d_like") return LossWeights{0.5, 0.8, 0.8, 0.8, 0.5};
        return LossWeights{0.5, 1.0, 0.6, 0.5, 0.5};
    }
};

struct LossBreakdown {
    double recon = 0.0;
    double kl_eps = 0.0;
    double kl_zc = 0.0;
    double l_u = 0.0;
    double l_clf = 0.0;
    double l_diversity = 0.0;
    double total = 0.0;
};

/// How the u-weighted consistency loss combines u with the back-mapped
/// concepts: elementwise product inside the squashing (default) or a
/// single inner product per sample.
enum class UProduct { Elementwise, Inner };

constexpr double kProbClamp = 1e-7;

// ---------------------------------------------------------------------------
// plain evaluation forms
// ---------------------------------------------------------------------------

struct ElboTerms {
    double recon = 0.0;
    double kl_eps = 0.0;
    double kl_zc = 0.0;
};

namespace detail {

inline void check_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) throw numeric_error(std::string(what) + ": non-finite values");
}

inline Mat sigmoid(const Mat& m) { return (1.0 / (1.0 + (-m.array()).exp())).matrix(); }

/// Moore-Penrose pseudo-inverse with condition diagnostics.
inline Mat pinv(const Mat& A, double* condition_out) {
    Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double smax = sv.size() ? sv(0) : 0.0;
    const double tol = std::max(A.rows(), A.cols()) * smax * 1e-15;
    Vec inv = sv;
    double smin_kept = smax;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) {
            inv(i) = 1.0 / sv(i);
            smin_kept = sv(i);
        } else {
            inv(i) = 0.0;
        }
    }
    if (condition_out) *condition_out = smin_kept > 0.0 ? smax / smin_kept : 0.0;
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace detail

/// Reconstruction negative log-likelihood (unit-variance Gaussian, constants
/// dropped): squared error summed over pixels, averaged over the batch.
/// Both KL terms are closed-form diagonal Gaussians.
inline ElboTerms elbo_terms(const Mat& mu, const Mat& logvar, const Mat& prior_mu,
                            const Mat& mu_eps, double eps_std, const Mat& x, const Mat& xhat) {
    detail::check_finite(mu, "elbo_terms: posterior mean");
    detail::check_finite(logvar, "elbo_terms: posterior logvar");
    detail::check_finite(mu_eps, "elbo_terms: eps head");
    if (x.rows() != xhat.rows() || x.cols() != xhat.cols())
        throw contract_error("elbo_terms: x / xhat shape mismatch");
    ElboTerms t;
    t.recon = (xhat - x).array().square().rowwise().sum().mean();
    const double c0 = 0.5 * (eps_std * eps_std - 1.0) - std::log(eps_std);
    t.kl_eps = (0.5 * mu_eps.array().square() + c0).rowwise().sum().mean();
    t.kl_zc = (0.5 * (logvar.array().exp() + (mu - prior_mu).array().square() - 1.0 -
                      logvar.array()))
                  .rowwise()
                  .sum()
                  .mean();
    return t;
}

struct SupervisionDiagnostics {
    double condition = 0.0;
    bool ill_conditioned = false;  // condition number above 1e6
};

/// || sigma(u o back) - sigma(u o z) ||^2 averaged over the batch, where
/// back maps concepts to factor space through the (pseudo-)inverse of the
/// factor->concept transform c = A^T z.
inline double supervision_loss(const Mat& A, const Mat& c, const Mat& z, const Mat& u,
                               UProduct mode = UProduct::Elementwise,
                               SupervisionDiagnostics* diag = nullptr) {
    if (c.rows() != z.rows() || z.rows() != u.rows())
        throw contract_error("supervision_loss: batch size mismatch");
    if (z.cols() != A.rows() || c.cols() != A.cols() || u.cols() != A.rows())
        throw contract_error("supervision_loss: factor/concept width mismatch");
    double condition = 0.0;
    Mat back = c * detail::pinv(A, &condition);  // (B, m)
    if (diag) {
        diag->condition = condition;
        diag->ill_conditioned = condition > 1e6;
    }
    if (mode == UProduct::Elementwise) {
        Mat d = detail::sigmoid(u.cwiseProduct(back)) - detail::sigmoid(u.cwiseProduct(z));
        return d.array().square().rowwise().sum().mean();
    }
    Mat sb = detail::sigmoid(u.cwiseProduct(back).rowwise().sum());
    Mat sz = detail::sigmoid(u.cwiseProduct(z).rowwise().sum());
    return (sb - sz).array().square().mean();
}

/// Mean binary cross-entropy with probabilities clamped away from {0,1}.
inline double classification_loss(const Vec& probability, const std::vector<int>& labels) {
    if (static_cast<std::size_t>(probability.size()) != labels.size())
        throw contract_error("classification_loss: length mismatch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probability.size(); ++i) {
        const double p =
            std::min(1.0 - kProbClamp, std::max(kProbClamp, probability(i)));
        acc += labels[static_cast<std::size_t>(i)] ? -std::log(p) : -std::log(1.0 - p);
    }
    return acc / static_cast<double>(probability.size());
}

inline double diversity_loss(const Mat& A) {
    detail::check_finite(A, "diversity_loss");
    return A.norm();
}

/// total = recon + b1*kl_eps + b2*kl_zc + alpha*l_u + delta*l_clf
///       + gamma*l_diversity (negated-ELBO convention).
inline LossBreakdown total_loss(const ElboTerms& elbo, double l_u, double l_clf,
                                double l_diversity, const LossWeights& w) {
    LossBreakdown b;
    b.recon = elbo.recon;
    b.kl_eps = elbo.kl_eps;
    b.kl_zc = elbo.kl_zc;
    b.l_u = l_u;
    b.l_clf = l_clf;
    b.l_diversity = l_diversity;
    b.total = b.recon + w.beta1 * b.kl_eps + w.beta2 * b.kl_zc + w.alpha * b.l_u +
              w.delta * b.l_clf + w.gamma * b.l_diversity;
    if (!std::isfinite(b.total)) throw numeric_error("total_loss: non-finite objective");
    return b;
}

// ---------------------------------------------------------------------------
// tape builders (training path); formulas mirror the plain forms above
// ---------------------------------------------------------------------------

namespace graph {

using ad::Var;

inline Var recon_loss(Var xhat, const Mat& x) {
    return ad::batch_mean_rowsum(ad::square(ad::add_const(xhat, Mat(-x))));
}

inline Var kl_eps_loss(Var mu_eps, double eps_std) {
    const double c0 = 0.5 * (eps_std * eps_std - 1.0) - std::log(eps_std);
    return ad::batch_mean_rowsum(ad::add_scalar(ad::scale(ad::square(mu_eps), 0.5), c0));
}

inline Var kl_zc_loss(Var mu, Var logvar, Var prior_mu) {
    Var var = ad::exp_op(logvar);
    Var sq = ad::square(ad::sub(mu, prior_mu));
    Var inner = ad::add_scalar(ad::sub(ad::add(var, sq), logvar), -1.0);
    return ad::scale(ad::batch_mean_rowsum(inner), 0.5);
}

/// Back-map c -> factor space. Square transforms invert exactly; a
/// fewer-concepts-than-factors configuration goes through the normal
/// equations form of the pseudo-inverse.
inline Var back_map(Var A, Var c) {
    if (A.rows() == A.cols()) return ad::matmul(c, ad::inverse(A));
    Var At = ad::transpose(A);
    Var gram_inv = ad::inverse(ad::matmul(At, A));
    return ad::matmul(c, ad::matmul(gram_inv, At));
}

inline Var supervision_loss(Var A, Var c, Var z, const Mat& u,
                            UProduct mode = UProduct::Elementwise) {
    Var back = back_map(A, c);
    if (mode == UProduct::Elementwise) {
        Var d = ad::sub(ad::sigmoid(ad::cmul_const(back, u)),
                        ad::sigmoid(ad::cmul_const(z, u)));
        return ad::batch_mean_rowsum(ad::square(d));
    }
    Var sb = ad::sigmoid(ad::row_sum(ad::cmul_const(back, u)));
    Var sz = ad::sigmoid(ad::row_sum(ad::cmul_const(z, u)));
    return ad::batch_mean_rowsum(ad::square(ad::sub(sb, sz)));
}

inline Var classification_loss(Var probability, const std::vector<int>& labels) {
    const auto n = static_cast<Eigen::Index>(labels.size());
    if (probability.rows() != n || probability.cols() != 1)
        throw contract_error("classification_loss: expected (N,1) probabilities");
    Mat y(n, 1), ym(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i, 0) = labels[static_cast<std::size_t>(i)];
        ym(i, 0) = 1.0 - y(i, 0);
    }
    Var p = ad::clamp(probability, kProbClamp, 1.0 - kProbClamp);
    Var pos = ad::cmul_const(ad::log_op(p), y);
    Var neg = ad::cmul_const(ad::log_op(ad::add_scalar(ad::scale(p, -1.0), 1.0)), ym);
    return ad::scale(ad::batch_mean_rowsum(ad::add(pos, neg)), -1.0);
}

inline Var diversity_loss(Var A) { return ad::frobenius(A); }

/// Weighted sum of whatever terms are active; inactive terms contribute
/// exactly zero and are skipped in the graph.
inline Var weighted_total(Var recon, std::optional<Var> kl_eps, std::optional<Var> kl_zc,
                          std::optional<Var> l_u, std::optional<Var> l_clf,
                          std::optional<Var> l_div, const LossWeights& w) {
    Var total = recon;
    if (kl_eps && w.beta1 != 0.0) total = ad::add(total, ad::scale(*kl_eps, w.beta1));
    if (kl_zc && w.beta2 != 0.0) total = ad::add(total, ad::scale(*kl_zc, w.beta2));
    if (l_u && w.alpha != 0.0) total = ad::add(total, ad::scale(*l_u, w.alpha));
    if (l_clf && w.delta != 0.0) total = ad::add(total, ad::scale(*l_clf, w.delta));
    if (l_div && w.gamma != 0.0) total = ad::add(total, ad::scale(*l_div, w.gamma));
    return total;
}

}  // namespace graph
}  // namespace ccd
