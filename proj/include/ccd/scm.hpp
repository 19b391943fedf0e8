#pragma once

#include "ccd/common.hpp"

#include <functional>

namespace ccd {

enum class ScmKind { Tanh, Linear };

/// Per-concept head configuration. Each head i reads the masked product
/// A_i o z reduced by summation and applies h_i; eta holds the per-head
/// affine parameters (scale, bias) for the tanh heads, ignored in linear
/// mode. Concept noise eps is drawn only in training mode.
struct ConceptHeads {
    ScmKind kind = ScmKind::Tanh;
    Vec eta_scale;  // length n
    Vec eta_bias;   // length n
    double eps_std = 0.05;

    static ConceptHeads identity_like(Eigen::Index n, ScmKind kind = ScmKind::Linear,
                                      double eps_std = 0.0) {
        ConceptHeads h;
        h.kind = kind;
        h.eta_scale = Vec::Ones(n);
        h.eta_bias = Vec::Zero(n);
        h.eps_std = eps_std;
        return h;
    }
};

/// c_i = h_i(sum_j A_ji z_j; eta_i) + eps_i for a batch of latent slices.
/// z: (B, m); A: (m, n); returns (B, n). When `eps_override` is supplied it
/// is added verbatim (the training path feeds the reparameterized draw from
/// the encoder's eps head); otherwise zero-mean noise of scale eps_std is
/// drawn when train_mode is set.
inline Mat concepts(const Mat& A, const ConceptHeads& heads, const Mat& z, Rng& rng,
                    bool train_mode, const Mat* eps_override = nullptr) {
    if (z.cols() != A.rows()) throw contract_error("concepts: z width must match A rows");
    const Eigen::Index n = A.cols();
    if (heads.eta_scale.size() != n || heads.eta_bias.size() != n)
        throw contract_error("concepts: head parameter length mismatch");
    Mat t = z * A;  // (B, n)
    Mat c;
    if (heads.kind == ScmKind::Tanh) {
        c = ((t.array().rowwise() * heads.eta_scale.transpose().array()).rowwise() +
             heads.eta_bias.transpose().array())
                .tanh()
                .matrix();
    } else {
        c = t;
    }
    if (eps_override) {
        if (eps_override->rows() != c.rows() || eps_override->cols() != c.cols())
            throw contract_error("concepts: eps override shape mismatch");
        c += *eps_override;
    } else if (train_mode && heads.eps_std > 0.0) {
        c += heads.eps_std * rng.gaussian_matrix(c.rows(), c.cols());
    }
    return c;
}

struct Predictor {
    Vec W;             // length n, initialized to ones
    double w0 = 0.0;

    static Predictor ones(Eigen::Index n) { return Predictor{Vec::Ones(n), 0.0}; }
};

struct Prediction {
    Vec probability;
    std::vector<int> label;
};

/// y = logistic(w0 + W . c) per row; label 1 iff probability >= 0.5.
inline Prediction predict(const Predictor& p, const Mat& c) {
    if (c.cols() != p.W.size()) throw contract_error("predict: concept width mismatch");
    Vec logits = (c * p.W).array() + p.w0;
    Prediction out;
    out.probability = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
    out.label.resize(static_cast<std::size_t>(logits.size()));
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        out.label[static_cast<std::size_t>(i)] = out.probability(i) >= 0.5 ? 1 : 0;
    return out;
}

/// Projection applied after each optimizer step while A is learnable:
/// divide by the largest absolute entry, then clamp to [-1, 1]. An all-zero
/// matrix is left untouched (reported through the return value so callers
/// can log the skip).
inline bool clip_A(Mat& A) {
    if (!A.allFinite()) throw numeric_error("clip_A: non-finite causal matrix");
    const double peak = A.cwiseAbs().maxCoeff();
    if (peak == 0.0) return false;
    A = (A / peak).cwiseMax(-1.0).cwiseMin(1.0);
    return true;
}

}  // namespace ccd
