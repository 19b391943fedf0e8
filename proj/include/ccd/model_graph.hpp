#pragma once

#include "ccd/losses.hpp"
#include "ccd/vae.hpp"

#include <optional>

namespace ccd {

/// Tape handles for every model parameter, in store order. Training makes
/// them leaves (gradients wanted); evaluation reuses the same builders.
struct GraphParams {
    ad::Tape* tape = nullptr;
    const ParamStore* store = nullptr;
    std::vector<ad::Var> vars;

    static GraphParams leaves(ad::Tape& t, const ParamStore& p) {
        GraphParams g;
        g.tape = &t;
        g.store = &p;
        g.vars.reserve(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) g.vars.push_back(ad::leaf(t, p.value(i)));
        return g;
    }

    ad::Var operator()(const std::string& name) const { return vars[store->index_of(name)]; }

    Mat grad_of(const std::string& name) const {
        const ad::Var& v = vars[store->index_of(name)];
        return v.grad().size() ? v.grad() : Mat::Zero(v.rows(), v.cols());
    }
};

struct EncoderOut {
    ad::Var mu;
    ad::Var logvar;
    ad::Var mu_eps;
};

namespace graph {

inline ad::Var activation(const ArchSpec& arch, ad::Var x) {
    return arch.kind == ArchKind::FullyConnected ? ad::elu(x) : ad::relu(x);
}

/// Encoder trunk + heads. `x` is (B, C*H*W) channel-major; `u` is present
/// only for the u-conditioned variants.
inline EncoderOut encoder(const ModelState& s, const GraphParams& p, ad::Var x,
                          std::optional<ad::Var> u) {
    const bool wants_u = variant_uses_u(s.variant);
    if (wants_u && !u) throw contract_error("encoder: variant requires u");
    ad::Var h = x;
    if (s.arch.kind == ArchKind::FullyConnected) {
        if (wants_u) h = ad::concat_cols(h, *u);
        for (std::size_t i = 1; i <= s.arch.enc_widths.size(); ++i) {
            const std::string base = "enc.fc" + std::to_string(i);
            h = ad::elu(ad::affine(h, p(base + ".w"), p(base + ".b")));
        }
    } else {
        int side = s.arch.image_h;
        for (std::size_t i = 1; i < s.arch.enc_channels.size(); ++i) {
            ad::ConvSpec cs{s.arch.enc_channels[i - 1], side,           side,
                            s.arch.enc_channels[i],     s.arch.conv_kernel,
                            s.arch.conv_kernel,         s.arch.conv_stride,
                            s.arch.conv_pad};
            const std::string base = "enc.conv" + std::to_string(i);
            h = ad::relu(ad::conv2d(h, p(base + ".w"), p(base + ".b"), cs));
            side = cs.conv_out_h();
        }
        if (wants_u) h = ad::concat_cols(h, *u);
    }
    EncoderOut out;
    out.mu = ad::affine(h, p("enc.mu.w"), p("enc.mu.b"));
    out.logvar = ad::affine(h, p("enc.logvar.w"), p("enc.logvar.b"));
    out.mu_eps = ad::affine(h, p("enc.eps.w"), p("enc.eps.b"));
    return out;
}

/// Decoder to pixel space, logistic-squashed to [0,1].
inline ad::Var decoder(const ModelState& s, const GraphParams& p, ad::Var z) {
    if (s.arch.kind == ArchKind::FullyConnected) {
        ad::Var h = z;
        for (std::size_t i = 1; i <= s.arch.dec_widths.size(); ++i) {
            const std::string base = "dec.fc" + std::to_string(i);
            h = ad::elu(ad::affine(h, p(base + ".w"), p(base + ".b")));
        }
        return ad::sigmoid(ad::affine(h, p("dec.out.w"), p("dec.out.b")));
    }
    ad::Var h = ad::relu(ad::affine(z, p("dec.lin.w"), p("dec.lin.b")));
    int side = s.arch.dec_base_h;
    int prev_c = s.arch.dec_channels[0];
    for (std::size_t i = 0; i < s.arch.dec_channels.size(); ++i) {
        const int out_c = s.arch.dec_channels[i];
        ad::ConvSpec cs{prev_c,
                        side,
                        side,
                        out_c,
                        s.arch.conv_kernel,
                        s.arch.conv_kernel,
                        s.arch.conv_stride,
                        s.arch.conv_pad};
        const std::string base = "dec.ct" + std::to_string(i + 1);
        h = ad::conv_transpose2d(h, p(base + ".w"), p(base + ".b"), cs);
        side = cs.deconv_out_h();
        prev_c = out_c;
        if (i + 1 < s.arch.dec_channels.size()) h = ad::relu(h);
    }
    return ad::sigmoid(h);
}

/// Concept layer on the tape: c_i = h_i(sum_j A_ji z_j) + eps_i.
inline ad::Var concept_layer(const ModelState& s, const GraphParams& p, ad::Var z_slice,
                             std::optional<ad::Var> eps) {
    ad::Var t = ad::matmul(z_slice, p("scm.A"));
    ad::Var c = t;
    if (s.scm_kind == ScmKind::Tanh)
        c = ad::tanh_op(
            ad::add_rowvec(ad::cmul_rowvec(t, p("scm.eta_scale")), p("scm.eta_bias")));
    if (eps) c = ad::add(c, *eps);
    return c;
}

inline ad::Var predictor_head(const GraphParams& p, ad::Var c) {
    return ad::sigmoid(ad::add_rowvec(ad::matmul(c, p("pred.W")), p("pred.w0")));
}

}  // namespace graph

struct Batch {
    Mat x;                  // (B, C*H*W) channel-major
    Mat u;                  // (B, m)
    std::vector<int> y;     // binary labels (empty when no task loss)
};

/// Effective per-step loss weights after variant gating and schedules.
struct EffectiveWeights {
    LossWeights w;
    bool use_supervision = false;    // l_u slot active (alignment for sup_*)
    bool use_classifier = false;
    bool use_diversity = false;
};

struct ForwardGraph {
    EncoderOut enc;
    ad::Var z;
    ad::Var xhat;
    std::optional<ad::Var> concepts;
    std::optional<ad::Var> probability;
    ad::Var total;
    LossBreakdown breakdown;
};

/// Assembles the full training objective for one batch. All stochastic
/// draws happen here in a fixed order: posterior noise, zeta, xi, eps.
inline ForwardGraph build_training_graph(ad::Tape& tape, const ModelState& s,
                                         const GraphParams& p, const Batch& batch,
                                         const EffectiveWeights& ew, Rng& rng) {
    const auto B = batch.x.rows();
    const auto& l = s.layout;
    ad::Var x = ad::constant(tape, batch.x);
    std::optional<ad::Var> u;
    if (variant_uses_u(s.variant)) u = ad::constant(tape, batch.u);

    ForwardGraph g;
    g.enc = graph::encoder(s, p, x, u);

    // z = mu + std * eta + zeta * eta2
    Mat eta = rng.gaussian_matrix(B, l.z_dim);
    ad::Var std_ = ad::exp_op(ad::scale(g.enc.logvar, 0.5));
    g.z = ad::add(g.enc.mu, ad::cmul_const(std_, eta));
    const double zeta = s.noise.effective_zeta();
    if (zeta > 0.0) g.z = ad::add_const(g.z, Mat(zeta * rng.gaussian_matrix(B, l.z_dim)));

    // decoder + xi noise inside the reconstruction target
    g.xhat = graph::decoder(s, p, g.z);
    ad::Var x_for_loss = g.xhat;
    const double xi = s.noise.effective_xi();
    if (xi > 0.0)
        x_for_loss = ad::clamp(
            ad::add_const(g.xhat, Mat(xi * rng.gaussian_matrix(B, batch.x.cols()))), 0.0, 1.0);
    ad::Var recon = graph::recon_loss(x_for_loss, batch.x);

    // prior on z: conditional mean on the supervised slots for the full
    // model, standard normal otherwise
    ad::Var prior_mu = ad::constant(tape, Mat::Zero(B, l.z_dim));
    if (s.variant == Variant::Ours) {
        ad::Var left = ad::affine(*u, p("prior.P"), p("prior.b"));
        prior_mu = l.free_dims() > 0
                       ? ad::concat_cols(left, ad::constant(tape, Mat::Zero(B, l.free_dims())))
                       : left;
    }
    ad::Var kl_eps = graph::kl_eps_loss(g.enc.mu_eps, s.noise.eps_std);
    ad::Var kl_zc = graph::kl_zc_loss(g.enc.mu, g.enc.logvar, prior_mu);

    std::optional<ad::Var> l_u, l_clf, l_div;
    ad::Var z_slice = ad::slice_cols(g.z, 0, l.m);
    if (variant_trains_scm(s.variant)) {
        // eps reparameterized from the encoder's head
        ad::Var eps =
            ad::add_const(g.enc.mu_eps, Mat(s.noise.eps_std * rng.gaussian_matrix(B, l.n)));
        g.concepts = graph::concept_layer(s, p, z_slice, eps);
        g.probability = graph::predictor_head(p, *g.concepts);
        if (ew.use_classifier) l_clf = graph::classification_loss(*g.probability, batch.y);
        if (ew.use_supervision)
            l_u = graph::supervision_loss(p("scm.A"), *g.concepts, z_slice, batch.u,
                                          s.u_product);
        if (ew.use_diversity) l_div = graph::diversity_loss(p("scm.A"));
    } else if (ew.use_supervision) {
        // supervised baselines: direct alignment of the causal slots to u
        ad::Var mu_slice = ad::slice_cols(g.enc.mu, 0, l.m);
        l_u = ad::batch_mean_rowsum(ad::square(ad::add_const(mu_slice, Mat(-batch.u))));
    }

    g.total = graph::weighted_total(recon, kl_eps, kl_zc, l_u, l_clf, l_div, ew.w);

    g.breakdown.recon = recon.scalar();
    g.breakdown.kl_eps = kl_eps.scalar();
    g.breakdown.kl_zc = kl_zc.scalar();
    g.breakdown.l_u = l_u ? l_u->scalar() : 0.0;
    g.breakdown.l_clf = l_clf ? l_clf->scalar() : 0.0;
    g.breakdown.l_diversity = l_div ? l_div->scalar() : 0.0;
    g.breakdown.total = g.total.scalar();
    return g;
}

struct EncodeResult {
    Mat z;
    Mat mu;
    Mat logvar;
    Mat mu_eps;
};

/// Forward encode outside training. Stochastic mode draws the posterior
/// sample plus zeta noise; deterministic mode returns the posterior mean
/// (zeta and the reparameterized draw both vanish in that limit).
inline EncodeResult encode(const ModelState& s, const Mat& x, const Mat* u_opt, Rng& rng,
                           bool stochastic = true) {
    if (x.cols() != s.arch.pixels()) throw contract_error("encode: input width mismatch");
    ad::Tape tape;
    GraphParams p = GraphParams::leaves(tape, s.params);
    ad::Var xv = ad::constant(tape, x);
    std::optional<ad::Var> uv;
    if (variant_uses_u(s.variant)) {
        if (!u_opt) throw contract_error("encode: variant requires u");
        if (u_opt->rows() != x.rows() || u_opt->cols() != s.layout.m)
            throw contract_error("encode: u shape mismatch");
        uv = ad::constant(tape, *u_opt);
    }
    EncoderOut out = graph::encoder(s, p, xv, uv);
    EncodeResult r;
    r.mu = out.mu.val();
    r.logvar = out.logvar.val();
    r.mu_eps = out.mu_eps.val();
    if (stochastic) {
        Mat eta = rng.gaussian_matrix(x.rows(), s.layout.z_dim);
        r.z = r.mu + ((0.5 * r.logvar).array().exp() * eta.array()).matrix();
        const double zeta = s.noise.effective_zeta();
        if (zeta > 0.0) r.z += zeta * rng.gaussian_matrix(x.rows(), s.layout.z_dim);
    } else {
        r.z = r.mu;
    }
    return r;
}

/// Decode latents to images; stochastic mode adds xi noise then clamps.
inline Mat decode(const ModelState& s, const Mat& z, Rng& rng, bool stochastic = true) {
    if (z.cols() != s.layout.z_dim) throw contract_error("decode: latent width mismatch");
    ad::Tape tape;
    GraphParams p = GraphParams::leaves(tape, s.params);
    Mat xhat = graph::decoder(s, p, ad::constant(tape, z)).val();
    const double xi = s.noise.effective_xi();
    if (stochastic && xi > 0.0) {
        xhat += xi * rng.gaussian_matrix(z.rows(), xhat.cols());
        xhat = xhat.cwiseMax(0.0).cwiseMin(1.0);
    }
    return xhat;
}

}  // namespace ccd
