#pragma once

#include "ccd/conv.hpp"
#include "ccd/scm.hpp"

#include <map>
#include <string>
#include <vector>

namespace ccd {

enum class Variant { BetaVae, NoisyBetaVae, Ours, SupBetaVae, SupNoisyBetaVae };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::BetaVae: return "beta_vae";
        case Variant::NoisyBetaVae: return "noisy_beta_vae";
        case Variant::Ours: return "ours";
        case Variant::SupBetaVae: return "sup_beta_vae";
        case Variant::SupNoisyBetaVae: return "sup_noisy_beta_vae";
    }
    return "?";
}

inline Variant variant_from_name(const std::string& s) {
    for (Variant v : {Variant::BetaVae, Variant::NoisyBetaVae, Variant::Ours,
                      Variant::SupBetaVae, Variant::SupNoisyBetaVae})
        if (s == variant_name(v)) return v;
    throw config_error("unknown variant: " + s);
}

/// The encoder consumes u only for the supervised variants and the full model.
inline bool variant_uses_u(Variant v) {
    return v == Variant::Ours || v == Variant::SupBetaVae || v == Variant::SupNoisyBetaVae;
}

/// Only the full model trains the causal layer and predictor.
inline bool variant_trains_scm(Variant v) { return v == Variant::Ours; }

/// Plain beta-VAE variants run with zeta = xi = 0.
inline bool variant_noisy(Variant v) {
    return v == Variant::NoisyBetaVae || v == Variant::Ours ||
           v == Variant::SupNoisyBetaVae;
}

struct NoiseConfig {
    double zeta_std = 0.05;
    double xi_std = 0.01;
    double eps_std = 0.05;
    Variant variant = Variant::Ours;

    double effective_zeta() const { return variant_noisy(variant) ? zeta_std : 0.0; }
    double effective_xi() const { return variant_noisy(variant) ? xi_std : 0.0; }
};

/// The first m latent coordinates are the supervised causal slots; the rest
/// are nuisance dimensions regularized only by the prior.
struct LatentLayout {
    int z_dim = 16;
    int m = 6;
    int n = 6;

    int free_dims() const { return z_dim - m; }

    void validate() const {
        if (m < 1 || z_dim < m) throw config_error("latent layout requires z_dim >= m >= 1");
        if (n < 1 || n > m) throw config_error("latent layout requires 1 <= n <= m");
    }
};

enum class ArchKind { FullyConnected, Conv };

struct ArchSpec {
    ArchKind kind = ArchKind::FullyConnected;
    int image_h = 64, image_w = 64, image_c = 1;
    std::vector<int> enc_widths{900, 600, 300};
    std::vector<int> dec_widths{300, 300, 1024};
    std::vector<int> enc_channels{3, 32, 64, 64, 64, 16};
    std::vector<int> dec_channels{64, 64, 3};
    int conv_kernel = 4, conv_stride = 2, conv_pad = 1;
    int dec_base_h = 8, dec_base_w = 8;

    int pixels() const { return image_h * image_w * image_c; }

    /// Spatial side after the conv encoder stack.
    int enc_final_side() const {
        int side = image_h;
        for (std::size_t i = 1; i < enc_channels.size(); ++i) side /= conv_stride;
        return side;
    }

    int enc_feature_dim() const {
        return enc_channels.back() * enc_final_side() * enc_final_side();
    }

    static ArchSpec dsprites_fc(int h = 64, int w = 64) {
        ArchSpec a;
        a.kind = ArchKind::FullyConnected;
        a.image_h = h;
        a.image_w = w;
        a.image_c = 1;
        return a;
    }

    static ArchSpec shapes3d_conv(int h = 64, int w = 64) {
        ArchSpec a;
        a.kind = ArchKind::Conv;
        a.image_h = h;
        a.image_w = w;
        a.image_c = 3;
        return a;
    }
};

/// Ordered, named parameter set. Order is fixed at construction and shared
/// with the optimizer state.
class ParamStore {
public:
    Mat& add(const std::string& name, Mat value) {
        if (lookup_.count(name)) throw contract_error("duplicate parameter: " + name);
        lookup_[name] = values_.size();
        names_.push_back(name);
        values_.push_back(std::move(value));
        return values_.back();
    }

    bool has(const std::string& name) const { return lookup_.count(name) > 0; }

    std::size_t index_of(const std::string& name) const {
        auto it = lookup_.find(name);
        if (it == lookup_.end()) throw contract_error("unknown parameter: " + name);
        return it->second;
    }

    Mat& get(const std::string& name) { return values_[index_of(name)]; }
    const Mat& get(const std::string& name) const { return values_[index_of(name)]; }

    std::size_t size() const { return values_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    Mat& value(std::size_t i) { return values_[i]; }
    const Mat& value(std::size_t i) const { return values_[i]; }

    std::size_t scalar_count() const {
        std::size_t acc = 0;
        for (const auto& v : values_) acc += static_cast<std::size_t>(v.size());
        return acc;
    }

private:
    std::vector<std::string> names_;
    std::vector<Mat> values_;
    std::map<std::string, std::size_t> lookup_;
};

struct ModelState {
    std::string dataset_name;
    Variant variant = Variant::Ours;
    ArchSpec arch;
    LatentLayout layout;
    NoiseConfig noise;
    ScmKind scm_kind = ScmKind::Tanh;
    UProduct u_product = UProduct::Elementwise;
    ParamStore params;

    /// Width of the first trainable layer's input. The fully connected
    /// encoder takes u concatenated to the flattened image; the conv
    /// encoder consumes raw planes and concatenates u at the head level.
    int encoder_input_dim() const {
        if (arch.kind == ArchKind::Conv) return arch.pixels();
        return arch.pixels() + (variant_uses_u(variant) ? layout.m : 0);
    }

    Mat& A() { return params.get("scm.A"); }
    const Mat& A() const { return params.get("scm.A"); }

    ConceptHeads heads() const {
        ConceptHeads h;
        h.kind = scm_kind;
        h.eta_scale = params.get("scm.eta_scale").row(0).transpose();
        h.eta_bias = params.get("scm.eta_bias").row(0).transpose();
        h.eps_std = noise.eps_std;
        return h;
    }

    Predictor predictor() const {
        return Predictor{params.get("pred.W").col(0), params.get("pred.w0")(0, 0)};
    }

    /// Names of the causal-layer and predictor parameters (the set frozen
    /// during the warm-up window). The census over these shapes is the
    /// structural bipartiteness check: the only factor-concept coupling is
    /// the m x n matrix A; there is no m x m or n x n parameter anywhere in
    /// the group.
    static const std::vector<std::string>& scm_param_names() {
        static const std::vector<std::string> names{"scm.A", "scm.eta_scale", "scm.eta_bias",
                                                    "pred.W", "pred.w0"};
        return names;
    }
};

namespace detail {

inline Mat glorot(Rng& rng, Eigen::Index fan_in, Eigen::Index fan_out) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    return rng.uniform_matrix(fan_in, fan_out, -bound, bound);
}

inline void add_linear(ParamStore& p, Rng& rng, const std::string& name, Eigen::Index in,
                       Eigen::Index out) {
    p.add(name + ".w", glorot(rng, in, out));
    p.add(name + ".b", Mat::Zero(1, out));
}

inline void add_conv(ParamStore& p, Rng& rng, const std::string& name, int in_c, int out_c,
                     int k) {
    const Eigen::Index fan_in = static_cast<Eigen::Index>(in_c) * k * k;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + out_c));
    p.add(name + ".w", rng.uniform_matrix(out_c, fan_in, -bound, bound));
    p.add(name + ".b", Mat::Zero(1, out_c));
}

inline void add_deconv(ParamStore& p, Rng& rng, const std::string& name, int in_c, int out_c,
                       int k) {
    const Eigen::Index cols = static_cast<Eigen::Index>(out_c) * k * k;
    const double bound = std::sqrt(6.0 / static_cast<double>(in_c * k * k + out_c));
    p.add(name + ".w", rng.uniform_matrix(in_c, cols, -bound, bound));
    p.add(name + ".b", Mat::Zero(1, out_c));
}

}  // namespace detail

/// Builds a freshly initialized model. Initialization draws come from `rng`
/// in a fixed order, so a seed pins the whole starting point.
inline ModelState init_model(const std::string& dataset_name, Variant variant,
                             const ArchSpec& arch, const LatentLayout& layout,
                             const NoiseConfig& noise, ScmKind scm_kind, Rng& rng) {
    layout.validate();
    ModelState s;
    s.dataset_name = dataset_name;
    s.variant = variant;
    s.arch = arch;
    s.layout = layout;
    s.noise = noise;
    s.noise.variant = variant;
    s.scm_kind = scm_kind;

    ParamStore& p = s.params;
    const int in_dim = s.encoder_input_dim();
    if (arch.kind == ArchKind::FullyConnected) {
        int prev = in_dim;
        for (std::size_t i = 0; i < arch.enc_widths.size(); ++i) {
            detail::add_linear(p, rng, "enc.fc" + std::to_string(i + 1), prev,
                               arch.enc_widths[i]);
            prev = arch.enc_widths[i];
        }
        detail::add_linear(p, rng, "enc.mu", prev, layout.z_dim);
        detail::add_linear(p, rng, "enc.logvar", prev, layout.z_dim);
        detail::add_linear(p, rng, "enc.eps", prev, layout.n);
        prev = layout.z_dim;
        for (std::size_t i = 0; i < arch.dec_widths.size(); ++i) {
            detail::add_linear(p, rng, "dec.fc" + std::to_string(i + 1), prev,
                               arch.dec_widths[i]);
            prev = arch.dec_widths[i];
        }
        detail::add_linear(p, rng, "dec.out", prev, arch.pixels());
    } else {
        for (std::size_t i = 1; i < arch.enc_channels.size(); ++i)
            detail::add_conv(p, rng, "enc.conv" + std::to_string(i), arch.enc_channels[i - 1],
                             arch.enc_channels[i], arch.conv_kernel);
        const int feat = arch.enc_feature_dim();
        const int head_in = feat + (variant_uses_u(variant) ? layout.m : 0);
        detail::add_linear(p, rng, "enc.mu", head_in, layout.z_dim);
        detail::add_linear(p, rng, "enc.logvar", head_in, layout.z_dim);
        detail::add_linear(p, rng, "enc.eps", head_in, layout.n);
        detail::add_linear(p, rng, "dec.lin", layout.z_dim,
                           arch.dec_channels[0] * arch.dec_base_h * arch.dec_base_w);
        int prev_c = arch.dec_channels[0];
        for (std::size_t i = 0; i < arch.dec_channels.size(); ++i) {
            const int out_c = arch.dec_channels[i];
            detail::add_deconv(p, rng, "dec.ct" + std::to_string(i + 1), prev_c, out_c,
                               arch.conv_kernel);
            prev_c = out_c;
        }
    }

    p.add("prior.P", Mat::Identity(layout.m, layout.m));
    p.add("prior.b", Mat::Zero(1, layout.m));

    p.add("scm.A", rng.uniform_matrix(layout.m, layout.n, -0.1, 0.1));
    p.add("scm.eta_scale", Mat::Ones(1, layout.n));
    p.add("scm.eta_bias", Mat::Zero(1, layout.n));
    p.add("pred.W", Mat::Ones(layout.n, 1));
    p.add("pred.w0", Mat::Zero(1, 1));
    return s;
}

/// Freezes A at the indicator pattern of the given relevant-factor rows on
/// concept column 0 (the ground-truth initialization mode).
inline void set_ground_truth_A(ModelState& state, const std::vector<int>& relevant_rows) {
    Mat& A = state.A();
    A.setZero();
    for (int r : relevant_rows) {
        if (r < 0 || r >= A.rows()) throw contract_error("ground truth row out of range");
        A(r, 0) = 1.0;
    }
}

/// Expected scalar parameter count from the declared layer plans; the census
/// test pins implementation to architecture.
inline std::size_t expected_parameter_count(const ModelState& s) {
    std::size_t acc = 0;
    auto lin = [&acc](std::size_t in, std::size_t out) { acc += in * out + out; };
    const auto& a = s.arch;
    const auto& l = s.layout;
    if (a.kind == ArchKind::FullyConnected) {
        std::size_t prev = static_cast<std::size_t>(s.encoder_input_dim());
        for (int w : a.enc_widths) {
            lin(prev, static_cast<std::size_t>(w));
            prev = static_cast<std::size_t>(w);
        }
        lin(prev, static_cast<std::size_t>(l.z_dim));
        lin(prev, static_cast<std::size_t>(l.z_dim));
        lin(prev, static_cast<std::size_t>(l.n));
        prev = static_cast<std::size_t>(l.z_dim);
        for (int w : a.dec_widths) {
            lin(prev, static_cast<std::size_t>(w));
            prev = static_cast<std::size_t>(w);
        }
        lin(prev, static_cast<std::size_t>(a.pixels()));
    } else {
        const auto k2 = static_cast<std::size_t>(a.conv_kernel * a.conv_kernel);
        for (std::size_t i = 1; i < a.enc_channels.size(); ++i)
            acc += static_cast<std::size_t>(a.enc_channels[i]) *
                       static_cast<std::size_t>(a.enc_channels[i - 1]) * k2 +
                   static_cast<std::size_t>(a.enc_channels[i]);
        const auto feat = static_cast<std::size_t>(a.enc_feature_dim()) +
                          (variant_uses_u(s.variant) ? static_cast<std::size_t>(l.m) : 0);
        lin(feat, static_cast<std::size_t>(l.z_dim));
        lin(feat, static_cast<std::size_t>(l.z_dim));
        lin(feat, static_cast<std::size_t>(l.n));
        lin(static_cast<std::size_t>(l.z_dim),
            static_cast<std::size_t>(a.dec_channels[0] * a.dec_base_h * a.dec_base_w));
        std::size_t prev_c = static_cast<std::size_t>(a.dec_channels[0]);
        for (int out_c : a.dec_channels) {
            acc += prev_c * static_cast<std::size_t>(out_c) * k2 +
                   static_cast<std::size_t>(out_c);
            prev_c = static_cast<std::size_t>(out_c);
        }
    }
    // prior affine + SCM + predictor
    acc += static_cast<std::size_t>(l.m) * l.m + l.m;
    acc += static_cast<std::size_t>(l.m) * l.n + 2 * static_cast<std::size_t>(l.n);
    acc += static_cast<std::size_t>(l.n) + 1;
    return acc;
}

}  // namespace ccd
