#pragma once

#include "ccd/vae.hpp"

namespace ccd {

/// Adam with bias correction. Moment tensors parallel the parameter store;
/// they serialize with the checkpoint so resume is exact.
class Adam {
public:
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void init(const ParamStore& params) {
        m_.clear();
        v_.clear();
        t_ = 0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
            v_.push_back(Mat::Zero(params.value(i).rows(), params.value(i).cols()));
        }
    }

    /// One update over all parameters; `update_mask[i]` false leaves both the
    /// parameter and its moments untouched (frozen parameters accumulate no
    /// state while frozen).
    void step(ParamStore& params, const std::vector<Mat>& grads,
              const std::vector<bool>& update_mask, double lr) {
        if (grads.size() != params.size() || update_mask.size() != params.size())
            throw contract_error("Adam::step: size mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (!update_mask[i]) continue;
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * grads[i];
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
            Mat mhat = m_[i] / bc1;
            Mat vhat = v_[i] / bc2;
            params.value(i) -=
                lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
        }
    }

    std::int64_t steps_taken() const { return t_; }
    std::size_t slots() const { return m_.size(); }
    Mat& moment1(std::size_t i) { return m_[i]; }
    Mat& moment2(std::size_t i) { return v_[i]; }
    const Mat& moment1(std::size_t i) const { return m_[i]; }
    const Mat& moment2(std::size_t i) const { return v_[i]; }
    void set_steps_taken(std::int64_t t) { t_ = t; }

private:
    std::int64_t t_ = 0;
    std::vector<Mat> m_, v_;
};

}  // namespace ccd
