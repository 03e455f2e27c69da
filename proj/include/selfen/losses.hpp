#pragma once

// Training losses. Networks are passed as callables so that tests can
// substitute closed-form doubles for F_E / F_D.

#include <functional>

#include "selfen/pixel_ops.hpp"
#include "selfen/tensor.hpp"

namespace selfen {

template <typename T>
using MapFn = std::function<BasicTensor<T>(const BasicTensor<T>&)>;
template <typename T>
using DenoiseFn = std::function<BasicTensor<T>(const BasicTensor<T>&, const BasicTensor<T>&)>;

struct LossWeights {
    double c1 = 1e-2;
    double c2 = 1e-2;
    double c3 = 1e-1;
    double c4 = 1e-1;
    double alpha = kDefaultAlpha;
    double delta = kDefaultDelta;
    double eps_w = kDefaultWlsEps;
    bool use_ss = true;
    bool use_sc = true;
    bool use_wsc = true;
    bool use_g = true;
    bool use_f = true;
    bool use_dsc = true;
    // Stop gradients through eta when forming I^eta for the sufficiency term.
    bool detach_eta = true;

    // Throws ConfigError on non-positive weights or alpha outside (0, 1).
    void validate() const;
};

// mse(fe(I), alpha * fe(I^alpha))
template <typename T>
BasicTensor<T> loss_ss(const MapFn<T>& fe, const BasicTensor<T>& img, T alpha);
// Same, reusing an already computed fe(I).
template <typename T>
BasicTensor<T> loss_ss_with(const MapFn<T>& fe, const BasicTensor<T>& eta_img, const BasicTensor<T>& img, T alpha);

// mse(fe(I^fe(I)), 1)
template <typename T>
BasicTensor<T> loss_sc(const MapFn<T>& fe, const BasicTensor<T>& img, bool detach_eta = true);
template <typename T>
BasicTensor<T> loss_sc_with(const MapFn<T>& fe, const BasicTensor<T>& eta_img, const BasicTensor<T>& img,
                            bool detach_eta = true);

// mse(fe(W), 1)
template <typename T>
BasicTensor<T> loss_wsc(const MapFn<T>& fe, const BasicTensor<T>& welllit);

// Weighted squared gradients of the denoised image, weights from its
// log-luminance; averaged over pixels and colour channels.
template <typename T>
BasicTensor<T> loss_g(const BasicTensor<T>& denoised, T delta = T(kDefaultDelta), T eps_w = T(kDefaultWlsEps));
// The same sum with the weights supplied by the caller.
template <typename T>
BasicTensor<T> loss_g_weighted(const BasicTensor<T>& denoised, const WlsWeights<T>& weights);

template <typename T>
BasicTensor<T> loss_f(const BasicTensor<T>& denoised, const BasicTensor<T>& input);
template <typename T>
BasicTensor<T> loss_dsc(const BasicTensor<T>& welllit_denoised, const BasicTensor<T>& welllit);

template <typename T>
struct ObjectiveTerms {
    BasicTensor<T> total;
    // Unweighted term values; 0 for disabled terms.
    double ss = 0, sc = 0, wsc = 0;
    double f = 0, g = 0, dsc = 0;
};

// Plain arithmetic over already evaluated terms.
double enhance_weighted_sum(double ss, double sc, double wsc, const LossWeights& w);
double denoise_weighted_sum(double f, double g, double dsc, const LossWeights& w);

// L_SS(I) + c1 L_SC(I) + c2 L_WSC(W)
template <typename T>
ObjectiveTerms<T> enhance_objective(const MapFn<T>& fe, const BasicTensor<T>& lowlight,
                                    const BasicTensor<T>& welllit, const LossWeights& w);

// c4 (L_F + c3 L_G) on the low-light batch + L_DSC on the well-lit batch.
// The maps come from `frozen_fe` without history. Throws ConfigError if
// either callable is empty.
template <typename T>
ObjectiveTerms<T> denoise_objective(const DenoiseFn<T>& fd, const MapFn<T>& frozen_fe,
                                    const BasicTensor<T>& lowlight, const BasicTensor<T>& welllit,
                                    const LossWeights& w);

}  // namespace selfen
