#include "selfen/losses.hpp"

#include "selfen/error.hpp"
#include "selfen/ops.hpp"

namespace selfen {

void LossWeights::validate() const {
    if (!(c1 > 0 && c2 > 0 && c3 > 0 && c4 > 0)) throw ConfigError("loss weights c1..c4 must be positive");
    if (!(alpha > 0 && alpha < 1)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(delta > 0)) throw ConfigError("delta must be positive");
    if (!(eps_w > 0)) throw ConfigError("eps_w must be positive");
}

template <typename T>
BasicTensor<T> loss_ss_with(const MapFn<T>& fe, const BasicTensor<T>& eta_img, const BasicTensor<T>& img, T alpha) {
    const auto eta_alpha = fe(controlled_transform(img, alpha));
    return mse(eta_img, scale(eta_alpha, alpha));
}

template <typename T>
BasicTensor<T> loss_ss(const MapFn<T>& fe, const BasicTensor<T>& img, T alpha) {
    return loss_ss_with(fe, fe(img), img, alpha);
}

template <typename T>
BasicTensor<T> loss_sc_with(const MapFn<T>& fe, const BasicTensor<T>& eta_img, const BasicTensor<T>& img,
                            bool detach_eta) {
    const auto out = fe(apply_map(img, eta_img, detach_eta));
    return mse(out, ones_like(out));
}

template <typename T>
BasicTensor<T> loss_sc(const MapFn<T>& fe, const BasicTensor<T>& img, bool detach_eta) {
    return loss_sc_with(fe, fe(img), img, detach_eta);
}

template <typename T>
BasicTensor<T> loss_wsc(const MapFn<T>& fe, const BasicTensor<T>& welllit) {
    const auto out = fe(welllit);
    return mse(out, ones_like(out));
}

template <typename T>
BasicTensor<T> loss_g(const BasicTensor<T>& denoised, T delta, T eps_w) {
    return loss_g_weighted(denoised, wls_weights(log_luminance(denoised), delta, eps_w));
}

template <typename T>
BasicTensor<T> loss_g_weighted(const BasicTensor<T>& denoised, const WlsWeights<T>& w) {
    const auto g = spatial_gradients(denoised);
    const auto ex = mul(mul(g.gx, g.gx), w.wx);
    const auto ey = mul(mul(g.gy, g.gy), w.wy);
    return mean(add(ex, ey));
}

template <typename T>
BasicTensor<T> loss_f(const BasicTensor<T>& denoised, const BasicTensor<T>& input) {
    if (denoised.shape() != input.shape())
        throw ShapeError("loss_f: shapes " + shape_str(denoised.shape()) + " and " + shape_str(input.shape()));
    return mse(denoised, input);
}

template <typename T>
BasicTensor<T> loss_dsc(const BasicTensor<T>& welllit_denoised, const BasicTensor<T>& welllit) {
    if (welllit_denoised.shape() != welllit.shape())
        throw ShapeError("loss_dsc: shapes " + shape_str(welllit_denoised.shape()) + " and " +
                         shape_str(welllit.shape()));
    return mse(welllit_denoised, welllit);
}

double enhance_weighted_sum(double ss, double sc, double wsc, const LossWeights& w) {
    return ss + w.c1 * sc + w.c2 * wsc;
}

double denoise_weighted_sum(double f, double g, double dsc, const LossWeights& w) {
    return w.c4 * (f + w.c3 * g) + dsc;
}

namespace {

template <typename T>
void accumulate(BasicTensor<T>& total, const BasicTensor<T>& term, double weight) {
    auto scaled = weight == 1.0 ? term : scale(term, static_cast<T>(weight));
    total = total.defined() ? add(total, scaled) : scaled;
}

}  // namespace

template <typename T>
ObjectiveTerms<T> enhance_objective(const MapFn<T>& fe, const BasicTensor<T>& lowlight,
                                    const BasicTensor<T>& welllit, const LossWeights& w) {
    if (!fe) throw ConfigError("enhance_objective: no enhancement network");
    ObjectiveTerms<T> out;
    if (w.use_ss || w.use_sc) {
        const auto eta = fe(lowlight);
        if (w.use_ss) {
            const auto l = loss_ss_with(fe, eta, lowlight, static_cast<T>(w.alpha));
            out.ss = l.item();
            accumulate(out.total, l, 1.0);
        }
        if (w.use_sc) {
            const auto l = loss_sc_with(fe, eta, lowlight, w.detach_eta);
            out.sc = l.item();
            accumulate(out.total, l, w.c1);
        }
    }
    if (w.use_wsc) {
        const auto l = loss_wsc(fe, welllit);
        out.wsc = l.item();
        accumulate(out.total, l, w.c2);
    }
    if (!out.total.defined()) throw ConfigError("enhance_objective: every term is disabled");
    return out;
}

template <typename T>
ObjectiveTerms<T> denoise_objective(const DenoiseFn<T>& fd, const MapFn<T>& frozen_fe,
                                    const BasicTensor<T>& lowlight, const BasicTensor<T>& welllit,
                                    const LossWeights& w) {
    if (!frozen_fe) throw ConfigError("denoise_objective: a trained enhancement network is required");
    if (!fd) throw ConfigError("denoise_objective: no denoising network");
    ObjectiveTerms<T> out;
    auto frozen_map = [&](const BasicTensor<T>& img) {
        NoGradGuard guard;
        return stop_gradient(frozen_fe(img));
    };
    if (w.use_f || w.use_g) {
        const auto den = fd(lowlight, frozen_map(lowlight));
        BasicTensor<T> inner;
        if (w.use_f) {
            const auto l = loss_f(den, lowlight);
            out.f = l.item();
            accumulate(inner, l, 1.0);
        }
        if (w.use_g) {
            const auto l = loss_g(den, static_cast<T>(w.delta), static_cast<T>(w.eps_w));
            out.g = l.item();
            accumulate(inner, l, w.c3);
        }
        accumulate(out.total, inner, w.c4);
    }
    if (w.use_dsc) {
        const auto l = loss_dsc(fd(welllit, frozen_map(welllit)), welllit);
        out.dsc = l.item();
        accumulate(out.total, l, 1.0);
    }
    if (!out.total.defined()) throw ConfigError("denoise_objective: every term is disabled");
    return out;
}

#define SELFEN_INSTANTIATE(T)                                                                                   \
    template BasicTensor<T> loss_ss(const MapFn<T>&, const BasicTensor<T>&, T);                                 \
    template BasicTensor<T> loss_ss_with(const MapFn<T>&, const BasicTensor<T>&, const BasicTensor<T>&, T);     \
    template BasicTensor<T> loss_sc(const MapFn<T>&, const BasicTensor<T>&, bool);                              \
    template BasicTensor<T> loss_sc_with(const MapFn<T>&, const BasicTensor<T>&, const BasicTensor<T>&, bool);  \
    template BasicTensor<T> loss_wsc(const MapFn<T>&, const BasicTensor<T>&);                                   \
    template BasicTensor<T> loss_g(const BasicTensor<T>&, T, T);                                                \
    template BasicTensor<T> loss_g_weighted(const BasicTensor<T>&, const WlsWeights<T>&);                       \
    template BasicTensor<T> loss_f(const BasicTensor<T>&, const BasicTensor<T>&);                               \
    template BasicTensor<T> loss_dsc(const BasicTensor<T>&, const BasicTensor<T>&);                             \
    template ObjectiveTerms<T> enhance_objective(const MapFn<T>&, const BasicTensor<T>&, const BasicTensor<T>&, \
                                                 const LossWeights&);                                          \
    template ObjectiveTerms<T> denoise_objective(const DenoiseFn<T>&, const MapFn<T>&, const BasicTensor<T>&,   \
                                                 const BasicTensor<T>&, const LossWeights&);

SELFEN_INSTANTIATE(float)
SELFEN_INSTANTIATE(double)

#undef SELFEN_INSTANTIATE

}  // namespace selfen
